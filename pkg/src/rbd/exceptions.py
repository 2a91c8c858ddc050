"""Exception hierarchy shared by every module of the package."""


class RbdError(Exception):
    """Base class for all errors raised by :mod:`rbd`."""


class DimensionMismatch(RbdError, ValueError):
    pass


class IndexOutOfRange(RbdError, IndexError):
    pass


class InvalidConfig(RbdError, ValueError):
    pass


class IncompatibleWeight(RbdError, ValueError):
    """The weight matrix does not match the number of rows of the data."""


class NotPositive(RbdError, ArithmeticError):
    """A squared weighted norm came out clearly negative.

    This only happens when the weight matrix is not positive definite;
    tiny negative values caused by roundoff are clamped to zero instead.
    """


class DegenerateInput(RbdError, ValueError):
    """No basis vector can be built from the data (e.g. the zero matrix)."""


class Breakdown(RbdError):
    """Gram-Schmidt left a vector shorter than the breakdown tolerance.

    Raised by :func:`rbd.core.mgs_project`; the greedy loop catches it and
    stops with the basis built so far.
    """

    def __init__(self, residual_norm):
        super().__init__(f"residual norm {residual_norm:.3e} below breakdown tolerance")
        self.residual_norm = residual_norm


class NoConvergence(RbdError, ArithmeticError):
    pass


class ParseError(RbdError, ValueError):
    """Malformed input file. ``line`` or ``offset`` locate the problem."""

    def __init__(self, message, path=None, line=None, offset=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.path = path
        self.line = line
        self.offset = offset


class UnsupportedFormat(RbdError, ValueError):
    pass


class IoError(RbdError, OSError):
    pass
