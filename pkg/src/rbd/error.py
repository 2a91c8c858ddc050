"""Weighted norms and the offline/online machinery for compression errors.

For a column ``v`` of the data and its approximation ``Y c`` the squared
error in the norm induced by an SPD weight ``A`` expands as ::

    ||v - Y c||_A^2 = v'Av - 2 c'(Y'Av) + c'(Y'AY)c

Everything that depends on the row count ``m`` (``v'Av``, ``Y'AX``,
``Y'AY``) is accumulated in an :class:`ErrorWorkspace` while the basis
grows, so each query afterwards costs ``O(d^2)`` regardless of ``m``.
With the identity weight the running squared residual of every column is
also kept, making one full scan ``O(n)`` per basis vector. Running values
are re-based on a direct computation once cancellation has eaten most of
their digits, which happens a bounded number of times per column.
"""

from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .exceptions import (
    DimensionMismatch,
    IncompatibleWeight,
    IndexOutOfRange,
    NotPositive,
)

# Negative squared norms down to -CLAMP_RTOL * scale are treated as roundoff.
CLAMP_RTOL = 1e-8
# A running residual below REFRESH_RTOL times its last exact value has lost
# about six digits to cancellation and is recomputed directly.
REFRESH_RTOL = 1e-6


class Identity:
    """Unit weight: the plain Euclidean norm."""

    tag = 0

    def check_dim(self, m):
        pass

    def apply(self, X):
        return X

    def __eq__(self, other):
        return isinstance(other, Identity)

    def __repr__(self):
        return "Identity()"


class Diagonal:
    """Diagonal weight given by a vector of strictly positive entries."""

    tag = 1

    def __init__(self, values):
        values = np.array(values, dtype=np.float64).ravel()
        if values.size == 0:
            raise ValueError("diagonal weight needs at least one entry")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise ValueError("diagonal weight entries must be finite and strictly positive")
        values.setflags(write=False)
        self.values = values

    def check_dim(self, m):
        if self.values.size != m:
            raise IncompatibleWeight(
                f"diagonal weight has {self.values.size} entries, data has {m} rows")

    def apply(self, X):
        if X.ndim == 1:
            return self.values * X
        return self.values[:, None] * X

    def __eq__(self, other):
        return isinstance(other, Diagonal) and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"Diagonal(<{self.values.size} values>)"


class SparseSpd:
    """General sparse symmetric weight, intended to be positive definite.

    Symmetry (pattern and values) is checked exactly on construction.
    Definiteness is not: a clearly negative squared norm later raises
    :class:`~rbd.exceptions.NotPositive`.
    """

    tag = 2

    def __init__(self, matrix):
        A = sp.csr_matrix(matrix, dtype=np.float64)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"weight matrix must be square, got {A.shape}")
        if (A != A.T).nnz:
            raise ValueError("weight matrix is not exactly symmetric")
        if not np.all(np.isfinite(A.data)):
            raise ValueError("weight matrix has non-finite entries")
        A.sort_indices()
        self.matrix = A

    @property
    def nnz(self):
        return self.matrix.nnz

    def check_dim(self, m):
        if self.matrix.shape[0] != m:
            raise IncompatibleWeight(
                f"weight matrix is {self.matrix.shape[0]}x{self.matrix.shape[0]}, data has {m} rows")

    def apply(self, X):
        return np.asarray(self.matrix @ X)

    def __eq__(self, other):
        return (isinstance(other, SparseSpd) and self.matrix.shape == other.matrix.shape
                and (self.matrix != other.matrix).nnz == 0)

    def __repr__(self):
        n = self.matrix.shape[0]
        return f"SparseSpd({n}x{n}, nnz={self.nnz})"


WeightSpec = Identity | Diagonal | SparseSpd


def clamp_sq(value, scale):
    """Clamp a squared norm that went slightly negative through cancellation."""
    if value >= 0:
        return value
    if value >= -CLAMP_RTOL * scale:
        return 0.0
    raise NotPositive(f"squared weighted norm {value:.3e} is negative (scale {scale:.3e}); "
                      "the weight is not positive definite")


def _clamp_array(values, scale):
    neg = values < 0
    if not neg.any():
        return values
    bad = values < -CLAMP_RTOL * scale
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        clamp_sq(float(values[j]), float(np.broadcast_to(scale, values.shape)[j]))
    values[neg] = 0.0
    return values


def a_norm_sq(v, A=None):
    """Squared weighted norm ``v'Av``.

    Parameters
    ----------
    v : array_like
        Vector of length ``m``.
    A : WeightSpec, optional
        Weight; the identity when omitted.

    Returns
    -------
    float
        ``v'Av``, with tiny negative roundoff clamped to zero.

    Raises
    ------
    NotPositive
        If ``v'Av < -1e-8 * ||v||^2``.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    A = Identity() if A is None else A
    A.check_dim(v.size)
    plain = float(v @ v)
    if isinstance(A, Identity):
        return plain
    return clamp_sq(float(v @ A.apply(v)), plain)


class ErrorWorkspace:
    """Precomputed quantities for fast error evaluation.

    Attributes
    ----------
    col_sq : ndarray, shape (n,)
        ``diag(X'AX)``.
    YAX : ndarray, shape (d, n)
        ``Y'AX`` for the current basis. Equals ``T`` for the identity weight.
    YAY : ndarray, shape (d, d)
        ``Y'AY``; exactly the identity matrix for the identity weight.
    residual_sq : ndarray, shape (n,) or None
        Running squared residuals (identity weight only).
    base_sq : ndarray, shape (n,) or None
        Last exactly computed value of each running residual; the running
        value is that minus the squares of the later rows of ``T``.
    d : int
        Number of basis vectors absorbed so far.
    """

    def __init__(self, X, weight, capacity=None):
        self.X = X
        self.weight = weight
        m, n = X.shape
        capacity = min(m, n) if capacity is None else capacity
        self._Y = np.empty((m, capacity), order="F")
        self._YAX = np.empty((capacity, n))
        self._YAY = np.empty((capacity, capacity))
        self._AX = None
        self.d = 0
        if isinstance(weight, Identity):
            self.col_sq = np.einsum("ij,ij->j", X, X)
        elif isinstance(weight, Diagonal):
            self.col_sq = np.einsum("i,ij,ij->j", weight.values, X, X)
        else:
            self._AX = weight.apply(X)
            self.col_sq = np.einsum("ij,ij->j", X, self._AX)
        if not isinstance(weight, Identity):
            plain = np.einsum("ij,ij->j", X, X)
            self.col_sq = _clamp_array(self.col_sq, plain)
        self.residual_sq = self.col_sq.copy() if isinstance(weight, Identity) else None
        self.base_sq = self.col_sq.copy() if isinstance(weight, Identity) else None

    @property
    def identity(self):
        return isinstance(self.weight, Identity)

    @property
    def AX(self):
        """``A X``; never formed for the identity weight, built on first use otherwise."""
        if self.identity:
            return None
        if self._AX is None:
            self._AX = self.weight.apply(self.X)
        return self._AX

    @property
    def Y(self):
        return self._Y[:, :self.d]

    @property
    def YAX(self):
        return self._YAX[:self.d]

    @property
    def YAY(self):
        return self._YAY[:self.d, :self.d]

    def _grow(self):
        cap = self._Y.shape[1]
        new = max(2 * cap, 1)
        m, n = self.X.shape
        Y = np.empty((m, new), order="F")
        Y[:, :cap] = self._Y
        YAX = np.empty((new, n))
        YAX[:cap] = self._YAX
        YAY = np.empty((new, new))
        YAY[:cap, :cap] = self._YAY
        self._Y, self._YAX, self._YAY = Y, YAX, YAY


def workspace_init(X, weight=None, capacity=None):
    """Offline precomputation of ``diag(X'AX)`` (and ``AX`` when needed).

    Raises
    ------
    IncompatibleWeight
        If the weight dimension differs from the row count of ``X``.
    """
    X = np.asarray(X, dtype=np.float64)
    weight = Identity() if weight is None else weight
    weight.check_dim(X.shape[0])
    return ErrorWorkspace(X, weight, capacity)


def workspace_extend(ws, xi, xi_X=None):
    """Absorb a new orthonormal basis vector ``xi`` into the workspace.

    Appends the row ``xi'AX`` to ``Y'AX`` and the new row/column of
    ``Y'AY``. For the identity weight the running residuals are updated
    with ``residual_sq -= (xi'X)^2``.

    ``xi_X`` may pass a precomputed ``xi'X`` to avoid recomputing it.
    """
    xi = np.asarray(xi, dtype=np.float64).ravel()
    m = ws.X.shape[0]
    if xi.size != m:
        raise DimensionMismatch(f"basis vector has length {xi.size}, expected {m}")
    if ws.d == ws._Y.shape[1]:
        ws._grow()
    d = ws.d
    ws._Y[:, d] = xi
    if ws.identity:
        row = ws.X.T @ xi if xi_X is None else np.asarray(xi_X, dtype=np.float64)
        ws._YAX[d] = row
        ws._YAY[d, :d] = 0.0
        ws._YAY[:d, d] = 0.0
        ws._YAY[d, d] = 1.0
        r = ws.residual_sq
        r -= row * row
        ws.residual_sq = _clamp_array(r, ws.col_sq)
        stale = np.flatnonzero(ws.residual_sq < REFRESH_RTOL * ws.base_sq)
        if stale.size:
            R = ws.X[:, stale] - ws._Y[:, :d + 1] @ ws._YAX[:d + 1, stale]
            exact = np.einsum("ij,ij->j", R, R)
            ws.residual_sq[stale] = exact
            ws.base_sq[stale] = exact
    else:
        ws._YAX[d] = ws.AX.T @ xi
        a_xi = ws.weight.apply(xi)
        col = ws._Y[:, :d + 1].T @ a_xi
        ws._YAY[:d + 1, d] = col
        ws._YAY[d, :d + 1] = col
    ws.d = d + 1
    return ws


def error_sq(ws, j, c):
    """Squared weighted error of column ``j`` approximated by ``Y c``.

    Uses only ``col_sq[j]``, column ``j`` of ``Y'AX`` and ``Y'AY``, so the
    cost is ``O(d^2)`` and independent of the row count.
    """
    n = ws.col_sq.size
    if not 0 <= j < n:
        raise IndexOutOfRange(f"column {j} out of range for {n} columns")
    c = np.asarray(c, dtype=np.float64).ravel()
    if c.size != ws.d:
        raise DimensionMismatch(f"coefficient vector has length {c.size}, workspace has d={ws.d}")
    v_sq = ws.col_sq[j]
    cross = c @ ws._YAX[:ws.d, j]
    if ws.identity:
        quad = c @ c
    else:
        quad = c @ (ws.YAY @ c)
    value = v_sq - 2.0 * cross + quad
    return clamp_sq(float(value), float(v_sq + 2.0 * abs(cross) + abs(quad)))


def error_sq_all(ws, T):
    """Vectorized :func:`error_sq` for every column with coefficients ``T``."""
    T = np.asarray(T, dtype=np.float64)
    if T.shape != (ws.d, ws.col_sq.size):
        raise DimensionMismatch(f"coefficients have shape {T.shape}, expected {(ws.d, ws.col_sq.size)}")
    cross = np.einsum("kj,kj->j", T, ws.YAX)
    if ws.identity:
        quad = np.einsum("kj,kj->j", T, T)
    else:
        quad = np.einsum("kj,kj->j", T, ws.YAY @ T)
    values = ws.col_sq - 2.0 * cross + quad
    return _clamp_array(values, ws.col_sq + 2.0 * np.abs(cross) + np.abs(quad))


class ScanResult(NamedTuple):
    E_cur: float
    argmax: int


def residual_scan(ws, T):
    """Largest column error and the smallest index attaining it.

    With the identity weight the running residuals maintained by
    :func:`workspace_extend` are used directly; ``T`` must then be the
    coefficient matrix the workspace was built with.
    """
    if ws.identity:
        values = ws.residual_sq
    else:
        values = error_sq_all(ws, T)
    j = int(np.argmax(values))
    return ScanResult(float(np.sqrt(values[j])), j)
