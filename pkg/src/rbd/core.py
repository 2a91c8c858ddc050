"""Reduced Basis Decomposition: greedy low-rank factorization ``X ~ Y T``.

The basis ``Y`` is grown one column at a time. Each new column is the
data column that is currently worst approximated (measured in a weighted
norm), orthonormalized against the existing basis with modified
Gram-Schmidt. ``T = Y'X`` holds the coordinates of every column in the
reduced space.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import error as _error
from .error import Identity, a_norm_sq
from .exceptions import (
    Breakdown,
    DegenerateInput,
    DimensionMismatch,
    InvalidConfig,
)

# Second Gram-Schmidt sweep when a sweep keeps less than this fraction of |v|
REORTH_KAPPA = 1.0 / math.sqrt(2.0)


def as_matrix(X, name="X"):
    """Validate and convert to a finite float64 2-D array in column-major order."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or Inf")
    return np.asfortranarray(X)


@dataclass(frozen=True)
class FixedColumn:
    """Start the greedy loop from a given column."""
    index: int = 0


@dataclass(frozen=True)
class SeededRandom:
    """Start from a column drawn by ``numpy.random.default_rng(seed)``."""
    seed: int = 0


@dataclass(frozen=True)
class RbdConfig:
    """Parameters of :func:`rbd_decompose`.

    Parameters
    ----------
    d_max : int
        Largest basis size allowed. Must not exceed the number of columns.
    eps_r : float
        Target for the largest column error. The loop stops as soon as
        every column is approximated within ``eps_r``.
    start : FixedColumn or SeededRandom
        Choice of the first column.
    weight : Identity, Diagonal or SparseSpd
        Weight of the norm in which errors are measured.
    reorthogonalize : bool
        Always run the Gram-Schmidt sweep twice. Without it the second
        sweep is only made when the first cancels most of the column.
    breakdown_tol : float, optional
        A Gram-Schmidt residual shorter than this ends the loop. Defaults
        to ``eps_r``.
    """

    d_max: int
    eps_r: float = 0.0
    start: FixedColumn | SeededRandom = field(default_factory=FixedColumn)
    weight: _error.WeightSpec = field(default_factory=Identity)
    reorthogonalize: bool = False
    breakdown_tol: float | None = None

    def __post_init__(self):
        if int(self.d_max) != self.d_max or self.d_max < 1:
            raise InvalidConfig(f"d_max must be a positive integer, got {self.d_max}")
        if not self.eps_r >= 0:
            raise InvalidConfig(f"eps_r must be nonnegative, got {self.eps_r}")
        if self.breakdown_tol is not None and not self.breakdown_tol >= 0:
            raise InvalidConfig(f"breakdown_tol must be nonnegative, got {self.breakdown_tol}")
        if not isinstance(self.start, (FixedColumn, SeededRandom)):
            raise InvalidConfig(f"unknown start rule {self.start!r}")

    @property
    def tol_breakdown(self):
        return self.eps_r if self.breakdown_tol is None else self.breakdown_tol


@dataclass(frozen=True, eq=False)
class RbdModel:
    """Result of :func:`rbd_decompose`.

    Attributes
    ----------
    Y : ndarray, shape (m, d)
        Orthonormal basis.
    T : ndarray, shape (d, n)
        Reduced coordinates of the data columns, ``T = Y'X``.
    selected : tuple of int
        Data columns picked by the greedy loop, in order.
    residual_history : ndarray, shape (d,)
        Largest column error after each basis vector was added.
    weight : WeightSpec or None
        Weight the errors were measured in (None when unknown, e.g. a
        model loaded from a file that references an external weight).
    eps_r : float
        Tolerance the model was built with.
    stopped_by : str
        ``"tolerance"``, ``"breakdown"``, ``"d_max"``, or ``""`` if unknown.
    """

    Y: np.ndarray
    T: np.ndarray
    selected: tuple = ()
    residual_history: np.ndarray = field(default_factory=lambda: np.empty(0))
    weight: object = field(default_factory=Identity)
    eps_r: float = 0.0
    stopped_by: str = ""

    @property
    def d(self):
        return self.Y.shape[1]

    @property
    def m(self):
        return self.Y.shape[0]

    @property
    def n(self):
        return self.T.shape[1]


def mgs_project(v, basis, breakdown_tol=0.0, reorthogonalize=False):
    """Orthonormalize ``v`` against ``basis`` with modified Gram-Schmidt.

    Parameters
    ----------
    v : array_like, shape (m,)
    basis : ndarray, shape (m, k) or sequence of k vectors
        Orthonormal vectors.
    breakdown_tol : float
    reorthogonalize : bool
        Perform the subtraction sweep twice.

    Returns
    -------
    xi : ndarray, shape (m,)
        Unit vector orthogonal to the basis.
    residual_norm : float
        Norm of ``v`` after the sweep(s), before normalization.

    Raises
    ------
    Breakdown
        If the residual norm is below ``breakdown_tol`` (or exactly zero).
    """
    v = np.array(v, dtype=np.float64).ravel()
    if isinstance(basis, np.ndarray) and basis.ndim == 2:
        cols = [basis[:, j] for j in range(basis.shape[1])]
    else:
        cols = [np.asarray(b, dtype=np.float64).ravel() for b in basis]
    for b in cols:
        if b.size != v.size:
            raise DimensionMismatch(f"basis vector length {b.size} differs from {v.size}")
    for _ in range(2 if reorthogonalize else 1):
        for b in cols:
            v -= (v @ b) * b
    norm = float(np.linalg.norm(v))
    if norm < breakdown_tol or norm == 0.0:
        raise Breakdown(norm)
    return v / norm, norm


def _orthonormalize(v, Y, tol, always):
    # One MGS sweep, plus a second one whenever the first cancelled most of
    # v: the loss of orthogonality after a sweep scales like eps*|v|/|xi|.
    if always:
        return mgs_project(v, Y, tol, True)
    xi, norm = mgs_project(v, Y, tol)
    if Y.shape[1] and norm < REORTH_KAPPA * np.linalg.norm(v):
        xi, again = mgs_project(xi * norm, Y, tol)
        norm = again
    return xi, norm


def _direct_errors(X, Y, T, weight):
    # Squared weighted errors of every column, computed from the residual itself.
    R = X - Y @ T
    if isinstance(weight, Identity):
        return np.einsum("ij,ij->j", R, R)
    return np.maximum(np.einsum("ij,ij->j", R, weight.apply(R)), 0.0)


def _start_index(start, n):
    if isinstance(start, FixedColumn):
        if not 0 <= start.index < n:
            raise InvalidConfig(f"start column {start.index} out of range for {n} columns")
        return int(start.index)
    return int(np.random.default_rng(start.seed).integers(n))


def rbd_decompose(X, cfg):
    """Greedy reduced basis decomposition of ``X``.

    Parameters
    ----------
    X : array_like, shape (m, n)
    cfg : RbdConfig

    Returns
    -------
    RbdModel
        ``Y`` (m x d) and ``T`` (d x n) with ``d <= cfg.d_max``.

    Raises
    ------
    IncompatibleWeight
        If the weight dimension is not ``m``.
    DegenerateInput
        If no column is long enough to start a basis (e.g. ``X = 0``).
    InvalidConfig
        If ``cfg.d_max`` exceeds the number of columns.

    Notes
    -----
    Each pass takes the column chosen by the previous scan, orthonormalizes
    it against ``Y`` and appends it together with the row ``xi'X`` of
    ``T``. If Gram-Schmidt leaves less than ``breakdown_tol`` the loop ends
    with the current basis. A second sweep is made whenever the first one
    removes most of the column, since that is when orthogonality is lost.
    Otherwise all column errors are scanned and the
    loop ends once the largest is at most ``eps_r``.

    Before stopping on the tolerance, the column errors are recomputed
    directly from ``X - YT``. The fast scan subtracts nearly equal numbers
    once errors are tiny compared with the column norms, and the direct
    check keeps the stopping guarantee honest. If it disagrees, its values
    replace the fast ones and the loop goes on.
    """
    X = as_matrix(X)
    m, n = X.shape
    if cfg.d_max > n:
        raise InvalidConfig(f"d_max={cfg.d_max} exceeds the number of columns n={n}")
    weight = cfg.weight
    ws = _error.workspace_init(X, weight, capacity=cfg.d_max)
    if not np.any(ws.col_sq > 0):
        raise DegenerateInput("data matrix is zero")

    tol = cfg.tol_breakdown
    Y = np.empty((m, cfg.d_max), order="F")
    T = np.empty((cfg.d_max, n))
    selected = []
    history = []
    i = _start_index(cfg.start, n)
    E_cur = math.inf
    d = 0
    stopped_by = "d_max"
    while d < cfg.d_max and E_cur > cfg.eps_r:
        try:
            xi, _ = _orthonormalize(X[:, i], Y[:, :d], tol, cfg.reorthogonalize)
        except Breakdown:
            if d > 0:
                stopped_by = "breakdown"
                break
            # The start column is negligible; fall back to the longest one.
            i = int(np.argmax(ws.col_sq))
            try:
                xi, _ = mgs_project(X[:, i], Y[:, :0], tol, cfg.reorthogonalize)
            except Breakdown:
                raise DegenerateInput(
                    f"every column is shorter than the breakdown tolerance {tol:g}") from None
        row = X.T @ xi
        Y[:, d] = xi
        T[d] = row
        _error.workspace_extend(ws, xi, xi_X=row if ws.identity else None)
        selected.append(i)
        d += 1

        E_cur, i = _error.residual_scan(ws, T[:d])
        if E_cur <= cfg.eps_r:
            direct = _direct_errors(X, Y[:, :d], T[:d], weight)
            j = int(np.argmax(direct))
            E_direct = float(np.sqrt(direct[j]))
            if E_direct > cfg.eps_r:
                if ws.identity:
                    ws.residual_sq = direct
                E_cur, i = E_direct, j
        history.append(E_cur)
        if E_cur <= cfg.eps_r:
            stopped_by = "tolerance"

    return RbdModel(
        Y=np.asfortranarray(Y[:, :d]),
        T=np.ascontiguousarray(T[:d]),
        selected=tuple(selected),
        residual_history=np.array(history),
        weight=weight,
        eps_r=float(cfg.eps_r),
        stopped_by=stopped_by,
    )


def project(model, v):
    """Reduced coordinates ``Y'v`` of a (possibly out-of-sample) vector.

    ``v`` may also be an (m, k) matrix of column vectors.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != model.m:
        raise DimensionMismatch(f"vector has length {v.shape[0]}, model expects {model.m}")
    return model.Y.T @ v


def reconstruct(model, c):
    """Map reduced coordinates back to data space: ``Y c``."""
    c = np.asarray(c, dtype=np.float64)
    if c.shape[0] != model.d:
        raise DimensionMismatch(f"coefficient vector has length {c.shape[0]}, model has d={model.d}")
    return model.Y @ c


def compress_matrix(model):
    """The rank-d approximation ``Y T`` of the whole data matrix."""
    return model.Y @ model.T


def column_errors(model, X, weight=None):
    """Weighted error of every column of ``X`` against the model's span."""
    X = as_matrix(X)
    weight = model.weight if weight is None else weight
    if weight is None:
        weight = Identity()
    weight.check_dim(X.shape[0])
    R = X - model.Y @ (model.Y.T @ X)
    return np.sqrt(np.array([a_norm_sq(R[:, j], weight) for j in range(R.shape[1])]))
