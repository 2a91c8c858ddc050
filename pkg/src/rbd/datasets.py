"""Synthetic test matrices.

Grid matrices sample a function of two variables on a tensor grid: entry
``(i, j)`` is ``f(x_i, y_j)``. The first three functions are finite sums of
products ``g(x) h(y)`` and therefore have exact low rank; the composite one
adds a non-separable term and only has fast singular value decay.
"""

import enum
from dataclasses import dataclass

import numpy as np


class FunctionId(enum.Enum):
    RANK1 = "rank1"
    RANK2 = "rank2"
    RANK3 = "rank3"
    COMPOSITE = "composite"


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with ``n_points`` per axis, endpoints included."""

    n_points: int
    x_domain: tuple = (-1.0, 1.0)
    y_domain: tuple = (-1.0, 1.0)

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError(f"need at least 2 points per axis, got {self.n_points}")
        for lo, hi in (self.x_domain, self.y_domain):
            if not lo < hi:
                raise ValueError(f"empty interval [{lo}, {hi}]")

    def axes(self):
        x = np.linspace(*self.x_domain, self.n_points)
        y = np.linspace(*self.y_domain, self.n_points)
        return x, y


def _separable(x, y, terms):
    # sum_k a_k sin(w_k pi x) cos(w_k pi y), built as a sum of outer products
    out = np.zeros((x.size, y.size))
    for amp, w in terms:
        out += amp * np.outer(np.sin(w * np.pi * x), np.cos(w * np.pi * y))
    return out


def composite(x, y):
    """``0.6 f1 + 0.1 f2 + 0.01 f3`` evaluated elementwise (broadcasts)."""
    f1 = np.sin(np.pi * (x + 2 * y)) * np.cos(np.pi * (2 * x - y))
    f2 = np.sin(10 * np.pi * (x - 3 * y)) * np.cos(10 * np.pi * (3 * x + y))
    f3 = np.sin(3 * np.pi * x ** 2 * y) * np.cos(6 * np.pi * np.sqrt(np.abs(x)) / (y + 2))
    return 0.6 * f1 + 0.1 * f2 + 0.01 * f3


_TERMS = {
    FunctionId.RANK1: [(1.0, 1)],
    FunctionId.RANK2: [(1.0, 1), (0.1, 10)],
    FunctionId.RANK3: [(1.0, 1), (0.1, 10), (0.01, 100)],
}


def gen_grid_matrix(f, grid):
    """Matrix of ``f`` sampled on ``grid``; rows follow x, columns follow y.

    Parameters
    ----------
    f : FunctionId or str
    grid : GridSpec or int
        An int is shorthand for ``GridSpec(n)`` on ``[-1, 1]^2``.

    Note that ``sin(100 pi x)`` vanishes at every node of the endpoint-
    inclusive grid whenever the spacing divides 0.01, e.g. 101 or 201
    points, so RANK3 collapses to rank 2 on those grids.
    """
    f = FunctionId(f)
    if not isinstance(grid, GridSpec):
        grid = GridSpec(int(grid))
    x, y = grid.axes()
    if f is FunctionId.COMPOSITE:
        return np.asfortranarray(composite(x[:, None], y[None, :]))
    return np.asfortranarray(_separable(x, y, _TERMS[f]))


def gen_labeled_blobs(n_classes, per_class, dim, spread, seed):
    """Gaussian clusters around random unit-norm centers.

    Returns
    -------
    X : ndarray, shape (dim, n_classes * per_class)
        Samples as columns, grouped by class.
    labels : ndarray of int, shape (n_classes * per_class,)
    """
    if min(n_classes, per_class, dim) < 1:
        raise ValueError("counts must be at least 1")
    if spread < 0:
        raise ValueError(f"spread must be nonnegative, got {spread}")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((dim, n_classes))
    centers /= np.linalg.norm(centers, axis=0)
    labels = np.repeat(np.arange(n_classes), per_class)
    noise = rng.standard_normal((dim, labels.size))
    X = centers[:, labels] + spread * noise
    return np.asfortranarray(X), labels
