"""Reduced Basis Decomposition: greedy, certified low-rank matrix compression."""

from .core import (
    FixedColumn,
    RbdConfig,
    RbdModel,
    SeededRandom,
    compress_matrix,
    mgs_project,
    project,
    rbd_decompose,
    reconstruct,
)
from .error import Diagonal, Identity, SparseSpd, a_norm_sq
from .svd import SvdTriple, svd_error_history, truncated_svd

__version__ = "0.1.0"

__all__ = [
    "FixedColumn", "RbdConfig", "RbdModel", "SeededRandom", "compress_matrix", "mgs_project",
    "project", "rbd_decompose", "reconstruct", "Diagonal", "Identity", "SparseSpd", "a_norm_sq",
    "SvdTriple", "svd_error_history", "truncated_svd",
]
