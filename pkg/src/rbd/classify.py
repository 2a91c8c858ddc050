"""Nearest-neighbour recognition in a reduced space.

The training columns are compressed with RBD; a query vector is mapped to
reduced coordinates with ``Y'v`` and given the label of the closest
training column (Euclidean distance, ties to the smaller index).
"""

from dataclasses import dataclass

import numpy as np

from .core import RbdConfig, RbdModel, as_matrix, rbd_decompose
from .exceptions import DimensionMismatch
from .svd import truncated_svd


@dataclass(frozen=True, eq=False)
class Classifier:
    model: RbdModel
    train_coords: np.ndarray
    labels: np.ndarray
    metric: str = "euclidean"

    @property
    def basis(self):
        return self.model.Y


def _check_labels(X, labels):
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size != X.shape[1]:
        raise DimensionMismatch(f"{labels.size} labels for {X.shape[1]} columns")
    return labels


def fit(train, labels, cfg):
    """Compress ``train`` (samples as columns) with RBD and keep its coordinates."""
    train = as_matrix(train, "train")
    labels = _check_labels(train, labels)
    model = rbd_decompose(train, cfg)
    return Classifier(model=model, train_coords=model.T, labels=labels)


def fit_svd(train, labels, k):
    """Same pipeline with the rank-``k`` left singular basis instead of RBD."""
    train = as_matrix(train, "train")
    labels = _check_labels(train, labels)
    U = truncated_svd(train, k).U
    T = U.T @ train
    model = RbdModel(Y=U, T=T, stopped_by="svd")
    return Classifier(model=model, train_coords=T, labels=labels)


def predict_many(clf, V):
    """Labels for every column of ``V``."""
    V = np.asarray(V, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[0] != clf.model.m:
        raise DimensionMismatch(f"vectors have length {V.shape[0]}, classifier expects {clf.model.m}")
    C = clf.basis.T @ V
    P = clf.train_coords
    nearest = np.empty(C.shape[1], dtype=np.intp)
    # direct differences (not the |p|^2 - 2p.c + |c|^2 expansion) keep exact matches exact
    step = max(1, 2 ** 22 // max(1, P.size))
    for lo in range(0, C.shape[1], step):
        diff = P[:, :, None] - C[:, None, lo:lo + step]
        nearest[lo:lo + step] = np.argmin(np.einsum("ijk,ijk->jk", diff, diff), axis=0)
    return clf.labels[nearest]


def predict(clf, v):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {v.shape}")
    return predict_many(clf, v)[0]


def evaluate(clf, test, test_labels):
    """Fraction of test columns that are misclassified."""
    test = np.asarray(test, dtype=np.float64)
    if test.ndim == 1:
        test = test[:, None]
    test_labels = _check_labels(test, test_labels)
    return float(np.mean(predict_many(clf, test) != test_labels))


def split_per_class(labels, n_train, rng):
    """Random split with ``n_train`` training samples from every class.

    Returns index arrays ``(train_idx, test_idx)``, each sorted.
    """
    labels = np.asarray(labels)
    train = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < n_train:
            raise ValueError(f"class {c!r} has only {idx.size} samples, need {n_train}")
        train.append(rng.choice(idx, size=n_train, replace=False))
    train = np.sort(np.concatenate(train))
    test = np.setdiff1d(np.arange(labels.size), train)
    return train, test


def repeated_error(X, labels, n_train, d, reps=100, seed=0, method="rbd", cfg=None):
    """Mean test error over ``reps`` random per-class splits.

    Parameters
    ----------
    method : {"rbd", "svd"}
        Basis used for the reduction.
    cfg : RbdConfig, optional
        Overrides the default ``RbdConfig(d_max=d)`` for ``method="rbd"``.

    Returns
    -------
    mean_error : float
    errors : list of float
        One error rate per split.
    """
    X = as_matrix(X)
    labels = _check_labels(X, labels)
    rng = np.random.default_rng(seed)
    errors = []
    for _ in range(reps):
        tr, te = split_per_class(labels, n_train, rng)
        if method == "rbd":
            clf = fit(X[:, tr], labels[tr], cfg or RbdConfig(d_max=d))
        elif method == "svd":
            clf = fit_svd(X[:, tr], labels[tr], d)
        else:
            raise ValueError(f"unknown method {method!r}")
        errors.append(evaluate(clf, X[:, te], labels[te]))
    return float(np.mean(errors)), errors
