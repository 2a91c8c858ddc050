"""Reference truncated SVD by one-sided (Hestenes) Jacobi rotations.

This is the accuracy baseline RBD is measured against, so it favours
exactness over speed. The matrix is first reduced with a column-pivoted
QR factorization (LAPACK); trailing rows of ``R`` whose combined norm is
at roundoff level are dropped, and Jacobi then orthogonalizes the columns of
the remaining factor. Rotations are applied to disjoint column pairs in
round-robin order so that each step is one vectorized update.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import DimensionMismatch, InvalidConfig, NoConvergence

MAX_SWEEPS = 50
RESIDUAL_RTOL = 1e-8


@dataclass(frozen=True)
class SvdTriple:
    """Leading singular triplets: ``X ~ U diag(s) V'``."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray


def _round_robin_perms(k):
    """Row permutations for a round-robin tournament on ``k`` (even) slots.

    Rows are stored so that round pairs are ``(i, i + k/2)``; the returned
    list gives, for each round, the gather that moves the storage into the
    next round's layout. ``k - 1`` rounds make every pair meet once.
    """
    players = list(range(k))

    def layout(pl):
        return pl[:k // 2] + pl[k // 2:][::-1]

    perms = []
    current = layout(players)
    for _ in range(k - 1):
        players = [players[0], players[-1]] + players[1:-1]
        nxt = layout(players)
        where = {v: i for i, v in enumerate(current)}
        perms.append(np.array([where[v] for v in nxt]))
        current = nxt
    return layout(list(range(k))), perms


def jacobi_orthogonalize(A, max_sweeps=MAX_SWEEPS, tol=None):
    """Rotate the columns of ``A`` (in place) until they are mutually orthogonal.

    Returns the accumulated orthogonal matrix ``J`` with ``A_in @ J = A_out``.
    A pair is rotated while ``|a_p . a_q| > tol * |a_p| |a_q|``.

    Raises
    ------
    NoConvergence
        If some pair still needs rotating after ``max_sweeps`` sweeps.
    """
    m, r = A.shape
    if tol is None:
        tol = max(m, 1) * np.finfo(np.float64).eps
    k = r + r % 2
    h = k // 2
    first, perms = _round_robin_perms(k)
    # Row i of At is column first[i] of A; a zero pad row keeps k even.
    At = np.zeros((k, m))
    At[:r] = A.T
    At = At[first]
    Jt = np.zeros((k, r))
    Jt[:r] = np.eye(r)
    Jt = Jt[first]
    ids = np.arange(k)[first]
    for _ in range(max_sweeps):
        rotated = False
        norms = np.einsum("ij,ij->i", At, At)
        for perm in perms:
            ap, aq = At[:h], At[h:]
            alpha, beta = norms[:h], norms[h:]
            gamma = np.einsum("ij,ij->i", ap, aq)
            todo = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            if todo.any():
                rotated = True
                g = np.where(todo, gamma, 1.0)
                zeta = (beta - alpha) / (2.0 * g)
                t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
                t[~todo] = 0.0
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                new_p = c[:, None] * ap - s[:, None] * aq
                aq *= c[:, None]
                aq += s[:, None] * ap
                ap[...] = new_p
                jp, jq = Jt[:h], Jt[h:]
                new_p = c[:, None] * jp - s[:, None] * jq
                jq *= c[:, None]
                jq += s[:, None] * jp
                jp[...] = new_p
                norms[:h] = alpha - t * gamma
                norms[h:] = beta + t * gamma
            At = At[perm]
            Jt = Jt[perm]
            norms = norms[perm]
            ids = ids[perm]
        if not rotated:
            order = np.argsort(ids)[:r]
            A[...] = At[order].T
            return np.ascontiguousarray(Jt[order].T)
    raise NoConvergence(f"one-sided Jacobi did not converge in {max_sweeps} sweeps")


def _complete_orthonormal(Z, good):
    # Replace columns of Z not flagged in `good` by an orthonormal completion.
    bad = np.flatnonzero(~good)
    if bad.size == 0:
        return Z
    n = Z.shape[0]
    Q = Z[:, good]
    for j in bad:
        for e in range(n):
            v = np.zeros(n)
            v[e] = 1.0
            for _ in range(2):
                v -= Q @ (Q.T @ v)
            nv = np.linalg.norm(v)
            if nv > 0.5:
                v /= nv
                Z[:, j] = v
                Q = np.column_stack([Q, v])
                break
    return Z


def _fix_signs(U, V):
    for i in range(U.shape[1]):
        col = U[:, i]
        nz = np.flatnonzero(np.abs(col) > 1e-8)
        if nz.size and col[nz[0]] < 0:
            U[:, i] = -col
            V[:, i] = -V[:, i]


def _svd_tall(X, k):
    """Jacobi SVD of a tall matrix.

    Returns the leading ``k`` triplets, every singular value of the
    truncated factor, and the Frobenius norm of the discarded QR rows.
    """
    m, n = X.shape
    Q, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    # Keep the smallest leading block of rows whose discarded tail is roundoff.
    tail = np.sqrt(np.cumsum(np.einsum("ij,ij->i", R, R)[::-1])[::-1])
    total = tail[0] if tail.size else 0.0
    negligible = np.flatnonzero(tail <= max(m, n) * np.finfo(np.float64).eps * total)
    r = int(negligible[0]) if negligible.size else n
    r = min(n, max(r, k))
    B = np.empty((r, n))
    B[:, piv] = R[:r]
    W = np.asfortranarray(B.T)
    J = jacobi_orthogonalize(W)
    s_all = np.linalg.norm(W, axis=0)
    order = np.argsort(-s_all, kind="stable")
    s_all = s_all[order]
    order = order[:k]
    s = s_all[:k]
    good = s > 0
    Z = np.zeros((n, k))
    Z[:, good] = W[:, order[good]] / s[good]
    Z = _complete_orthonormal(Z, good)
    U = Q[:, :r] @ J[:, order]
    dropped = float(tail[r]) if r < n else 0.0
    return U, s, Z, s_all, dropped


def truncated_svd(X, k):
    """Leading ``k`` singular triplets of ``X``.

    Parameters
    ----------
    X : array_like, shape (m, n)
    k : int
        ``1 <= k <= min(m, n)``.

    Returns
    -------
    SvdTriple
        ``U`` (m x k) and ``V`` (n x k) with orthonormal columns, ``s`` in
        non-increasing order. The first entry of each ``U`` column that is
        not negligible is positive.

    Raises
    ------
    NoConvergence
        If Jacobi exceeds its sweep budget or the result fails the residual
        check ``||XV - U diag(s)|| <= 1e-8 s_1``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {X.shape}")
    m, n = X.shape
    if not 1 <= k <= min(m, n):
        raise InvalidConfig(f"k={k} must lie in [1, {min(m, n)}]")
    if m >= n:
        U, s, V, _, _ = _svd_tall(X, k)
    else:
        V, s, U, _, _ = _svd_tall(X.T, k)
    _fix_signs(U, V)
    residual = np.linalg.norm(X @ V - U * s)
    if residual > RESIDUAL_RTOL * max(s[0], np.finfo(np.float64).tiny):
        raise NoConvergence(f"SVD residual {residual:.3e} exceeds {RESIDUAL_RTOL:g} * s_1")
    return SvdTriple(U=U, s=s, V=V)


def svd_error_history(X, k_max, norm="fro"):
    """Errors ``||X - sum_{i<=d} s_i u_i v_i'||`` for ``d = 1..k_max``.

    Parameters
    ----------
    norm : {"fro", "max"}
        Frobenius norm (from the tail of the singular values, no
        reconstruction) or largest absolute entry (explicit deflation).
    """
    X = np.asarray(X, dtype=np.float64)
    if not 1 <= k_max <= min(X.shape):
        raise InvalidConfig(f"k_max={k_max} must lie in [1, {min(X.shape)}]")
    if norm == "fro":
        _, s, _, s_all, dropped = _svd_tall(X if X.shape[0] >= X.shape[1] else X.T, 1)
        sq = np.append(s_all ** 2, dropped ** 2)
        tail = np.cumsum(sq[::-1])[::-1]
        return [float(np.sqrt(tail[d])) if d < tail.size else dropped for d in range(1, k_max + 1)]
    if norm == "max":
        svd = truncated_svd(X, k_max)
        R = X.copy()
        out = []
        for i in range(k_max):
            R -= svd.s[i] * np.outer(svd.U[:, i], svd.V[:, i])
            out.append(float(np.abs(R).max()))
        return out
    raise ValueError(f"unknown norm {norm!r}")
