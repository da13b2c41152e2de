"""Affinity graphs over context vectors and their normalized-cut embedding.

The Fiedler vector of ``L = I - D^{-1/2} A D^{-1/2}`` is obtained with a
LAPACK subset eigensolve after shifting the known null vector
``D^{1/2} 1`` out of the way.  :func:`jacobi_eigh` is an independent
cyclic-Jacobi eigensolver kept as a verification oracle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh
from scipy.spatial.distance import pdist, squareform

from .exceptions import ConvergenceError, DegenerateError, InputError

EIGENGAP_TOL = 1e-12


@dataclass(frozen=True)
class FiedlerEmbedding:
    values: np.ndarray
    eigenvalue: float


def _as_points(contexts):
    z = np.asarray(contexts, dtype=np.float64)
    if z.ndim == 1:
        z = z[:, None]
    return z


def mean_sigma(contexts):
    """Mean Euclidean distance over all pairs of distinct samples.

    Raises :class:`DegenerateError` when every pairwise distance is zero.
    """
    z = _as_points(contexts)
    if z.shape[0] < 2:
        raise InputError("mean_sigma needs at least two samples")
    sigma = float(pdist(z).mean())
    if not sigma > 0.0:
        raise DegenerateError("all contexts coincide; bandwidth is zero")
    return sigma


def pairwise_affinity(contexts, sigma):
    """``A[j, k] = exp(-||z_j - z_k|| / sigma)``."""
    if not sigma > 0:
        raise InputError(f"sigma must be positive, got {sigma}")
    z = _as_points(contexts)
    A = np.exp(-squareform(pdist(z)) / sigma)
    np.fill_diagonal(A, 1.0)
    return A


def normalized_laplacian(A):
    A = np.asarray(A, dtype=np.float64)
    deg = A.sum(axis=1)
    assert np.all(deg > 0), "affinity rows must have positive sums"
    inv_sqrt = 1.0 / np.sqrt(deg)
    L = -(inv_sqrt[:, None] * A * inv_sqrt[None, :])
    L[np.diag_indices_from(L)] += 1.0
    return 0.5 * (L + L.T)


def _fix_sign(v):
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def fiedler_embedding(L, null_vector=None):
    """Unit eigenvector of the second-smallest eigenvalue of ``L``.

    ``null_vector`` is the known first eigenvector (``D^{1/2} 1`` for a
    normalized Laplacian); it is estimated from ``L`` when omitted.  The
    returned vector is orthogonal to it and signed so that its
    largest-magnitude entry is positive.
    """
    L = np.asarray(L, dtype=np.float64)
    m = L.shape[0]
    if m < 3:
        raise InputError("a Fiedler embedding needs at least three samples")
    if null_vector is None:
        _, vec = eigh(L, subset_by_index=[0, 0])
        u = vec[:, 0]
    else:
        u = np.asarray(null_vector, dtype=np.float64)
    u = u / np.linalg.norm(u)
    # the spectrum of a normalized Laplacian lies in [0, 2]; parking u at 3
    # leaves lambda_2 as the smallest eigenvalue of the shifted matrix
    shifted = L + 3.0 * np.outer(u, u)
    w, vec = eigh(shifted, subset_by_index=[0, 1])
    if w[1] - w[0] < EIGENGAP_TOL:
        raise DegenerateError(f"eigengap {w[1] - w[0]:.3g} between lambda_2 and lambda_3 collapsed")
    v = vec[:, 0]
    v = v - (u @ v) * u
    v /= np.linalg.norm(v)
    return FiedlerEmbedding(_fix_sign(v), float(w[0]))


def spectral_embedding(contexts):
    """Fiedler embedding of the context affinity graph in one call.

    Raises :class:`DegenerateError` for coincident contexts or a collapsed
    eigengap.
    """
    sigma = mean_sigma(contexts)
    A = pairwise_affinity(contexts, sigma)
    L = normalized_laplacian(A)
    return fiedler_embedding(L, np.sqrt(A.sum(axis=1)))


# --------------------------------------------------------------------------
# oracle

def _round_robin(m):
    """Disjoint index pairs for each round of a cyclic tournament ordering."""
    players = list(range(m)) + ([-1] if m % 2 else [])
    n = len(players)
    rounds = []
    for _ in range(n - 1):
        pairs = [(players[i], players[n - 1 - i]) for i in range(n // 2)]
        rounds.append([(min(p, q), max(p, q)) for p, q in pairs if p >= 0 and q >= 0])
        players = [players[0], players[-1]] + players[1:-1]
    return [(np.array([p for p, _ in r]), np.array([q for _, q in r])) for r in rounds if r]


def jacobi_eigh(M, tol=1e-15, max_sweeps=60):
    """All eigenpairs of a symmetric matrix by cyclic Jacobi rotations.

    Each sweep visits every off-diagonal pair once, applying the rotations
    of one round of a tournament ordering simultaneously.  Returns
    ``(eigenvalues, eigenvectors)`` sorted ascending, eigenvectors as
    columns.
    """
    a = np.array(M, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError("jacobi_eigh needs a square matrix")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise InputError("jacobi_eigh needs a symmetric matrix")
    m = a.shape[0]
    v = np.eye(m)
    if m == 1:
        return a.diagonal().copy(), v
    scale = np.linalg.norm(a)
    rounds = _round_robin(m)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(a.diagonal()))
        if off <= tol * scale:
            break
        for P, Q in rounds:
            apq = a[P, Q]
            app, aqq = a[P, P], a[Q, Q]
            nz = np.abs(apq) > 0.0
            c = np.ones_like(apq)
            s = np.zeros_like(apq)
            if np.any(nz):
                theta = (aqq[nz] - app[nz]) / (2.0 * apq[nz])
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                t[theta == 0.0] = 1.0
                c[nz] = 1.0 / np.sqrt(t * t + 1.0)
                s[nz] = t * c[nz]
            rp, rq = a[P, :].copy(), a[Q, :].copy()
            a[P, :] = c[:, None] * rp - s[:, None] * rq
            a[Q, :] = s[:, None] * rp + c[:, None] * rq
            cp, cq = a[:, P].copy(), a[:, Q].copy()
            a[:, P] = cp * c - cq * s
            a[:, Q] = cp * s + cq * c
            a[P, Q] = 0.0
            a[Q, P] = 0.0
            vp, vq = v[:, P].copy(), v[:, Q].copy()
            v[:, P] = vp * c - vq * s
            v[:, Q] = vp * s + vq * c
    else:
        raise ConvergenceError(f"Jacobi sweeps did not converge in {max_sweeps} sweeps")
    w = a.diagonal().copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]
