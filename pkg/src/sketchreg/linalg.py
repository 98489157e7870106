"""Dense linear algebra kernels shared by the solver, sketch and bound modules.

Everything here is a pure function of its (read-only) arguments.  The
spectral quantities use power / subspace iteration on the Gram matrix; the
small symmetric eigenproblems of the Rayleigh-Ritz step, the pivoted QR and
the rank-revealing SVD are delegated to numpy/scipy.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

__all__ = [
    "ConvergenceError",
    "SubspaceResult",
    "ProjectorResult",
    "LstsqResult",
    "as_matrix",
    "spectral_norm",
    "top_k_right_singular_vectors",
    "range_projector",
    "least_squares",
]

DEFAULT_RANK_TOL = 1e-10


class ConvergenceError(RuntimeError):
    """An iterative kernel hit its iteration cap.

    ``estimate`` carries the best value reached before giving up.
    """

    def __init__(self, message: str, estimate=None, iterations: int = 0):
        super().__init__(message)
        self.estimate = estimate
        self.iterations = iterations


class SubspaceResult(NamedTuple):
    V: np.ndarray
    singular_values: np.ndarray
    unique: bool
    iterations: int


class ProjectorResult(NamedTuple):
    P: np.ndarray
    Q: np.ndarray
    rank: int


class LstsqResult(NamedTuple):
    x: np.ndarray
    rank: int
    rank_deficient: bool
    residual_norm: float


def as_matrix(A, name: str = "A") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"{name} must be a nonempty 2-d array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def _gram(A: np.ndarray) -> np.ndarray:
    # the smaller Gram matrix has the same nonzero spectrum
    G = A.T @ A if A.shape[1] <= A.shape[0] else A @ A.T
    return 0.5 * (G + G.T)


def _power(G: np.ndarray, v: np.ndarray, tol: float, max_iters: int, rng) -> tuple[float, np.ndarray, int]:
    m = G.shape[0]
    theta = 0.0
    restarts = 0
    for it in range(1, max_iters + 1):
        w = G @ v
        nw = np.linalg.norm(w)
        if nw <= 1e-300 or (theta == 0.0 and nw < 1e-14):
            # start vector (numerically) in the null space
            if restarts > 10:
                return 0.0, v, it
            restarts += 1
            v = rng.standard_normal(m)
            v /= np.linalg.norm(v)
            continue
        theta = float(v @ w)
        resid = np.linalg.norm(w - theta * v)
        v = w / nw
        if resid <= tol * theta:
            return theta, v, it
    raise ConvergenceError(
        f"power iteration did not converge in {max_iters} iterations",
        estimate=float(np.sqrt(max(theta, 0.0))),
        iterations=max_iters,
    )


def spectral_norm(A, tol: float = 1e-12, max_iters: int = 100_000, seed: int = 0) -> float:
    """Largest singular value of ``A`` by power iteration on its Gram matrix.

    Starts from the normalized all-ones vector and stops once the
    eigen-residual ``||G v - theta v||`` drops below ``tol * theta``.  A start
    that happens to be orthogonal to the dominant direction converges to a
    smaller eigenpair, so the result is confirmed by a second run from the
    converged vector plus a seeded Gaussian perturbation.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = as_matrix(A)
    G = _gram(A)
    scale = np.abs(G).max()
    if scale == 0.0:
        return 0.0
    G = G / scale
    m = G.shape[0]
    rng = np.random.default_rng(seed)
    try:
        theta, v, used = _power(G, np.full(m, 1.0 / np.sqrt(m)), tol, max_iters, rng)
        if m > 1:
            g = rng.standard_normal(m)
            u = v + 0.5 * g / np.linalg.norm(g)
            t2, _, _ = _power(G, u / np.linalg.norm(u), tol, max(1, max_iters - used), rng)
            theta = max(theta, t2)
    except ConvergenceError as exc:
        raise ConvergenceError(str(exc), float(np.sqrt(exc.estimate ** 2 * scale)), exc.iterations) from None
    return float(np.sqrt(theta * scale))


def top_k_right_singular_vectors(
    A,
    k: int,
    tol: float = 1e-12,
    max_iters: int = 10_000,
    seed: int = 0,
    oversample: int = 5,
    gap_tol: float = 1e-10,
) -> SubspaceResult:
    """Orthonormal basis of the dominant k-dimensional right singular subspace.

    Block subspace iteration on ``A^T A`` with Rayleigh-Ritz extraction.  The
    block carries ``oversample`` extra columns so that the (k+1)-st singular
    value is estimated too; ``unique`` is False when it ties with the k-th
    within ``gap_tol`` (relative to sigma_1), in which case ``V`` is one valid
    basis among many.
    """
    A = as_matrix(A)
    d = A.shape[1]
    if not 1 <= k <= min(A.shape):
        raise ValueError(f"k must lie in [1, {min(A.shape)}], got {k}")
    G = A.T @ A
    G = 0.5 * (G + G.T)
    scale = np.abs(G).max()
    if scale == 0.0:
        return SubspaceResult(np.eye(d)[:, :k], np.zeros(k), k == d, 0)
    G = G / scale
    p = min(d, k + max(oversample, 1))
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((d, p)))
    it = 0
    while True:
        it += 1
        H = Q.T @ G @ Q
        evals, evecs = np.linalg.eigh(0.5 * (H + H.T))
        order = np.argsort(evals)[::-1]
        evals, evecs = evals[order], evecs[:, order]
        Q = Q @ evecs
        resid = np.linalg.norm(G @ Q[:, :k] - Q[:, :k] * evals[:k], axis=0)
        if p == d or np.all(resid <= tol * max(evals[0], 1e-300)):
            break
        if it >= max_iters:
            raise ConvergenceError(
                f"subspace iteration did not converge in {max_iters} iterations",
                estimate=Q[:, :k],
                iterations=it,
            )
        Q, _ = np.linalg.qr(G @ Q)
    evals = np.clip(evals, 0.0, None)
    sv = np.sqrt(evals * scale)
    V = Q[:, :k]
    # re-orthonormalize; Ritz vectors are orthonormal only to rounding
    V, R = np.linalg.qr(V)
    V = V * np.sign(np.diag(R))
    unique = True
    if k < d:
        unique = bool(sv[k - 1] - sv[k] > gap_tol * max(sv[0], 1e-300))
    return SubspaceResult(V, sv[:k], unique, it)


def range_projector(A, rank_tol: float = DEFAULT_RANK_TOL) -> ProjectorResult:
    """Orthogonal projector ``Q Q^T`` onto the column space of ``A``.

    Singular values below ``rank_tol * sigma_1`` count as zero.  A zero
    matrix gives the zero projector with rank 0.
    """
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    A = as_matrix(A)
    n = A.shape[0]
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return ProjectorResult(np.zeros((n, n)), np.zeros((n, 0)), 0)
    r = int(np.sum(s > rank_tol * s[0]))
    Q = U[:, :r]
    P = Q @ Q.T
    return ProjectorResult(0.5 * (P + P.T), Q, r)


def least_squares(A, b, rank_tol: float = DEFAULT_RANK_TOL) -> LstsqResult:
    """Minimizer of ``||A x - b||_2`` via QR with column pivoting.

    Rank-deficient systems fall back to the minimum-norm solution and are
    flagged.
    """
    A = as_matrix(A)
    b = np.asarray(b, dtype=float).ravel()
    if b.shape[0] != A.shape[0]:
        raise ValueError(f"b has length {b.shape[0]}, expected {A.shape[0]}")
    Q, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > rank_tol * diag[0])) if diag.size and diag[0] > 0 else 0
    d = A.shape[1]
    if rank == d:
        y = scipy.linalg.solve_triangular(R, Q.T @ b)
        x = np.empty(d)
        x[piv] = y
        deficient = False
    else:
        x = scipy.linalg.lstsq(A, b, cond=rank_tol)[0]
        deficient = True
    res = float(np.linalg.norm(A @ x - b))
    return LstsqResult(x, rank, deficient, res)
