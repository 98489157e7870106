"""Orthonormal feature sketches, truncated-SVD approximations and the
worst-case instance for the additive low-rank loss bound."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import linalg
from .glm import softplus

__all__ = [
    "SketchMatrix",
    "TightnessInstance",
    "coordinate_sketch",
    "top_coefficient_sketch",
    "pca_sketch",
    "random_orthonormal_sketch",
    "custom_sketch",
    "low_rank_approx",
    "tightness_instance",
    "tightness_ratio",
]

KINDS = ("coordinate", "top_coeff", "pca", "random_orthonormal", "custom")


@dataclass(frozen=True)
class SketchMatrix:
    """A d x k matrix with orthonormal columns, tagged by how it was built."""

    P: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or not 1 <= P.shape[1] <= P.shape[0]:
            raise ValueError(f"sketch must be d x k with 1 <= k <= d, got shape {P.shape}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown sketch kind {self.kind!r}")
        err = np.linalg.norm(P.T @ P - np.eye(P.shape[1]))
        if err > 1e-10:
            raise ValueError(f"columns are not orthonormal (||P^T P - I||_F = {err:.2e})")
        P.setflags(write=False)
        object.__setattr__(self, "P", P)

    @property
    def d(self) -> int:
        return self.P.shape[0]

    @property
    def k(self) -> int:
        return self.P.shape[1]

    def label(self) -> str:
        """Short CLI-style description, e.g. ``pca:3`` or ``coord:0,2``."""
        if self.kind == "coordinate":
            return "coord:" + ",".join(str(i) for i in self.meta["indices"])
        if self.kind == "top_coeff":
            return f"topcoef:{self.k}"
        if self.kind == "pca":
            return f"pca:{self.k}"
        if self.kind == "random_orthonormal":
            return f"rand:{self.k}:{self.meta['seed']}"
        return f"custom:{self.k}"


def coordinate_sketch(d: int, indices: Sequence[int]) -> SketchMatrix:
    """Columns ``e_i`` for the given feature indices, in order."""
    idx = [int(i) for i in indices]
    if not idx:
        raise ValueError("need at least one index")
    if len(set(idx)) != len(idx):
        raise ValueError(f"duplicate indices in {idx}")
    bad = [i for i in idx if not 0 <= i < d]
    if bad:
        raise ValueError(f"indices out of range [0, {d}): {bad}")
    P = np.zeros((d, len(idx)))
    P[idx, np.arange(len(idx))] = 1.0
    return SketchMatrix(P, "coordinate", {"indices": idx})


def top_coefficient_sketch(beta_d, k: int) -> SketchMatrix:
    """Keep the k largest-magnitude coefficients; ties go to the lower index."""
    beta = np.asarray(beta_d, dtype=float).ravel()
    d = beta.shape[0]
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in [1, {d}]")
    # stable sort on -|beta| keeps lower indices first among ties
    order = np.argsort(-np.abs(beta), kind="stable")[:k]
    sk = coordinate_sketch(d, sorted(int(i) for i in order))
    return SketchMatrix(sk.P, "top_coeff", {"indices": sk.meta["indices"]})


def pca_sketch(X, k: int, **kwargs: Any) -> SketchMatrix:
    """Top-k right singular vectors of X."""
    X = linalg.as_matrix(X, "X")
    if not 1 <= k <= X.shape[1]:
        raise ValueError(f"k must lie in [1, {X.shape[1]}]")
    if k > min(X.shape):
        # fewer rows than k: pad the dominant subspace with its complement
        res = linalg.top_k_right_singular_vectors(X, min(X.shape), **kwargs)
        V = _complete_basis(res.V, k)
        return SketchMatrix(V, "pca", {"unique": False})
    res = linalg.top_k_right_singular_vectors(X, k, **kwargs)
    return SketchMatrix(res.V, "pca", {"unique": res.unique})


def _complete_basis(V: np.ndarray, k: int) -> np.ndarray:
    d, r = V.shape
    Q, _ = np.linalg.qr(np.hstack([V, np.eye(d)]))
    return np.hstack([V, Q[:, r:k]])


def random_orthonormal_sketch(d: int, k: int, seed: int) -> SketchMatrix:
    """QR-orthonormalized Gaussian d x k draw; a pure function of the seed."""
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in [1, {d}]")
    rng = np.random.Generator(np.random.PCG64(seed))
    Q, R = np.linalg.qr(rng.standard_normal((d, k)))
    Q = Q * np.sign(np.diag(R))
    return SketchMatrix(Q, "random_orthonormal", {"seed": int(seed)})


def custom_sketch(P) -> SketchMatrix:
    return SketchMatrix(P, "custom", {})


def low_rank_approx(X, k: int) -> np.ndarray:
    """Best rank-k approximation ``X V_k V_k^T`` in the spectral norm."""
    X = linalg.as_matrix(X, "X")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= min(X.shape):
        return X.copy()
    V = linalg.top_k_right_singular_vectors(X, k).V
    return (X @ V) @ V.T


@dataclass(frozen=True)
class TightnessInstance:
    """Scaled-identity witness: ``X = x I``, ``X_tilde = (x + s) I``, ``beta = 1``.

    Labels are all -1 so that the loss reads ``sum_i log(1 + e^{x_i^T beta})``.
    With ``pad_to_d`` > n the matrices get zero columns and beta zero entries,
    which changes neither side of the bound.
    """

    X: np.ndarray
    X_tilde: np.ndarray
    beta: np.ndarray
    y: np.ndarray
    x_scale: float
    s: float

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def data(self):
        from .glm import DataSet

        return DataSet(self.X, self.y)

    def achieved_ratio(self) -> float:
        """gap / budget of the additive low-rank bound on this instance."""
        from .bounds import lowrank_loss_gap

        gap, budget = lowrank_loss_gap(self.data(), self.X_tilde, self.beta)
        return gap / budget


def tightness_instance(n: int, x_scale: float, s: float, pad_to_d: int | None = None) -> TightnessInstance:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not s > 0:
        raise ValueError("s must be positive")
    d = n if pad_to_d is None else int(pad_to_d)
    if d < n:
        raise ValueError("pad_to_d must be >= n")
    X = np.zeros((n, d))
    X[:, :n] = x_scale * np.eye(n)
    Xt = np.zeros((n, d))
    Xt[:, :n] = (x_scale + s) * np.eye(n)
    beta = np.zeros(d)
    beta[:n] = 1.0
    return TightnessInstance(X, Xt, beta, -np.ones(n), float(x_scale), float(s))


def tightness_ratio(x_scale: float, s: float) -> float:
    """Closed form ``(log(1 + e^{x+s}) - log(1 + e^x)) / s`` of the witness ratio."""
    return (softplus(x_scale + s) - softplus(x_scale)) / s
