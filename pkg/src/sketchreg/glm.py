"""Losses, gradients and Hessians for regularized logistic regression and GLMs.

Conventions: ``X`` is n x d, labels ``y`` live in {-1, +1} for the logistic
model.  ``w(beta)_i = sigma(-y_i x_i^T beta)`` are the per-point weights that
drive the logistic gradient ``-X^T D_y w(beta) + lam * beta``.

A GLM is described by its cumulant ``psi`` with derivatives; its loss is
``sum_i -(t_i x_i^T beta - psi(x_i^T beta)) + lam/2 ||beta||^2`` where ``t``
are the (possibly re-coded) labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "DataSet",
    "GlmSpec",
    "FitResult",
    "sigma",
    "softplus",
    "logistic_weights",
    "logistic_loss",
    "logistic_gradient",
    "logistic_hessian",
    "linear_glm",
    "logistic_glm",
    "glm_loss",
    "glm_gradient",
    "glm_hessian",
    "relu_loss",
    "relu_scaling_gap",
    "scaled_softplus_gap",
]


@dataclass(frozen=True)
class DataSet:
    """Feature matrix plus labels.

    ``label_domain`` is ``"pm_one"`` (labels in {-1, +1}, the default) or
    ``"real"`` for regression-type GLMs.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: Optional[Sequence[str]] = None
    label_domain: str = "pm_one"

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"X must be a nonempty n x d array, got shape {X.shape}")
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"y has {y.shape[0]} entries but X has {X.shape[0]} rows")
        if not np.all(np.isfinite(X)):
            raise ValueError("X has non-finite entries")
        if not np.all(np.isfinite(y)):
            raise ValueError("y has non-finite entries")
        if self.label_domain == "pm_one":
            if not np.all((y == 1.0) | (y == -1.0)):
                raise ValueError("labels must be -1 or +1")
        elif self.label_domain != "real":
            raise ValueError(f"unknown label domain {self.label_domain!r}")
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise ValueError("feature_names length does not match the number of columns")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def with_features(self, X) -> "DataSet":
        """Same labels, new feature matrix (e.g. the sketched ``X P_k``)."""
        return DataSet(X, self.y, None, self.label_domain)


@dataclass(frozen=True)
class GlmSpec:
    """Cumulant function of an exponential-family GLM.

    ``label_map`` re-codes stored labels into the natural response scale
    (identity for regression, ``(y + 1) / 2`` for Bernoulli).
    """

    name: str
    psi: Callable[[np.ndarray], np.ndarray]
    dpsi: Callable[[np.ndarray], np.ndarray]
    d2psi: Callable[[np.ndarray], np.ndarray]
    alpha_u: float
    label_domain: str = "real"
    label_map: Callable[[np.ndarray], np.ndarray] = field(default=lambda y: y)
    check_grid: tuple = (-30.0, 30.0, 601)

    def __post_init__(self):
        if not np.isfinite(self.alpha_u) or self.alpha_u <= 0:
            raise ValueError("alpha_u must be finite and positive")
        lo, hi, m = self.check_grid
        t = np.linspace(lo, hi, int(m))
        curv = np.asarray(self.d2psi(t), dtype=float)
        if np.any(curv < -1e-12):
            raise ValueError(f"{self.name}: psi'' is negative on the check grid")
        if np.any(curv > self.alpha_u * (1 + 1e-12)):
            raise ValueError(f"{self.name}: psi'' exceeds alpha_u on the check grid")

    def targets(self, data: DataSet) -> np.ndarray:
        if self.label_domain == "pm_one" and data.label_domain != "pm_one":
            raise ValueError(f"{self.name} GLM needs labels in {{-1, +1}}")
        return np.asarray(self.label_map(data.y), dtype=float)


@dataclass
class FitResult:
    beta: np.ndarray
    loss: float
    grad_norm: float
    iterations: int
    converged: bool
    lam: float
    loss_history: list = field(default_factory=list, repr=False)
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "beta": [float(b) for b in self.beta],
            "loss": float(self.loss),
            "grad_norm": float(self.grad_norm),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "lambda": float(self.lam),
            "message": self.message,
        }


def sigma(u):
    """Logistic function, evaluated without overflow for any finite input."""
    u = np.asarray(u, dtype=float)
    e = np.exp(-np.abs(u))
    out = np.where(u >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out if out.ndim else float(out)


def softplus(z):
    """``log(1 + e^z)`` as ``max(z, 0) + log1p(e^{-|z|})``."""
    z = np.asarray(z, dtype=float)
    out = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    return out if out.ndim else float(out)


def _check_beta(data: DataSet, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.shape[0] != data.d:
        raise ValueError(f"beta has dimension {beta.shape[0]}, data has d={data.d}")
    return beta


def _check_lam(lam: float) -> float:
    lam = float(lam)
    if not lam >= 0:
        raise ValueError(f"regularization must be >= 0, got {lam}")
    return lam


def _require_pm_one(data: DataSet) -> None:
    if data.label_domain != "pm_one":
        raise ValueError("logistic loss needs labels in {-1, +1}")


def logistic_weights(data: DataSet, beta) -> np.ndarray:
    """``w(beta)_i = sigma(-y_i x_i^T beta)``."""
    beta = _check_beta(data, beta)
    return sigma(-data.y * (data.X @ beta))


def logistic_loss(data: DataSet, beta, lam: float = 0.0) -> float:
    _require_pm_one(data)
    beta = _check_beta(data, beta)
    lam = _check_lam(lam)
    z = -data.y * (data.X @ beta)
    return float(np.sum(softplus(z)) + 0.5 * lam * (beta @ beta))


def logistic_gradient(data: DataSet, beta, lam: float = 0.0) -> np.ndarray:
    _require_pm_one(data)
    beta = _check_beta(data, beta)
    lam = _check_lam(lam)
    w = sigma(-data.y * (data.X @ beta))
    # X_bar^T w with X_bar = -D_y X
    return -(data.X.T @ (data.y * w)) + lam * beta


def logistic_hessian(data: DataSet, beta, lam: float = 0.0) -> np.ndarray:
    _require_pm_one(data)
    beta = _check_beta(data, beta)
    lam = _check_lam(lam)
    m = data.X @ beta
    D = sigma(m) * sigma(-m)
    # D_y^2 = I so X_bar^T D X_bar = X^T D X
    H = data.X.T @ (D[:, None] * data.X)
    H = 0.5 * (H + H.T)
    H[np.diag_indices_from(H)] += lam
    return H


def linear_glm() -> GlmSpec:
    """Gaussian GLM: ``psi(t) = t^2 / 2``, i.e. ridge regression."""
    return GlmSpec(
        name="linear",
        psi=lambda t: 0.5 * np.asarray(t, dtype=float) ** 2,
        dpsi=lambda t: np.asarray(t, dtype=float),
        d2psi=lambda t: np.ones_like(np.asarray(t, dtype=float)),
        alpha_u=1.0,
        label_domain="real",
    )


def logistic_glm() -> GlmSpec:
    """Bernoulli GLM with {-1,+1} labels re-coded to {0,1}."""
    return GlmSpec(
        name="logistic",
        psi=softplus,
        dpsi=sigma,
        d2psi=lambda t: sigma(t) * sigma(-np.asarray(t, dtype=float)),
        alpha_u=0.25,
        label_domain="pm_one",
        label_map=lambda y: (np.asarray(y, dtype=float) + 1.0) / 2.0,
    )


def glm_loss(data: DataSet, spec: GlmSpec, beta, lam: float = 0.0) -> float:
    beta = _check_beta(data, beta)
    lam = _check_lam(lam)
    t = spec.targets(data)
    m = data.X @ beta
    return float(np.sum(spec.psi(m) - t * m) + 0.5 * lam * (beta @ beta))


def glm_gradient(data: DataSet, spec: GlmSpec, beta, lam: float = 0.0) -> np.ndarray:
    beta = _check_beta(data, beta)
    lam = _check_lam(lam)
    t = spec.targets(data)
    m = data.X @ beta
    return data.X.T @ (spec.dpsi(m) - t) + lam * beta


def glm_hessian(data: DataSet, spec: GlmSpec, beta, lam: float = 0.0) -> np.ndarray:
    beta = _check_beta(data, beta)
    lam = _check_lam(lam)
    spec.targets(data)
    D = np.asarray(spec.d2psi(data.X @ beta), dtype=float)
    H = data.X.T @ (D[:, None] * data.X)
    H = 0.5 * (H + H.T)
    H[np.diag_indices_from(H)] += lam
    return H


def relu_loss(data: DataSet, beta) -> float:
    """``sum_i max(0, x_i^T beta)`` over the rows of ``data.X`` as given."""
    beta = _check_beta(data, beta)
    return float(np.sum(np.maximum(data.X @ beta, 0.0)))


def _require_standard_form(data: DataSet) -> None:
    if not np.all(data.y == -1.0):
        raise ValueError("data must be in standard form (all labels -1); see datagen.to_standard_form")


def relu_scaling_gap(data: DataSet, beta, t: float) -> tuple[float, float]:
    """``(|L(t beta)/t - R(beta)|, n/t)`` for standard-form data, unregularized.

    The first entry never exceeds the second.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    _require_standard_form(data)
    beta = _check_beta(data, beta)
    r = data.X @ beta
    # per-point differences avoid cancelling two large sums
    diff = softplus(t * r) / t - np.maximum(r, 0.0)
    gap = abs(float(np.sum(diff)))
    return gap, data.n / t


def scaled_softplus_gap(r, t: float):
    """Per-point ``|log(1 + e^{t r}) / t - max(0, r)|``."""
    r = np.asarray(r, dtype=float)
    out = np.abs(softplus(t * r) / t - np.maximum(r, 0.0))
    return out if out.ndim else float(out)
