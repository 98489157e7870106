"""Computable bounds on sketched logistic regression and GLMs.

Forward error of a feature sketch ``P_k`` is ``||P_k beta_k - beta_d||^2``.
It is sandwiched by the quantity

    phi = beta_d^T (I - P_k P_k^T) X^T D_y w(P_k beta_k)

as ``4 phi / (||X||^2 + lam) <= error <= 2 phi / lam`` (both fits at the same
ridge weight).  ``lower_smooth = phi / alpha`` with the smoothness constant
``alpha = ||X||^2 / 4 + lam`` is also reported; it is what the smoothness
argument yields directly and the form that carries over to GLMs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import linalg
from .glm import (
    DataSet,
    GlmSpec,
    logistic_hessian,
    logistic_loss,
    sigma,
    softplus,
)
from .sketch import SketchMatrix
from .solver import SolveConfig, fit_full, fit_glm, fit_glm_sketched, fit_sketched

__all__ = [
    "BoundReport",
    "CrossEntropyReport",
    "SegmentReport",
    "CoresetSize",
    "NonConvergenceError",
    "default_slack",
    "phi",
    "glm_phi",
    "forward_error_report",
    "glm_forward_error_report",
    "report_from_fits",
    "mismatched_reg_term",
    "lowrank_loss_gap",
    "cross_entropy_report",
    "coreset_size_estimate",
    "coreset_relative_error",
    "segment_constant_check",
]


class NonConvergenceError(RuntimeError):
    def __init__(self, message: str, fit=None):
        super().__init__(message)
        self.fit = fit


def default_slack(upper: float) -> float:
    """Tolerance absorbing the solvers' residual gradient."""
    return max(1e-8, 1e-6 * (1.0 + upper))


@dataclass
class BoundReport:
    phi: float
    upper: float
    lower: float
    lower_smooth: float
    actual: float
    spectral_norm_sq: float
    lam: float
    alpha_smooth: float
    sandwich_ok: bool
    slack: float
    n: int = 0
    d: int = 0
    k: int = 0
    sketch: str = ""
    model: str = "logistic"
    beta_d: Optional[np.ndarray] = field(default=None, repr=False)
    beta_k: Optional[np.ndarray] = field(default=None, repr=False)

    def ratio(self) -> float:
        """upper / lower; equals (||X||^2 + lam) / (2 lam) whenever phi != 0."""
        return self.upper / self.lower

    def to_dict(self, include_betas: bool = False) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("beta_d", "beta_k", "lam")}
        out["lambda"] = self.lam
        if include_betas:
            out["beta_d"] = [float(b) for b in self.beta_d]
            out["beta_k"] = [float(b) for b in self.beta_k]
        return out


@dataclass
class CrossEntropyReport:
    p: np.ndarray
    q: np.ndarray
    H_total: float
    bound: float
    phi: float
    clamped: bool

    def to_dict(self) -> dict:
        return {
            "p": [float(v) for v in self.p],
            "q": [float(v) for v in self.q],
            "H_total": self.H_total,
            "bound": self.bound,
            "phi": self.phi,
            "clamped": self.clamped,
        }


def _P(P_k) -> np.ndarray:
    return np.asarray(getattr(P_k, "P", P_k), dtype=float)


def _check_dims(data: DataSet, P: np.ndarray, beta_d, beta_k):
    beta_d = np.asarray(beta_d, dtype=float).ravel()
    beta_k = np.asarray(beta_k, dtype=float).ravel()
    if P.shape[0] != data.d:
        raise ValueError(f"sketch has {P.shape[0]} rows, data has d={data.d}")
    if beta_d.shape[0] != data.d:
        raise ValueError(f"beta_d has dimension {beta_d.shape[0]}, expected {data.d}")
    if beta_k.shape[0] != P.shape[1]:
        raise ValueError(f"beta_k has dimension {beta_k.shape[0]}, expected k={P.shape[1]}")
    return beta_d, beta_k


def _residual_direction(P: np.ndarray, beta_d: np.ndarray) -> np.ndarray:
    # (I - P P^T) beta_d without forming the d x d projector
    return beta_d - P @ (P.T @ beta_d)


def phi(data: DataSet, P_k, beta_d, beta_k) -> float:
    """``beta_d^T (I - P P^T) X^T D_y w(P beta_k)`` with ``w_i = sigma(-y_i x_i^T beta)``."""
    P = _P(P_k)
    beta_d, beta_k = _check_dims(data, P, beta_d, beta_k)
    w = sigma(-data.y * (data.X @ (P @ beta_k)))
    r = _residual_direction(P, beta_d)
    return float(r @ (data.X.T @ (data.y * w)))


def glm_phi(data: DataSet, spec: GlmSpec, P_k, beta_d, beta_k) -> float:
    """GLM analogue with weights ``w = t - psi'(X P beta_k)``."""
    P = _P(P_k)
    beta_d, beta_k = _check_dims(data, P, beta_d, beta_k)
    t = spec.targets(data)
    w = t - spec.dpsi(data.X @ (P @ beta_k))
    r = _residual_direction(P, beta_d)
    return float(r @ (data.X.T @ w))


def mismatched_reg_term(beta_d, beta_k, P_k, lam: float, mu: float) -> float:
    """Extra upper-bound term ``2 (lam - mu) / lam * (||beta_k||^2 - beta_d^T P beta_k)``
    that appears when the sketched problem uses ridge weight ``mu != lam``.

    Informational only; the reports always use ``mu == lam`` where it vanishes.
    """
    P = _P(P_k)
    beta_d = np.asarray(beta_d, dtype=float)
    beta_k = np.asarray(beta_k, dtype=float)
    return float(2.0 * (lam - mu) / lam * (beta_k @ beta_k - beta_d @ (P @ beta_k)))


def _assemble(
    phi_val: float,
    actual: float,
    snorm_sq: float,
    lam: float,
    alpha: float,
    lower: float,
    slack: Optional[float],
    **extra,
) -> BoundReport:
    upper = 2.0 * phi_val / lam
    lower_smooth = phi_val / alpha
    slack = default_slack(upper) if slack is None else float(slack)
    ok = bool(lower - slack <= actual <= upper + slack)
    return BoundReport(
        phi=phi_val,
        upper=upper,
        lower=lower,
        lower_smooth=lower_smooth,
        actual=actual,
        spectral_norm_sq=snorm_sq,
        lam=lam,
        alpha_smooth=alpha,
        sandwich_ok=ok,
        slack=slack,
        **extra,
    )


def _require_converged(fit, which: str):
    if not fit.converged:
        raise NonConvergenceError(
            f"{which} fit did not converge (grad norm {fit.grad_norm:.3e}, {fit.message})", fit
        )


def report_from_fits(
    data: DataSet,
    P_k,
    lam: float,
    beta_d,
    beta_k,
    snorm_sq: Optional[float] = None,
    slack: Optional[float] = None,
) -> BoundReport:
    """Logistic bound report from already-computed optima at ridge weight ``lam``."""
    lam = float(lam)
    if not lam > 0:
        raise ValueError("the forward-error sandwich needs lambda > 0")
    P = _P(P_k)
    beta_d, beta_k = _check_dims(data, P, beta_d, beta_k)
    if snorm_sq is None:
        snorm_sq = linalg.spectral_norm(data.X) ** 2
    ph = phi(data, P, beta_d, beta_k)
    diff = P @ beta_k - beta_d
    return _assemble(
        ph,
        float(diff @ diff),
        snorm_sq,
        lam,
        0.25 * snorm_sq + lam,
        4.0 * ph / (snorm_sq + lam),
        slack,
        n=data.n,
        d=data.d,
        k=P.shape[1],
        sketch=P_k.label() if isinstance(P_k, SketchMatrix) else "custom",
        model="logistic",
        beta_d=beta_d,
        beta_k=beta_k,
    )


def forward_error_report(
    data: DataSet,
    P_k,
    lam: float,
    cfg: SolveConfig = SolveConfig(),
    mu_reg: Optional[float] = None,
    slack: Optional[float] = None,
) -> BoundReport:
    """Fit the full and sketched problems at the same ridge weight and report
    phi, both bounds and the measured forward error."""
    lam = float(lam)
    if not lam > 0:
        raise ValueError("the forward-error sandwich needs lambda > 0")
    if mu_reg is not None and float(mu_reg) != lam:
        raise ValueError("bound reports require the sketched ridge weight to equal lambda")
    full = fit_full(data, lam, cfg)
    _require_converged(full, "full")
    sk = fit_sketched(data, P_k, lam, cfg)
    _require_converged(sk, "sketched")
    return report_from_fits(data, P_k, lam, full.beta, sk.beta, slack=slack)


def glm_forward_error_report(
    data: DataSet,
    spec: GlmSpec,
    P_k,
    lam: float,
    cfg: SolveConfig = SolveConfig(),
    slack: Optional[float] = None,
) -> BoundReport:
    """GLM version; the lower bound is ``phi / (alpha_u ||X||^2 + lam)``."""
    lam = float(lam)
    if not lam > 0:
        raise ValueError("the forward-error sandwich needs lambda > 0")
    if not np.isfinite(spec.alpha_u):
        raise ValueError("alpha_u must be finite")
    P = _P(P_k)
    full = fit_glm(data, spec, lam, cfg)
    _require_converged(full, "full")
    sk = fit_glm_sketched(data, spec, P, lam, cfg)
    _require_converged(sk, "sketched")
    snorm_sq = linalg.spectral_norm(data.X) ** 2
    ph = glm_phi(data, spec, P, full.beta, sk.beta)
    alpha = spec.alpha_u * snorm_sq + lam
    diff = P @ sk.beta - full.beta
    return _assemble(
        ph,
        float(diff @ diff),
        snorm_sq,
        lam,
        alpha,
        ph / alpha,
        slack,
        n=data.n,
        d=data.d,
        k=P.shape[1],
        sketch=P_k.label() if isinstance(P_k, SketchMatrix) else "custom",
        model=spec.name,
        beta_d=full.beta,
        beta_k=sk.beta,
    )


def lowrank_loss_gap(data: DataSet, X_tilde, beta) -> tuple[float, float]:
    """``(|L(beta; X) - L(beta; X_tilde)|, sqrt(n) ||X - X_tilde||_2 ||beta||_2)``.

    Unregularized (a ridge term would cancel).  ``X_tilde`` need not be low rank.
    """
    Xt = linalg.as_matrix(X_tilde, "X_tilde")
    if Xt.shape != data.X.shape:
        raise ValueError(f"X_tilde has shape {Xt.shape}, expected {data.X.shape}")
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.shape[0] != data.d:
        raise ValueError(f"beta has dimension {beta.shape[0]}, expected {data.d}")
    a = -data.y * (data.X @ beta)
    b = -data.y * (Xt @ beta)
    gap = abs(float(np.sum(softplus(a) - softplus(b))))
    budget = math.sqrt(data.n) * linalg.spectral_norm(data.X - Xt) * float(np.linalg.norm(beta))
    return gap, budget


def cross_entropy_report(data: DataSet, P_k, beta_d, beta_k, lam: float) -> CrossEntropyReport:
    """Per-point binary cross-entropies between the label-mismatch
    probabilities of ``(I - P P^T) beta_d`` (q) and ``P beta_k`` (p).

    Natural logarithms.  Each summand of phi equals ``H(p_i, q_i) + log(1 - q_i)``
    so ``phi <= H_total``.  Entropies use log-sigmoid forms, so they stay
    exact when p or q round to 0 or 1; the reported p and q are clamped to
    ``[eps, 1 - eps]`` in that case and ``clamped`` is set.
    """
    lam = float(lam)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    P = _P(P_k)
    beta_d, beta_k = _check_dims(data, P, beta_d, beta_k)
    a = data.y * (data.X @ _residual_direction(P, beta_d))
    c = data.y * (data.X @ (P @ beta_k))
    q = sigma(-a)
    p = sigma(-c)
    # -log q = softplus(a), -log(1 - q) = softplus(-a)
    H = p * softplus(a) + (1.0 - p) * softplus(-a)
    H_total = float(np.sum(H))
    eps = np.finfo(float).eps
    clamped = bool(np.any((p <= 0) | (p >= 1) | (q <= 0) | (q >= 1)))
    p = np.clip(p, eps, 1 - eps)
    q = np.clip(q, eps, 1 - eps)
    return CrossEntropyReport(p, q, H_total, 2.0 * H_total / lam, float(np.sum(a * sigma(-c))), clamped)


@dataclass(frozen=True)
class CoresetSize:
    """Order-of-magnitude row count ``ceil(d mu^2 / eps^2)`` (constant taken as 1)."""

    rows: Optional[int]
    unbounded: bool
    order_of_magnitude: bool = True


def _exact(x) -> Fraction:
    # decimal repr so that 0.1 means one tenth
    return Fraction(repr(float(x))) if not isinstance(x, int) else Fraction(x)


def coreset_size_estimate(d: int, mu: float, eps: float) -> CoresetSize:
    if d < 1:
        raise ValueError("d must be >= 1")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if math.isinf(mu):
        return CoresetSize(None, True)
    if not mu > 0:
        raise ValueError("mu must be positive")
    val = Fraction(d) * _exact(mu) ** 2 / _exact(eps) ** 2
    return CoresetSize(math.ceil(val), False)


def coreset_relative_error(
    data: DataSet, rows: Sequence[int], weights, probes: Sequence
) -> float:
    """Worst relative deviation of a weighted row subset's loss from the full loss."""
    rows = [int(r) for r in rows]
    if not rows:
        raise ValueError("rows must be nonempty")
    if len(set(rows)) != len(rows):
        raise ValueError("rows must be distinct")
    if any(not 0 <= r < data.n for r in rows):
        raise ValueError("row index out of range")
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != len(rows):
        raise ValueError("one weight per selected row")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if len(probes) == 0:
        raise ValueError("need at least one probe")
    Xs, ys = data.X[rows], data.y[rows]
    worst = 0.0
    for beta in probes:
        beta = np.asarray(beta, dtype=float).ravel()
        full = logistic_loss(data, beta)
        sub = float(w @ softplus(-ys * (Xs @ beta)))
        worst = max(worst, abs(sub - full) / full)
    return worst


@dataclass
class SegmentReport:
    status: str
    phi: float = float("nan")
    actual: float = float("nan")
    alpha_hat: float = float("nan")
    smooth_const: float = float("nan")
    upper: float = float("nan")
    lower: float = float("nan")
    upper_ok: bool = False
    lower_ok: bool = False
    tolerance: float = 0.05

    def to_dict(self) -> dict:
        return asdict(self)


def segment_constant_check(
    data: DataSet,
    P_k,
    cfg: SolveConfig = SolveConfig(),
    points: int = 101,
    tolerance: float = 0.05,
) -> SegmentReport:
    """Unregularized forward-error check with an empirical curvature constant.

    ``alpha_hat`` is the smallest Hessian eigenvalue over ``points`` equispaced
    points on the segment from ``P beta_k`` through ``beta_d`` out to twice its
    length.  Checks ``actual <= 2 phi / alpha_hat * (1 + tol)`` and
    ``actual >= phi / (||X||^2 / 4) * (1 - tol)``.
    """
    from .solver import SeparableDataError

    P = _P(P_k)
    try:
        full = fit_full(data, 0.0, cfg)
        sk = fit_sketched(data, P, 0.0, cfg)
    except SeparableDataError:
        return SegmentReport("skipped_separable", tolerance=tolerance)
    if not (full.converged and sk.converged):
        return SegmentReport("skipped_nonconvergence", tolerance=tolerance)
    start = P @ sk.beta
    ph = phi(data, P, full.beta, sk.beta)
    diff = start - full.beta
    actual = float(diff @ diff)
    ts = np.linspace(0.0, 2.0, points)
    alpha_hat = min(
        float(np.linalg.eigvalsh(logistic_hessian(data, start + t * (full.beta - start)))[0])
        for t in ts
    )
    smooth = 0.25 * linalg.spectral_norm(data.X) ** 2
    upper = 2.0 * ph / alpha_hat if alpha_hat > 0 else float("inf")
    lower = ph / smooth
    return SegmentReport(
        "ok",
        phi=ph,
        actual=actual,
        alpha_hat=alpha_hat,
        smooth_const=smooth,
        upper=upper,
        lower=lower,
        upper_ok=bool(actual <= upper * (1 + tolerance) + 1e-12),
        lower_ok=bool(actual >= lower * (1 - tolerance) - 1e-12),
        tolerance=tolerance,
    )
