"""The classification complexity measure

    mu_y(X) = sup_{beta != 0} ||(D_y X beta)^-||_1 / ||(D_y X beta)^+||_1

computed exactly by linear programming.  The sup is symmetric under
beta -> -beta, so it does not matter which of the two masses sits on top.
It is infinite exactly when some beta makes every entry of D_y X beta
nonpositive and at least one negative, i.e. when the data are separable.

Two formulations are provided.  ``compute_mu`` optimizes over ``z`` in the
range of D_y X, written as the difference of two nonnegative vectors and
pinned to the range by orthogonality to a complement basis.
``compute_mu_direct`` optimizes over ``beta`` itself with an l1 budget
split into auxiliary variables.  Both minimize ``1^T z`` under ``||z||_1 <= C``,
and at the optimum ``mu = (C - v) / (C + v)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import linalg
from .glm import DataSet
from .lp import LinearProgram, simplex_solve

__all__ = ["MuResult", "LPFailure", "compute_mu", "compute_mu_direct", "mu_ratio"]

INFINITE_MASS_REL = 1e-9
ZERO_OBJECTIVE_REL = 1e-9


class LPFailure(RuntimeError):
    def __init__(self, message: str, status: str):
        super().__init__(message)
        self.status = status


@dataclass
class MuResult:
    mu: float  # math.inf when separable, nan when D_y X = 0
    beta_star: Optional[np.ndarray]
    z_star: np.ndarray
    lp_objective: float
    C: float
    status: str  # finite | infinite_separable | degenerate_zero_range
    method: str = "projector"
    pivots: int = 0

    @property
    def is_finite(self) -> bool:
        return self.status == "finite"

    def objective_mu(self) -> float:
        """``(C - v) / (C + v)`` from the LP value alone."""
        v = self.lp_objective
        return math.inf if self.C + v <= 0 else (self.C - v) / (self.C + v)

    def to_dict(self, include_beta: bool = True) -> dict:
        out = {
            "mu": "inf" if math.isinf(self.mu) else (None if math.isnan(self.mu) else float(self.mu)),
            "status": self.status,
            "lp_objective": float(self.lp_objective),
            "C": float(self.C),
            "method": self.method,
            "pivots": int(self.pivots),
        }
        if include_beta:
            out["beta_star"] = None if self.beta_star is None else [float(b) for b in self.beta_star]
            out["z_star"] = [float(z) for z in self.z_star]
        return out


def mu_ratio(data: DataSet, beta) -> float:
    """Negative over positive l1 mass of ``D_y X beta``; inf when the positive mass is 0."""
    z = data.y * (data.X @ np.asarray(beta, dtype=float))
    pos = float(np.sum(np.maximum(z, 0.0)))
    neg = float(np.sum(np.maximum(-z, 0.0)))
    if pos == 0.0:
        return math.inf if neg > 0 else math.nan
    return neg / pos


def _check_C(C: float) -> float:
    C = float(C)
    if not (C > 0 and math.isfinite(C)):
        raise ValueError(f"budget C must be positive and finite, got {C}")
    return C


def _finish(Z: np.ndarray, z_lp: np.ndarray, beta: np.ndarray, v: float, C: float,
            method: str, pivots: int, basis: np.ndarray) -> MuResult:
    z = Z @ beta
    pos = float(np.sum(np.maximum(z, 0.0)))
    neg = float(np.sum(np.maximum(-z, 0.0)))
    if abs(v) <= ZERO_OBJECTIVE_REL * C and neg + pos <= INFINITE_MASS_REL * C:
        # 1^T z vanishes on the whole range, so every direction balances; the
        # LP may sit at z = 0, so take any range direction as the witness
        beta = _range_witness(Z, basis, C)
        z = Z @ beta
        pos = float(np.sum(np.maximum(z, 0.0)))
        neg = float(np.sum(np.maximum(-z, 0.0)))
    if pos < INFINITE_MASS_REL * C:
        return MuResult(math.inf, None, z_lp, v, C, "infinite_separable", method, pivots)
    return MuResult(neg / pos, beta, z_lp, v, C, "finite", method, pivots)


def _range_witness(Z: np.ndarray, basis: np.ndarray, C: float) -> np.ndarray:
    u = basis[:, 0]
    u = u * (C / np.sum(np.abs(u)))
    return linalg.least_squares(Z, u).x


def compute_mu(data: DataSet, C: float = 1.0, rank_tol: float = 1e-10) -> MuResult:
    """mu via the LP over ``z = z_plus - z_minus`` restricted to range(D_y X).

    Variables are ``(z_plus, z_minus) >= 0`` (2n of them); constraints are the
    budget ``1^T (z_plus + z_minus) <= C`` and ``N^T (z_plus - z_minus) = 0``,
    where the n - rank columns of N span the orthogonal complement of the range.
    """
    C = _check_C(C)
    Z = data.y[:, None] * data.X
    n = Z.shape[0]
    if not np.any(Z):
        return MuResult(math.nan, None, np.zeros(n), 0.0, C, "degenerate_zero_range", "projector")
    proj = linalg.range_projector(Z, rank_tol)
    r = proj.rank
    Qfull, _ = np.linalg.qr(proj.Q, mode="complete")
    N = Qfull[:, r:]
    c = np.concatenate([np.ones(n), -np.ones(n)])
    A_ub = np.ones((1, 2 * n))
    if r < n:
        A_eq = np.hstack([N.T, -N.T])
        b_eq = np.zeros(n - r)
    else:
        A_eq = b_eq = None
    lp = LinearProgram(c, A_ub, [C], A_eq, b_eq)
    res = simplex_solve(lp)
    if res.status != "optimal":
        raise LPFailure(f"simplex returned {res.status}", res.status)
    z = res.x[:n] - res.x[n:]
    # project onto the range to strip rounding noise before recovering beta
    z = proj.Q @ (proj.Q.T @ z)
    beta = linalg.least_squares(Z, z, rank_tol).x
    return _finish(Z, z, beta, res.value, C, "projector", res.pivots, proj.Q)


def compute_mu_direct(data: DataSet, C: float = 1.0, rank_tol: float = 1e-10) -> MuResult:
    """mu via the LP over ``(beta, t)``: ``-t <= D_y X beta <= t``, ``1^T t <= C``,
    minimizing ``1^T D_y X beta``.  Independent of the range projector."""
    C = _check_C(C)
    Z = data.y[:, None] * data.X
    n, d = Z.shape
    if not np.any(Z):
        return MuResult(math.nan, None, np.zeros(n), 0.0, C, "degenerate_zero_range", "direct")
    c = np.concatenate([Z.sum(axis=0), np.zeros(n)])
    I = np.eye(n)
    A_ub = np.vstack([
        np.hstack([Z, -I]),
        np.hstack([-Z, -I]),
        np.concatenate([np.zeros(d), np.ones(n)])[None, :],
    ])
    b_ub = np.concatenate([np.zeros(2 * n), [C]])
    nonneg = np.concatenate([np.zeros(d, dtype=bool), np.ones(n, dtype=bool)])
    res = simplex_solve(LinearProgram(c, A_ub, b_ub, nonneg=nonneg))
    if res.status != "optimal":
        raise LPFailure(f"simplex returned {res.status}", res.status)
    beta = res.x[:d]
    z = Z @ beta
    basis = np.linalg.svd(Z, full_matrices=False)[0]
    return _finish(Z, z, beta, res.value, C, "direct", res.pivots, basis)
