"""Self-contained two-phase dense tableau simplex.

Solves ``min c^T x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq`` with a per-variable
nonnegativity mask (unmasked variables are free and get split into a
difference of two nonnegative parts).  Pivoting follows Bland's rule, so the
method terminates on degenerate problems.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

__all__ = ["LinearProgram", "LPResult", "simplex_solve"]


@dataclass(frozen=True)
class LinearProgram:
    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    nonneg: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        n = c.shape[0]
        if n == 0:
            raise ValueError("LP needs at least one variable")

        def block(A, b, name):
            if A is None and b is None:
                return np.zeros((0, n)), np.zeros(0)
            if A is None or b is None:
                raise ValueError(f"{name}: matrix and right-hand side go together")
            A = np.atleast_2d(np.asarray(A, dtype=float))
            b = np.asarray(b, dtype=float).ravel()
            if A.shape[1] != n or A.shape[0] != b.shape[0]:
                raise ValueError(f"{name}: inconsistent shapes {A.shape} / {b.shape} for {n} variables")
            return A, b

        A_ub, b_ub = block(self.A_ub, self.b_ub, "inequalities")
        A_eq, b_eq = block(self.A_eq, self.b_eq, "equalities")
        nonneg = np.ones(n, dtype=bool) if self.nonneg is None else np.asarray(self.nonneg, dtype=bool).ravel()
        if nonneg.shape[0] != n:
            raise ValueError("nonnegativity mask has the wrong length")
        for arr in (c, A_ub, b_ub, A_eq, b_eq):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LP data must be finite")
        for name, val in (("c", c), ("A_ub", A_ub), ("b_ub", b_ub), ("A_eq", A_eq), ("b_eq", b_eq), ("nonneg", nonneg)):
            object.__setattr__(self, name, val)

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]


class LPResult(NamedTuple):
    x: Optional[np.ndarray]
    value: float
    status: str  # optimal | infeasible | unbounded | iteration_limit
    pivots: int


class _Tableau:
    """Rows ``B^{-1} [A | b]`` plus a reduced-cost row ``[r | -z]``;
    ``basis[i]`` is the column basic in row i.

    Pivot updates accumulate rounding error, so the tableau is rebuilt from
    the original ``A``, ``b`` and the current basis every ``refactor_every``
    pivots and again before optimality is declared.
    """

    def __init__(self, A: np.ndarray, b: np.ndarray, cost: np.ndarray, basis: list[int],
                 tol: float, refactor_every: int = 50):
        self.A = A
        self.b = b
        self.cost = cost
        self.basis = list(basis)
        self.tol = tol
        self.refactor_every = refactor_every
        self.pivots = 0
        self._since = 0
        self.T = np.zeros((A.shape[0] + 1, A.shape[1] + 1))
        self.refactor()

    def refactor(self) -> None:
        m = self.A.shape[0]
        T = self.T
        B = self.A[:, self.basis]
        try:
            T[:m] = np.linalg.solve(B, np.hstack([self.A, self.b[:, None]]))
        except np.linalg.LinAlgError:
            if self._since == 0 and not T[:m].any():
                raise
            return
        T[:m, self.basis] = np.eye(m)
        T[-1, :-1] = self.cost - self.cost[self.basis] @ T[:m, :-1]
        T[-1, -1] = -(self.cost[self.basis] @ T[:m, -1])
        T[-1, self.basis] = 0.0
        self._since = 0

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] /= T[row, col]
        colv = T[:, col].copy()
        colv[row] = 0.0
        T -= np.outer(colv, T[row])
        T[:, col] = 0.0
        T[row, col] = 1.0
        self.basis[row] = col
        self.pivots += 1
        self._since += 1
        if self._since >= self.refactor_every:
            self.refactor()

    def run(self, ncols: int, max_pivots: int, stop_at: Optional[float] = None) -> str:
        """Bland's rule over the first ``ncols`` columns.  With ``stop_at`` the
        loop also ends once the objective value drops to that level."""
        T, tol = self.T, self.tol
        m = T.shape[0] - 1
        while True:
            if stop_at is not None and -T[-1, -1] <= stop_at:
                return "optimal"
            r = T[-1, :ncols]
            neg = np.flatnonzero(r < -tol)
            if neg.size == 0:
                if self._since:
                    self.refactor()
                    continue
                return "optimal"
            if self.pivots >= max_pivots:
                return "iteration_limit"
            col = int(neg[0])
            a = T[:m, col]
            pos = np.flatnonzero(a > tol)
            if pos.size == 0:
                if self._since:
                    self.refactor()
                    continue
                return "unbounded"
            # rounding can leave basic values at -1e-17; treat them as zero
            ratios = np.maximum(T[pos, -1], 0.0) / a[pos]
            best = ratios.min()
            ties = pos[ratios <= best + tol * max(1.0, abs(best))]
            row = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(row, col)


def simplex_solve(lp: LinearProgram, tol: float = 1e-9, max_pivots: int = 1_000_000) -> LPResult:
    n = lp.num_vars
    free = np.flatnonzero(~lp.nonneg)
    # columns: original vars, negative parts of free vars, inequality slacks
    A_ub = np.hstack([lp.A_ub, -lp.A_ub[:, free]]) if lp.A_ub.size else np.zeros((0, n + free.size))
    A_eq = np.hstack([lp.A_eq, -lp.A_eq[:, free]]) if lp.A_eq.size else np.zeros((0, n + free.size))
    c = np.concatenate([lp.c, -lp.c[free]])
    nx = n + free.size
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq
    ns = m_ub
    N = nx + ns
    A = np.zeros((m, N))
    A[:m_ub, :nx] = A_ub
    A[:m_ub, nx:] = np.eye(m_ub)
    A[m_ub:, :nx] = A_eq
    b = np.concatenate([lp.b_ub, lp.b_eq])
    flip = b < 0
    A[flip] *= -1.0
    b = np.where(flip, -b, b)
    cfull = np.concatenate([c, np.zeros(ns)])
    if m == 0:
        if np.any(cfull < 0):
            return LPResult(None, -np.inf, "unbounded", 0)
        return LPResult(np.zeros(n), 0.0, "optimal", 0)

    # slack columns with +1 coefficient start basic; other rows get artificials
    basis = [-1] * m
    for i in range(m_ub):
        if not flip[i]:
            basis[i] = nx + i
    art_rows = [i for i in range(m) if basis[i] < 0]
    na = len(art_rows)
    A1 = np.zeros((m, N + na))
    A1[:, :N] = A
    for j, i in enumerate(art_rows):
        A1[i, N + j] = 1.0
        basis[i] = N + j
    cost1 = np.concatenate([np.zeros(N), np.ones(na)])
    tab = _Tableau(A1, b, cost1, basis, tol)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    feas_tol = 10 * tol * scale
    # a zero artificial sum already certifies feasibility; going on would
    # only cycle through degenerate pivots
    status = tab.run(N + na, max_pivots, stop_at=feas_tol) if na else "optimal"
    if status == "iteration_limit":
        return LPResult(None, float("nan"), status, tab.pivots)
    if na and -tab.T[-1, -1] > feas_tol:
        return LPResult(None, float("nan"), "infeasible", tab.pivots)

    # drive artificials out of the basis; drop rows that are redundant
    keep = []
    for i in range(m):
        if tab.basis[i] >= N:
            row = np.abs(tab.T[i, :N])
            j = int(np.argmax(row))
            if row[j] > tol:
                # the artificial sits at zero, so either pivot sign keeps feasibility
                tab.pivot(i, j)
            else:
                continue
        keep.append(i)
    tab2 = _Tableau(A[keep], b[keep], cfull, [tab.basis[i] for i in keep], tol)
    tab2.pivots = tab.pivots
    status = tab2.run(N, max_pivots)
    if status != "optimal":
        return LPResult(None, float("nan") if status != "unbounded" else -np.inf, status, tab2.pivots)
    z = np.zeros(N)
    z[tab2.basis] = np.maximum(tab2.T[:-1, -1], 0.0)
    x = z[:n].copy()
    x[free] -= z[n:nx]
    return LPResult(x, float(lp.c @ x), "optimal", tab2.pivots)
