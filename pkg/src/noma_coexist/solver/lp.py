"""Dense primal simplex for small linear programs.

Solves ``minimize c @ x  s.t.  A_ub @ x <= b_ub`` with per-variable
nonnegativity (free variables are split internally).  Rows with a negative
right-hand side get an artificial variable; the big-M penalty on artificials
is kept symbolic as a second reduced-cost row compared lexicographically, so
no numeric M has to be chosen.  Bland's rule picks entering and leaving
variables, which rules out cycling.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    nonneg: np.ndarray | None = None

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        A = np.asarray(self.A_ub, dtype=float).reshape(-1, c.size)
        b = np.atleast_1d(np.asarray(self.b_ub, dtype=float))
        mask = np.ones(c.size, bool) if self.nonneg is None else np.asarray(self.nonneg, bool)
        if A.shape[0] != b.size or mask.size != c.size:
            raise ValueError("inconsistent LP dimensions")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("LP data must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A_ub", A)
        object.__setattr__(self, "b_ub", b)
        object.__setattr__(self, "nonneg", mask)

    @property
    def n(self) -> int:
        return self.c.size


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == OPTIMAL


def _pivot(T, rM, rc, row, col):
    T[row] /= T[row, col]
    colv = T[:, col].copy()
    colv[row] = 0.0
    T -= np.outer(colv, T[row])
    rM -= rM[col] * T[row]
    rc -= rc[col] * T[row]


def lp_solve(prog: LinearProgram, tol: float = 1e-9, max_iter: int = 50_000) -> LPResult:
    n0 = prog.n
    free = np.flatnonzero(~prog.nonneg)
    # x = [x_orig, x_neg(free)] with x_orig[free] - x_neg >= ...
    A = np.hstack([prog.A_ub, -prog.A_ub[:, free]])
    c = np.concatenate([prog.c, -prog.c[free]])
    b = prog.b_ub.copy()
    m, n = A.shape

    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    slack_sign = np.where(neg, -1.0, 1.0)
    art_rows = np.flatnonzero(neg)
    n_art = art_rows.size
    ncols = n + m + n_art

    T = np.zeros((m, ncols + 1))
    T[:, :n] = A
    T[np.arange(m), n + np.arange(m)] = slack_sign
    T[art_rows, n + m + np.arange(n_art)] = 1.0
    T[:, -1] = b

    basis = np.where(neg, 0, n + np.arange(m))
    basis[art_rows] = n + m + np.arange(n_art)

    costM = np.zeros(ncols + 1)
    costM[n + m:n + m + n_art] = 1.0
    costc = np.zeros(ncols + 1)
    costc[:n] = c
    # reduced costs: r = cost - cost_B @ T ; last entry holds -objective
    rM = costM - costM[basis] @ T
    rc = costc - costc[basis] @ T

    scale = max(1.0, float(np.abs(T).max()))
    ztol = tol * scale
    allowed = np.ones(ncols, bool)

    it = 0
    status = None
    while it < max_iter:
        it += 1
        phase1 = -rM[-1] > ztol
        cand = (rM[:ncols] < -ztol) | ((np.abs(rM[:ncols]) <= ztol) & (rc[:ncols] < -ztol))
        cand &= allowed
        if phase1:
            cand &= rM[:ncols] < -ztol
        if not cand.any():
            status = INFEASIBLE if phase1 else OPTIMAL
            break
        col = int(np.argmax(cand))
        colv = T[:, col]
        pos = colv > ztol
        if not pos.any():
            status = UNBOUNDED
            break
        ratios = np.full(m, np.inf)
        ratios[pos] = T[pos, -1] / colv[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + ztol * max(1.0, abs(best)))
        row = int(ties[np.argmin(basis[ties])])
        leaving = basis[row]
        _pivot(T, rM, rc, row, col)
        basis[row] = col
        if leaving >= n + m:
            allowed[leaving] = False
    else:
        raise RuntimeError("simplex iteration limit reached")

    if status != OPTIMAL:
        return LPResult(status=status, iterations=it)

    z = np.zeros(ncols)
    z[basis] = np.maximum(T[:, -1], 0.0)
    x = z[:n0].copy()
    x[free] -= z[n0:n]
    viol = float(np.max(prog.A_ub @ x - prog.b_ub, initial=0.0))
    if viol > tol:
        # phase one stopped on a scaled tolerance; the point does not meet the rows
        return LPResult(status=INFEASIBLE, iterations=it, extra={"violation": viol})
    return LPResult(status=OPTIMAL, x=x, objective=float(prog.c @ x), iterations=it)


def lp_feasible(prog: LinearProgram, tol: float = 1e-9) -> bool:
    return lp_solve(prog, tol=tol).feasible
