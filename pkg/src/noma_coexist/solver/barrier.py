"""Log-barrier Newton method for log-affine convex programs.

Problem class::

    minimize    sum_i a_i log(alpha_i @ x + beta_i) + c @ x + d        (a_i <= 0)
    subject to  sum_{t in j} b_t log(alpha_t @ x + beta_t) + E_j @ x + f_j >= 0   (b_t >= 0)
                G @ x <= h
                x > lower

All curvature comes from rank-one terms, so gradients and Hessians are
assembled analytically.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class StartPointError(ValueError):
    """x0 is not strictly inside the feasible region."""


class NumericalFailure(RuntimeError):
    def __init__(self, msg, x):
        super().__init__(msg)
        self.x = x


@dataclass
class BarrierOptions:
    mu0: float = 1.0
    mu_factor: float = 10.0
    stop_gap: float = 1e-8
    armijo: float = 0.01
    shrink: float = 0.5
    max_backtracks: int = 60
    newton_tol: float = 1e-20
    inner_tol: float = 1e-7
    max_newton: int = 200
    boundary_frac: float = 0.99
    compiled: bool = True     # False runs the pure-numpy reference loop


def _terms(coef, alpha, beta, n):
    coef = np.asarray(coef, dtype=float).reshape(-1)
    alpha = np.asarray(alpha, dtype=float).reshape(-1, n)
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if not (coef.size == alpha.shape[0] == beta.size):
        raise ValueError("log term arrays disagree in length")
    return coef, alpha, beta


class LogAffineProgram:
    def __init__(self, n, obj_terms=None, c=None, d=0.0, constraints=(), G=None, h=None,
                 lower=None):
        """
        obj_terms: (a, alpha, beta) arrays for the objective log terms.
        constraints: iterable of dicts with keys ``terms`` (b, alpha, beta),
            ``lin`` (E_j, length n) and ``const`` (f_j).
        """
        self.n = n
        empty = (np.zeros(0), np.zeros((0, n)), np.zeros(0))
        self.a, self.A_obj, self.beta_obj = _terms(*(obj_terms or empty), n)
        if np.any(self.a > 0):
            raise ValueError("objective log coefficients must be <= 0 (convexity)")
        self.c = np.zeros(n) if c is None else np.asarray(c, dtype=float).reshape(n)
        self.d = float(d)

        b, A, beta, owner, E, f = [], [], [], [], [], []
        for j, con in enumerate(constraints):
            cb, ca, cbeta = _terms(*con.get("terms", empty), n)
            if np.any(cb < 0):
                raise ValueError("constraint log coefficients must be >= 0 (concavity)")
            b.append(cb)
            A.append(ca)
            beta.append(cbeta)
            owner.append(np.full(cb.size, j))
            lin = con.get("lin")
            E.append(np.zeros(n) if lin is None else np.asarray(lin, dtype=float).reshape(n))
            f.append(float(con.get("const", 0.0)))
        self.J = len(E)
        self.b = np.concatenate(b) if b else np.zeros(0)
        self.A_con = np.vstack(A) if A else np.zeros((0, n))
        self.beta_con = np.concatenate(beta) if beta else np.zeros(0)
        self.owner = np.concatenate(owner).astype(int) if owner else np.zeros(0, int)
        self.E = np.vstack(E) if E else np.zeros((0, n))
        self.f = np.array(f)
        self.P = np.zeros((self.J, self.b.size))
        self.P[self.owner, np.arange(self.b.size)] = 1.0

        self.G = np.zeros((0, n)) if G is None else np.asarray(G, dtype=float).reshape(-1, n)
        self.h = np.zeros(0) if h is None else np.asarray(h, dtype=float).reshape(-1)
        if self.G.shape[0] != self.h.size:
            raise ValueError("G and h disagree")
        lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float).reshape(n)
        self.lower = lower
        self.bounded = np.isfinite(lower)
        arrays = (self.a, self.A_obj, self.beta_obj, self.c, self.b, self.A_con,
                  self.beta_con, self.E, self.f, self.G, self.h)
        if not all(np.all(np.isfinite(x)) for x in arrays):
            raise ValueError("program data must be finite")

    def kernel_args(self):
        """Program data as the contiguous tuple the compiled loop expects."""
        if getattr(self, "_kargs", None) is None:
            c = np.ascontiguousarray
            self._kargs = (c(self.a), c(self.A_obj), c(self.beta_obj), c(self.c), self.d,
                           c(self.b), c(self.A_con), c(self.beta_con), c(self.owner, dtype=np.int64),
                           c(self.E), c(self.f), c(self.G), c(self.h), c(self.lower),
                           c(self.bounded))
        return self._kargs

    @property
    def m(self) -> int:
        """Number of inequality constraints seen by the barrier."""
        return self.J + self.G.shape[0] + int(self.bounded.sum())

    # objective -----------------------------------------------------------
    def objective(self, x) -> float:
        arg = self.A_obj @ x + self.beta_obj
        return float(self.a @ np.log(arg) + self.c @ x + self.d)

    def objective_grad(self, x) -> np.ndarray:
        arg = self.A_obj @ x + self.beta_obj
        return self.A_obj.T @ (self.a / arg) + self.c

    def objective_hess(self, x) -> np.ndarray:
        arg = self.A_obj @ x + self.beta_obj
        w = -self.a / arg ** 2
        return (self.A_obj * w[:, None]).T @ self.A_obj

    # constraints ---------------------------------------------------------
    def constraint_values(self, x) -> np.ndarray:
        arg = self.A_con @ x + self.beta_con
        return self.P @ (self.b * np.log(arg)) + self.E @ x + self.f

    def constraint_jac(self, x) -> np.ndarray:
        arg = self.A_con @ x + self.beta_con
        return self.P @ (self.A_con * (self.b / arg)[:, None]) + self.E

    def slacks(self, x):
        """All barrier slacks (must be > 0 in the interior) and log arguments."""
        con = self.constraint_values(x) if self.J else np.zeros(0)
        lin = self.h - self.G @ x
        low = (x - self.lower)[self.bounded]
        return np.concatenate([con, lin, low])

    def interior(self, x, margin=0.0) -> bool:
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            return False
        if self.a.size and np.any(self.A_obj @ x + self.beta_obj <= margin):
            return False
        if self.b.size and np.any(self.A_con @ x + self.beta_con <= margin):
            return False
        return bool(np.all(self.slacks(x) > margin))

    # barrier -------------------------------------------------------------
    def _barrier_parts(self, x, mu):
        """Value, gradient and Hessian of objective + mu * barrier."""
        arg_o = self.A_obj @ x + self.beta_obj
        val = self.a @ np.log(arg_o) + self.c @ x + self.d
        grad = self.A_obj.T @ (self.a / arg_o) + self.c
        hess = (self.A_obj * (-self.a / arg_o ** 2)[:, None]).T @ self.A_obj

        if self.J:
            arg_c = self.A_con @ x + self.beta_con
            cval = self.P @ (self.b * np.log(arg_c)) + self.E @ x + self.f
            jac = self.P @ (self.A_con * (self.b / arg_c)[:, None]) + self.E
            val -= mu * np.sum(np.log(cval))
            grad -= mu * jac.T @ (1.0 / cval)
            hess += mu * (jac.T * (1.0 / cval ** 2)) @ jac
            w = self.b / (arg_c ** 2 * cval[self.owner])
            hess += mu * (self.A_con * w[:, None]).T @ self.A_con
        if self.G.shape[0]:
            s = self.h - self.G @ x
            val -= mu * np.sum(np.log(s))
            grad += mu * self.G.T @ (1.0 / s)
            hess += mu * (self.G.T * (1.0 / s ** 2)) @ self.G
        if self.bounded.any():
            s = x[self.bounded] - self.lower[self.bounded]
            val -= mu * np.sum(np.log(s))
            grad[self.bounded] -= mu / s
            hess[self.bounded, self.bounded] += mu / s ** 2
        return float(val), grad, hess

    def barrier_value(self, x, mu) -> float:
        """objective + mu * barrier, or inf outside the interior."""
        arg_o = self.A_obj @ x + self.beta_obj
        parts = [arg_o, self.h - self.G @ x, (x - self.lower)[self.bounded]]
        if self.J:
            arg_c = self.A_con @ x + self.beta_con
            if arg_c.size and arg_c.min() <= 0:
                return np.inf
            parts.append(self.P @ (self.b * np.log(arg_c)) + self.E @ x + self.f)
        allv = np.concatenate(parts)
        if allv.size and not allv.min() > 0:
            return np.inf
        no = arg_o.size
        return float(self.a @ np.log(arg_o) + self.c @ x + self.d - mu * np.log(allv[no:]).sum())


@dataclass
class Solution:
    x: np.ndarray
    objective: float
    kkt_residual: float
    multipliers: np.ndarray
    newton_steps: int = 0
    outer_objectives: list = field(default_factory=list)
    kept_start: bool = False


def kkt_residual(prog: LogAffineProgram, x, multipliers) -> float:
    """Stationarity + complementary slackness (+ sign/feasibility) residual.

    ``multipliers`` follows the order of ``prog.slacks``: concave constraints,
    linear rows, then finite lower bounds.
    """
    x = np.asarray(x, dtype=float)
    lam = np.asarray(multipliers, dtype=float)
    J, r = prog.J, prog.G.shape[0]
    grad = prog.objective_grad(x)
    if J:
        grad = grad - prog.constraint_jac(x).T @ lam[:J]
    if r:
        grad = grad + prog.G.T @ lam[J:J + r]
    if prog.bounded.any():
        grad[prog.bounded] -= lam[J + r:]
    s = prog.slacks(x)
    comp = np.abs(lam * s)
    return float(np.linalg.norm(grad) + comp.sum()
                 + np.abs(np.minimum(lam, 0)).sum() + np.abs(np.minimum(s, 0)).sum())


def _constraint_normals(prog, x):
    """Rows n_i with d(slack_i)/dx = n_i, in ``slacks`` order."""
    parts = []
    if prog.J:
        parts.append(prog.constraint_jac(x))
    if prog.G.shape[0]:
        parts.append(-prog.G)
    if prog.bounded.any():
        parts.append(np.eye(prog.n)[prog.bounded])
    return np.vstack(parts) if parts else np.zeros((0, prog.n))


def _polish_multipliers(prog, x, lam_barrier, ratio=1e-6):
    """Refit the multipliers of near-active rows, kept only if the certificate improves.

    Near the end of the path mu/slack loses digits on rows whose slack is
    ~1e-10.  Those rows are refitted by least squares to the stationarity
    equation (the other rows keep mu/slack); a refit that goes negative drops
    its most negative row back to the barrier value and retries.
    """
    base = kkt_residual(prog, x, lam_barrier)
    if lam_barrier.size == 0:
        return lam_barrier, base
    N = _constraint_normals(prog, x)
    g = prog.objective_grad(x)
    active = list(np.flatnonzero(lam_barrier >= ratio * lam_barrier.max()))
    while active:
        rest = np.setdiff1d(np.arange(lam_barrier.size), active)
        rhs = g - N[rest].T @ lam_barrier[rest]
        sol, *_ = np.linalg.lstsq(N[active].T, rhs, rcond=None)
        if np.all(sol >= 0):
            lam = lam_barrier.copy()
            lam[active] = sol
            res = kkt_residual(prog, x, lam)
            return (lam, res) if res < base else (lam_barrier, base)
        active.pop(int(np.argmin(sol)))
    return lam_barrier, base


def _newton_direction(hess, grad):
    try:
        return np.linalg.solve(hess, -grad)
    except np.linalg.LinAlgError:
        ridge = 1e-12 * max(1.0, np.abs(np.diag(hess)).max())
        return np.linalg.lstsq(hess + ridge * np.eye(len(grad)), -grad, rcond=None)[0]


def _max_step(prog, x, dx, frac):
    # fraction-to-boundary rule for the linear rows and bounds
    rows = [(prog.h - prog.G @ x, -(prog.G @ dx))]
    if prog.bounded.any():
        rows.append(((x - prog.lower)[prog.bounded], dx[prog.bounded]))
    t = 1.0
    for s, ds in rows:
        dec = ds < 0
        if dec.any():
            t = min(t, frac * float(np.min(-s[dec] / ds[dec])))
    return t


def _center(prog, x, mu, opts, counter, tol):
    for _ in range(opts.max_newton):
        val, grad, hess = prog._barrier_parts(x, mu)
        dx = _newton_direction(hess, grad)
        slope = float(grad @ dx)
        if -slope / 2.0 <= tol:
            return x
        if slope >= 0:
            # indefinite numerics; fall back to steepest descent
            dx, slope = -grad, -float(grad @ grad)
        t = _max_step(prog, x, dx, opts.boundary_frac)
        for _ in range(opts.max_backtracks):
            x_new = x + t * dx
            if prog.barrier_value(x_new, mu) <= val + opts.armijo * t * slope:
                break
            t *= opts.shrink
        else:
            # rounding floor: the decrement is already negligible
            if -slope <= 1e-9 * max(1.0, abs(val)):
                return x
            raise NumericalFailure("line search failed", x)
        counter[0] += 1
        x = x_new
    return x


def convex_solve(prog: LogAffineProgram, x0, options: BarrierOptions | None = None) -> Solution:
    opts = options or BarrierOptions()
    x0 = np.asarray(x0, dtype=float).copy()
    if x0.shape != (prog.n,):
        raise ValueError("x0 has the wrong dimension")
    if not prog.interior(x0):
        raise StartPointError("x0 is not strictly interior")
    m = max(prog.m, 1)
    if opts.compiled:
        from . import _kernel
        x, mu, steps, status, outer = _kernel.path_follow(
            x0, float(m), opts.mu0, opts.mu_factor, opts.stop_gap, opts.armijo, opts.shrink,
            opts.max_backtracks, opts.newton_tol, opts.inner_tol, opts.max_newton,
            opts.boundary_frac, *prog.kernel_args())
        if status:
            raise NumericalFailure("line search failed", x)
        counter, outer = [steps], list(outer)
    else:
        mu = opts.mu0
        x = x0
        counter = [0]
        outer = []
        while True:
            last = mu * m <= opts.stop_gap
            x = _center(prog, x, mu, opts, counter, opts.newton_tol if last else opts.inner_tol)
            outer.append(prog.objective(x))
            if last:
                break
            mu /= opts.mu_factor
    lam = mu / np.maximum(prog.slacks(x), 1e-300)
    lam, res = _polish_multipliers(prog, x, lam)
    kept = False
    f0 = prog.objective(x0)
    if outer[-1] > f0:
        x, kept = x0, True
    if kept:
        lam = np.zeros_like(lam)
        res = kkt_residual(prog, x, lam)
    return Solution(x=x, objective=prog.objective(x), kkt_residual=res,
                    multipliers=lam, newton_steps=counter[0], outer_objectives=outer,
                    kept_start=kept)
