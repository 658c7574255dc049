"""SCA / difference-of-convex power allocation for punctured MIMO-NOMA clusters.

The eMBB sum rate is written as G1 - G2 with

    G1 = -sum_k log2(g_k S_k + n_k),   G2 = -sum_k log2(g_k S_{k-1} + n_k)

(sums over active eMBB members, S_k the cumulative power of the first k SIC
positions of the member's cluster).  Both are convex; each iteration
linearizes G2 at the current point, and the QoS constraints are handled by
linearizing log2(D2) (H1) and sqrt(dispersion) (H2).  Power vectors are
flat arrays ordered cluster by cluster, SIC position within each cluster.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .rates import (EMBB, LOG2E, URLLC, OrderedClusterState, all_effective_sinr,
                    fbl_penalty_coef, rate_sinr_threshold)
from .solver import BarrierOptions, LogAffineProgram, NumericalFailure, convex_solve

LN2 = math.log(2.0)


class PowerInfeasible(ValueError):
    """No power split meets the QoS targets within the cluster budget."""

    def __init__(self, msg, cluster_id=None, user_id=None, shortfall=None):
        super().__init__(msg)
        self.cluster_id = cluster_id
        self.user_id = user_id
        self.shortfall = shortfall


@dataclass(frozen=True)
class PowerState:
    """All clusters entering one allocation, in a fixed flat layout."""
    clusters: tuple

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(self.clusters))
        sizes = [len(c) for c in self.clusters]
        offsets = np.concatenate(([0], np.cumsum(sizes))).astype(int)
        object.__setattr__(self, "_offsets", offsets)
        gains = np.concatenate([c.gains for c in self.clusters]) if self.clusters else np.zeros(0)
        noise = np.concatenate([c.noise for c in self.clusters]) if self.clusters else np.zeros(0)
        targets = np.concatenate([c.targets for c in self.clusters]) if self.clusters else np.zeros(0)
        urllc = np.concatenate([c.is_urllc for c in self.clusters]) if self.clusters else np.zeros(0, bool)
        # L[i, j] = 1 when j is in i's cluster at an earlier-or-equal SIC position
        n = int(offsets[-1])
        lower = np.zeros((n, n))
        for a, b in zip(offsets[:-1], offsets[1:]):
            lower[a:b, a:b] = np.tril(np.ones((b - a, b - a)))
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "noise", noise)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "urllc", urllc)
        object.__setattr__(self, "incl", lower)
        object.__setattr__(self, "excl", lower - np.eye(n))
        object.__setattr__(self, "budgets", np.array([c.budget for c in self.clusters]))

    @property
    def n(self) -> int:
        return int(self._offsets[-1])

    @property
    def embb(self) -> np.ndarray:
        return ~self.urllc

    def slice(self, i: int) -> slice:
        return slice(int(self._offsets[i]), int(self._offsets[i + 1]))

    def membership(self) -> np.ndarray:
        """Cluster-by-variable incidence matrix (rows sum powers per cluster)."""
        A = np.zeros((len(self.clusters), self.n))
        for i in range(len(self.clusters)):
            A[i, self.slice(i)] = 1.0
        return A

    def split(self, gamma):
        return [np.asarray(gamma)[self.slice(i)] for i in range(len(self.clusters))]


def as_state(clusters) -> PowerState:
    if isinstance(clusters, PowerState):
        return clusters
    if isinstance(clusters, OrderedClusterState):
        return PowerState((clusters,))
    return PowerState(tuple(clusters))


def d1(state: PowerState, gamma) -> np.ndarray:
    return state.gains * (state.incl @ gamma) + state.noise


def d2(state: PowerState, gamma) -> np.ndarray:
    return state.gains * (state.excl @ gamma) + state.noise


def _positive(gamma) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0):
        raise ValueError("power coefficients must be strictly positive")
    return gamma


def g1(state, gamma) -> float:
    state = as_state(state)
    gamma = _positive(gamma)
    return float(-np.sum(np.log2(d1(state, gamma)[state.embb])))


def g2(state, gamma) -> float:
    state = as_state(state)
    gamma = _positive(gamma)
    return float(-np.sum(np.log2(d2(state, gamma)[state.embb])))


def grad_g1(state, gamma) -> np.ndarray:
    state = as_state(state)
    w = np.where(state.embb, state.gains / d1(state, gamma), 0.0)
    return -(state.incl.T @ w) / LN2


def grad_g2(state, gamma) -> np.ndarray:
    """d G2 / d gamma_k = -(1/ln2) sum over weaker-positioned eMBB k' of g_k'/D2_k'."""
    state = as_state(state)
    w = np.where(state.embb, state.gains / d2(state, gamma), 0.0)
    return -(state.excl.T @ w) / LN2


def embb_sum_rate(state, gamma) -> float:
    state = as_state(state)
    return g2(state, gamma) - g1(state, gamma)


def h1(state, gamma, user: int) -> float:
    """log2 of user's interference-plus-noise term (flat index ``user``)."""
    state = as_state(state)
    return float(np.log2(d2(state, gamma)[user]))


def grad_h1(state, gamma, user: int) -> np.ndarray:
    state = as_state(state)
    return state.excl[user] * state.gains[user] / (LN2 * d2(state, gamma)[user])


def _s_terms(state, gamma, user):
    g = state.gains[user]
    c = g * gamma[user]
    x = d2(state, gamma)[user]
    return math.sqrt(c), math.sqrt(c + 2.0 * x), c + x, g


def h2(state, gamma, user: int) -> float:
    """sqrt of the channel dispersion of ``user``, i.e. S1 * S2 / S3 with
    S1 = sqrt(g gamma_k), S2 = sqrt(g gamma_k + 2 g S_{k-1} + 2 n), S3 = g S_k + n."""
    state = as_state(state)
    s1, s2, s3, _ = _s_terms(state, np.asarray(gamma, float), user)
    return s1 * s2 / s3


def grad_h2(state, gamma, user: int) -> np.ndarray:
    state = as_state(state)
    gamma = np.asarray(gamma, float)
    s1, s2, s3, g = _s_terms(state, gamma, user)
    # h = s1 s2 / s3 with s1^2 = c, s2^2 = c + 2x, s3 = c + x
    dh_dc = ((s2 / (2 * s1) + s1 / (2 * s2)) * s3 - s1 * s2) / s3 ** 2
    dh_dx = (s1 / s2 * s3 - s1 * s2) / s3 ** 2
    grad = state.excl[user] * g * dh_dx
    grad[user] = g * dh_dc
    return grad


def exact_rates(state, gamma, qos) -> np.ndarray:
    """Per-member rate: Shannon for eMBB, unclamped FBL approximation for URLLC."""
    state = as_state(state)
    gamma = np.asarray(gamma, float)
    sinr = state.gains * gamma / d2(state, gamma)
    rates = np.log2(1.0 + sinr)
    if state.urllc.any():
        coef = fbl_penalty_coef(qos.blocklength, qos.epsilon)
        disp = 1.0 - 1.0 / (1.0 + sinr[state.urllc]) ** 2
        rates[state.urllc] -= coef * np.sqrt(disp)
    return rates


def qos_slacks(state, gamma, qos) -> np.ndarray:
    """Rate minus target for every member with a positive target."""
    state = as_state(state)
    need = state.targets > 0
    return (exact_rates(state, gamma, qos) - state.targets)[need]


def strictly_feasible(state, gamma, qos, margin: float = 0.0) -> bool:
    state = as_state(state)
    gamma = np.asarray(gamma, float)
    if np.any(gamma <= 0) or not np.all(np.isfinite(gamma)):
        return False
    if np.any(state.membership() @ gamma >= state.budgets):
        return False
    return bool(np.all(qos_slacks(state, gamma, qos) > margin))


def assemble_p5(state, gamma_p, qos) -> LogAffineProgram:
    """Convex surrogate at ``gamma_p``: linearized-G2 objective, linearized QoS."""
    state = as_state(state)
    gp = np.asarray(gamma_p, float)
    if not strictly_feasible(state, gp, qos):
        raise ValueError("gamma_p must be strictly feasible for the QoS constraints")
    n = state.n
    e = state.embb
    alpha_all = state.incl * state.gains[:, None]
    grad2 = grad_g2(state, gp)
    obj_terms = (np.full(int(e.sum()), -LOG2E), alpha_all[e], state.noise[e])
    c = -grad2
    d = -g2(state, gp) + grad2 @ gp

    coef = fbl_penalty_coef(qos.blocklength, qos.epsilon)
    constraints = []
    for k in range(n):
        if state.targets[k] <= 0:
            continue
        gh1 = grad_h1(state, gp, k)
        lin = -gh1
        const = -h1(state, gp, k) + gh1 @ gp - state.targets[k]
        if state.urllc[k]:
            gh2 = grad_h2(state, gp, k)
            lin = lin - coef * gh2
            const += -coef * (h2(state, gp, k) - gh2 @ gp)
        constraints.append({"terms": ([LOG2E], alpha_all[k:k + 1], [state.noise[k]]),
                            "lin": lin, "const": const})
    return LogAffineProgram(n, obj_terms=obj_terms, c=c, d=d, constraints=constraints,
                            G=state.membership(), h=state.budgets, lower=np.zeros(n))


@dataclass
class PowerAllocation:
    state: PowerState
    gamma: np.ndarray

    def by_cluster(self) -> dict:
        out = {}
        for i, cl in enumerate(self.state.clusters):
            for pos, v in enumerate(self.gamma[self.state.slice(i)]):
                out[(cl.cluster_id, pos)] = float(v)
        return out

    def by_user(self) -> dict:
        out = {}
        for i, cl in enumerate(self.state.clusters):
            for uid, kind, v in zip(cl.user_ids, cl.kinds, self.gamma[self.state.slice(i)]):
                out[(kind, uid)] = float(v)
        return out

    def cluster_sums(self) -> np.ndarray:
        return self.state.membership() @ self.gamma


@dataclass
class ScaTrace:
    iterates: list = field(default_factory=list)
    values: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    safeguard_steps: int = 0
    newton_steps: int = 0


def _cascade(cluster: OrderedClusterState, thresholds) -> np.ndarray:
    """Componentwise-minimal powers reaching the given SINR thresholds in SIC order."""
    ntil = cluster.noise / np.maximum(cluster.gains, 1e-300)
    gamma = np.empty(len(cluster))
    acc = 0.0
    for k in range(len(cluster)):
        gamma[k] = thresholds[k] * (acc + ntil[k])
        acc += gamma[k]
    return gamma


def _thresholds(cluster, qos, slack):
    return np.array([rate_sinr_threshold(kind, t + slack, qos)
                     for kind, t in zip(cluster.kinds, cluster.targets)])


def find_feasible_init(state, qos, min_slack: float = 1e-8) -> PowerAllocation:
    """Strictly feasible start for the SCA loop.

    Uses the proportional split when it already clears every target;
    otherwise maximizes the common rate slack t (bisection on t with the
    exact minimal SIC cascade as feasibility test) and returns the cascade at
    t*/2.  Raises PowerInfeasible naming the first member the budget cannot
    cover.
    """
    state = as_state(state)
    parts = []
    for cl in state.clusters:
        L = len(cl)
        if L == 0:
            parts.append(np.zeros(0))
            continue
        prop = np.full(L, cl.budget / L * (1.0 - 1e-6))
        single = PowerState((cl,))
        if np.all(qos_slacks(single, prop, qos) >= min_slack):
            parts.append(prop)
            continue
        base = _cascade(cl, _thresholds(cl, qos, 0.0))
        if base.sum() >= cl.budget:
            k = int(np.argmax(np.cumsum(base) >= cl.budget))
            raise PowerInfeasible(
                f"cluster {cl.cluster_id}: budget {cl.budget:.4g} exhausted at SIC position {k}",
                cluster_id=cl.cluster_id, user_id=(cl.kinds[k], cl.user_ids[k]),
                shortfall=float(base.sum() - cl.budget))
        lo, hi = 0.0, 1.0
        while _cascade(cl, _thresholds(cl, qos, hi)).sum() < cl.budget:
            lo, hi = hi, 2.0 * hi
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _cascade(cl, _thresholds(cl, qos, mid)).sum() < cl.budget:
                lo = mid
            else:
                hi = mid
        t = 0.5 * lo
        if t < min_slack:
            raise PowerInfeasible(f"cluster {cl.cluster_id}: rate slack {lo:.3g} below {min_slack}",
                                  cluster_id=cl.cluster_id, shortfall=0.0)
        parts.append(_cascade(cl, _thresholds(cl, qos, t)))
    return PowerAllocation(state=state, gamma=np.concatenate(parts) if parts else np.zeros(0))


def _solve_p5(prog, x0, barrier, warm_mu):
    if warm_mu is not None:
        opts = dataclasses.replace(barrier or BarrierOptions(), mu0=warm_mu)
        try:
            return convex_solve(prog, x0, opts)
        except NumericalFailure:
            pass   # start too close to the new boundary; take the full path
    return convex_solve(prog, x0, barrier)


def sca_dc_allocate(state, gamma_init, qos, eps: float = 1e-6, max_iter: int = 200,
                    barrier: BarrierOptions | None = None, warm_mu: float | None = 1e-4):
    """Iterate the convex surrogate until the surrogate value moves by < eps.

    The trace stores W^0 = G1 - G2 at the start point followed by the optimal
    surrogate values.  If a surrogate optimum breaks an exact QoS constraint
    (the sqrt-dispersion surrogate is not a global upper bound), the step is
    halved back toward the previous iterate; convexity of the surrogate keeps
    W non-increasing.  From the second iteration on, the barrier starts at
    ``warm_mu`` since the previous iterate is already close to the new optimum.
    """
    state = as_state(state)
    gamma = np.asarray(gamma_init, float).copy()
    if not strictly_feasible(state, gamma, qos):
        raise PowerInfeasible("gamma_init is not strictly feasible; use find_feasible_init")
    trace = ScaTrace(iterates=[gamma.copy()], values=[g1(state, gamma) - g2(state, gamma)])
    for it in range(1, max_iter + 1):
        prog = assemble_p5(state, gamma, qos)
        sol = _solve_p5(prog, gamma, barrier, warm_mu if it > 1 else None)
        trace.newton_steps += sol.newton_steps
        step = sol.x - gamma
        t = 1.0
        new = sol.x
        while not strictly_feasible(state, new, qos):
            t *= 0.5
            trace.safeguard_steps += 1
            if t < 1e-12:
                new = gamma
                break
            new = gamma + t * step
        w = prog.objective(new)
        trace.iterates.append(new.copy())
        trace.values.append(w)
        trace.iterations = it
        gamma = new
        if abs(trace.values[-1] - trace.values[-2]) < eps:
            trace.converged = True
            break
    return PowerAllocation(state=state, gamma=gamma), trace


def allocate(state, qos, eps: float = 1e-6, max_iter: int = 200):
    """find_feasible_init followed by sca_dc_allocate."""
    init = find_feasible_init(state, qos)
    return sca_dc_allocate(init.state, init.gamma, qos, eps=eps, max_iter=max_iter)


def cluster_rates(cluster: OrderedClusterState, gamma, qos) -> np.ndarray:
    return exact_rates(PowerState((cluster,)), gamma, qos)


__all__ = ["PowerState", "PowerAllocation", "ScaTrace", "PowerInfeasible", "as_state",
           "g1", "g2", "grad_g1", "grad_g2", "h1", "grad_h1", "h2", "grad_h2",
           "assemble_p5", "sca_dc_allocate", "find_feasible_init", "allocate",
           "exact_rates", "qos_slacks", "strictly_feasible", "embb_sum_rate",
           "all_effective_sinr", "EMBB", "URLLC"]
