"""Exhaustive eMBB clustering by max-min SINR.

For every labeled partition of the K eMBB users into M clusters the
max-min SINR of each cluster is found by bisection on Theta, each step being
an LP feasibility check in the power coefficients.  The partition maximizing
the smallest per-cluster value wins.  Cluster labels are 0-based.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, gain_table
from .config import ConfigError, ScenarioConfig
from .solver import LinearProgram, lp_solve


class ClusteringInfeasible(RuntimeError):
    pass


@dataclass(frozen=True)
class ClusterAssignment:
    """``labels[u]`` is the cluster of eMBB user u."""
    labels: tuple
    M: int

    def __post_init__(self):
        sizes = [0] * self.M
        for m in self.labels:
            sizes[m] += 1
        object.__setattr__(self, "sizes", tuple(sizes))

    @property
    def K(self) -> int:
        return len(self.labels)

    def members(self, m: int) -> list:
        return [u for u, lab in enumerate(self.labels) if lab == m]

    def clusters(self) -> list:
        return [self.members(m) for m in range(self.M)]

    def budget(self, m: int) -> float:
        return self.sizes[m] / self.K


@dataclass
class ClusterEvaluation:
    theta_star: float
    alpha: np.ndarray
    iterations: int = 0


def enumerate_partitions(K: int, M: int, min_size: int = 2, size_profile=None):
    """All labeled assignments with every cluster holding >= min_size users."""
    if K < min_size * M:
        raise ConfigError(f"infeasible configuration: K={K} < {min_size}*M={min_size * M}")
    if size_profile is not None:
        if len(size_profile) != M or sum(size_profile) != K:
            raise ConfigError("size_profile must have M entries summing to K")
        profiles = [tuple(size_profile)]
    else:
        profiles = [p for p in itertools.product(range(min_size, K + 1), repeat=M) if sum(p) == K]
    out = []
    for prof in profiles:
        _fill(list(range(K)), prof, 0, [None] * K, out, M)
    return out


def _fill(remaining, prof, m, labels, out, M):
    if m == len(prof) - 1:
        for u in remaining:
            labels[u] = m
        out.append(ClusterAssignment(tuple(labels), M))
        return
    for chosen in itertools.combinations(remaining, prof[m]):
        for u in chosen:
            labels[u] = m
        rest = [u for u in remaining if u not in chosen]
        _fill(rest, prof, m + 1, labels, out, M)


def build_p3(gains, theta, r_min, rho, budget, mode: str = "pairwise") -> LinearProgram:
    """LP in alpha (SIC order, strongest first) for a fixed Theta.

    Row for decoder k and message j >= k:  g_k a_j >= c (g_k sum_{l<j} a_l + n),
    with c = Theta and c = 2^{R_min,j} - 1.  ``mode='effective'`` keeps k = j only.
    """
    g = np.asarray(gains, float)
    L = g.size
    r = np.broadcast_to(np.asarray(r_min, float), (L,))
    noise = 1.0 / rho
    rows, rhs = [], []
    for k in range(L):
        js = range(k, L) if mode == "pairwise" else (k,)
        for j in js:
            for c in (theta, 2.0 ** r[j] - 1.0):
                if c <= 0:
                    continue
                row = np.zeros(L)
                row[:j] = c * g[k]
                row[j] = -g[k]
                rows.append(row)
                rhs.append(-c * noise)
    rows.append(np.ones(L))
    rhs.append(budget)
    return LinearProgram(c=np.zeros(L), A_ub=np.array(rows), b_ub=np.array(rhs))


def bisect_cluster(gains, delta, r_min, rho, budget, mode: str = "pairwise"):
    """Max-min SINR of one cluster; None when the R_min rows alone are infeasible."""
    g = np.sort(np.asarray(gains, float))[::-1]
    first = lp_solve(build_p3(g, 0.0, r_min, rho, budget, mode))
    if not first.feasible:
        return None
    lo, hi = 0.0, rho * float(g.max()) * budget
    alpha = first.x
    it = 0
    while hi - lo >= delta:
        mid = 0.5 * (lo + hi)
        res = lp_solve(build_p3(g, mid, r_min, rho, budget, mode))
        it += 1
        if res.feasible:
            lo, alpha = mid, res.x
        else:
            hi = mid
    return ClusterEvaluation(theta_star=lo, alpha=alpha, iterations=it)


def cascade_theta(gains, rho, budget) -> float:
    """Closed-form max-min effective SINR of a sorted cluster (no R_min).

    With equal SINR t for everyone, alpha_k = t (S_{k-1} + n/g_k); the budget
    is exhausted at the largest t, found by bisection on the monotone cost.
    """
    g = np.sort(np.asarray(gains, float))[::-1]
    ntil = 1.0 / (rho * g)

    def cost(t):
        s = 0.0
        for nk in ntil:
            s += t * (s + nk)
        return s

    lo, hi = 0.0, rho * float(g.max()) * budget
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cost(mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


def cluster_users(channel: ChannelRealization, config: ScenarioConfig, gains=None):
    """Best assignment and its SINR_min; ties keep the earlier enumeration index."""
    table = gain_table(channel) if gains is None else np.asarray(gains)
    K, M = config.K, config.M
    rmins = np.array([config.r_min(u) for u in range(K)])
    cache = {}

    def evaluate(members, m):
        key = (members, m)
        if key not in cache:
            g = table[list(members), m]
            order = np.argsort(-g, kind="stable")
            ev = bisect_cluster(g[order], config.delta, rmins[list(members)][order],
                                config.rho, len(members) / K, config.sinr_mode)
            cache[key] = -math.inf if ev is None else ev.theta_star
        return cache[key]

    best, best_val = None, -math.inf
    for assign in enumerate_partitions(K, M, 2, config.size_profile):
        val = math.inf
        for m, members in enumerate(assign.clusters()):
            val = min(val, evaluate(tuple(members), m))
            if val <= best_val:
                break   # cannot beat the incumbent
        if val > best_val:
            best, best_val = assign, val
    if best is None:
        raise ClusteringInfeasible("no partition meets the R_min rows of every cluster")
    return best, best_val
