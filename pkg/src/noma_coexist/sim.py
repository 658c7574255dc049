"""Mini-slot engine: clustering once, then per slot channels, arrivals,
puncture matching, SIC re-ordering, power allocation and metrics."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import DegenerateUserError, sample_channels, user_detection
from .clustering import ClusterAssignment, cluster_users
from .config import ConfigError, ScenarioConfig
from .matching import build_preferences, gale_shapley, is_stable, is_valid
from .power import (PowerAllocation, PowerInfeasible, PowerState, allocate,
                    embb_sum_rate, exact_rates, find_feasible_init)
from .rates import EMBB, URLLC, OrderedClusterState, fbl_rate, jain_index, latency_ok

log = logging.getLogger(__name__)


class SlotInfeasible(RuntimeError):
    pass


# ---------------------------------------------------------------- baselines

def baseline_equal(state: OrderedClusterState) -> PowerAllocation:
    L = len(state)
    return PowerAllocation(PowerState((state,)), np.full(L, state.budget / L))


def baseline_fixed(state: OrderedClusterState) -> PowerAllocation:
    """k-th user in SIC order (1-based) gets k / sum(k) of the budget."""
    k = np.arange(1, len(state) + 1, dtype=float)
    return PowerAllocation(PowerState((state,)), state.budget * k / k.sum())


def baseline_bcc(state: OrderedClusterState, qos, r_min: float = 0.2) -> PowerAllocation:
    """Every member but the strongest pinned at its minimum rate; the strongest
    takes whatever budget is left.  URLLC members are pinned at their own
    delay-driven target, eMBB members at ``r_min`` (or their own target if lower)."""
    from .rates import rate_sinr_threshold
    L = len(state)
    if L == 1:
        return PowerAllocation(PowerState((state,)), np.array([state.budget]))
    # eMBB members whose target was relaxed to zero are pinned at zero as well
    thr = [rate_sinr_threshold(kind, (t if kind == URLLC else min(r_min, t)), qos)
           for kind, t in zip(state.kinds, state.targets)]
    ntil = state.noise / state.gains

    def powers(x):
        gam = [x]
        for k in range(1, L):
            gam.append(thr[k] * (sum(gam) + ntil[k]))
        return np.array(gam)

    # total power is affine in the strongest user's share
    t0, t1 = powers(0.0).sum(), powers(1.0).sum()
    x = (state.budget - t0) / (t1 - t0)
    if x <= 0:
        raise PowerInfeasible(f"cluster {state.cluster_id}: BCC cascade exceeds budget",
                              cluster_id=state.cluster_id)
    gam = powers(x)
    if state.kinds[0] == URLLC and exact_rates(PowerState((state,)), gam, qos)[0] < state.targets[0]:
        raise PowerInfeasible(f"cluster {state.cluster_id}: strongest URLLC misses its target",
                              cluster_id=state.cluster_id)
    return PowerAllocation(PowerState((state,)), gam)


def oma_rates(state: OrderedClusterState, qos) -> np.ndarray:
    """Equal time sharing: each member uses the full budget for 1/L of the slot."""
    L = len(state)
    snr = state.gains * state.budget / state.noise
    rates = np.log2(1.0 + snr) / L
    u = state.is_urllc
    if u.any():
        rates[u] = fbl_rate(snr[u], qos.blocklength, qos.epsilon) / L
    return rates


def baseline_oma(state: OrderedClusterState, qos) -> "ClusterResult":
    L = len(state)
    return ClusterResult(state=state, gamma=np.full(L, state.budget / L),
                         rates=oma_rates(state, qos))


# ---------------------------------------------------------------- allocation cache

_SCA_CACHE: dict = {}


def _cache_key(state: OrderedClusterState, config: ScenarioConfig):
    q = config.qos
    return (state.gains.tobytes(), state.noise.tobytes(), state.kinds, state.targets.tobytes(),
            state.budget, q.blocklength, q.epsilon, config.eps, config.max_sca_iter)


def sca_cluster(state: OrderedClusterState, config: ScenarioConfig):
    """Adaptive allocation of one cluster, memoized on the numeric state."""
    key = _cache_key(state, config)
    hit = _SCA_CACHE.get(key)
    if hit is None:
        try:
            alloc, trace = allocate(state, config.qos, eps=config.eps, max_iter=config.max_sca_iter)
            hit = (alloc.gamma, trace)
        except PowerInfeasible as exc:
            hit = exc
        if len(_SCA_CACHE) > 200_000:
            _SCA_CACHE.clear()
        _SCA_CACHE[key] = hit
    if isinstance(hit, PowerInfeasible):
        raise hit
    return hit


def clear_caches():
    _SCA_CACHE.clear()
    _CLUSTER_CACHE.clear()


@dataclass
class ClusterResult:
    state: OrderedClusterState
    gamma: np.ndarray
    rates: np.ndarray
    trace: object = None
    relaxed: bool = False


def allocate_cluster(state: OrderedClusterState, config: ScenarioConfig, scheduler=None) -> ClusterResult:
    scheduler = scheduler or config.scheduler
    if len(state) == 0:
        return ClusterResult(state, np.zeros(0), np.zeros(0))
    if scheduler == "oma":
        return baseline_oma(state, config.qos)
    trace = None
    if scheduler == "adaptive":
        gamma, trace = sca_cluster(state, config)
    elif scheduler == "equal":
        gamma = baseline_equal(state).gamma
    elif scheduler == "fixed":
        gamma = baseline_fixed(state).gamma
    elif scheduler == "bcc":
        gamma = baseline_bcc(state, config.qos, config.bcc_r_min).gamma
    else:
        raise ConfigError(f"unknown scheduler {scheduler}")
    rates = exact_rates(PowerState((state,)), gamma, config.qos)
    u = state.is_urllc
    rates[u] = np.maximum(rates[u], 0.0)
    return ClusterResult(state, gamma, rates, trace)


# ---------------------------------------------------------------- slot context

@dataclass
class SlotContext:
    """Everything about one mini slot that matching and allocation need."""
    slot: int
    config: ScenarioConfig
    clustering: ClusterAssignment
    embb_gain: np.ndarray              # gain of each eMBB user toward its own cluster
    urllc_gain: dict                   # URLLC id -> length-M gain vector
    _base: dict = field(default_factory=dict)
    _oour: dict = field(default_factory=dict)

    def target(self, u: int, relax: bool = False) -> float:
        return 0.0 if relax else self.config.r_min(u)

    def cluster_state(self, m: int, punctured=(), urllc=(), relax: bool = False) -> OrderedClusterState:
        cfg = self.config
        members = [(u, EMBB, float(self.embb_gain[u]), self.target(u, relax))
                   for u in self.clustering.members(m) if u not in punctured]
        members += [(n, URLLC, float(self.urllc_gain[n][m]), cfg.qos.urllc_rate) for n in urllc]
        return OrderedClusterState.build(m, members, cfg.rho, self.clustering.budget(m))

    def base_rate(self, m: int) -> float:
        """eMBB rate of cluster m with no arrivals (adaptive allocation).

        A cluster that cannot meet R_min even without arrivals contributes its
        best-effort rate, so it does not veto matches in other clusters.
        """
        if m not in self._base:
            try:
                st = self.cluster_state(m)
                gamma, _ = sca_cluster(st, self.config)
            except PowerInfeasible:
                st = self.cluster_state(m, relax=True)
                gamma, _ = sca_cluster(st, self.config)
            self._base[m] = embb_sum_rate(PowerState((st,)), gamma)
        return self._base[m]

    def oour(self, n: int, e: int, proxy: bool = False) -> float:
        key = (n, e, proxy)
        if key in self._oour:
            return self._oour[key]
        m = self.clustering.labels[e]
        st = self.cluster_state(m, punctured={e}, urllc=(n,))
        others = sum(self.base_rate(j) for j in range(self.clustering.M) if j != m)
        ps = PowerState((st,))
        try:
            if proxy:
                # non-paper shortcut: eMBB rate at the max-common-slack start point
                gamma = find_feasible_init(ps, self.config.qos).gamma
            else:
                gamma, _ = sca_cluster(st, self.config)
            val = others + embb_sum_rate(ps, gamma)
        except PowerInfeasible:
            val = -math.inf
        if math.isnan(val):
            val = -math.inf
        self._oour[key] = val
        return val


# ---------------------------------------------------------------- metrics

@dataclass
class SlotMetrics:
    slot: int
    embb_rates: dict                    # eMBB id -> rate (0 when punctured)
    total: float
    urllc: dict                         # URLLC id -> {"rate", "latency_ok", "cluster", "punctures"}
    jain: float
    sca_iterations: dict                # cluster -> SCA iterations (adaptive only)
    matching: dict                      # URLLC id -> punctured eMBB id
    arrivals: list
    dropped: list = field(default_factory=list)
    infeasible: bool = False
    clusters: list = field(default_factory=list)   # per-cluster audit records
    stable: bool = True
    silenced: list = field(default_factory=list)    # eMBB ids switched off to restore R_min

    def as_record(self) -> dict:
        return {
            "slot": self.slot, "total": self.total, "jain": self.jain,
            "embb_rates": {str(k): v for k, v in self.embb_rates.items()},
            "urllc": {str(k): v for k, v in self.urllc.items()},
            "sca_iterations": {str(k): v for k, v in self.sca_iterations.items()},
            "matching": {str(k): v for k, v in self.matching.items()},
            "arrivals": list(self.arrivals), "dropped": list(self.dropped),
            "infeasible": self.infeasible, "stable": self.stable, "clusters": self.clusters,
            "silenced": list(self.silenced),
        }


def _cluster_record(res: ClusterResult) -> dict:
    st = res.state
    rec = {"cluster": st.cluster_id, "budget": st.budget, "user_ids": list(st.user_ids),
           "kinds": list(st.kinds), "gains": st.gains.tolist(), "noise": st.noise.tolist(),
           "targets": st.targets.tolist(), "gamma": np.asarray(res.gamma).tolist(),
           "rates": np.asarray(res.rates).tolist(), "relaxed": res.relaxed}
    if res.trace is not None:
        rec["W"] = [float(w) for w in res.trace.values]
        rec["converged"] = bool(res.trace.converged)
    return rec


# ---------------------------------------------------------------- engine

@dataclass
class PeriodState:
    config: ScenarioConfig
    clustering: ClusterAssignment
    sinr_min: float
    counts: dict = field(default_factory=dict)     # eMBB id -> cumulative punctures
    next_urllc: int = 0


def draw_arrivals(config: ScenarioConfig, slot: int) -> int:
    if config.arrival_schedule is not None:
        return int(config.arrival_schedule.get(slot, 0))
    rng = np.random.default_rng([config.seed, slot, 7_919])
    if config.max_arrivals_per_slot == 1:
        return int(rng.random() < config.arrival_prob)
    return int(min(rng.binomial(config.max_arrivals_per_slot, config.arrival_prob), config.K))


def _match(ctx: SlotContext, arrivals, counts):
    slots = list(range(ctx.config.K))
    table = {(n, e): ctx.oour(n, e, ctx.config.proxy_oour) for n in arrivals for e in slots}
    prefs = build_preferences(arrivals, slots, table, counts)
    result = gale_shapley(prefs)
    return result, prefs


def run_slot(period: PeriodState, slot: int) -> SlotMetrics:
    cfg = period.config
    K, M = cfg.K, cfg.M
    channel = sample_channels(cfg, slot)
    labels = period.clustering.labels
    gains = np.array([user_detection(channel.H[u], labels[u])[1] for u in range(K)])

    n_arr = draw_arrivals(cfg, slot)
    arrivals = list(range(period.next_urllc, period.next_urllc + n_arr))
    period.next_urllc += n_arr
    ugain = {}
    for i, n in enumerate(arrivals):
        H = channel.urllc(i)
        row = []
        for m in range(M):
            try:
                row.append(user_detection(H, m)[1])
            except DegenerateUserError:
                row.append(0.0)
        ugain[n] = np.array(row)
    ctx = SlotContext(slot, cfg, period.clustering, gains, ugain)

    pending = list(arrivals)
    dropped, infeasible, stable = [], False, True
    relaxed, silenced = set(), set()
    while True:
        pairs = {}
        if pending:
            result, prefs = _match(ctx, pending, period.counts)
            stable = is_stable(result, prefs)
            for n in result.unmatched:
                log.info("slot %d: URLLC %d has no feasible slot; dropped", slot, n)
                dropped.append(n)
            pending = [n for n in pending if n not in result.unmatched]
            pairs = dict(result.pairs)
        punctured = set(pairs.values())
        results, failed = [], None
        for m in range(M):
            urllc_m = sorted(n for n, e in pairs.items() if labels[e] == m)
            st = ctx.cluster_state(m, punctured | silenced, urllc_m, relax=m in relaxed)
            try:
                res = allocate_cluster(st, cfg)
            except PowerInfeasible:
                failed = (m, urllc_m)
                break
            res.relaxed = m in relaxed
            results.append(res)
        if failed is None:
            break
        m, urllc_m = failed
        if cfg.fallback == "abort":
            raise SlotInfeasible(f"slot {slot}: cluster {m} infeasible")
        if cfg.fallback == "relax-rmin" and m not in relaxed:
            relaxed.add(m)
            infeasible = True
            continue
        if urllc_m:
            victim = max(urllc_m)
            log.info("slot %d: cluster %d infeasible; dropping URLLC %d", slot, m, victim)
            dropped.append(victim)
            pending = [n for n in pending if n != victim]
            continue
        infeasible = True
        alive = [u for u in period.clustering.members(m) if u not in punctured | silenced]
        if cfg.fallback == "drop-urllc" and len(alive) > 1:
            # no URLLC left to drop: silence the weakest eMBB user of the cluster
            victim = min(alive, key=lambda u: (gains[u], -u))
            log.info("slot %d: cluster %d infeasible; silencing eMBB %d", slot, m, victim)
            silenced.add(victim)
            continue
        if m not in relaxed:
            # serve the cluster best-effort
            relaxed.add(m)
            continue
        raise SlotInfeasible(f"slot {slot}: cluster {m} infeasible even without QoS targets")

    embb_rates = {u: 0.0 for u in range(K)}
    urllc = {}
    iters = {}
    for res in results:
        st = res.state
        for uid, kind, r in zip(st.user_ids, st.kinds, res.rates):
            if kind == EMBB:
                embb_rates[uid] = float(r)
            else:
                urllc[uid] = {"rate": float(r), "latency_ok": latency_ok(cfg.qos, float(r)),
                              "cluster": st.cluster_id, "punctures": pairs[uid]}
        if res.trace is not None:
            iters[st.cluster_id] = res.trace.iterations
    for e in set(pairs.values()):
        period.counts[e] = period.counts.get(e, 0) + 1
    total = float(sum(embb_rates.values()))
    # fairness over the eMBB users active in this slot (punctured ones excluded)
    active = [r for u, r in embb_rates.items() if u not in punctured | silenced]
    jain = jain_index(active) if sum(active) > 0 else float("nan")
    return SlotMetrics(slot=slot, embb_rates=embb_rates, total=total, urllc=urllc, jain=jain,
                       sca_iterations=iters, matching=dict(sorted(pairs.items())),
                       arrivals=arrivals, dropped=sorted(dropped), infeasible=infeasible,
                       clusters=[_cluster_record(r) for r in results], stable=stable,
                       silenced=sorted(silenced))


_CLUSTER_CACHE: dict = {}


def clustering_for(config: ScenarioConfig):
    """Clustering of the reference slot, shared by every run with the same inputs."""
    key = (config.seed, config.K, config.M, config.N, config.size_profile, config.rho_db,
           tuple(config.r_min(u) for u in range(config.K)), config.delta, config.sinr_mode,
           config.clustering_slot)
    if key not in _CLUSTER_CACHE:
        ch = sample_channels(config, config.clustering_slot)
        _CLUSTER_CACHE[key] = cluster_users(ch, config)
    return _CLUSTER_CACHE[key]


@dataclass
class PeriodSummary:
    total: float                  # eMBB bits/s/Hz summed over the Q slots
    mean_total: float             # per-slot average
    jain: float                   # per-slot Jain index over active eMBB users, averaged
    urllc_served: int
    urllc_dropped: int
    latency_violations: int
    infeasible_slots: int
    sinr_min: float
    clustering: list

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def summarize(metrics: list, period: PeriodState) -> PeriodSummary:
    total = float(sum(sm.total for sm in metrics))
    jains = [sm.jain for sm in metrics if not math.isnan(sm.jain)]
    return PeriodSummary(
        total=total, mean_total=total / len(metrics),
        jain=float(np.mean(jains)) if jains else float("nan"),
        urllc_served=sum(len(sm.urllc) for sm in metrics),
        urllc_dropped=sum(len(sm.dropped) for sm in metrics),
        latency_violations=sum(not v["latency_ok"] for sm in metrics for v in sm.urllc.values()),
        infeasible_slots=sum(sm.infeasible for sm in metrics),
        sinr_min=float(period.sinr_min), clustering=list(period.clustering.labels))


def run_period(config: ScenarioConfig, clustering=None):
    """Cluster once, then run the Q mini slots in order."""
    config.validate()
    if clustering is None:
        clustering, sinr_min = clustering_for(config)
    else:
        clustering, sinr_min = clustering
    period = PeriodState(config, clustering, sinr_min)
    metrics = [run_slot(period, i) for i in range(1, config.Q + 1)]
    return metrics, summarize(metrics, period)


def audit_slot(sm: SlotMetrics, config: ScenarioConfig, tol: float = 1e-6) -> list:
    """Constraint violations of one emitted slot (empty list when clean)."""
    bad = []
    for rec in sm.clusters:
        g = np.asarray(rec["gamma"])
        if g.size and np.any(g <= 0):
            bad.append(f"slot {sm.slot} cluster {rec['cluster']}: nonpositive power")
        if g.sum() > rec["budget"] + 1e-9:
            bad.append(f"slot {sm.slot} cluster {rec['cluster']}: budget exceeded")
    if config.scheduler == "adaptive":
        # every eMBB user still transmitting in a cluster allocated with its
        # real targets must reach R_min; relaxed clusters are reported apart
        for rec in sm.clusters:
            if rec["relaxed"]:
                bad.append(f"slot {sm.slot} cluster {rec['cluster']}: R_min relaxed")
                continue
            for uid, kind, r in zip(rec["user_ids"], rec["kinds"], rec["rates"]):
                if kind == EMBB and r < config.r_min(uid) - tol:
                    bad.append(f"slot {sm.slot}: eMBB {uid} below R_min ({r:.4f})")
        for n, v in sm.urllc.items():
            if not latency_ok(config.qos, v["rate"] * (1 + tol)):
                bad.append(f"slot {sm.slot}: URLLC {n} misses its delay bound")
    if len(sm.matching) + len(sm.dropped) != len(sm.arrivals):
        bad.append(f"slot {sm.slot}: arrivals not all matched or dropped")
    if len(set(sm.matching.values())) != len(sm.matching):
        bad.append(f"slot {sm.slot}: eMBB slot punctured twice")
    return bad
