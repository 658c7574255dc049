"""SINR, Shannon / finite-blocklength rates, latency and fairness."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG2E = 1.0 / math.log(2.0)
EMBB, URLLC = "embb", "urllc"


@dataclass(frozen=True)
class OrderedClusterState:
    """Active members of one cluster in SIC order (decreasing effective gain).

    ``noise[k]`` is ||v_k||^2 / rho.  ``targets[k]`` is the spectral efficiency
    member k must reach: R_min for eMBB, F/(B*D_max) for URLLC.
    """
    cluster_id: int
    user_ids: tuple
    kinds: tuple
    gains: np.ndarray
    noise: np.ndarray
    budget: float = 1.0
    targets: np.ndarray | None = None

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=float)
        n = np.asarray(self.noise, dtype=float)
        object.__setattr__(self, "gains", g)
        object.__setattr__(self, "noise", n)
        t = np.zeros(len(g)) if self.targets is None else np.asarray(self.targets, dtype=float)
        object.__setattr__(self, "targets", t)
        if not (len(g) == len(n) == len(self.user_ids) == len(self.kinds) == len(t)):
            raise ValueError("member fields must have equal length")
        if not np.all(np.isfinite(g)) or np.any(g < 0):
            raise ValueError("gains must be finite and nonnegative")
        if np.any(n <= 0):
            raise ValueError("noise terms must be positive")
        if np.any(np.diff(g) > 0):
            raise ValueError("members must be sorted by decreasing gain")
        if any(k not in (EMBB, URLLC) for k in self.kinds):
            raise ValueError("kind must be 'embb' or 'urllc'")

    def __len__(self):
        return len(self.gains)

    @property
    def is_urllc(self) -> np.ndarray:
        return np.array([k == URLLC for k in self.kinds], dtype=bool)

    @classmethod
    def build(cls, cluster_id, members, rho, budget=1.0):
        """Sort ``members`` = [(user_id, kind, gain, target), ...] into SIC order."""
        members = sorted(members, key=lambda m: -m[2])
        return cls(cluster_id=cluster_id,
                   user_ids=tuple(m[0] for m in members),
                   kinds=tuple(m[1] for m in members),
                   gains=np.array([m[2] for m in members], dtype=float),
                   noise=np.full(len(members), 1.0 / rho),
                   budget=budget,
                   targets=np.array([m[3] for m in members], dtype=float))


def _check_powers(powers) -> np.ndarray:
    p = np.asarray(powers, dtype=float)
    if np.any(p <= 0):
        raise ValueError("power coefficients must be positive")
    return p


def sinr_decode(state: OrderedClusterState, powers, k: int, j: int) -> float:
    """SINR of message j observed at decoder k (both SIC positions, j >= k)."""
    if j < k:
        raise ValueError(f"SIC order violation: message {j} decoded before {k}")
    p = _check_powers(powers)
    g = state.gains[k]
    return float(g * p[j] / (g * p[:j].sum() + state.noise[k]))


def effective_sinr(state: OrderedClusterState, powers, position: int) -> float:
    return sinr_decode(state, powers, position, position)


def all_effective_sinr(state: OrderedClusterState, powers) -> np.ndarray:
    p = _check_powers(powers)
    before = np.concatenate(([0.0], np.cumsum(p)[:-1]))
    return state.gains * p / (state.gains * before + state.noise)


def shannon_rate(sinr):
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0):
        raise ValueError("negative SINR")
    out = np.log2(1.0 + s)
    return float(out) if out.ndim == 0 else out


def dispersion(sinr):
    s = np.asarray(sinr, dtype=float)
    out = 1.0 - 1.0 / (1.0 + s) ** 2
    return float(out) if out.ndim == 0 else out


def q_func(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


# Acklam's rational approximation of the standard normal quantile
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)


def _norm_ppf(p: float) -> float:
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
               ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if p > 1 - 0.02425:
        return -_norm_ppf(1.0 - p)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
           (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


def q_inv(p: float) -> float:
    """Inverse Gaussian Q-function: Q(q_inv(p)) = p."""
    if not 0.0 < p < 1.0:
        raise ValueError("q_inv requires p in (0, 1)")
    if p == 0.5:
        return 0.0
    x = -_norm_ppf(p)
    # one Newton step on Q(x) - p; Q'(x) = -phi(x)
    for _ in range(2):
        phi = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        x += (q_func(x) - p) / phi
    return x


def fbl_penalty_coef(blocklength: int, epsilon: float) -> float:
    """Q^{-1}(eps) log2(e) / sqrt(b): multiplies sqrt(dispersion)."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    return q_inv(epsilon) * LOG2E / math.sqrt(blocklength)


def fbl_rate(sinr, blocklength: int, epsilon: float):
    """Normal-approximation finite-blocklength rate, clamped at zero."""
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0):
        raise ValueError("negative SINR")
    coef = fbl_penalty_coef(blocklength, epsilon)
    out = np.maximum(np.log2(1.0 + s) - np.sqrt(dispersion(s)) * coef, 0.0)
    return float(out) if out.ndim == 0 else out


def latency_ok(qos, rate: float) -> bool:
    if rate <= 0:
        return False
    return qos.packet_bits / (qos.bandwidth_hz * rate) <= qos.d_max * (1 + 1e-12)


def jain_index(rates) -> float:
    r = np.asarray(rates, dtype=float)
    if r.size == 0 or not np.any(r > 0):
        raise ValueError("Jain index undefined for an empty or all-zero list")
    return float(r.sum() ** 2 / (r.size * np.sum(r ** 2)))


def fbl_sinr_threshold(target: float, blocklength: int, epsilon: float) -> float:
    """Smallest SINR on the increasing branch with fbl_rate(SINR) >= target.

    The clamped FBL rate is 0 up to some SINR and increasing afterwards, so
    for target > 0 this inverts it by bisection.
    """
    if target <= 0:
        return 0.0
    coef = fbl_penalty_coef(blocklength, epsilon)

    def f(s):
        return math.log2(1.0 + s) - math.sqrt(1.0 - 1.0 / (1.0 + s) ** 2) * coef - target

    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return hi


def rate_sinr_threshold(kind: str, target: float, qos) -> float:
    if kind == URLLC:
        return fbl_sinr_threshold(target, qos.blocklength, qos.epsilon)
    return 2.0 ** target - 1.0
