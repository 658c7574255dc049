"""Scenario and QoS configuration.

Defaults reproduce the desk-scale scenario: 9 eMBB users in 3 clusters of
sizes (4, 3, 2), 3 antennas everywhere, 8 mini slots, 30 dB transmit SNR,
500-byte URLLC packets with blocklength 168 and 1e-5 error probability,
R_min = 1 bit/s/Hz and a 0.7 ms delay bound.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Raised for invalid scenario parameters."""


SCHEDULERS = ("adaptive", "equal", "fixed", "bcc", "oma")
FALLBACKS = ("drop-urllc", "relax-rmin", "abort")


@dataclass(frozen=True)
class QosSpec:
    r_min: float = 1.0            # bit/s/Hz per eMBB user
    d_max: float = 0.7e-3         # seconds
    packet_bits: float = 4000.0   # 500 bytes
    bandwidth_hz: float = 1e6
    blocklength: int = 168
    epsilon: float = 1e-5

    def __post_init__(self):
        if self.r_min < 0:
            raise ConfigError("r_min must be nonnegative")
        for name in ("d_max", "packet_bits", "bandwidth_hz"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.blocklength < 1:
            raise ConfigError("blocklength must be a positive integer")
        if not 0 < self.epsilon < 0.5:
            raise ConfigError("epsilon must lie in (0, 0.5)")

    @property
    def urllc_rate(self) -> float:
        """Spectral efficiency a URLLC user needs to meet its delay bound."""
        return self.packet_bits / (self.bandwidth_hz * self.d_max)


@dataclass(frozen=True)
class ScenarioConfig:
    K: int = 9
    M: int = 3
    N: int = 3
    Q: int = 8
    size_profile: tuple[int, ...] | None = (4, 3, 2)
    rho_db: float = 30.0
    qos: QosSpec = field(default_factory=QosSpec)
    # per-user override of qos.r_min, indexed by eMBB user id
    r_min_per_user: tuple[float, ...] | None = None
    # slot (1-based) -> number of arrivals; None selects the Bernoulli mode
    arrival_schedule: dict[int, int] | None = None
    arrival_prob: float = 0.25
    max_arrivals_per_slot: int = 1
    scheduler: str = "adaptive"
    seed: int = 0
    delta: float = 1e-6
    eps: float = 1e-6
    max_sca_iter: int = 200
    fallback: str = "drop-urllc"
    proxy_oour: bool = False
    clustering_slot: int = 1
    sinr_mode: str = "pairwise"
    bcc_r_min: float = 0.2

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.N < self.M:
            raise ConfigError(f"N >= M required (got N={self.N}, M={self.M})")
        if self.M < 1 or self.K < 1:
            raise ConfigError("K and M must be positive")
        if self.K < 2 * self.M:
            raise ConfigError(f"K >= 2M required (got K={self.K}, M={self.M})")
        if self.Q < 1:
            raise ConfigError("Q >= 1 required")
        if self.size_profile is not None:
            if len(self.size_profile) != self.M:
                raise ConfigError("size_profile needs one entry per cluster")
            if sum(self.size_profile) != self.K or min(self.size_profile) < 2:
                raise ConfigError("size_profile must sum to K with every cluster >= 2")
        if self.r_min_per_user is not None and len(self.r_min_per_user) != self.K:
            raise ConfigError("r_min_per_user needs K entries")
        if self.arrival_schedule is not None:
            for slot, count in self.arrival_schedule.items():
                if not 1 <= slot <= self.Q:
                    raise ConfigError(f"arrival slot {slot} outside 1..Q")
                if not 0 <= count <= self.K:
                    raise ConfigError(f"per-slot arrivals must lie in 0..K (slot {slot})")
        if not 0 <= self.arrival_prob <= 1:
            raise ConfigError("arrival_prob must lie in [0, 1]")
        if self.scheduler not in SCHEDULERS:
            raise ConfigError(f"scheduler must be one of {SCHEDULERS}")
        if self.fallback not in FALLBACKS:
            raise ConfigError(f"fallback must be one of {FALLBACKS}")
        if self.sinr_mode not in ("pairwise", "effective"):
            raise ConfigError("sinr_mode must be 'pairwise' or 'effective'")
        if not 1 <= self.clustering_slot <= self.Q:
            raise ConfigError("clustering_slot outside 1..Q")
        if self.delta <= 0 or self.eps <= 0:
            raise ConfigError("tolerances must be positive")

    @property
    def rho(self) -> float:
        return 10.0 ** (self.rho_db / 10.0)

    def r_min(self, user: int) -> float:
        if self.r_min_per_user is not None:
            return float(self.r_min_per_user[user])
        return self.qos.r_min

    def replace(self, **changes) -> "ScenarioConfig":
        """Copy with changes; QoS fields may be given directly (e.g. d_max=...)."""
        qos_fields = {f.name for f in dataclasses.fields(QosSpec)}
        qos_changes = {k: changes.pop(k) for k in list(changes) if k in qos_fields}
        if qos_changes:
            changes["qos"] = dataclasses.replace(changes.get("qos", self.qos), **qos_changes)
        return dataclasses.replace(self, **changes)


def db_to_linear(db: float) -> float:
    return math.pow(10.0, db / 10.0)
