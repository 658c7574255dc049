"""Channel realizations, zero-forcing detection vectors and SIC ordering.

Every user (eMBB or URLLC) sees an N x M channel matrix with i.i.d. unit
variance circularly-symmetric complex Gaussian entries.  A user served in
cluster m combines with a unit vector from the null space of its channel with
column m removed, so the other clusters' streams vanish; within that null
space the maximal-ratio direction toward column m is chosen.

Cluster indices are 0-based throughout the package.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, ScenarioConfig

RANK_RTOL = 1e-10
DEGENERATE_GAIN = 1e-14


class DegenerateChannelWarning(RuntimeWarning):
    pass


class DegenerateUserError(ArithmeticError):
    """The target column has (numerically) no component in the null space."""


def user_rng(seed: int, slot: int, user: int) -> np.random.Generator:
    # one independent stream per (seed, slot, user) so any draw is reproducible alone
    return np.random.default_rng([seed, slot, user])


def draw_matrix(rng: np.random.Generator, N: int, M: int) -> np.ndarray:
    re = rng.standard_normal((N, M))
    im = rng.standard_normal((N, M))
    return (re + 1j * im) / np.sqrt(2.0)


@dataclass(frozen=True)
class ChannelRealization:
    """Channels of one mini slot.

    ``H[u]`` is the N x M matrix of eMBB user ``u``.  URLLC channels are drawn
    lazily from stream index ``K + n`` for the n-th arrival of the slot.
    """
    slot: int
    seed: int
    N: int
    M: int
    H: np.ndarray = field(repr=False)

    @property
    def K(self) -> int:
        return self.H.shape[0]

    def urllc(self, n: int) -> np.ndarray:
        return draw_matrix(user_rng(self.seed, self.slot, self.K + n), self.N, self.M)


def sample_channels(config: ScenarioConfig, slot: int, seed: int | None = None) -> ChannelRealization:
    if config.N < config.M:
        raise ConfigError(f"N >= M required (got N={config.N}, M={config.M})")
    seed = config.seed if seed is None else seed
    H = np.stack([draw_matrix(user_rng(seed, slot, u), config.N, config.M)
                  for u in range(config.K)])
    H.setflags(write=False)
    return ChannelRealization(slot=slot, seed=seed, N=config.N, M=config.M, H=H)


def null_space_basis(H_reduced: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the left null space of ``H_reduced`` (N x (M-1))."""
    H_reduced = np.asarray(H_reduced, dtype=complex)
    N = H_reduced.shape[0]
    if H_reduced.ndim == 1:
        H_reduced = H_reduced.reshape(N, 1)
    if H_reduced.shape[1] == 0:
        return np.eye(N, dtype=complex)
    U, s, _ = np.linalg.svd(H_reduced, full_matrices=True)
    smax = s.max() if s.size else 0.0
    rank = int(np.sum(s > RANK_RTOL * smax)) if smax > 0 else 0
    if rank < H_reduced.shape[1]:
        warnings.warn(f"rank-deficient channel (rank {rank} < {H_reduced.shape[1]}); "
                      "null space widened", DegenerateChannelWarning, stacklevel=2)
    return U[:, rank:]


def normalize_phase(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    if abs(v[i]) == 0:
        return v
    return v * (abs(v[i]) / v[i])


def detection_vector(H: np.ndarray, target_col: int) -> np.ndarray:
    """Zero-forcing + MRC detection vector toward column ``target_col``."""
    H = np.asarray(H, dtype=complex)
    M = H.shape[1]
    if not 0 <= target_col < M:
        raise IndexError(f"target_col {target_col} outside 0..{M - 1}")
    U = null_space_basis(np.delete(H, target_col, axis=1))
    proj = U.conj().T @ H[:, target_col]
    norm = np.linalg.norm(proj)
    if norm < DEGENERATE_GAIN:
        raise DegenerateUserError("effective gain is numerically zero")
    return normalize_phase(U @ (proj / norm))


def effective_gain(v: np.ndarray, h: np.ndarray) -> float:
    return float(abs(np.vdot(v, h)) ** 2)


def sic_order(gains) -> list[int]:
    """Indices by decreasing gain; ties keep the lower index first."""
    gains = list(gains)
    return sorted(range(len(gains)), key=lambda i: -gains[i])


@dataclass(frozen=True)
class DetectionSet:
    """Detection vectors and gains of the eMBB users under one clustering.

    ``v[u]`` / ``g[u]`` are indexed by user id; ``order[m]`` lists the members
    of cluster m by decreasing gain.
    """
    v: dict
    g: dict
    order: list


def user_detection(H: np.ndarray, cluster: int) -> tuple[np.ndarray, float]:
    v = detection_vector(H, cluster)
    return v, effective_gain(v, H[:, cluster])


def detection_set(channel: ChannelRealization, assignment) -> DetectionSet:
    """``assignment`` maps user id -> cluster index (sequence or dict)."""
    items = assignment.items() if isinstance(assignment, dict) else enumerate(assignment)
    v, g = {}, {}
    members = [[] for _ in range(channel.M)]
    for u, m in items:
        v[u], g[u] = user_detection(channel.H[u], m)
        members[m].append(u)
    order = [[ms[i] for i in sic_order([g[u] for u in ms])] for ms in members]
    return DetectionSet(v=v, g=g, order=order)


def gain_table(channel: ChannelRealization) -> np.ndarray:
    """K x M table of effective gains for every (user, candidate cluster)."""
    table = np.empty((channel.K, channel.M))
    for u in range(channel.K):
        for m in range(channel.M):
            table[u, m] = user_detection(channel.H[u], m)[1]
    return table
