"""URLLC-to-eMBB puncture matching by deferred acceptance.

Each arriving URLLC user takes over the mini slot of exactly one active eMBB
user.  eMBB users rank URLLC users by OOUR (the total eMBB rate if that
URLLC user alone punctured them); URLLC users rank eMBB users by how often
they were punctured before (fewer first), then by OOUR.  Pairs whose OOUR
allocation is infeasible are left off both lists.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field


class CapacityError(ValueError):
    pass


@dataclass
class PreferenceLists:
    """``urllc[n]`` and ``embb[e]`` are ranked candidate lists, best first."""
    urllc: dict
    embb: dict
    oour: dict = field(default_factory=dict)

    def rank(self):
        """Position lookups: (urllc_rank[n][e], embb_rank[e][n])."""
        ur = {n: {e: i for i, e in enumerate(lst)} for n, lst in self.urllc.items()}
        er = {e: {n: i for i, n in enumerate(lst)} for e, lst in self.embb.items()}
        return ur, er


@dataclass
class PunctureMatching:
    pairs: dict                      # URLLC id -> eMBB user id
    unmatched: list = field(default_factory=list)
    proposals: int = 0

    def partner_of(self, e):
        for n, f in self.pairs.items():
            if f == e:
                return n
        return None


def build_preferences(arrivals, slots, oour, counts) -> PreferenceLists:
    """Rank lists from an OOUR table.

    arrivals: URLLC ids.  slots: active eMBB user ids.  oour[(n, e)]: OOUR value,
    -inf (or missing) when infeasible.  counts[e]: puncture count so far.
    """
    arrivals, slots = list(arrivals), list(slots)
    if not arrivals:
        raise ValueError("no arrivals to match")
    if len(arrivals) > len(slots):
        raise CapacityError(f"{len(arrivals)} arrivals exceed {len(slots)} eMBB slots")
    ok = {(n, e): oour.get((n, e), -math.inf) for n in arrivals for e in slots}
    ok = {k: v for k, v in ok.items() if v > -math.inf}
    urllc = {n: sorted((e for e in slots if (n, e) in ok),
                       key=lambda e: (counts.get(e, 0), -ok[(n, e)], e)) for n in arrivals}
    embb = {e: sorted((n for n in arrivals if (n, e) in ok),
                      key=lambda n: (-ok[(n, e)], n)) for e in slots}
    return PreferenceLists(urllc=urllc, embb=embb, oour=ok)


def gale_shapley(prefs: PreferenceLists) -> PunctureMatching:
    """URLLC-proposing deferred acceptance over incomplete lists."""
    _, erank = prefs.rank()
    nxt = {n: 0 for n in prefs.urllc}
    holder = {}                     # eMBB -> URLLC currently held
    free = sorted(prefs.urllc)
    unmatched, proposals = [], 0
    while free:
        n = free.pop(0)
        lst = prefs.urllc[n]
        if nxt[n] >= len(lst):
            unmatched.append(n)
            continue
        e = lst[nxt[n]]
        nxt[n] += 1
        proposals += 1
        cur = holder.get(e)
        if cur is None:
            holder[e] = n
        elif erank[e][n] < erank[e][cur]:
            holder[e] = n
            free.append(cur)
        else:
            free.append(n)
    pairs = {n: e for e, n in holder.items()}
    return PunctureMatching(pairs=dict(sorted(pairs.items())), unmatched=sorted(unmatched),
                            proposals=proposals)


def blocking_pairs(matching: PunctureMatching, prefs: PreferenceLists) -> list:
    urank, erank = prefs.rank()
    held = {e: n for n, e in matching.pairs.items()}
    out = []
    for n, lst in prefs.urllc.items():
        mine = matching.pairs.get(n)
        limit = urank[n][mine] if mine in urank[n] else len(lst)
        for e in lst[:limit]:
            cur = held.get(e)
            if cur is None or erank[e][n] < erank[e].get(cur, math.inf):
                out.append((n, e))
    return out


def is_stable(matching: PunctureMatching, prefs: PreferenceLists) -> bool:
    return not blocking_pairs(matching, prefs)


def is_valid(matching: PunctureMatching) -> bool:
    """Each URLLC user at most one slot and each eMBB slot at most one URLLC."""
    es = list(matching.pairs.values())
    return len(es) == len(set(es))


def oour(n, e, slot, proxy: bool = False) -> float:
    """Total eMBB rate when URLLC user ``n`` alone punctures eMBB user ``e``.

    ``slot`` is the simulator's per-slot context; it supplies the cluster
    states and memoizes the no-arrival rate of untouched clusters.  Infeasible
    allocations rank as -inf.
    """
    return slot.oour(n, e, proxy=proxy)
