import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from noma_coexist.config import ScenarioConfig
from noma_coexist.matching import (CapacityError, PreferenceLists, PunctureMatching, blocking_pairs,
                                   build_preferences, gale_shapley, is_stable, is_valid)

from oracles import stable_matchings_brute


def random_prefs(rng, n_u, n_e, p_missing=0.0):
    urllc = {n: [int(e) for e in rng.permutation(n_e) if rng.random() >= p_missing] for n in range(n_u)}
    embb = {e: [n for n in rng.permutation(n_u).tolist() if e in urllc[n]] for e in range(n_e)}
    return PreferenceLists(urllc=urllc, embb=embb)


# ---------------------------------------------------------------- build_preferences

def test_equal_counts_rank_purely_by_oour():
    table = {(0, 0): 3.0, (0, 1): 5.0, (0, 2): 4.0}
    p = build_preferences([0], [0, 1, 2], table, {})
    assert p.urllc[0] == [1, 2, 0]


def test_puncture_count_dominates_oour():
    table = {(0, 0): 1.0, (0, 1): 9.0}
    p = build_preferences([0], [0, 1], table, {0: 0, 1: 5})
    assert p.urllc[0] == [0, 1]


def test_two_by_three_hand_ranks():
    table = {(7, 0): 2.0, (7, 1): 3.0, (7, 2): 3.0,
             (8, 0): 4.0, (8, 1): 1.0, (8, 2): -math.inf}
    p = build_preferences([7, 8], [0, 1, 2], table, {1: 1})
    assert p.urllc == {7: [2, 0, 1], 8: [0, 1]}       # slot 1 punctured before, ties by id
    assert p.embb == {0: [8, 7], 1: [7, 8], 2: [7]}   # infeasible pair left off both lists
    assert (8, 2) not in p.oour


def test_ties_resolved_by_lower_id():
    p = build_preferences([3, 1], [0, 5], {(3, 0): 2.0, (1, 0): 2.0, (3, 5): 2.0, (1, 5): 2.0}, {})
    assert p.embb[0] == [1, 3]
    assert p.urllc[3] == [0, 5]


def test_capacity_and_empty_arrivals():
    with pytest.raises(CapacityError):
        build_preferences([0, 1, 2], [0, 1], {}, {})
    with pytest.raises(ValueError):
        build_preferences([], [0, 1], {}, {})


@given(st.integers(0, 2 ** 32 - 1))
def test_lists_are_strict_orders(seed):
    rng = np.random.default_rng(seed)
    n_u, n_e = rng.integers(1, 4), rng.integers(3, 7)
    table = {(n, e): (float(rng.integers(0, 4)) if rng.random() > 0.2 else -math.inf)
             for n in range(n_u) for e in range(n_e)}
    counts = {e: int(rng.integers(0, 3)) for e in range(n_e)}
    p = build_preferences(range(n_u), range(n_e), table, counts)
    for n, lst in p.urllc.items():
        assert len(lst) == len(set(lst))
        keys = [(counts[e], -table[(n, e)], e) for e in lst]
        assert keys == sorted(keys)
    for e, lst in p.embb.items():
        assert len(lst) == len(set(lst))
        assert [-table[(n, e)] for n in lst] == sorted(-table[(n, e)] for n in lst)
        assert all(e in p.urllc[n] for n in lst)


# ---------------------------------------------------------------- gale_shapley

def test_one_by_one():
    m = gale_shapley(PreferenceLists({0: [0]}, {0: [0]}))
    assert m.pairs == {0: 0}


def test_crossed_preferences_get_first_choice():
    p = PreferenceLists({0: [0, 1], 1: [1, 0]}, {0: [1, 0], 1: [0, 1]})
    assert gale_shapley(p).pairs == {0: 0, 1: 1}


def test_conflict_resolved_by_embb_preference():
    p = PreferenceLists({0: [0, 1], 1: [0, 1]}, {0: [1, 0], 1: [0, 1]})
    m = gale_shapley(p)
    assert m.pairs == {0: 1, 1: 0}
    swapped = PunctureMatching({0: 0, 1: 1})
    assert not is_stable(swapped, p)
    assert (1, 0) in blocking_pairs(swapped, p)


def test_empty_matching_is_unstable():
    p = PreferenceLists({0: [0]}, {0: [0]})
    assert not is_stable(PunctureMatching({}), p)


def test_incomplete_lists_leave_user_unmatched():
    p = PreferenceLists({0: [0], 1: [0]}, {0: [0, 1], 1: []})
    m = gale_shapley(p)
    assert m.pairs == {0: 0} and m.unmatched == [1]
    assert is_stable(m, p)


@pytest.mark.parametrize("seed", range(30))
def test_three_by_four_is_urllc_optimal(seed):
    p = random_prefs(np.random.default_rng(seed), 3, 4)
    gs = gale_shapley(p)
    stable = stable_matchings_brute(p)
    assert gs.pairs in stable
    ur, _ = p.rank()
    for other in stable:
        for n in p.urllc:
            assert ur[n][gs.pairs[n]] <= ur[n][other[n]]


def test_brute_force_enumerates_all_injective_matchings():
    # complete lists: 4*3*2 = 24 injective full matchings, the oracle filters them
    p = random_prefs(np.random.default_rng(0), 3, 4)
    full = [c for c in itertools.permutations(range(4), 3)]
    assert len(full) == 24
    stable_full = [dict(enumerate(c)) for c in full
                   if is_stable(PunctureMatching(dict(enumerate(c))), p)]
    assert sorted(map(sorted, map(dict.items, stable_full))) == \
        sorted(map(sorted, map(dict.items, stable_matchings_brute(p))))


@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 0.5))
def test_gs_output_stable_and_valid(seed, p_missing):
    rng = np.random.default_rng(seed)
    n_u = int(rng.integers(1, 5))
    n_e = int(rng.integers(n_u, 8))
    p = random_prefs(rng, n_u, n_e, p_missing)
    m = gale_shapley(p)
    assert is_stable(m, p) and is_valid(m)
    assert set(m.pairs) | set(m.unmatched) == set(p.urllc)
    assert m.proposals <= n_u * n_e
    for n, e in m.pairs.items():
        assert e in p.urllc[n]


def test_is_valid_rejects_shared_slot():
    assert not is_valid(PunctureMatching({0: 1, 1: 1}))


# ---------------------------------------------------------------- OOUR in the simulator

def _slot_context(cfg):
    from noma_coexist import sim
    from noma_coexist.channel import sample_channels, user_detection
    clustering, _ = sim.clustering_for(cfg)
    ch = sample_channels(cfg, 1)
    gains = np.array([user_detection(ch.H[u], clustering.labels[u])[1] for u in range(cfg.K)])
    ug = {0: np.array([user_detection(ch.urllc(0), m)[1] for m in range(cfg.M)])}
    return sim.SlotContext(1, cfg, clustering, gains, ug)


def test_oour_single_member_cluster_counts_zero():
    cfg = ScenarioConfig(K=2, M=1, N=2, size_profile=(2,), arrival_schedule={}, seed=3)
    ctx = _slot_context(cfg)
    e = 0
    st_ = ctx.cluster_state(0, punctured={e}, urllc=(0,))
    # eMBB and URLLC ids are separate namespaces: check by kind
    members = set(zip(st_.kinds, st_.user_ids))
    assert ("embb", e) not in members and ("urllc", 0) in members
    val = ctx.oour(0, e)
    if val > -math.inf:
        assert val < ctx.base_rate(0)


def test_oour_memoized_and_orders_match_direct_solves():
    from noma_coexist.power import PowerState, embb_sum_rate
    from noma_coexist import sim
    cfg = ScenarioConfig(arrival_schedule={}, seed=1)
    ctx = _slot_context(cfg)
    vals = {e: ctx.oour(0, e) for e in range(cfg.K)}
    assert ctx.oour(0, 4) == vals[4]
    for e, v in vals.items():
        if v == -math.inf:
            continue
        m = ctx.clustering.labels[e]
        st_ = ctx.cluster_state(m, punctured={e}, urllc=(0,))
        gamma, _ = sim.sca_cluster(st_, cfg)
        direct = embb_sum_rate(PowerState((st_,)), gamma)
        others = sum(ctx.base_rate(j) for j in range(cfg.M) if j != m)
        assert v == pytest.approx(others + direct, abs=1e-9)
