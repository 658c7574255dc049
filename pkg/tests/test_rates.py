import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from noma_coexist.config import ConfigError, QosSpec
from noma_coexist.rates import (EMBB, URLLC, OrderedClusterState, all_effective_sinr, dispersion,
                                effective_sinr, fbl_rate, fbl_sinr_threshold, jain_index,
                                latency_ok, q_func, q_inv, shannon_rate, sinr_decode)


def bisect_q_inv(p, lo=-40.0, hi=40.0):
    """Independent oracle: Q is decreasing, bisect Q(x) = p with the stdlib erfc."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 0.5 * math.erfc(mid / math.sqrt(2)) > p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def state(gains, noise, kinds=None):
    kinds = kinds or [EMBB] * len(gains)
    return OrderedClusterState(0, tuple(range(len(gains))), tuple(kinds), np.array(gains, float),
                               np.array(noise, float))


def test_single_member_sinr():
    assert effective_sinr(state([2.0], [0.01]), [0.5], 0) == pytest.approx(100.0)


def test_two_member_sinr_substitution():
    assert effective_sinr(state([4.0, 1.0], [0.1, 0.1]), [0.1, 0.2], 1) == pytest.approx(1.0)


def test_decode_sinr_substitution():
    s = state([4.0, 1.0], [0.05, 0.05])
    assert sinr_decode(s, [0.3, 0.2], 0, 1) == pytest.approx(0.64)
    assert sinr_decode(s, [0.3, 0.2], 1, 1) == effective_sinr(s, [0.3, 0.2], 1)
    with pytest.raises(ValueError):
        sinr_decode(s, [0.3, 0.2], 1, 0)


def test_effective_sinr_matches_term_by_term(rng):
    for _ in range(20):
        g = np.sort(rng.exponential(size=4))[::-1]
        n = rng.uniform(1e-3, 1e-1, 4)
        p = rng.uniform(0.01, 1, 4)
        s = state(g, n)
        naive = [g[k] * p[k] / (sum(g[k] * p[l] for l in range(k)) + n[k]) for k in range(4)]
        assert np.allclose(all_effective_sinr(s, p), naive, rtol=1e-13)
        assert np.allclose([effective_sinr(s, p, k) for k in range(4)], naive, rtol=1e-13)


def test_decode_sinr_decreases_with_interference(rng):
    s = state([3.0, 2.0, 1.0], [0.01] * 3)
    prev = math.inf
    for first in np.linspace(0.01, 1.0, 30):
        v = sinr_decode(s, [first, 0.3, 0.2], 0, 2)
        assert v < prev
        prev = v


def test_nonpositive_power_rejected():
    with pytest.raises(ValueError):
        effective_sinr(state([1.0], [0.1]), [0.0], 0)


def test_unsorted_state_rejected():
    with pytest.raises(ValueError):
        state([1.0, 2.0], [0.1, 0.1])


@pytest.mark.parametrize("sinr, rate", [(0, 0), (1, 1), (3, 2)])
def test_shannon_examples(sinr, rate):
    assert shannon_rate(sinr) == pytest.approx(rate)


@pytest.mark.parametrize("sinr, c", [(0, 0), (1, 0.75), (3, 0.9375)])
def test_dispersion_examples(sinr, c):
    assert dispersion(sinr) == pytest.approx(c)


def test_fbl_examples():
    assert fbl_rate(3.0, 168, 0.5) == pytest.approx(2.0, abs=1e-12)
    assert fbl_rate(3.0, 10 ** 9, 1e-5) == pytest.approx(2.0, abs=1e-3)
    oracle = 2.0 - math.sqrt(0.9375 / 168) * bisect_q_inv(1e-5) / math.log(2)
    assert fbl_rate(3.0, 168, 1e-5) == pytest.approx(oracle, abs=1e-12)
    assert fbl_rate(3.0, 168, 1e-5) == pytest.approx(1.5404, abs=1e-4)
    with pytest.raises(ValueError):
        fbl_rate(3.0, 168, 1.0)


def test_fbl_rate_clamps_at_zero():
    assert fbl_rate(1e-6, 168, 1e-5) == 0.0


@pytest.mark.parametrize("p, expected", [(0.5, 0.0), (0.025, 1.95996), (1e-5, 4.26489)])
def test_q_inv_examples(p, expected):
    assert q_inv(p) == pytest.approx(expected, abs=1e-5)


@given(st.floats(1e-12, 1 - 1e-12))
def test_q_of_q_inv_is_identity(p):
    assert abs(q_func(q_inv(p)) - p) <= 1e-9 * p


@given(st.floats(1e-300, 0.5))
def test_q_inv_matches_bisection_oracle(p):
    # lower half only: above 1/2 the argument is set by 1 - p, which double
    # precision resolves too coarsely for any method to pin x to 1e-9
    assert q_inv(p) == pytest.approx(bisect_q_inv(p), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1])
def test_q_inv_domain(p):
    with pytest.raises(ValueError):
        q_inv(p)


def test_latency_examples():
    qos = QosSpec()
    assert latency_ok(qos, 6.0)
    assert not latency_ok(qos, 5.0)
    assert not latency_ok(qos, 0.0)


@pytest.mark.parametrize("rates, j", [([1, 1, 1], 1.0), ([1, 0, 0], 1 / 3), ([2, 1], 0.9)])
def test_jain_examples(rates, j):
    assert jain_index(rates) == pytest.approx(j)


def test_jain_undefined_for_zeros():
    with pytest.raises(ValueError):
        jain_index([0, 0])


@given(st.floats(0, 1e8), st.integers(1, 10 ** 6), st.floats(1e-9, 0.49))
def test_fbl_never_exceeds_shannon(s, b, eps):
    assert fbl_rate(s, b, eps) <= shannon_rate(s) + 1e-12


@given(st.floats(0, 1e6), st.floats(1e-6, 1e3))
def test_dispersion_increasing_and_bounded(s, ds):
    lo, hi = dispersion(s), dispersion(s + ds)
    assert 0 <= lo < 1 and hi >= lo


@given(st.lists(st.floats(0.01, 10), min_size=1, max_size=6), st.floats(1e-3, 1e3))
def test_sinr_is_scale_free(powers, scale):
    g = np.linspace(2.0, 1.0, len(powers))
    s1 = state(g, np.full(len(powers), 0.01))
    s2 = state(g, np.full(len(powers), 0.01 * scale))
    a = all_effective_sinr(s1, powers)
    b = all_effective_sinr(s2, np.array(powers) * scale)
    assert np.allclose(a, b, rtol=1e-10)


@given(st.floats(0.1, 10), st.floats(0.01, 1), st.floats(0.01, 1), st.floats(0.01, 1))
def test_equal_gain_labels_do_not_change_sum_rate(g, p1, p2, p3):
    # two tied users swapped in the decode order: the cluster sum rate is unchanged
    s = state([g * 2, g, g], [0.01] * 3)
    r1 = shannon_rate(all_effective_sinr(s, [p1, p2, p3])).sum()
    r2 = shannon_rate(all_effective_sinr(s, [p1, p3, p2])).sum()
    assert r1 == pytest.approx(r2, rel=1e-12)


@given(st.floats(0.01, 8.0))
def test_fbl_threshold_inverts_rate(target):
    s = fbl_sinr_threshold(target, 168, 1e-5)
    assert fbl_rate(s, 168, 1e-5) == pytest.approx(target, abs=1e-9)


def test_qos_validation():
    with pytest.raises(ConfigError):
        QosSpec(epsilon=0.5)
    with pytest.raises(ConfigError):
        QosSpec(bandwidth_hz=0)
    assert QosSpec().urllc_rate == pytest.approx(4000 / (1e6 * 0.7e-3))
