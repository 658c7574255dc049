import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from noma_coexist.channel import (DegenerateChannelWarning, DegenerateUserError, detection_set,
                                  detection_vector, draw_matrix, effective_gain, gain_table,
                                  null_space_basis, sample_channels, sic_order, user_detection)
from noma_coexist.config import ConfigError, ScenarioConfig


def test_same_seed_and_slot_reproduce():
    cfg = ScenarioConfig(seed=7)
    a, b = sample_channels(cfg, 1), sample_channels(cfg, 1)
    assert np.array_equal(a.H, b.H)
    assert np.array_equal(a.urllc(0), b.urllc(0))


def test_slot_enters_the_stream():
    cfg = ScenarioConfig(seed=7)
    assert not np.allclose(sample_channels(cfg, 1).H, sample_channels(cfg, 2).H)


def test_entries_have_unit_second_moment():
    rng = np.random.default_rng(0)
    x = draw_matrix(rng, 100_000, 1)
    assert abs(np.mean(np.abs(x) ** 2) - 1.0) < 0.02
    # circular symmetry: real and imaginary parts carry half the power each
    assert abs(np.mean(x.real ** 2) - 0.5) < 0.01
    assert abs(np.mean(x)) < 0.01


def test_n_below_m_rejected():
    with pytest.raises(ConfigError):
        ScenarioConfig(N=2, M=3, size_profile=None)


def test_null_space_of_two_dim_example():
    h = np.array([[1.0], [1.0]]) / np.sqrt(2)
    U = null_space_basis(h)
    assert U.shape == (2, 1)
    u = U[:, 0] / U[0, 0] * abs(U[0, 0])
    assert np.allclose(np.abs(u), [1 / np.sqrt(2)] * 2)
    assert abs(np.vdot(h[:, 0], U[:, 0])) < 1e-12


def test_null_space_random_residual_and_orthonormality(rng):
    for _ in range(50):
        Hr = draw_matrix(rng, 4, 2)
        U = null_space_basis(Hr)
        assert U.shape == (4, 2)    # N - M + 1 with M - 1 = 2 removed columns
        assert np.linalg.norm(Hr.conj().T @ U) <= 1e-9
        assert np.allclose(U.conj().T @ U, np.eye(U.shape[1]), atol=1e-12)


def test_zero_map_null_space_is_everything():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateChannelWarning)
        U = null_space_basis(np.zeros((3, 2)))
    assert U.shape == (3, 3)


def test_rank_deficient_input_warns():
    Hr = np.array([[1, 2], [2, 4], [3, 6]], dtype=complex)
    with pytest.warns(DegenerateChannelWarning):
        U = null_space_basis(Hr)
    assert U.shape[1] == 2


def test_target_already_in_null_space():
    H = np.array([[1.0, 0.0], [0.0, 1.0]], dtype=complex)
    v = detection_vector(H, 0)
    assert np.allclose(np.abs(v), [1.0, 0.0])


def test_detection_maximizes_gain_over_null_space(rng):
    H = draw_matrix(rng, 4, 2)
    v = detection_vector(H, 0)
    U = null_space_basis(H[:, 1:])
    best = effective_gain(v, H[:, 0])
    for _ in range(100):
        z = rng.normal(size=U.shape[1]) + 1j * rng.normal(size=U.shape[1])
        u = U @ (z / np.linalg.norm(z))
        assert effective_gain(u, H[:, 0]) <= best + 1e-12


def test_degenerate_target_raises():
    H = np.array([[1.0, 1.0], [0.0, 0.0]], dtype=complex)
    with pytest.raises(DegenerateUserError):
        detection_vector(H, 0)


def test_phase_is_normalized(rng):
    v = detection_vector(draw_matrix(rng, 3, 3), 1)
    i = np.argmax(np.abs(v))
    assert abs(v[i].imag) < 1e-15 and v[i].real > 0


@pytest.mark.parametrize("gains, expected", [([0.5, 2.0, 1.0], [1, 2, 0]),
                                             ([3, 3, 1], [0, 1, 2]), ([], [])])
def test_sic_order_examples(gains, expected):
    assert sic_order(gains) == expected


@given(st.lists(st.floats(0, 1e6, allow_nan=False), max_size=12),
       st.floats(1e-3, 1e3))
def test_sic_order_scale_invariant_and_idempotent(gains, scale):
    order = sic_order(gains)
    assert order == sic_order([g * scale for g in gains])
    resorted = [gains[i] for i in order]
    assert sic_order(resorted) == list(range(len(gains)))


@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 4), st.integers(0, 3))
def test_detection_properties_hold_for_any_draw(seed, M, extra):
    N = M + extra
    H = draw_matrix(np.random.default_rng(seed), N, M)
    for m in range(M):
        v = detection_vector(H, m)
        assert abs(np.linalg.norm(v) - 1.0) <= 1e-12
        for f in range(M):
            if f != m:
                assert abs(np.vdot(v, H[:, f])) <= 1e-9


def test_detection_set_orders_clusters():
    cfg = ScenarioConfig(seed=3)
    ch = sample_channels(cfg, 1)
    labels = [0, 0, 0, 0, 1, 1, 1, 2, 2]
    ds = detection_set(ch, labels)
    for m, order in enumerate(ds.order):
        g = [ds.g[u] for u in order]
        assert g == sorted(g, reverse=True)
        assert sorted(order) == [u for u in range(9) if labels[u] == m]
    table = gain_table(ch)
    assert table.shape == (9, 3)
    assert table[4, 1] == pytest.approx(user_detection(ch.H[4], 1)[1])
