import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from compbf.channel import (BeamformingSolution, beamform, complex_gaussian,
                            fading_shortcut_sample, instantaneous_sir, solve_cluster,
                            solve_zf_beamformer, zf_desired_gains)
from compbf.errors import DomainError, RankDeficiencyError, TruncationError
from compbf.geometry import NetworkRealization, sample_ppp


def test_complex_gaussian_moments():
    z = complex_gaussian((200_000,), np.random.default_rng(0))
    assert abs(z.mean()) < 0.01
    assert np.mean(np.abs(z) ** 2) == pytest.approx(1.0, abs=0.01)
    assert abs(np.mean(z * z)) < 0.01  # circular symmetry


def test_single_user_is_maximum_ratio():
    h = complex_gaussian((1, 4), np.random.default_rng(1))
    v = solve_zf_beamformer(h)
    np.testing.assert_allclose(v, np.conj(h[0]) / np.linalg.norm(h[0]), atol=1e-15)
    assert abs(h[0] @ v) ** 2 == pytest.approx(np.linalg.norm(h[0]) ** 2)


def test_two_by_two_null():
    rows = np.array([[1.0, 0.0], [0.3 + 0.2j, 0.7 - 0.1j]])  # row 0 is the cross channel
    v = solve_zf_beamformer(rows, k=1)
    assert abs(v[0]) < 1e-15 and abs(abs(v[1]) - 1) < 1e-15
    assert abs(rows[0] @ v) < 1e-15
    assert (rows[1] @ v).imag == pytest.approx(0.0, abs=1e-15) and (rows[1] @ v).real > 0


def test_rank_deficiency_and_shape_errors():
    h = np.array([[1, 1j, 0], [2, 2j, 0], [0, 0, 1]], dtype=complex)
    with pytest.raises(RankDeficiencyError):
        solve_zf_beamformer(h, k=2)
    with pytest.raises(DomainError):
        solve_zf_beamformer(np.ones((3, 2)))


@settings(max_examples=40)
@given(st.integers(0, 10**6), st.integers(1, 4), st.integers(0, 3))
def test_zf_constraints_unit_norm_and_optimality(seed, K, extra):
    nt = K + extra
    rng = np.random.default_rng(seed)
    ch = complex_gaussian((K, K, nt), rng)
    v = solve_cluster(ch)
    sol = BeamformingSolution(ch, v, np.ones(0))
    assert np.allclose(np.linalg.norm(v, axis=1), 1, atol=1e-12)
    assert sol.zf_residual() < 1e-10
    # any other unit vector in the same null space does no better
    others = ch[1:, 0, :]
    if others.shape[0]:
        _, _, vh = np.linalg.svd(others)
        basis = np.conj(vh[others.shape[0]:]).T
    else:
        basis = np.eye(nt, dtype=complex)
    for _ in range(5):
        c = complex_gaussian((basis.shape[1],), rng)
        w = basis @ c
        w /= np.linalg.norm(w)
        assert abs(ch[0, 0] @ w) ** 2 <= sol.desired_gain * (1 + 1e-12)


@pytest.mark.parametrize("nt,K", [(1, 1), (2, 1), (2, 2), (4, 2), (4, 4)])
def test_zf_gain_law(nt, K):
    g, resid = zf_desired_gains(K, nt, 100_000, 10 * nt + K, return_residual=True)
    assert resid.max() < 1e-10
    assert stats.kstest(g, stats.gamma(nt - K + 1).cdf).pvalue > 0.01


def test_shortcut_law_and_mean():
    h1, gains = fading_shortcut_sample(2, 2, 3, n_interferers=4, size=50_000)
    assert stats.kstest(h1, stats.expon.cdf).pvalue > 0.01
    assert gains.shape == (50_000, 4)
    h1, _ = fading_shortcut_sample(2, 4, 4, size=1_000_000)
    assert abs(h1.mean() - 3) < 3 * math.sqrt(3 / h1.size)
    r = np.corrcoef(h1[:10_000], fading_shortcut_sample(2, 4, 5, n_interferers=1, size=10_000)[1][:, 0])[0, 1]
    assert abs(r) < 3 / math.sqrt(10_000)


def test_sir_arithmetic_and_scale_invariance():
    net = NetworkRealization(np.array([[1.0, 0.0], [0.0, 2.0]]), np.zeros(2), cluster_size=1)
    ch = np.ones((1, 1, 1), dtype=complex)
    bf = BeamformingSolution(ch, np.ones((1, 1), dtype=complex), np.array([1.0]))
    assert instantaneous_sir(net, bf, 4.0) == pytest.approx(16.0)
    assert instantaneous_sir(net.scaled(2.0), bf, 4.0) == pytest.approx(16.0)
    lonely = NetworkRealization(np.array([[1.0, 0.0]]), np.zeros(2), cluster_size=1)
    with pytest.raises(TruncationError):
        instantaneous_sir(lonely, BeamformingSolution(ch, bf.v, np.zeros(0)), 4.0)


def test_full_pipeline_scale_invariance():
    net = sample_ppp(1.0, 20.0, 11, cluster_size=2)
    bf = beamform(net, 3, 12)
    assert bf.zf_residual() < 1e-10
    a = instantaneous_sir(net, bf, 4.0)
    b = instantaneous_sir(net.scaled(10.0), bf, 4.0)
    assert abs(a / b - 1) < 1e-12


def test_interferer_gains_exponential_in_grid_pipeline():
    from compbf.geometry import build_grid
    rng = np.random.default_rng(21)
    gains = np.concatenate([beamform(build_grid(rng=rng, cluster_size=2), 2, rng).interferer_gains
                            for _ in range(500)])
    assert stats.kstest(gains, stats.expon.cdf).pvalue > 0.01
