"""Cascade gain model and mixed sample-law tests.

Monte-Carlo checks run at frozen seeds; tolerances are multiples of the
binomial/plug-in standard errors measured when the designs were frozen.
"""

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from photonwire.errors import ConfigError
from photonwire.gain import (
    GainModel,
    draw_gain_branching,
    draw_sample_exact,
    draw_sample_value,
    extinction_probability,
    log_i1,
    mgf_gain,
    mgf_sample,
    sample_dist,
    sample_log_pdf,
    sample_pdf,
    single_photon_pdf,
    support_cutoff,
)
from photonwire._quad import adaptive_quad


# ---------------------------------------------------------------------------
# model algebra


def test_model_moment_algebra():
    m = GainModel(1000.0, stages=12)
    h = 1000.0 ** (1.0 / 12.0)
    assert m.per_stage_mean == pytest.approx(h, rel=1e-14)
    assert m.diffusion_scale == pytest.approx((1000.0 - 1) / (2 * (h - 1)), rel=1e-14)
    assert m.variance == pytest.approx(2 * m.mean_gain * m.diffusion_scale, rel=1e-14)
    assert m.spread_ratio == pytest.approx(m.mean_gain / m.diffusion_scale, rel=1e-14)


@pytest.mark.parametrize("a", [3.0, 6.0, 6.657483123612046, 12.0])
def test_from_spread_ratio_round_trip(a):
    m = GainModel.from_spread_ratio(a, stages=12)
    assert m.spread_ratio == pytest.approx(a, rel=1e-12)
    # and the back-solved mean gain reproduces itself through the ctor
    m2 = GainModel(m.mean_gain, stages=12)
    assert m2.spread_ratio == pytest.approx(a, rel=1e-12)


def test_model_rejects_bad_args():
    with pytest.raises(ConfigError):
        GainModel(0.5)
    with pytest.raises(ConfigError):
        GainModel(1000.0, stages=0)
    with pytest.raises(ConfigError):
        GainModel.from_spread_ratio(-1.0)


def test_extinction_is_pgf_iteration():
    m = GainModel.from_spread_ratio(6.0)
    x = 0.0
    for _ in range(m.stages):
        x = np.exp(m.per_stage_mean * (x - 1.0))
    q = extinction_probability(m)
    assert q == pytest.approx(x, abs=1e-15)
    # dying out is strictly easier for the finite cascade than for the
    # continuous law, whose atom is exp(-a)
    assert np.exp(-m.spread_ratio) < q < 1.0


# ---------------------------------------------------------------------------
# moment generating functions


def test_mgf_gain_normalized_identity():
    m = GainModel.from_spread_ratio(6.0)
    w = np.array([0.0, 0.1, 0.5, 2.0, 30.0])
    lhs = mgf_gain(w / m.mean_gain, m)
    rhs = np.exp(-w / (1.0 + w / m.spread_ratio))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-13)


def test_mgf_gain_limits():
    m = GainModel.from_spread_ratio(6.0)
    assert mgf_gain(0.0, m) == 1.0
    # deep saturation: only the extinction atom survives e^{-omega G}
    assert mgf_gain(1e9, m) == pytest.approx(np.exp(-6.0), rel=1e-6)


def test_mgf_sample_is_compound_of_gain_law():
    m = GainModel.from_spread_ratio(6.0)
    lam = 1.7
    w = np.array([0.3, 1.0, 4.0])
    lhs = mgf_sample(w, lam, 6.0)
    rhs = np.exp(lam * (mgf_gain(w / m.mean_gain, m) - 1.0))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


def test_mgf_sample_atom_limit():
    lam, a = 0.8, 6.0
    atom = np.exp(lam * (np.exp(-a) - 1.0))
    assert mgf_sample(1e12, lam, a) == pytest.approx(atom, rel=1e-9)
    assert sample_dist(lam, a).atom_weight == pytest.approx(atom, rel=1e-14)


@given(
    w=st.floats(0.0, 50.0),
    lam=st.floats(0.01, 5.0),
    a=st.floats(2.0, 15.0),
)
@settings(max_examples=120, deadline=None)
def test_mgf_sample_bounds(w, lam, a):
    v = float(mgf_sample(w, lam, a))
    atom = np.exp(lam * (np.exp(-a) - 1.0))
    assert atom - 1e-12 <= v <= 1.0
    # decreasing in omega
    assert float(mgf_sample(w + 0.5, lam, a)) <= v + 1e-12


def test_mgf_rejects_negative_omega():
    m = GainModel.from_spread_ratio(6.0)
    with pytest.raises(ConfigError):
        mgf_gain(-0.1, m)
    with pytest.raises(ConfigError):
        mgf_sample(-0.1, 1.0, 6.0)


# ---------------------------------------------------------------------------
# mixed sample law: density, transform consistency, sampling


def test_density_matches_mgf_transform():
    # The strongest internal consistency check available: the Laplace
    # transform of (atom + continuum density) must reproduce the MGF.
    lam, a = 0.7, 6.0
    dist = sample_dist(lam, a)
    zc = support_cutoff(lam, a)
    for w in (0.4, 1.0, 3.0):
        val, _ = adaptive_quad(
            lambda z: sample_pdf(z, lam, a) * np.exp(-w * z), 1e-12, zc,
            tol=1e-12,
        )
        total = dist.atom_weight + val
        assert total == pytest.approx(float(mgf_sample(w, lam, a)), abs=2e-9)


def test_pdf_log_pdf_agree():
    lam, a = 1.2, 6.657483123612046
    z = np.linspace(0.01, 8.0, 200)
    np.testing.assert_allclose(
        sample_pdf(z, lam, a), np.exp(sample_log_pdf(z, lam, a)), rtol=1e-12
    )


def test_single_photon_mass():
    # One detected photon yields a zero cascade with probability e^{-a}.
    a = 6.0
    val, _ = adaptive_quad(lambda z: single_photon_pdf(z, a), 1e-14, 60.0,
                           tol=1e-12)
    assert val == pytest.approx(1.0 - np.exp(-a), abs=1e-9)


def test_sample_dist_api_surface():
    lam, a = 1.5, 6.0
    dist = sample_dist(lam, a)
    assert dist.point_masses == ()
    assert dist.atom_weight + dist.continuous_mass() == pytest.approx(1.0, abs=1e-8)
    assert dist.mean == pytest.approx(lam, rel=1e-6)
    assert dist.var == pytest.approx(lam * (1 + 2 / a), rel=1e-6)
    nodes, weights = dist.quad_nodes()
    assert np.sum(weights * dist.density(nodes)) == pytest.approx(
        dist.continuous_mass(), rel=1e-10
    )
    # cdf includes the atom and is monotone up to 1
    z = np.linspace(0.0, dist.z_cut, 50)
    c = dist.cdf(z)
    assert c[0] >= dist.atom_weight - 1e-12
    assert np.all(np.diff(c) >= -1e-12)
    assert c[-1] == pytest.approx(1.0, abs=1e-7)
    np.testing.assert_allclose(dist.tail_mass(z), 1.0 - c, atol=1e-9)


def test_support_cutoff_has_negligible_tail():
    lam, a = 2.0, 6.0
    zc = support_cutoff(lam, a)
    dist = sample_dist(lam, a)
    assert float(dist.tail_mass(zc * 0.999)) < 1e-7


def test_draw_sample_exact_matches_law():
    # KS against the law's own cdf (conditional on the continuum) plus an
    # exact binomial z-test on the atom frequency.
    lam, a = 1.5, 6.0
    n = 40_000
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(1205)))
    v = draw_sample_exact(rng, lam, a, n)
    dist = sample_dist(lam, a)
    atom = dist.atom_weight
    n_zero = int(np.count_nonzero(v == 0.0))
    se = np.sqrt(atom * (1 - atom) / n)
    assert abs(n_zero / n - atom) < 4 * se
    pos = np.sort(v[v > 0.0])
    u = (dist.cdf(pos) - atom) / (1.0 - atom)
    ks = np.max(np.abs(u - np.arange(1, pos.size + 1) / pos.size))
    assert ks < 1.63 / np.sqrt(pos.size)  # 1% critical value


def test_draw_sample_value_branching_atom():
    # The finite-cascade sampler's zero frequency is e^{-lam(1-q)}, which
    # dominates both closed-form bounds.
    lam = 2.0
    m = GainModel.from_spread_ratio(6.0)
    q = extinction_probability(m)
    n = 20_000
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(77)))
    v = draw_sample_value(rng, lam, m, n)
    freq = np.count_nonzero(v == 0.0) / n
    p0 = np.exp(-lam * (1.0 - q))
    se = np.sqrt(p0 * (1 - p0) / n)
    assert abs(freq - p0) < 4 * se
    assert freq > np.exp(-lam) - 4 * se
    assert freq > np.exp(lam * (np.exp(-m.spread_ratio) - 1.0)) - 4 * se


def test_branching_moments_desk_scale():
    m = GainModel(1000.0, stages=12)
    n = 30_000
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(4242)))
    g = draw_gain_branching(rng, m, n)
    se_mean = g.std(ddof=1) / np.sqrt(n)
    assert abs(g.mean() - m.mean_gain) < 4 * se_mean
    q = extinction_probability(m)
    freq0 = np.count_nonzero(g == 0.0) / n
    assert abs(freq0 - q) < 4 * np.sqrt(q * (1 - q) / n)


# ---------------------------------------------------------------------------
# special functions


def test_log_i1_against_mpmath():
    ys = [1e-8, 1e-3, 0.1, 1.0, 10.0, 100.0, 2500.0, 2.0e5]
    with mpmath.workdps(50):
        ref = [float(mpmath.log(mpmath.besseli(1, y))) for y in ys]
    np.testing.assert_allclose(log_i1(np.array(ys)), ref, rtol=1e-13)


def test_log_i1_scalar_shape():
    out = log_i1(2.0)
    assert np.ndim(out) == 0
