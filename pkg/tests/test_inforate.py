"""Mutual-information and duty-cycle optimizer tests.

The plug-in Monte-Carlo estimator (histogram MI with first-order bias
correction) is the independent oracle for the quadrature MI values.
"""

import numpy as np
import pytest

from photonwire.errors import ConfigError
from photonwire.inforate import (
    _table,
    binary_entropy,
    continuum_expansion_constants,
    mutual_info_multi,
    mutual_info_single,
    optimal_duty_multi,
    optimal_duty_single,
    suboptimal_duty_multi,
    suboptimal_duty_single,
)


def _rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def draw_mixed(rng, lam_vec, a):
    n1 = rng.poisson(lam_vec)
    k = rng.poisson(a * n1)
    z = np.zeros(lam_vec.size)
    pos = k > 0
    z[pos] = rng.standard_gamma(k[pos]) / a
    return z


def plug_in_mi(rng, mu, lam0, lam1, a, n, bins, L=1):
    """Histogram MI of (bit, quantized samples) with plug-in bias term."""
    bits = rng.random(n) < mu
    lam = np.where(bits, lam1, lam0)
    zs = np.stack([draw_mixed(rng, lam, a) for _ in range(L)], axis=1)
    edges = np.linspace(1e-300, zs.max() + 1e-9, bins + 1)
    codes = np.zeros(n, dtype=np.int64)
    for j in range(L):
        codes = codes * (bins + 1) + np.searchsorted(edges, zs[:, j])
    uniq, inv = np.unique(codes, return_inverse=True)
    joint = np.zeros((2, uniq.size))
    np.add.at(joint, (bits.astype(int), inv), 1.0)
    joint /= n
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = joint * np.log(joint / (px * py))
    bias = (np.count_nonzero(joint) - np.count_nonzero(py) - 1) / (2 * n)
    return float(np.nansum(terms)) + bias


# ---------------------------------------------------------------------------
# limits and bounds


def test_equal_rates_zero_information():
    r = mutual_info_single(0.4, 2.0, 2.0, 6.0)
    assert abs(r.total) < 1e-12
    assert r.quadrature_error_estimate < 1e-9


def test_degenerate_duty_vanishes():
    for mu in (1e-5, 1 - 1e-5):
        r = mutual_info_single(mu, 0.5, 3.0, 6.0)
        assert 0.0 <= r.total <= binary_entropy(mu) + 1e-12


def test_breakdown_consistency():
    r = mutual_info_single(0.4, 0.5, 3.0, 6.0)
    assert r.total == pytest.approx(r.discrete_part + r.continuous_part,
                                    abs=1e-12)
    assert r.mu == 0.4
    assert 0.0 < r.total <= binary_entropy(0.4)
    assert r.quadrature_error_estimate < 1e-6


# ---------------------------------------------------------------------------
# quadrature vs Monte Carlo


def test_single_sample_mi_vs_plug_in():
    mu, lam0, lam1, a = 0.4, 0.5, 3.0, 6.0
    r = mutual_info_single(mu, lam0, lam1, a)
    mc = plug_in_mi(_rng(513), mu, lam0, lam1, a, 1_000_000, 400)
    assert r.total == pytest.approx(mc, abs=3e-3)


def test_multi_sample_mi_vs_plug_in():
    mu, lam0, lam1, a = 0.4, 0.5, 3.0, 6.0
    r2 = mutual_info_multi(mu, lam0, lam1, a, 2)
    r1 = mutual_info_single(mu, lam0, lam1, a)
    assert r2.total >= r1.total  # more samples, more information
    mc2 = plug_in_mi(_rng(514), mu, lam0, lam1, a, 1_000_000, 60, L=2)
    assert r2.total == pytest.approx(mc2, abs=3e-3)


def test_multi_reduces_to_single():
    r1 = mutual_info_single(0.3, 0.2, 2.0, 6.0)
    rk = mutual_info_multi(0.3, 0.2, 2.0, 6.0, 1)
    assert rk.total == pytest.approx(r1.total, abs=1e-12)
    assert rk.discrete_part == pytest.approx(r1.discrete_part, abs=1e-12)


def test_count_form_cell_vs_tensor_quadrature():
    # The lattice recursion's k=2 cell must equal a direct 2-d tensor
    # quadrature of the conditional expectation.
    mu, lam0, lam1, a = 0.4, 0.5, 3.0, 6.0
    tab = _table(lam0, lam1, a)
    g = tab.grids[1]
    w = g.weights
    v = tab.logf0[1] - tab.logf1[1]
    m1 = w * tab.f1[1] / tab.s1
    m0 = w * tab.f0[1] / tab.s0
    lmu, lnu = np.log(mu), np.log1p(-mu)
    V2 = v[:, None] + v[None, :]
    E1_2 = float(m1 @ np.logaddexp(lmu, lnu + V2) @ m1)
    E0_2 = float(m0 @ np.logaddexp(lmu - V2, lnu) @ m0)
    E1, E0, _, _ = tab._cell_expectations(mu, 2, 1)
    assert E1[2] == pytest.approx(E1_2, abs=1e-5)
    assert E0[2] == pytest.approx(E0_2, abs=1e-5)


def test_concavity_in_duty():
    grid = np.arange(0.01, 1.0, 0.01)
    vals = np.array(
        [mutual_info_single(m, 0.5, 3.0, 6.0).total for m in grid]
    )
    assert np.diff(vals, 2).max() < 0.0


# ---------------------------------------------------------------------------
# duty-cycle optimizers


def test_suboptimal_duty_closed_form():
    lam1, a = 1.3, 6.0
    a1 = np.exp(-lam1 * (1 - np.exp(-a)))
    want = 1.0 / (1 - a1 + a1 ** (-a1 / (1 - a1)))
    assert suboptimal_duty_single(lam1, a) == pytest.approx(want, rel=1e-12)


def test_suboptimal_duty_clamped_by_eta():
    assert suboptimal_duty_single(1e-4, 6.0, eta=0.1) == 0.1
    with pytest.raises(ConfigError):
        suboptimal_duty_single(1.0, 6.0, eta=0.0)


def test_suboptimal_multi_identity():
    assert suboptimal_duty_multi(1.0, 6.0, 2) == pytest.approx(
        suboptimal_duty_single(2.0, 6.0), abs=1e-15
    )


def test_optimal_duty_is_stationary_and_beats_grid():
    mu_star = optimal_duty_single(0.2, 2.0, 6.0)
    assert abs(_table(0.2, 2.0, 6.0).mi_slope_multi(mu_star, 1, 1)) < 1e-6
    base = mutual_info_single(mu_star, 0.2, 2.0, 6.0).total
    for m in (mu_star - 0.01, mu_star + 0.01):
        assert mutual_info_single(m, 0.2, 2.0, 6.0).total <= base + 1e-12


def test_optimal_duty_multi_beats_neighbors():
    mu_star = optimal_duty_multi(0.2, 2.0, 6.0, 4)
    base = mutual_info_multi(mu_star, 0.2, 2.0, 6.0, 4).total
    for m in (mu_star - 0.01, mu_star + 0.01):
        assert mutual_info_multi(m, 0.2, 2.0, 6.0, 4).total <= base + 1e-12


def test_optimal_approaches_suboptimal_without_background():
    mu_opt = optimal_duty_single(2e-6, 2.0, 6.0)
    mu_sub = suboptimal_duty_single(2.0, 6.0)
    assert abs(mu_opt - mu_sub) < 5e-4


def test_eta_clamps_optimal():
    unclamped = optimal_duty_single(0.2, 2.0, 6.0)
    assert optimal_duty_single(0.2, 2.0, 6.0, eta=0.2) == 0.2
    assert unclamped > 0.2


# ---------------------------------------------------------------------------
# small-background continuum expansion


def test_continuum_expansion_sign_structure():
    lam0, lam1, a, mu = 1e-4, 1.0, 6.0, 0.3
    C1, C2 = continuum_expansion_constants(lam1, a)
    ic = mutual_info_single(mu, lam0, lam1, a).continuous_part
    u = 1 - np.exp(-a)
    a1 = np.exp(-lam1 * u)
    base = -mu * np.log(mu) * (1 - a1)
    approx = (base
              - (1 - mu) * lam0 * u * np.log(mu / lam0)
              - (1 - mu) * lam0 * u
              + (1 - mu) * lam0 * (C1 - C2))
    assert ic == pytest.approx(approx, abs=1e-6)
    # flipping either derived sign breaks the expansion by >> tolerance
    wrong = base + (1 - mu) * lam0 * u * np.log(mu / lam0) \
        - (1 - mu) * lam0 * u + (1 - mu) * lam0 * (C1 - C2)
    assert abs(ic - wrong) > 1e-5
