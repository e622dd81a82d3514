"""Signal-regime threshold tests."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtri

from photonwire.detect import NonlinearFn
from photonwire.errors import ConfigError
from photonwire.regimes import (
    RegimeThresholds,
    build_thresholds,
    classify,
    spread_ratio_for_threshold,
    threshold_pulse_transition,
    threshold_transition_waveform,
)

from conftest import A_STAR


def test_pulse_transition_is_count_maximizer():
    # 1/tau maximizes the mean registered-pulse rate r*exp(-r*tau).
    tau = 0.02
    th = threshold_pulse_transition(tau)
    assert th == pytest.approx(1.0 / tau, rel=1e-14)
    f = lambda r: r * np.exp(-r * tau)
    assert f(th) >= f(th * 1.01)
    assert f(th) >= f(th * 0.99)


def test_waveform_threshold_fixed_point():
    # The closed form solves lam2 + q*sqrt(v*lam2) = l_max with
    # q = ndtri(eps): at the threshold the eps-quantile of the Gaussian
    # count approximation N(lam2, v*lam2) touches l_max.
    tau, a, l_max, eps = 0.02, A_STAR, 2.4, 0.015
    lam2 = threshold_transition_waveform(l_max, eps, tau, a) * tau
    v = 1 + 2 / a
    assert lam2 + ndtri(eps) * np.sqrt(v * lam2) == pytest.approx(
        l_max, abs=1e-10
    )


def test_spread_ratio_inversion_round_trip():
    tau, l_max, eps = 0.02, 2.4, 0.015
    th = threshold_transition_waveform(l_max, eps, tau, 7.3)
    a_back = spread_ratio_for_threshold(th, l_max, eps, tau)
    assert a_back == pytest.approx(7.3, rel=1e-9)


def test_build_thresholds_and_classify():
    th = build_thresholds(0.02, A_STAR, l_max=2.4, epsilon=0.015)
    assert th.lambda_th1 == pytest.approx(50.0)
    assert th.lambda_th1 < th.lambda_th2
    assert classify(10.0, th) == "pulse"
    assert classify(200.0, th) == "transition"
    assert classify(1e4, th) == "waveform"


def test_build_thresholds_from_saturation_ceiling():
    # The waveform threshold may be pinned by C's usable ceiling instead
    # of an explicit l_max.
    C = NonlinearFn(np.array([0.0, 1.0, 2.0, 4.0]),
                    np.array([0.0, 0.9, 1.5, 1.8]))
    th = build_thresholds(0.02, A_STAR, C=C)
    th_direct = build_thresholds(0.02, A_STAR, l_max=C.ceiling)
    assert th.lambda_th2 == pytest.approx(th_direct.lambda_th2, rel=1e-12)


def test_build_thresholds_without_ceiling_is_unbounded():
    # No ceiling information -> the waveform regime never starts.
    th = build_thresholds(0.02, A_STAR)
    assert th.lambda_th2 == np.inf
    assert classify(1e12, th) == "transition"
    # a gridded identity still has a finite usable ceiling (its grid max)
    C = NonlinearFn.identity(10.0)
    th_c = build_thresholds(0.02, A_STAR, C=C)
    assert th_c.lambda_th2 == pytest.approx(
        threshold_transition_waveform(10.0, 0.015, 0.02, A_STAR), rel=1e-12
    )


def test_build_thresholds_argument_exclusivity():
    with pytest.raises(ConfigError):
        build_thresholds(0.02, A_STAR, l_max=2.4,
                         C=NonlinearFn.identity(5.0))


def test_threshold_ordering_enforced():
    with pytest.raises(Exception):
        RegimeThresholds(100.0, 50.0, 2.4, 0.015)


@given(
    l_max=st.floats(0.5, 8.0),
    eps=st.floats(1e-3, 0.2),
    a=st.floats(2.0, 15.0),
)
@settings(max_examples=80, deadline=None)
def test_waveform_threshold_monotonicity(l_max, eps, a):
    tau = 0.02
    base = threshold_transition_waveform(l_max, eps, tau, a)
    assert base > 0
    # a larger usable ceiling postpones the waveform regime; a looser
    # exceedance budget epsilon lets it start earlier
    assert threshold_transition_waveform(l_max * 1.2, eps, tau, a) > base
    assert threshold_transition_waveform(l_max, min(eps * 1.5, 0.3), tau, a) < base
