"""Arrival-rate regime classification for dead-time-limited receivers.

Below 1/tau the anode shows resolvable pulses; above it pulses merge, and
once the per-dead-time charge clears the anode saturation ceiling with high
probability the output is a quasi-continuous waveform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import ndtri

from .errors import ConfigError

__all__ = [
    "RegimeThresholds",
    "PULSE",
    "TRANSITION",
    "WAVEFORM",
    "threshold_pulse_transition",
    "threshold_transition_waveform",
    "build_thresholds",
    "classify",
    "spread_ratio_for_threshold",
]

PULSE = "pulse"
TRANSITION = "transition"
WAVEFORM = "waveform"


@dataclass(frozen=True)
class RegimeThresholds:
    """The two arrival-rate boundaries (photons per symbol, Tb = 1)."""

    lambda_th1: float
    lambda_th2: float
    l_max: float
    epsilon: float

    def __post_init__(self):
        if self.lambda_th2 <= self.lambda_th1:
            raise ConfigError(
                f"thresholds must be ordered, got ({self.lambda_th1}, "
                f"{self.lambda_th2})")


def threshold_pulse_transition(tau):
    """Rate 1/tau separating resolvable pulses from merging pulses.

    This is also the argmax of the mean recorded-pulse count
    rate * exp(-rate*tau).
    """
    if not (0 < tau < 1):
        raise ConfigError(f"tau must be in (0, 1), got {tau}")
    return 1.0 / tau


def threshold_transition_waveform(l_max, epsilon, tau, a):
    """Smallest rate at which the per-dead-time charge exceeds the anode
    ceiling l_max except with probability epsilon (Gaussian approximation).
    """
    if not (0 < epsilon < 0.5):
        raise ConfigError(f"epsilon must be in (0, 0.5), got {epsilon}")
    if l_max <= 0:
        raise ConfigError(f"l_max must be > 0, got {l_max}")
    if not (0 < tau < 1):
        raise ConfigError(f"tau must be in (0, 1), got {tau}")
    if a <= 0:
        raise ConfigError(f"spread ratio must be > 0, got {a}")
    q = ndtri(epsilon)  # negative for epsilon < 1/2
    v = 1.0 + 2.0 / a
    root = -q * math.sqrt(v) + math.sqrt(v * q * q + 4.0 * l_max)
    return root * root / (4.0 * tau)


def build_thresholds(tau, a, *, l_max=None, epsilon=0.015, C=None):
    """Assemble RegimeThresholds from a saturation ceiling or nonlinearity.

    ``l_max`` may be given directly or taken from a NonlinearFn's
    saturation ceiling (the peak of its increasing branch).  An identity
    (unbounded) response has no waveform onset: lambda_th2 = inf.
    """
    if C is not None:
        if l_max is not None:
            raise ConfigError("give either l_max or C, not both")
        l_max = C.ceiling
    if l_max is None or math.isinf(l_max):
        return RegimeThresholds(threshold_pulse_transition(tau), math.inf,
                                math.inf, epsilon)
    return RegimeThresholds(
        threshold_pulse_transition(tau),
        threshold_transition_waveform(l_max, epsilon, tau, a),
        l_max, epsilon)


def classify(rate, thresholds):
    """Map an arrival rate to {pulse, transition, waveform}."""
    if rate < 0:
        raise ConfigError(f"rate must be >= 0, got {rate}")
    if rate <= thresholds.lambda_th1:
        return PULSE
    if rate <= thresholds.lambda_th2:
        return TRANSITION
    return WAVEFORM


def spread_ratio_for_threshold(lambda_th2, l_max, epsilon, tau):
    """Invert threshold_transition_waveform for the spread ratio a.

    Used to recover the gain-spread implied by a published waveform-onset
    rate; the inferred value is reported, not asserted as ground truth.
    """
    if not (0 < epsilon < 0.5):
        raise ConfigError(f"epsilon must be in (0, 0.5), got {epsilon}")
    w2 = 4.0 * tau * lambda_th2  # (sqrt(v) |q| + sqrt(v q^2 + 4 l_max))^2
    if w2 <= 4.0 * l_max:
        raise ConfigError(
            "threshold must exceed l_max/tau for a finite spread ratio")
    q = ndtri(epsilon)
    w = math.sqrt(w2)
    sqrt_v = (4.0 * l_max - w2) / (2.0 * w * q)
    v = sqrt_v * sqrt_v
    if v <= 1.0:
        raise ConfigError(
            f"inverted variance ratio {v} <= 1; threshold inconsistent "
            "with a positive spread ratio")
    return 2.0 / (v - 1.0)
