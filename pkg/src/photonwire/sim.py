"""Photon arrival streams, waveform synthesis, and dead-time pulse counting."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError, NumericError
from .gain import GainModel, draw_gain_branching

__all__ = [
    "ChannelConfig",
    "Waveform",
    "gen_arrivals",
    "draw_bits",
    "gen_symbol_stream",
    "synth_waveform",
    "pulse_level",
    "count_rising_edges",
    "mean_power_exact",
    "sample_grid",
    "dead_time_pmf",
    "dead_time_pmf_table",
    "dead_time_mean",
    "dead_time_var",
]

_INT_TOL = 1e-9


@dataclass(frozen=True)
class ChannelConfig:
    """OOK channel geometry with the symbol interval normalized to 1.

    Parameters
    ----------
    rate0 : float
        Background photon rate, photons per symbol (>= 0).
    rateA : float
        Extra photon rate when the symbol is on, photons per symbol (> 0).
    tau : float
        Detector dead time as a fraction of the symbol, in (0, 1).
    Ts : float
        Sampling interval as a fraction of the symbol.
    eta : float
        Average-power duty bound, in (0, 1].

    Exactly one sampling mode applies: under-sampling (Ts >= tau with
    1/Ts an integer L) or over-sampling (Ts < tau with tau/Ts an integer
    ks and 1/tau an integer kd).
    """

    rate0: float
    rateA: float
    tau: float
    Ts: float
    eta: float = 1.0
    mode: str = field(init=False)

    def __post_init__(self):
        if not (self.rate0 >= 0):
            raise ConfigError(f"rate0 must be >= 0, got {self.rate0}")
        if not (self.rateA > 0):
            raise ConfigError(f"rateA must be > 0, got {self.rateA}")
        if not (0 < self.tau < 1):
            raise ConfigError(f"tau must be in (0, 1), got {self.tau}")
        if not (0 < self.eta <= 1):
            raise ConfigError(f"eta must be in (0, 1], got {self.eta}")
        if not (0 < self.Ts <= 1):
            raise ConfigError(f"Ts must be in (0, 1], got {self.Ts}")
        if self.Ts >= self.tau - _INT_TOL:
            L = 1.0 / self.Ts
            if abs(L - round(L)) > _INT_TOL * L:
                raise ConfigError(
                    f"under-sampling requires 1/Ts integral, got 1/Ts={L}"
                )
            object.__setattr__(self, "mode", "under")
        else:
            ks = self.tau / self.Ts
            kd = 1.0 / self.tau
            if abs(ks - round(ks)) > _INT_TOL * ks:
                raise ConfigError(
                    f"over-sampling requires tau/Ts integral, got {ks}"
                )
            if abs(kd - round(kd)) > _INT_TOL * kd:
                raise ConfigError(
                    f"over-sampling requires 1/tau integral, got {kd}"
                )
            object.__setattr__(self, "mode", "over")

    @classmethod
    def undersampled(cls, rate0, rateA, tau, L, eta=1.0):
        """Build an under-sampling config with L samples per symbol."""
        if L != int(L) or L < 1:
            raise ConfigError(f"L must be a positive integer, got {L}")
        Ts = 1.0 / int(L)
        if Ts < tau:
            raise ConfigError(
                f"under-sampling needs Ts >= tau; L={L} gives Ts={Ts} < {tau}"
            )
        return cls(rate0, rateA, tau, Ts, eta)

    @classmethod
    def oversampled(cls, rate0, rateA, tau, ks, eta=1.0):
        """Build an over-sampling config with ks samples per dead time."""
        if ks != int(ks) or ks < 1:
            raise ConfigError(f"ks must be a positive integer, got {ks}")
        return cls(rate0, rateA, tau, tau / int(ks), eta)

    @property
    def L(self):
        """Samples per symbol (valid in under-sampling mode)."""
        if self.mode != "under":
            raise ConfigError("L is defined only when under-sampling")
        return int(round(1.0 / self.Ts))

    @property
    def ks(self):
        """Samples per dead time (valid in over-sampling mode)."""
        if self.mode != "over" and abs(self.Ts - self.tau) > _INT_TOL:
            raise ConfigError("ks is defined only when over-sampling")
        return int(round(self.tau / self.Ts))

    @property
    def kd(self):
        """Dead times per symbol, 1/tau."""
        kd = 1.0 / self.tau
        if abs(kd - round(kd)) > _INT_TOL * kd:
            raise ConfigError("kd requires 1/tau integral")
        return int(round(kd))

    @property
    def samples_per_symbol(self):
        return int(round(1.0 / self.Ts))

    @property
    def lam0(self):
        """Mean photons per dead-time window when the symbol is off."""
        return self.rate0 * self.tau

    @property
    def lam1(self):
        """Mean photons per dead-time window when the symbol is on."""
        return (self.rate0 + self.rateA) * self.tau


@dataclass(frozen=True)
class Waveform:
    """Sampled anode signal plus the arrival events that produced it."""

    sample_times: np.ndarray
    values: np.ndarray
    arrivals: tuple  # (times, gains), retained for oracle checks


def gen_arrivals(rng, rate, span=(0.0, 1.0)):
    """Homogeneous Poisson arrival times on the half-open interval ``span``.

    Parameters
    ----------
    rng : numpy.random.Generator
    rate : float
        Arrival rate per unit time; must be >= 0.
    span : (float, float)
        Interval (t0, t1) with t1 > t0.

    Returns
    -------
    ndarray of sorted arrival times; empty when rate == 0.
    """
    if rate < 0:
        raise ConfigError(f"rate must be >= 0, got {rate}")
    t0, t1 = span
    if not t1 > t0:
        raise ConfigError(f"empty horizon {span}")
    n = rng.poisson(rate * (t1 - t0))
    return np.sort(rng.uniform(t0, t1, n))


def draw_bits(rng, n_symbols, duty=0.5):
    """Bernoulli(duty) OOK symbol bits as a uint8 array."""
    return (rng.random(n_symbols) < duty).astype(np.uint8)


def gen_symbol_stream(rng, rates, model=None, gain_law="branching"):
    """Arrival times and normalized gains for a run of consecutive symbols.

    Parameters
    ----------
    rng : numpy.random.Generator
    rates : array_like
        Per-symbol arrival rates (photons per symbol); symbol i occupies
        the time interval [i, i+1).
    model : GainModel, optional
        Required when gain_law is "branching" or "model".
    gain_law : {"branching", "model", "unit"}
        "branching" draws each photon's gain from the cascade and divides
        by the mean gain; "model" draws the normalized gain from its
        closed-form law directly (Gamma(K, 1/a) with K ~ Poisson(a)),
        which is exact for every analysis formula downstream and stays
        cheap at arbitrarily large mean gain; "unit" assigns gain 1 to
        every photon.

    Returns
    -------
    (times, gains) : globally sorted arrival times and matching gains.
    """
    rates = np.asarray(rates, dtype=float)
    if np.any(rates < 0):
        raise ConfigError("negative symbol rate")
    counts = rng.poisson(rates)
    total = int(counts.sum())
    base = np.repeat(np.arange(rates.size, dtype=float), counts)
    times = base + rng.random(total)
    if gain_law == "branching":
        if model is None:
            raise ConfigError("gain_law='branching' requires a GainModel")
        gains = draw_gain_branching(rng, model, total) / model.mean_gain
    elif gain_law == "model":
        if model is None:
            raise ConfigError("gain_law='model' requires a GainModel")
        a = model.spread_ratio
        k = rng.poisson(a, total)
        gains = np.zeros(total)
        pos = k > 0
        if pos.any():
            gains[pos] = rng.standard_gamma(k[pos].astype(float)) / a
    elif gain_law == "unit":
        gains = np.ones(total)
    else:
        raise ConfigError(f"unknown gain_law {gain_law!r}")
    order = np.argsort(times, kind="stable")
    return times[order], gains[order]


def pulse_level(times, gains, tau, query_times):
    """Superposed pulse amplitude sum(G_k * 1{t - tau < t_k <= t}).

    ``times`` must be sorted ascending; rectangular pulses of width tau.
    """
    times = np.asarray(times, dtype=float)
    if times.size > 1 and np.any(np.diff(times) < 0):
        raise ConfigError("arrival times must be sorted ascending")
    q = np.asarray(query_times, dtype=float)
    cum = np.concatenate([[0.0], np.cumsum(gains)])
    hi = np.searchsorted(times, q, side="right")
    lo = np.searchsorted(times, q - tau, side="right")
    return cum[hi] - cum[lo]


def sample_grid(config, n_symbols):
    """ADC sample times for ``n_symbols`` consecutive symbols.

    Symbol s owns the samples at s + j*Ts for j = 1..(1/Ts); the window
    (t - tau, t] of every sample then stays inside or behind its symbol.
    """
    per = config.samples_per_symbol
    return config.Ts * np.arange(1, n_symbols * per + 1)


def synth_waveform(times, gains, config=None, C=None, *, sample_times=None,
                   n_symbols=None):
    """Sample the anode signal C(sum of active pulses) from arrival events.

    Either ``sample_times`` is given explicitly or (``config``,
    ``n_symbols``) define a regular ADC grid. Arrival times must be
    sorted; pulses from one symbol carry into the next automatically.
    """
    times = np.asarray(times, dtype=float)
    gains = np.asarray(gains, dtype=float)
    if times.size > 1 and np.any(np.diff(times) < 0):
        raise ConfigError("arrival times must be sorted ascending")
    if sample_times is None:
        if config is None:
            raise ConfigError("need either sample_times or a ChannelConfig")
        if n_symbols is None:
            n_symbols = int(np.ceil(times.max())) if times.size else 1
        sample_times = sample_grid(config, n_symbols)
        tau = config.tau
    else:
        sample_times = np.asarray(sample_times, dtype=float)
        if config is None:
            raise ConfigError("tau is taken from config; config is required")
        tau = config.tau
    level = pulse_level(times, gains, tau, sample_times)
    values = level if C is None else C(level)
    return Waveform(sample_times, np.asarray(values, dtype=float),
                    (times, gains))


def count_rising_edges(waveform, threshold, *, window=None):
    """Count strict upward threshold crossings (previous < thr <= current).

    ``waveform`` may be a Waveform or a plain value array. With
    ``window=(t0, t1)`` only crossings whose crossing sample time lies in
    [t0, t1) are counted (Waveform input required).
    """
    if threshold <= 0:
        raise ConfigError("threshold must be > 0")
    if isinstance(waveform, Waveform):
        values = waveform.values
        times = waveform.sample_times
    else:
        values = np.asarray(waveform, dtype=float)
        times = None
    if values.size < 2:
        return 0
    up = (values[:-1] < threshold) & (values[1:] >= threshold)
    if window is not None:
        if times is None:
            raise ConfigError("windowed counting requires a Waveform")
        t = times[1:]
        up &= (t >= window[0]) & (t < window[1])
    return int(np.count_nonzero(up))


def mean_power_exact(times, gains, tau, n_symbols, C=None):
    """Per-symbol time integral of C(pulse level) by exact event sweep.

    Returns an array y of length n_symbols with
    y[s] = integral over [s, s+1) of C(sum of active pulses) dt,
    computed from the piecewise-constant level between arrival/departure
    events.  Pulse tails beyond t = n_symbols are discarded.
    """
    times = np.asarray(times, dtype=float)
    gains = np.asarray(gains, dtype=float)
    bounds = np.arange(1.0, n_symbols)
    ev_t = np.concatenate([times, times + tau, bounds])
    ev_d = np.concatenate([gains, -gains, np.zeros(bounds.size)])
    order = np.argsort(ev_t, kind="stable")
    ev_t = ev_t[order]
    level = np.cumsum(ev_d[order])
    # piecewise-constant segments, clipped to the simulated horizon
    seg_t0 = np.clip(ev_t[:-1], 0.0, float(n_symbols))
    seg_t1 = np.clip(ev_t[1:], 0.0, float(n_symbols))
    dur = seg_t1 - seg_t0
    keep = dur > 0
    seg_t0, dur, lev = seg_t0[keep], dur[keep], level[:-1][keep]
    vals = lev if C is None else C(lev)
    sym = np.floor(seg_t0).astype(np.intp)
    np.minimum(sym, n_symbols - 1, out=sym)
    return np.bincount(sym, weights=vals * dur, minlength=n_symbols)


# ---------------------------------------------------------------------------
# dead-time counting distribution

def _pmf_terms_log(n, rate, tau, M):
    """Magnitudes (log) and signs of the alternating pulse-count series."""
    ms = np.arange(0, M - n + 1)
    k = n + ms
    base = (1.0 - (k - 1) * tau) * rate * np.exp(-rate * tau)
    with np.errstate(divide="ignore"):
        logs = np.where(k > 0, k * np.log(np.maximum(base, 0.0)), 0.0)
    logs -= gammaln(n + 1) + gammaln(ms + 1)
    signs = np.where(ms % 2 == 0, 1.0, -1.0)
    return logs, signs


def _kahan_signed_expsum(logs, signs):
    """Compensated sum of signs*exp(logs) after peak shifting.

    Returns (value, peak, abs_sum) with value = sum * exp(peak).
    """
    peak = logs.max()
    terms = signs * np.exp(logs - peak)
    s = 0.0
    c = 0.0
    for t in terms:
        y = t - c
        tot = s + y
        c = (tot - s) - y
        s = tot
    return s, peak, float(np.sum(np.abs(terms)))


def _dead_time_pmf_mp(n, rate, tau, M):
    """50-digit re-evaluation of the alternating series (mpmath)."""
    import mpmath as mp

    with mp.workdps(50):
        r = mp.mpf(rate)
        t = mp.mpf(tau)
        y = r * mp.e ** (-r * t)
        total = mp.mpf(0)
        for m in range(M - n + 1):
            k = n + m
            term = ((1 - (k - 1) * t) * y) ** k / (
                mp.factorial(n) * mp.factorial(m)
            )
            total += term if m % 2 == 0 else -term
        return float(total)


def dead_time_pmf(n, rate, tau):
    """P(exactly n pulses recorded in one symbol | rate, dead time tau).

    A pulse is recorded when a photon arrives with no other arrival in
    the preceding tau (paralyzable counting of a stationary stream).
    Support is n in [0, M] with M = floor(1/tau) + 1; n > M returns 0
    with a warning.  The alternating series is summed in log space with
    compensation and re-evaluated at 50-digit precision whenever the
    estimated cancellation error exceeds 1e-8.
    """
    if tau >= 1 or tau <= 0:
        raise ConfigError(f"tau must be in (0, 1), got {tau}")
    if rate <= 0:
        raise ConfigError(f"rate must be > 0, got {rate}")
    n = int(n)
    if n < 0:
        raise ConfigError(f"count must be >= 0, got {n}")
    M = int(np.floor(1.0 / tau)) + 1
    if n > M:
        warnings.warn(f"count {n} beyond support max {M}; probability is 0")
        return 0.0
    logs, signs = _pmf_terms_log(n, rate, tau, M)
    if not np.isfinite(logs.max()):
        return 0.0  # every term vanishes, e.g. n = M with (M-1)*tau = 1
    s, peak, abs_sum = _kahan_signed_expsum(logs, signs)
    n_terms = logs.size
    err_est = abs_sum * n_terms * np.finfo(float).eps
    if s <= 0.0 or err_est > 1e-8 * abs(s):
        return _dead_time_pmf_mp(n, rate, tau, M)
    value = s * np.exp(peak)
    if not np.isfinite(value):
        raise NumericError(f"pulse-count series overflowed at n={n}")
    return float(value)


def dead_time_pmf_table(rate, tau):
    """Full pulse-count PMF as an array over n = 0..floor(1/tau)+1."""
    M = int(np.floor(1.0 / tau)) + 1
    return np.array([dead_time_pmf(n, rate, tau) for n in range(M + 1)])


def dead_time_mean(rate, tau):
    """Mean recorded pulses per symbol, rate * exp(-rate*tau)."""
    return rate * np.exp(-rate * tau)


def dead_time_var(rate, tau):
    """Variance of recorded pulses per symbol."""
    e = dead_time_mean(rate, tau)
    return e - (1.0 - (1.0 - tau) ** 2) * e * e
