"""Symbol detection for dead-time-limited photon-counting receivers.

Four detector families live here.  At effectively infinite sampling rate the
per-symbol time integral of the anode signal is compared between the two
symbol hypotheses (integrated-power detection).  With several samples per
dead time, the within-symbol sample mean is near-Gaussian and a quadratic
threshold applies.  With the sampling interval at or above the dead time the
sample mean keeps the mixed atom-plus-continuum law exactly, and a hard
per-sample threshold followed by majority counting gives closed-form error
rates and a Chernoff exponent.  A saturating anode transfer curve is handled
by pushing the sample law through the curve; where no closed form survives,
densities are estimated by simulation.

Theory functions are pure.  The Monte-Carlo harness simulates symbol streams
block by block with one counter-based child stream per block and reduces the
blocks in order, so results are independent of scheduling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc
from scipy.stats import binom

from ._quad import PanelGrid, adaptive_quad
from .errors import ConfigError, InvariantViolation, NumericError
from .gain import (
    MixedDist,
    mgf_sample,
    sample_dist,
    sample_log_pdf,
    sample_pdf,
    support_cutoff,
)
from .sim import ChannelConfig, draw_bits, gen_symbol_stream, mean_power_exact, synth_waveform

__all__ = [
    "DetectorReport",
    "NonlinearFn",
    "qfunc",
    "bernoulli_kl",
    "mpd_infinite_mgf",
    "mpd_infinite_error",
    "mpd_oversample_stats",
    "nonlinear_sample_density",
    "pcd_threshold_opt",
    "pcd_counting_threshold",
    "pcd_error",
    "chernoff_exponent",
    "mpd_undersample_error",
    "mpd_undersample_gaussian",
    "mpd_nonlinear_error",
    "ml_detect_mc",
]

_DETECTOR_KINDS = ("mpd-infinite", "mpd-oversample", "mpd-undersample", "pcd")
_Z95 = 1.959963984540054


def qfunc(x):
    """Gaussian upper-tail probability Q(x) = P(N(0,1) > x)."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def bernoulli_kl(p, q):
    """KL divergence (nats) from Bernoulli(p) to Bernoulli(q), vectorized.

    Infinite when q sits on a boundary that p does not share.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(p > 0.0, p * (np.log(p) - np.log(q)), 0.0)
        t2 = np.where(p < 1.0, (1.0 - p) * (np.log1p(-p) - np.log1p(-q)), 0.0)
    out = t1 + t2
    out = np.where((q <= 0.0) & (p > 0.0), np.inf, out)
    out = np.where((q >= 1.0) & (p < 1.0), np.inf, out)
    return out


# ---------------------------------------------------------------------------
# report and transfer-curve types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectorReport:
    """Theory-plus-simulation record for one detector configuration.

    ``thresholds`` maps threshold names to values (which names are present
    depends on the detector).  ``monte_carlo_pe`` is the raw empirical error
    rate and ``mc_ci95`` the Wilson 95% half-width; ``n_symbols`` and
    ``n_errors`` let a reader recompute the interval exactly.
    """

    detector_kind: str
    thresholds: dict
    theory_pe: float
    monte_carlo_pe: float | None = None
    mc_ci95: float | None = None
    seed: int | None = None
    config: ChannelConfig | None = None
    n_symbols: int | None = None
    n_errors: int | None = None

    def __post_init__(self):
        if self.detector_kind not in _DETECTOR_KINDS:
            raise ConfigError(f"unknown detector kind {self.detector_kind!r}")
        if not (0.0 <= self.theory_pe <= 0.5 + 1e-9):
            raise InvariantViolation(
                f"theory error rate {self.theory_pe} outside [0, 1/2]"
            )
        if self.monte_carlo_pe is not None:
            if self.mc_ci95 is None or not self.mc_ci95 > 0.0:
                raise InvariantViolation(
                    "a Monte-Carlo rate needs a positive confidence half-width"
                )


@dataclass(frozen=True, eq=False)
class NonlinearFn:
    """Piecewise-linear anode transfer curve with a single peak.

    Starts at C(0) = 0, rises strictly to its peak at ``xs`` and is
    non-increasing afterwards; beyond the last grid point the curve
    continues flat.  Instances are callable and vectorized.
    """

    grid_x: np.ndarray
    grid_c: np.ndarray
    xs: float = field(init=False)

    def __post_init__(self):
        gx = np.asarray(self.grid_x, dtype=float)
        gc = np.asarray(self.grid_c, dtype=float)
        object.__setattr__(self, "grid_x", gx)
        object.__setattr__(self, "grid_c", gc)
        if gx.ndim != 1 or gx.shape != gc.shape or gx.size < 2:
            raise ConfigError("need matching 1-d grids with at least 2 points")
        if not (np.all(np.isfinite(gx)) and np.all(np.isfinite(gc))):
            raise ConfigError("transfer grids must be finite")
        if gx[0] != 0.0 or gc[0] != 0.0:
            raise ConfigError("transfer curve must start at C(0) = 0")
        if np.any(np.diff(gx) <= 0.0):
            raise ConfigError("grid_x must be strictly increasing")
        if np.any(gc < 0.0):
            raise ConfigError("transfer values must be nonnegative")
        jp = int(np.argmax(gc))
        d = np.diff(gc)
        if jp == 0 or np.any(d[:jp] <= 0.0):
            raise ConfigError("transfer curve must rise strictly up to its peak")
        if np.any(d[jp:] > 0.0):
            raise ConfigError("transfer curve must not rise past its peak")
        object.__setattr__(self, "xs", float(gx[jp]))

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.grid_x, self.grid_c)

    @property
    def ceiling(self) -> float:
        """Largest attainable output level (the saturation cap)."""
        return float(np.max(self.grid_c))

    @classmethod
    def identity(cls, x_max: float, n_points: int = 2) -> "NonlinearFn":
        """Unit-slope curve on [0, x_max] (no saturation within range)."""
        x = np.linspace(0.0, float(x_max), int(n_points))
        return cls(x, x.copy())


def nonlinear_sample_density(dist: MixedDist, C: NonlinearFn) -> MixedDist:
    """Law of C(Z) for a mixed sample law Z pushed through transfer curve C.

    The rising and falling branches are inverted segment by segment
    (piecewise-linear change of variables).  Stretches where C is exactly
    flat have zero derivative, so their probability is delivered as point
    masses at the flat value — the zero-width limit of mass binning — as is
    the constant continuation beyond the last grid point.  The atom at zero
    stays at zero since C(0) = 0.
    """
    if not isinstance(C, NonlinearFn):
        raise ConfigError("C must be a NonlinearFn")
    gx, gc = C.grid_x, C.grid_c
    jp = int(np.argmax(gc))
    x_up, c_up = gx[: jp + 1], gc[: jp + 1]
    slope_up = np.diff(c_up) / np.diff(x_up)
    x_dn, c_dn = gx[jp:], gc[jp:]
    slope_dn = np.diff(c_dn) / np.diff(x_dn)
    ceiling = float(gc[jp])

    atom = dist.atom_weight
    masses: dict[float, float] = {}

    def _add_mass(loc, m):
        if m > 0.0:
            masses[loc] = masses.get(loc, 0.0) + m

    for j in np.nonzero(slope_dn == 0.0)[0]:
        _add_mass(float(c_dn[j]), float(dist.cdf(x_dn[j + 1]) - dist.cdf(x_dn[j])))
    _add_mass(float(gc[-1]), float(dist.tail_mass(gx[-1])))
    for loc, m in dist.point_masses:
        v = float(C(loc))
        if v <= 0.0:
            atom += m
        else:
            _add_mass(v, m)

    # falling segments with a genuine slope: (low value, high value, left z,
    # slope, value at left z)
    falling = [
        (float(c_dn[j + 1]), float(c_dn[j]), float(x_dn[j]), float(slope_dn[j]))
        for j in np.nonzero(slope_dn < 0.0)[0]
    ]

    def density(v):
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        up = (v > 0.0) & (v <= ceiling)
        if up.any():
            vu = v[up]
            z = np.interp(vu, c_up, x_up)
            seg = np.clip(np.searchsorted(c_up, vu, side="right") - 1,
                          0, slope_up.size - 1)
            out[up] = dist.density(z) / slope_up[seg]
        for c_lo, c_hi, z0, sl in falling:
            m = (v > c_lo) & (v <= c_hi)
            if m.any():
                z = z0 + (v[m] - c_hi) / sl
                out[m] += dist.density(z) / (-sl)
        return out

    out = MixedDist(
        atom_weight=atom,
        density=density,
        z_cut=ceiling,
        point_masses=tuple(sorted(masses.items())),
    )
    # Pre-build the quadrature table with panel edges on the slope breaks;
    # the transformed density is kinked there and the generic builder would
    # grind against those corners.
    breaks = np.unique(np.concatenate([c_up, c_dn]))
    breaks = breaks[(breaks > 0.0) & (breaks < ceiling)]
    grid = PanelGrid.build(density, 0.0, ceiling, tol=1e-12,
                           initial_points=breaks if breaks.size else None)
    out._grid = grid
    out._cum = np.concatenate([[0.0], np.cumsum(grid.panel_sums)])
    return out


# ---------------------------------------------------------------------------
# shared numeric helpers
# ---------------------------------------------------------------------------

def _density_crossings(dens_a, dens_b, lo, hi, n_probe=1024):
    """Roots of dens_a - dens_b on [lo, hi], from sign changes on a probe grid."""
    x = np.linspace(lo, hi, n_probe)
    s = np.sign(dens_a(x) - dens_b(x))
    roots = []
    for i in np.nonzero(s[:-1] * s[1:] < 0)[0]:
        roots.append(brentq(
            lambda t: float(dens_a(np.array([t]))[0] - dens_b(np.array([t]))[0]),
            x[i], x[i + 1], xtol=1e-13, rtol=8.9e-16,
        ))
    return roots


def _half_min_overlap(dens_a, dens_b, lo, hi, atom_overlap=0.0):
    """0.5 * (atom_overlap + integral of min(dens_a, dens_b) over [lo, hi]).

    The axis is split at the density crossings first: the min has a kink
    there that would otherwise poison the quadrature error estimate.
    Returns (value, error_estimate).
    """
    cuts = [lo, *_density_crossings(dens_a, dens_b, lo, hi), hi]
    total = 0.0
    err = 0.0
    for lo_i, hi_i in zip(cuts[:-1], cuts[1:]):
        if not hi_i > lo_i:
            continue
        mid = np.array([0.5 * (lo_i + hi_i)])
        f = dens_a if float(dens_a(mid)[0]) <= float(dens_b(mid)[0]) else dens_b
        v, e = adaptive_quad(f, lo_i, hi_i, tol=1e-12, rtol=1e-9)
        total += v
        err += e
    return 0.5 * (atom_overlap + total), 0.5 * err


def _gaussian_ml_threshold(mu, sigma2):
    """ML boundary between N(0,1) and N(mu, sigma2); quadratic in the statistic."""
    if sigma2 <= 0.0:
        raise ConfigError(f"variance ratio must be positive, got {sigma2}")
    if abs(sigma2 - 1.0) < 1e-12:
        return 0.5 * mu
    disc = mu * mu + (sigma2 - 1.0) * (mu * mu + sigma2 * np.log(sigma2))
    if disc < 0.0:
        raise NumericError("Gaussian likelihoods do not cross on the real line")
    return (-mu + np.sqrt(disc)) / (sigma2 - 1.0)


def _quantile(dist: MixedDist, q: float) -> float:
    """Smallest z with P(Z <= z) >= q, capped at the tabulated support end."""
    hi = float(dist.z_cut)
    if dist.cdf(hi) < q:
        return hi
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if dist.cdf(mid) < q:
            lo = mid
        else:
            hi = mid
    return hi


def _wilson_halfwidth(k, n, z=_Z95):
    """Empirical rate and Wilson-interval half-width for k errors in n trials."""
    p_hat = k / n
    denom = 1.0 + z * z / n
    half = z * np.sqrt(p_hat * (1.0 - p_hat) / n + z * z / (4.0 * n * n)) / denom
    return p_hat, half


# ---------------------------------------------------------------------------
# integrated-power detection at infinite sampling rate
# ---------------------------------------------------------------------------

def _infinite_rate_params(config: ChannelConfig):
    """Effective rates and mean shifts of the symbol-integral law.

    In units of the integral divided by the dead time, each hypothesis is a
    mixed sample law with rate (1 - tau) times the symbol rate, displaced by
    a boundary drift of order tau (partial pulses at the symbol edges, the
    previous symbol averaged over its two equiprobable values).
    """
    tau = config.tau
    r_on = config.rate0 + config.rateA
    lam_on = r_on * (1.0 - tau)
    lam_off = config.rate0 * (1.0 - tau)
    half = 0.5 * (config.rate0 + config.rateA)
    shift_on = 1.5 * half * tau
    shift_off = 0.5 * (half + config.rate0) * tau
    return lam_on, lam_off, shift_on, shift_off


def mpd_infinite_mgf(omega, bit, config: ChannelConfig, model):
    """Laplace transform E[exp(-omega * y_s)] of the symbol-integrated anode
    power under symbol value ``bit``, for a unit rectangular pulse response.

    Valid for a unit-slope transfer and small dead-time fraction; boundary
    pulses clipped by the symbol edges are folded in as a deterministic mean
    shift of order tau^2, with smaller terms dropped.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0.0):
        raise ConfigError("mpd_infinite_mgf is defined for omega >= 0")
    tau = config.tau
    lam_on, lam_off, s_on, s_off = _infinite_rate_params(config)
    lam = lam_on if bit else lam_off
    drift = (s_on if bit else s_off) * tau
    out = mgf_sample(w * tau, lam, model.spread_ratio) * np.exp(-drift * w)
    return float(out) if np.ndim(omega) == 0 else out


def mpd_infinite_error(config: ChannelConfig, model) -> float:
    """ML error probability of integrated-power detection, unit transfer.

    A symbol window with no arrivals integrates to exactly zero under either
    hypothesis, so both atoms sit at zero and contribute the smaller weight;
    the continuous parts (mutually displaced by their boundary drifts) are
    integrated piecewise between crossing points.
    """
    a = model.spread_ratio
    lam_on, lam_off, s_on, s_off = _infinite_rate_params(config)
    w_on = float(np.exp(lam_on * (np.exp(-a) - 1.0)))
    w_off = float(np.exp(lam_off * (np.exp(-a) - 1.0)))

    def dens_on(z):
        return sample_pdf(np.asarray(z, dtype=float) - s_on, lam_on, a)

    def dens_off(z):
        return sample_pdf(np.asarray(z, dtype=float) - s_off, lam_off, a)

    hi = max(s_on + support_cutoff(lam_on, a),
             s_off + (support_cutoff(lam_off, a) if lam_off > 0 else 1.0))
    value, _ = _half_min_overlap(dens_off, dens_on, 0.0, hi,
                                 atom_overlap=min(w_on, w_off))
    return float(value)


# ---------------------------------------------------------------------------
# Gaussian statistics with several samples per dead time
# ---------------------------------------------------------------------------

def _oversample_mean_var(cur, prev, tau, ks, a):
    """Mean and variance of the within-symbol sample mean given the current
    and previous symbol rates, with ks samples per dead time."""
    qk = 2.0 - 3.0 / ks + 1.0 / ks ** 2
    m = cur * tau * (1.0 - tau) + (prev + cur) * 0.5 * tau * tau * (1.0 - 1.0 / ks)
    v = (cur * tau * tau * (1.0 - tau) * (1.0 + 2.0 / a)
         + (prev + cur) * tau ** 3 / 6.0 * (1.0 + 2.0 / a) * qk)
    return m, v


def mpd_oversample_stats(config: ChannelConfig, model, symbol_prev_rate=None):
    """Gaussian detection statistics of the within-symbol sample mean when
    several samples fit inside one dead time.

    The statistic averages the samples strictly inside the symbol (the
    boundary sample is excluded but kept in the divisor), which is the
    convention the closed-form moments describe.  The mean is normalized so
    the symbol-off hypothesis is standard normal; (mu_ks, sigma2_ks)
    describe the on hypothesis, averaged over the two equiprobable
    previous-symbol rates unless a realized ``symbol_prev_rate`` is passed.
    Returns (mu_ks, sigma2_ks, gamma_1a, pe_wa).
    """
    if config.mode != "over" and abs(config.Ts - config.tau) > 1e-12:
        raise ConfigError("within-symbol averaging needs sample spacing at or "
                          "inside the dead time (Ts <= tau)")
    ks = config.ks
    tau = config.tau
    a = model.spread_ratio
    r_off = config.rate0
    r_on = config.rate0 + config.rateA
    prevs = (r_off, r_on) if symbol_prev_rate is None else (float(symbol_prev_rate),)
    mus, s2s = [], []
    for prev in prevs:
        m1, v1 = _oversample_mean_var(r_on, prev, tau, ks, a)
        m0, v0 = _oversample_mean_var(r_off, prev, tau, ks, a)
        if v0 <= 0.0:
            raise ConfigError("off-hypothesis variance vanished; "
                              "a positive background rate is required")
        mus.append((m1 - m0) / np.sqrt(v0))
        s2s.append(v1 / v0)
    mu_ks = float(np.mean(mus))
    sigma2_ks = float(np.mean(s2s))
    gamma = float(_gaussian_ml_threshold(mu_ks, sigma2_ks))
    pe = 0.5 * (qfunc(gamma) + qfunc((mu_ks - gamma) / np.sqrt(sigma2_ks)))
    return mu_ks, sigma2_ks, gamma, float(pe)


# ---------------------------------------------------------------------------
# sample-mean detection at or above the dead-time interval
# ---------------------------------------------------------------------------

def mpd_undersample_error(L, lambda0, lambda1, model) -> float:
    """Exact ML error of the L-sample mean detector.

    The sum of L independent window sums with per-window mean ``lam`` is one
    window sum with mean L*lam, so the mean-statistic law is a rescaled
    single-sample law and the overlap integral collapses to one dimension;
    the no-photon atoms of both hypotheses coincide at zero.
    """
    if L != int(L) or L < 1:
        raise ConfigError(f"L must be a positive integer, got {L}")
    if not (0.0 <= lambda0 < lambda1):
        raise ConfigError(f"need 0 <= lambda0 < lambda1, got {lambda0}, {lambda1}")
    a = model.spread_ratio
    l0 = int(L) * lambda0
    l1 = int(L) * lambda1
    w0 = float(np.exp(l0 * (np.exp(-a) - 1.0)))
    w1 = float(np.exp(l1 * (np.exp(-a) - 1.0)))

    def dens0(u):
        return sample_pdf(u, l0, a)

    def dens1(u):
        return sample_pdf(u, l1, a)

    hi = max(support_cutoff(l1, a),
             support_cutoff(l0, a) if l0 > 0 else 0.0)
    value, _ = _half_min_overlap(dens0, dens1, 0.0, hi,
                                 atom_overlap=min(w0, w1))
    return float(value)


def mpd_undersample_gaussian(L, lambda0, lambda1, a):
    """Gaussian approximation of the L-sample mean detector.

    Normalized so the off hypothesis is standard normal.  Returns
    (gamma_La, pe_La); the true law has heavier tails, so the approximation
    is optimistic at small rates.
    """
    if L != int(L) or L < 1:
        raise ConfigError(f"L must be a positive integer, got {L}")
    if not (0.0 < lambda0 <= lambda1):
        raise ConfigError("needs 0 < lambda0 <= lambda1 (positive background)")
    mu = (lambda1 - lambda0) / np.sqrt(lambda0 * (1.0 + 2.0 / a) / int(L))
    sigma2 = lambda1 / lambda0
    gamma = float(_gaussian_ml_threshold(mu, sigma2))
    pe = 0.5 * (qfunc(gamma) + qfunc((mu - gamma) / np.sqrt(sigma2)))
    return gamma, float(pe)


# ---------------------------------------------------------------------------
# threshold-and-count detection
# ---------------------------------------------------------------------------

def _exceedance(dist: MixedDist, C, sigma0, gammas, tdist=None):
    """P(sample value + noise > gamma) for each threshold in ``gammas``.

    Without noise this is a tail mass of the (possibly transformed) law;
    with noise the Gaussian tail is averaged over the sample law, which
    handles flat transfer stretches and atoms without special cases.
    """
    gam = np.atleast_1d(np.asarray(gammas, dtype=float))
    if sigma0 == 0.0:
        src = tdist if C is not None else dist
        return np.atleast_1d(src.tail_mass(gam))
    nodes, weights = dist.quad_nodes()
    fvals = dist.density(nodes)
    cz = np.asarray(C(nodes), dtype=float) if C is not None else nodes
    wf = weights * fvals
    out = dist.atom_weight * qfunc(gam / sigma0) + wf @ qfunc(
        (gam[None, :] - cz[:, None]) / sigma0
    )
    for loc, m in dist.point_masses:
        v = float(C(loc)) if C is not None else loc
        out = out + m * qfunc((gam - v) / sigma0)
    return out


def pcd_threshold_opt(lambda0, lambda1, model, C=None, *, sigma0=0.0,
                      grid_points=2000):
    """Per-sample threshold maximizing the worse of the two exceedance KLs.

    The exceedance probabilities p_i = P(value > gamma2 | rate_i) turn each
    sample into a Bernoulli observation; gamma2 is chosen by grid search
    over [0, 0.9999-quantile of the on law] to maximize
    min(KL(off||on), KL(on||off)), then refined tenfold around the coarse
    winner.  ``sigma0 > 0`` adds per-sample Gaussian noise to the model.
    Returns (gamma2_star, p0, p1) with p0 < p1.
    """
    if not (0.0 <= lambda0 < lambda1):
        raise ConfigError(f"need 0 <= lambda0 < lambda1, got {lambda0}, {lambda1}")
    if sigma0 < 0.0:
        raise ConfigError("sigma0 must be >= 0")
    if C is not None and not isinstance(C, NonlinearFn):
        raise ConfigError("C must be a NonlinearFn or None")
    a = model.spread_ratio
    dist0 = sample_dist(lambda0, a)
    dist1 = sample_dist(lambda1, a)
    t0 = t1 = None
    if C is not None and sigma0 == 0.0:
        t0 = nonlinear_sample_density(dist0, C)
        t1 = nonlinear_sample_density(dist1, C)

    zq = _quantile(dist1, 0.9999)
    if C is None:
        hi = zq + 4.0 * sigma0
    else:
        hi = float(np.max(C(np.linspace(0.0, zq, 2049)))) + 4.0 * sigma0
    hi = max(hi, 1e-9)

    def pvals(gammas):
        return (_exceedance(dist0, C, sigma0, gammas, t0),
                _exceedance(dist1, C, sigma0, gammas, t1))

    step = hi / grid_points
    coarse = np.linspace(step, hi, grid_points)
    p0c, p1c = pvals(coarse)
    obj_c = np.minimum(bernoulli_kl(p0c, p1c), bernoulli_kl(p1c, p0c))
    j = int(np.argmax(obj_c))
    fine = np.linspace(max(1e-3 * step, coarse[j] - 2.0 * step),
                       min(hi, coarse[j] + 2.0 * step), 41)
    p0f, p1f = pvals(fine)
    obj_f = np.minimum(bernoulli_kl(p0f, p1f), bernoulli_kl(p1f, p0f))
    k = int(np.argmax(obj_f))
    if obj_f[k] >= obj_c[j]:
        g2, p0, p1 = float(fine[k]), float(p0f[k]), float(p1f[k])
    else:
        g2, p0, p1 = float(coarse[j]), float(p0c[j]), float(p1c[j])
    if not p0 < p1:
        raise ConfigError(
            "thresholding finds no contrast between the symbol hypotheses "
            f"(p0={p0:.3g}, p1={p1:.3g})"
        )
    return g2, p0, p1


def pcd_counting_threshold(p0, p1, L):
    """Majority cutoff for L Bernoulli samples: decide "on" when the
    exceedance count is strictly above n_th.

    p_th is the per-sample rate at which the two binomial likelihoods tie;
    n_th = floor(L * p_th).  Returns (n_th, p_th).
    """
    if not (0.0 < p0 < p1 < 1.0):
        raise ConfigError(f"need 0 < p0 < p1 < 1, got p0={p0}, p1={p1}")
    if L != int(L) or L < 1:
        raise ConfigError(f"L must be a positive integer, got {L}")
    anti = np.log((1.0 - p0) / (1.0 - p1))
    p_th = anti / (np.log(p1 / p0) + anti)
    n_th = int(np.floor(int(L) * p_th))
    return n_th, float(p_th)


def _counting_cutoff(p0, p1, L):
    """n_th with the boundary rates handled (p0 = 0 or p1 = 1)."""
    if p0 <= 0.0:
        return 0
    if p1 >= 1.0:
        return int(L) - 1
    return pcd_counting_threshold(p0, p1, L)[0]


def pcd_error(L, p0, p1) -> float:
    """Error probability of the counting detector with equiprobable symbols.

    Half the miss mass (count at or below the cutoff under the on rate) plus
    half the false-alarm mass (count above it under the off rate); both are
    regularized-incomplete-beta binomial tails, stable far into the tails.
    """
    if L != int(L) or L < 1:
        raise ConfigError(f"L must be a positive integer, got {L}")
    if not (0.0 <= p0 <= 1.0 and 0.0 <= p1 <= 1.0):
        raise ConfigError(f"rates outside [0, 1]: p0={p0}, p1={p1}")
    if p0 == p1:
        return 0.5
    if p0 > p1:
        raise ConfigError("exceedance must not decrease when the symbol is on")
    L = int(L)
    n_th = _counting_cutoff(p0, p1, L)
    miss = binom.cdf(n_th, L, p1)
    false_alarm = binom.sf(n_th, L, p0)
    return float(0.5 * (miss + false_alarm))


def chernoff_exponent(p0, p1):
    """Best achievable error exponent of the counting detector.

    Returns (lambda_star, exponent).  The exponent equals the Bernoulli KL
    divergence from the likelihood-tie rate p_th to either hypothesis (the
    two divergences coincide at the optimum).
    """
    if not (0.0 < p0 < p1 < 1.0):
        raise ConfigError(f"need 0 < p0 < p1 < 1, got p0={p0}, p1={p1}")
    anti = np.log((1.0 - p0) / (1.0 - p1))
    lam_star = (np.log((1.0 - p0) / p0 * anti / np.log(p1 / p0))
                / (np.log(p1 / (1.0 - p1)) - np.log(p0 / (1.0 - p0))))
    _, p_th = pcd_counting_threshold(p0, p1, L=1)
    exponent = float(bernoulli_kl(p_th, p1))
    return float(lam_star), exponent


# ---------------------------------------------------------------------------
# integrated-power detection through a bent transfer curve
# ---------------------------------------------------------------------------

def _integrated_power_tables(config, model, C, seed_seq, n_symbols, bins,
                             gain_law):
    """Histogram estimates of the symbol-integral law under both hypotheses.

    One stream with random symbols, so previous-symbol boundary effects
    enter at their natural 50/50 rate; the leading symbol is a warm-up and
    is discarded.
    """
    g = np.random.Generator(np.random.Philox(seed_seq))
    bits = draw_bits(g, n_symbols + 1)
    rates = config.rate0 + config.rateA * bits.astype(float)
    times, gains = gen_symbol_stream(g, rates, model, gain_law)
    y = mean_power_exact(times, gains, config.tau, n_symbols + 1, C=C)
    y, on = y[1:], bits[1:].astype(bool)
    hi = float(y.max()) * (1.0 + 1e-9) + 1e-300
    edges = np.linspace(0.0, hi, bins + 1)
    m1 = np.histogram(y[on], bins=edges)[0] / max(int(on.sum()), 1)
    m0 = np.histogram(y[~on], bins=edges)[0] / max(int((~on).sum()), 1)
    return edges, m1, m0


def mpd_nonlinear_error(config: ChannelConfig, model, C=None, *, seed=0,
                        n_symbols=150_000, bins=256, gain_law="model"):
    """ML error probability of integrated-power detection under transfer C.

    No closed form survives a bent transfer, so both conditional laws of the
    symbol integral are estimated from one simulated stream and the error is
    half the summed bin-wise minimum.  The estimate carries Monte-Carlo
    noise of order sqrt(pe / n_symbols); a warning is issued when fewer than
    about a hundred overlap events support it.
    """
    if C is not None and not isinstance(C, NonlinearFn):
        raise ConfigError("C must be a NonlinearFn or None")
    _, m1, m0 = _integrated_power_tables(
        config, model, C, np.random.SeedSequence(seed, spawn_key=(0x7E57,)),
        int(n_symbols), int(bins), gain_law,
    )
    pe = float(0.5 * np.minimum(m1, m0).sum())
    if pe * n_symbols < 100.0:
        warnings.warn("integrated-power overlap resolved by few events; "
                      "the error estimate is coarse", RuntimeWarning)
    return pe


# ---------------------------------------------------------------------------
# Monte-Carlo harness
# ---------------------------------------------------------------------------

def ml_detect_mc(rng, detector_kind, config: ChannelConfig, model, C=None,
                 n_symbols=50_000, *, sigma0=0.0, gain_law="model",
                 block_symbols=25_000, theory_symbols=None,
                 bins=256) -> DetectorReport:
    """Simulate a symbol stream and report a detector's empirical error rate.

    ``rng`` is an integer master seed, or a Generator from which a seed is
    drawn (either way the seed lands in the report, so a rerun reproduces
    it).  Symbols are processed in blocks, each with its own counter-based
    child stream, with a leading warm-up symbol per block so inter-symbol
    pulse carry-over is in equilibrium.  Thermal noise (sigma0 > 0) is
    honoured by the pulse counter only — the averaging detectors suppress
    per-sample noise by construction and their theory values assume none.
    """
    if detector_kind not in _DETECTOR_KINDS:
        raise ConfigError(f"unknown detector kind {detector_kind!r}")
    if isinstance(rng, (int, np.integer)):
        seed = int(rng)
    elif isinstance(rng, np.random.Generator):
        seed = int(rng.integers(1 << 63))
    else:
        raise ConfigError("rng must be an integer seed or a numpy Generator")
    n_symbols = int(n_symbols)
    if n_symbols < 1000:
        raise ConfigError("need at least 1000 symbols for a meaningful rate")
    if sigma0 < 0.0:
        raise ConfigError("sigma0 must be >= 0")
    if sigma0 > 0.0 and detector_kind != "pcd":
        raise ConfigError("thermal noise is modelled for the pulse counter only")
    if C is not None and detector_kind not in ("mpd-infinite", "pcd"):
        raise ConfigError("transfer curves are supported for integrated-power "
                          "and pulse-count detection")

    a = model.spread_ratio
    tau = config.tau
    thresholds: dict[str, float] = {}

    if detector_kind == "mpd-infinite":
        if C is None:
            lam_on, lam_off, s_on, s_off = _infinite_rate_params(config)
            theory = mpd_infinite_error(config, model)
            hi = max(s_on + support_cutoff(lam_on, a),
                     s_off + (support_cutoff(lam_off, a) if lam_off > 0 else 1.0))
            cr = _density_crossings(
                lambda z: sample_pdf(z - s_off, lam_off, a),
                lambda z: sample_pdf(z - s_on, lam_on, a), 0.0, hi)
            thresholds["y_cross"] = float(cr[0]) * tau if cr else 0.0

            def decide(y):
                z = y / tau
                on = sample_log_pdf(z - s_on, lam_on, a)
                off = sample_log_pdf(z - s_off, lam_off, a)
                return on > off
        else:
            n_theory = int(theory_symbols) if theory_symbols else max(n_symbols, 100_000)
            edges, m1, m0 = _integrated_power_tables(
                config, model, C,
                np.random.SeedSequence(seed, spawn_key=(0x7E57,)),
                n_theory, int(bins), gain_law,
            )
            theory = float(0.5 * np.minimum(m1, m0).sum())
            j = int(np.argmax(m1 > m0)) if np.any(m1 > m0) else m1.size - 1
            thresholds["y_cross"] = float(edges[j])

            def decide(y):
                idx = np.clip(np.searchsorted(edges, y, side="right") - 1,
                              0, m1.size - 1)
                return np.where(y >= edges[-1], True, m1[idx] > m0[idx])

        def per_block(g, bits, rates):
            times, gains = gen_symbol_stream(g, rates, model, gain_law)
            y = mean_power_exact(times, gains, tau, bits.size, C=C)
            return decide(y[1:])

    elif detector_kind == "mpd-oversample":
        mu_ks, s2_ks, gamma_1a, theory = mpd_oversample_stats(config, model)
        thresholds.update(gamma_1a=gamma_1a, mu_ks=mu_ks, sigma2_ks=s2_ks)
        r_off = config.rate0
        r_on = config.rate0 + config.rateA
        m0_off, v0_off = _oversample_mean_var(r_off, r_off, tau, config.ks, a)
        m0_on, v0_on = _oversample_mean_var(r_off, r_on, tau, config.ks, a)

        def per_block(g, bits, rates):
            times, gains = gen_symbol_stream(g, rates, model, gain_law)
            wave = synth_waveform(times, gains, config, n_symbols=bits.size)
            vals = wave.values.reshape(bits.size, -1)
            # the sample on the symbol boundary is not part of the statistic
            # (the within-symbol mean is taken over the strict interior grid)
            y = vals[:, :-1].sum(axis=1)[1:] / vals.shape[1]
            prev_on = bits[:-1] == 1
            m0 = np.where(prev_on, m0_on, m0_off)
            v0 = np.where(prev_on, v0_on, v0_off)
            return (y - m0) / np.sqrt(v0) > gamma_1a

    elif detector_kind == "mpd-undersample":
        L = config.L
        l0 = L * config.lam0
        l1 = L * config.lam1
        theory = mpd_undersample_error(L, config.lam0, config.lam1, model)
        if l0 > 0:
            hi = max(support_cutoff(l1, a), support_cutoff(l0, a))
            cr = _density_crossings(lambda u: sample_pdf(u, l0, a),
                                    lambda u: sample_pdf(u, l1, a), 0.0, hi)
            thresholds["u_cross"] = float(cr[0]) if cr else np.inf
        else:
            thresholds["u_cross"] = 0.0

        def per_block(g, bits, rates):
            times, gains = gen_symbol_stream(g, rates, model, gain_law)
            wave = synth_waveform(times, gains, config, n_symbols=bits.size)
            u = wave.values.reshape(bits.size, -1).sum(axis=1)[1:]
            return sample_log_pdf(u, l1, a) > sample_log_pdf(u, l0, a)

    else:  # pcd
        L = config.L
        g2, p0, p1 = pcd_threshold_opt(config.lam0, config.lam1, model, C,
                                       sigma0=sigma0)
        n_th = _counting_cutoff(p0, p1, L)
        theory = pcd_error(L, p0, p1)
        thresholds.update(gamma2=g2, n_th=float(n_th), p0=p0, p1=p1)

        def per_block(g, bits, rates):
            times, gains = gen_symbol_stream(g, rates, model, gain_law)
            wave = synth_waveform(times, gains, config, C=C,
                                  n_symbols=bits.size)
            v = wave.values
            if sigma0 > 0.0:
                v = v + g.normal(0.0, sigma0, v.size)
            counts = (v.reshape(bits.size, -1) > g2).sum(axis=1)[1:]
            return counts > n_th

    errors = 0
    total = 0
    n_blocks = int(np.ceil(n_symbols / block_symbols))
    for b_idx in range(n_blocks):
        nb = min(int(block_symbols), n_symbols - b_idx * int(block_symbols))
        g = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(seed, spawn_key=(b_idx,))))
        bits = draw_bits(g, nb + 1)
        rates = config.rate0 + config.rateA * bits.astype(float)
        dec = per_block(g, bits, rates)
        errors += int(np.count_nonzero(dec != (bits[1:] == 1)))
        total += nb

    p_hat, half = _wilson_halfwidth(errors, total)
    return DetectorReport(
        detector_kind=detector_kind,
        thresholds=thresholds,
        theory_pe=float(theory),
        monte_carlo_pe=float(p_hat),
        mc_ci95=float(half),
        seed=seed,
        config=config,
        n_symbols=total,
        n_errors=errors,
    )
