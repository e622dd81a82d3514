"""Statistical model of the photomultiplier gain and of normalized ADC samples.

The multiplier cascade is a branching process: one photoelectron enters stage
1 and every electron entering a stage releases a Poisson number of secondaries
with mean ``h`` (the per-stage multiplication).  After ``nu`` stages the total
gain G has mean A = h**nu and variance 2*A*B with B = (A-1)/(2*(h-1)).

For analysis the cascade is summarized by the two-parameter closed form

    E[exp(-w G)] = exp(-A*w / (1 + B*w)),

whose shape is controlled by the spread ratio a = A/B = 2*E[G]^2/Var[G].
A normalized ADC sample (integrated anode current over one hold time,
divided by A) given a mean photon count ``lam`` per hold window then has

    E[exp(-w Z)] = exp(lam * (exp(-w/(1 + w/a)) - 1)),

a mixed law: an atom at zero (no photon registered, or all cascades died
out) of weight exp(lam*(exp(-a)-1)) plus a continuous part expressible as
a Bessel-I1 series.  This module evaluates that law (pdf/cdf/moments) and
provides two samplers: the physical branching cascade and an exact sampler
of the closed-form law via its Poisson-Gamma representation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, i1e, logsumexp

from ._quad import PanelGrid, _panel_eval
from .errors import ConfigError, NumericError

__all__ = [
    "GainModel",
    "MixedDist",
    "mgf_gain",
    "mgf_sample",
    "log_i1",
    "sample_log_pdf",
    "sample_pdf",
    "sample_dist",
    "single_photon_pdf",
    "single_photon_log_pdf",
    "support_cutoff",
    "extinction_probability",
    "draw_gain_branching",
    "draw_sample_value",
    "draw_sample_exact",
]


# ---------------------------------------------------------------------------
# gain model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GainModel:
    """Multiplier cascade with ``stages`` stages and total mean gain ``mean_gain``.

    Per-stage multiplication is Poisson with mean ``mean_gain**(1/stages)``.
    """

    mean_gain: float
    stages: int = 12

    def __post_init__(self):
        if not self.mean_gain > 1.0:
            raise ConfigError(f"mean_gain must be > 1, got {self.mean_gain}")
        if not (isinstance(self.stages, (int, np.integer)) and self.stages >= 1):
            raise ConfigError(f"stages must be a positive integer, got {self.stages}")

    @property
    def per_stage_mean(self) -> float:
        return self.mean_gain ** (1.0 / self.stages)

    @property
    def diffusion_scale(self) -> float:
        """B in E[exp(-wG)] = exp(-A w/(1+B w)); equals (A-1)/(2(h-1))."""
        return (self.mean_gain - 1.0) / (2.0 * (self.per_stage_mean - 1.0))

    @property
    def variance(self) -> float:
        """Exact branching variance; coincides with 2*A*B of the closed form."""
        return 2.0 * self.mean_gain * self.diffusion_scale

    @property
    def spread_ratio(self) -> float:
        """a = A/B = 2 E[G]^2 / Var[G]; the single shape parameter downstream."""
        return self.mean_gain / self.diffusion_scale

    @classmethod
    def from_spread_ratio(cls, a: float, stages: int = 12) -> "GainModel":
        """Back-solve the mean gain so that the model's spread ratio equals ``a``.

        Useful when ``a`` was inferred from measurements rather than from a
        known stage count / gain pair.
        """
        if not a > 0:
            raise ConfigError(f"spread ratio must be positive, got {a}")

        def mismatch(logA):
            A = np.exp(logA)
            h = A ** (1.0 / stages)
            return 2.0 * A * (h - 1.0) / (A - 1.0) - a

        # a -> 2(h-1) as A -> inf, and -> ~2*stages*... small as A -> 1+;
        # bracket on log-gain.
        lo, hi = 1e-9, 60.0
        if mismatch(lo) > 0 or mismatch(hi) < 0:
            raise ConfigError(f"spread ratio {a} not reachable with {stages} stages")
        logA = brentq(mismatch, lo, hi, xtol=1e-14, rtol=8.9e-16)
        return cls(mean_gain=float(np.exp(logA)), stages=stages)


def mgf_gain(omega, model: GainModel):
    """E[exp(-omega*G)] of the closed-form cascade law, omega >= 0."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ConfigError("mgf_gain is defined for omega >= 0")
    A, B = model.mean_gain, model.diffusion_scale
    return np.exp(-A * w / (1.0 + B * w))


def mgf_sample(omega, lam: float, a: float):
    """E[exp(-omega*Z)] of a normalized sample with mean photon count ``lam``."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ConfigError("mgf_sample is defined for omega >= 0")
    if lam < 0 or a <= 0:
        raise ConfigError(f"need lam >= 0 and a > 0, got lam={lam}, a={a}")
    return np.exp(lam * (np.exp(-w / (1.0 + w / a)) - 1.0))


def extinction_probability(model: GainModel) -> float:
    """P(G = 0): the cascade dies out within ``stages`` stages.

    Probability-generating-function iteration x <- exp(h*(x-1)) applied
    ``stages`` times to x = 0.
    """
    h = model.per_stage_mean
    x = 0.0
    for _ in range(model.stages):
        x = np.exp(h * (x - 1.0))
    return float(x)


# ---------------------------------------------------------------------------
# Bessel I1 in log space
# ---------------------------------------------------------------------------

def log_i1(y):
    """log of the modified Bessel function I1, safe for large arguments.

    Uses the exponentially scaled Bessel function, log I1(y) = log(i1e(y)) + y,
    so arguments in the thousands neither overflow nor lose precision.
    """
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y).astype(float)
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise ConfigError("log_i1 requires finite y >= 0")
    out = np.full(y.shape, -np.inf)
    pos = y > 0
    if pos.any():
        with np.errstate(divide="ignore"):
            out[pos] = np.log(i1e(y[pos])) + y[pos]
    return out[0] if scalar else out


# ---------------------------------------------------------------------------
# mixed law of a normalized sample
# ---------------------------------------------------------------------------

def _series_length(lam: float, a: float, z_max: float) -> int:
    """Number of photon-count terms needed at the farthest evaluation point.

    The n-th term carries weight q^n/n! (q = lam*exp(-a)) times an I1 factor
    growing no faster than exp(2a*sqrt(n*z)).  Successive-term ratio is
    bounded by r_n = q/(n+1) * exp(a*sqrt(z_max)/sqrt(n)); once r_n < 1/2 the
    remainder is dominated by a geometric series, so stopping where the term
    is below 1e-18 of the running peak leaves a tail < 2e-18 of the total.
    """
    q = lam * np.exp(-a)
    if q == 0.0:
        return 1
    c = a * np.sqrt(max(z_max, 0.0))
    n = 1
    while q / (n + 1.0) * np.exp(c / np.sqrt(n)) >= 0.5:
        n += 1
        if n > 200_000:
            raise NumericError("photon-count series bound did not close")
    # From here the terms at z_max decay at least geometrically; walk until
    # the actual term drops 18 decades below the running maximum.
    ns = np.arange(1, n + 1, dtype=float)
    lt = 0.5 * np.log(ns) + ns * np.log(q) - gammaln(ns + 1.0) + log_i1(2.0 * a * np.sqrt(ns * z_max))
    peak = np.max(lt)
    extra = 0
    last = lt[-1]
    while last > peak - 42.0 and extra < 200_000:  # 42 ~ ln(1e-18) margin
        extra += 1
        m = n + extra
        last += np.log(q / m) + 0.5 * np.log(m / (m - 1.0)) \
            + (log_i1(2.0 * a * np.sqrt(m * z_max)) - log_i1(2.0 * a * np.sqrt((m - 1.0) * z_max)))
    return n + extra


def sample_log_pdf(z, lam: float, a: float, *, _n_terms: int | None = None):
    """log of the continuous part of the normalized-sample law at z > 0.

    Returns -inf for z <= 0 (the continuous part lives on (0, inf); the atom
    at zero is carried separately by MixedDist).
    """
    if lam < 0 or a <= 0:
        raise ConfigError(f"need lam >= 0 and a > 0, got lam={lam}, a={a}")
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z).astype(float)
    out = np.full(z.shape, -np.inf)
    if lam == 0.0:
        return out[0] if scalar else out
    pos = z > 0
    if pos.any():
        zp = z[pos]
        n_terms = _n_terms or _series_length(lam, a, float(np.max(zp)))
        ns = np.arange(1, n_terms + 1, dtype=float)[:, None]
        lr = (
            0.5 * np.log(ns)
            + ns * (np.log(lam) - a)
            - gammaln(ns + 1.0)
            + log_i1(2.0 * a * np.sqrt(ns * zp[None, :]))
        )
        out[pos] = np.log(a) - 0.5 * np.log(zp) - (lam + a * zp) + logsumexp(lr, axis=0)
    return out[0] if scalar else out


def sample_pdf(z, lam: float, a: float):
    """Continuous part of the normalized-sample law (see sample_log_pdf)."""
    return np.exp(sample_log_pdf(z, lam, a))


def single_photon_log_pdf(z, a: float):
    """Log of the continuous part of one photoelectron's normalized gain."""
    z = np.asarray(z, dtype=float)
    out = np.full_like(z, -np.inf, dtype=float)
    pos = z > 0
    zp = z[pos]
    out[pos] = (np.log(a) - 0.5 * np.log(zp) - a * (1.0 + zp)
                + log_i1(2.0 * a * np.sqrt(zp)))
    return out


def single_photon_pdf(z, a: float):
    """Continuous part of one photoelectron's normalized gain.

    Integrates to 1 - exp(-a); the remaining mass is the dead-cascade atom.
    """
    with np.errstate(under="ignore"):
        return np.exp(single_photon_log_pdf(z, a))


def support_cutoff(lam: float, a: float, *, floor: float = 1e-18) -> float:
    """Upper z beyond which the continuous density stays below ``floor``.

    The density is unimodal with an exponentially dominated right tail, so an
    expanding search from the bulk followed by bisection is enough.
    """
    if lam == 0.0:
        return 1.0
    mean = lam
    sd = np.sqrt(lam * (1.0 + 2.0 / a))
    lo = mean + 5.0 * sd
    lf = np.log(floor)
    while sample_log_pdf(lo, lam, a) > lf:
        lo *= 1.6
    hi = lo
    lo = max(mean, 1e-6)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if sample_log_pdf(mid, lam, a) > lf:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-3 * max(1.0, hi):
            break
    return float(hi)


@dataclass
class MixedDist:
    """Atom-at-zero plus continuous density on (0, inf).

    ``density`` is vectorized.  ``cdf`` (of the full law, atom included) is
    backed by a lazily built quadrature table.  ``point_masses`` holds any
    further point masses at strictly positive locations as (location, mass)
    pairs; they arise when a law is pushed through a transfer curve with
    exactly flat stretches.
    """

    atom_weight: float
    density: Callable[[np.ndarray], np.ndarray]
    log_density: Callable[[np.ndarray], np.ndarray] | None = None
    mean: float | None = None
    var: float | None = None
    z_cut: float | None = None
    point_masses: tuple = ()
    _grid: PanelGrid | None = field(default=None, repr=False)
    _cum: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not (0.0 <= self.atom_weight <= 1.0 + 1e-12):
            raise ConfigError(f"atom weight {self.atom_weight} outside [0, 1]")
        for loc, mass in self.point_masses:
            if not (loc > 0.0 and mass >= 0.0):
                raise ConfigError(
                    f"point mass ({loc}, {mass}) must have loc > 0 and mass >= 0"
                )

    def _table(self) -> tuple[PanelGrid, np.ndarray]:
        if self._grid is None:
            if self.z_cut is None:
                raise NumericError("MixedDist without z_cut cannot build a cdf table")
            hint = self.mean if self.mean else 0.5 * self.z_cut
            grid = PanelGrid.build(
                self.density, 0.0, self.z_cut,
                tol=1e-12, initial_points=np.array([hint, 2.0 * hint]),
            )
            self._grid = grid
            self._cum = np.concatenate([[0.0], np.cumsum(grid.panel_sums)])
        return self._grid, self._cum

    def continuous_mass(self) -> float:
        _, cum = self._table()
        return float(cum[-1])

    def quad_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes and weights resolving the continuous part, for
        integrating smooth functions against this law."""
        grid, _ = self._table()
        return grid.nodes, grid.weights

    def cdf(self, z) -> np.ndarray:
        """P(Z <= z), including the atom at zero for z >= 0.

        Panel integrals give the exact cumulative at panel edges; the
        remainder from the nearest lower edge to each query point is
        integrated directly, so accuracy does not depend on node spacing.
        """
        grid, cum = self._table()
        scalar = np.isscalar(z) or np.ndim(z) == 0
        z = np.atleast_1d(np.asarray(z, dtype=float))
        zc = np.clip(z, grid.edges[0], grid.edges[-1])
        idx = np.clip(np.searchsorted(grid.edges, zc, side="right") - 1,
                      0, len(grid.edges) - 2)
        lo = grid.edges[idx]
        inner = zc > lo
        resid = np.zeros_like(zc)
        if inner.any():
            resid[inner] = _panel_eval(self.density, lo[inner], zc[inner])[0]
        res = np.where(z >= 0.0, self.atom_weight + cum[idx] + resid, 0.0)
        for loc, mass in self.point_masses:
            res = res + mass * (z >= loc)
        res = np.minimum(res, 1.0)
        return float(res[0]) if scalar else res

    def tail_mass(self, z) -> np.ndarray:
        """P(Z > z); complements cdf through the total carried mass."""
        _, cum = self._table()
        total = self.atom_weight + cum[-1] + sum(m for _, m in self.point_masses)
        return np.clip(total - self.cdf(z), 0.0, 1.0)


def sample_dist(lam: float, a: float) -> MixedDist:
    """Mixed law of a normalized ADC sample with mean photon count ``lam``.

    Atom weight exp(lam*(exp(-a)-1)); continuous part the Bessel-I1 series.
    Mean is lam and variance lam*(1+2/a) exactly.
    """
    if lam < 0 or a <= 0:
        raise ConfigError(f"need lam >= 0 and a > 0, got lam={lam}, a={a}")
    atom = float(np.exp(lam * (np.exp(-a) - 1.0)))
    if lam == 0.0:
        return MixedDist(
            atom_weight=1.0,
            density=lambda z: np.zeros_like(np.asarray(z, dtype=float)),
            log_density=lambda z: np.full(np.shape(z), -np.inf),
            mean=0.0, var=0.0, z_cut=1.0,
        )

    def logpdf(z):
        return sample_log_pdf(z, lam, a)

    return MixedDist(
        atom_weight=atom,
        density=lambda z: np.exp(sample_log_pdf(z, lam, a)),
        log_density=logpdf,
        mean=lam,
        var=lam * (1.0 + 2.0 / a),
        z_cut=support_cutoff(lam, a),
    )


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def draw_gain_branching(rng: np.random.Generator, model: GainModel, size: int) -> np.ndarray:
    """Sample raw gains by running the cascade stage by stage.

    An electron count s entering a stage leaves Poisson(h*s) secondaries
    (the sum of s iid Poisson(h) broods), so each stage is one vectorized
    Poisson draw.
    """
    h = model.per_stage_mean
    s = np.ones(size, dtype=np.int64)
    for _ in range(model.stages):
        s = rng.poisson(h * s.astype(float))
    return s.astype(float)


def draw_sample_value(rng: np.random.Generator, lam: float, model: GainModel, size: int) -> np.ndarray:
    """Sample normalized ADC values: Poisson(lam) photons, cascade gains, /A."""
    counts = rng.poisson(lam, size)
    total_photons = int(counts.sum())
    if total_photons == 0:
        return np.zeros(size)
    gains = draw_gain_branching(rng, model, total_photons)
    owners = np.repeat(np.arange(size), counts)
    return np.bincount(owners, weights=gains, minlength=size) / model.mean_gain


def draw_sample_exact(rng: np.random.Generator, lam: float, a: float, size: int) -> np.ndarray:
    """Sample the closed-form mixed law exactly via Poisson-Gamma.

    E[exp(-wZ)] = exp(lam(exp(-w/(1+w/a))-1)) is the law of Gamma(K, 1/a)
    with K ~ Poisson(a*N), N ~ Poisson(lam); K = 0 gives the atom at zero.
    """
    n = rng.poisson(lam, size)
    k = rng.poisson(a * n.astype(float))
    z = np.zeros(size)
    pos = k > 0
    if pos.any():
        z[pos] = rng.standard_gamma(k[pos].astype(float)) / a
    return z
