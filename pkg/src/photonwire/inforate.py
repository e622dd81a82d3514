"""OOK mutual information over the mixed sample law and duty-cycle search.

The per-sample observation has an atom at zero (no photon detected) plus a
continuous amplified-charge density, so the mutual information splits into a
discrete part over the atom cells and a continuous part over densities.  All
internal quantities are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve

from ._quad import PanelGrid, adaptive_quad
from .errors import ConfigError, NumericError
from .gain import sample_dist, sample_log_pdf, single_photon_log_pdf

__all__ = [
    "MutualInfoBreakdown",
    "mutual_info_single",
    "mutual_info_multi",
    "suboptimal_duty_single",
    "suboptimal_duty_multi",
    "optimal_duty_single",
    "optimal_duty_multi",
    "continuum_expansion_constants",
    "binary_entropy",
]

MAX_SAMPLES = 12
_LATTICE_BINS = 8192
_ROOT_TOL = 1e-8
_MU_LO, _MU_HI = 1e-6, 1.0 - 1e-6


@dataclass(frozen=True)
class MutualInfoBreakdown:
    """Mutual information split into atom-cell and density contributions."""

    total: float
    discrete_part: float
    continuous_part: float
    mu: float
    quadrature_error_estimate: float


def binary_entropy(mu):
    """H2(mu) in nats."""
    return float(-mu * np.log(mu) - (1.0 - mu) * np.log1p(-mu))


def _check_mu(mu):
    if not (0.0 < mu < 1.0):
        raise ConfigError(f"duty cycle must be in (0, 1), got {mu}")


def _check_rates(lambda0, lambda1):
    if lambda0 < 0 or lambda1 <= 0 or lambda0 > lambda1:
        raise ConfigError(
            f"need 0 <= lambda0 <= lambda1, got ({lambda0}, {lambda1})"
        )


def _linear_bin(values, masses, t0, dt, nbins):
    """Spread point masses onto a uniform lattice, preserving total mass
    and first moment (two-point assignment)."""
    x = (values - t0) / dt
    idx = np.clip(np.floor(x).astype(np.intp), 0, nbins - 2)
    frac = np.clip(x - idx, 0.0, 1.0)
    out = np.zeros(nbins)
    np.add.at(out, idx, masses * (1.0 - frac))
    np.add.at(out, idx + 1, masses * frac)
    return out


class _LogRatioLattice:
    """Distribution of the per-sample log density ratio ln f0 - ln f1 under
    each conditional continuum, plus its k-fold i.i.d. sums on a lattice."""

    def __init__(self, v, mass1, mass0):
        lo, hi = float(v.min()), float(v.max())
        pad = 1e-9 * (hi - lo) + 1e-12
        self.t0 = lo - pad
        self.dt = (hi - lo + 2 * pad) / (_LATTICE_BINS - 1)
        self.base1 = _linear_bin(v, mass1, self.t0, self.dt, _LATTICE_BINS)
        self.base0 = _linear_bin(v, mass0, self.t0, self.dt, _LATTICE_BINS)
        self._sums1 = [None, self.base1]
        self._sums0 = [None, self.base0]

    def kfold(self, k):
        """(lattice values, masses under f1, masses under f0) for the sum
        of k i.i.d. copies."""
        while len(self._sums1) <= k:
            self._sums1.append(
                np.maximum(fftconvolve(self._sums1[-1], self.base1), 0.0))
            self._sums0.append(
                np.maximum(fftconvolve(self._sums0[-1], self.base0), 0.0))
        m1, m0 = self._sums1[k], self._sums0[k]
        t = k * self.t0 + self.dt * np.arange(m1.size)
        return t, m1, m0


class _ChannelTable:
    """Frozen quadrature grid plus every mu-independent quantity of one
    (lambda0, lambda1, a) channel.

    Mutual information at many duty cycles (grid searches, bisection) then
    reduces to dot products over the cached node values.
    """

    def __init__(self, lambda0, lambda1, a):
        self.lambda0, self.lambda1, self.a = lambda0, lambda1, a
        d0 = sample_dist(lambda0, a)
        d1 = sample_dist(lambda1, a)
        self.a0, self.a1 = d0.atom_weight, d1.atom_weight
        u = -math.expm1(-a)  # 1 - e^{-a}
        self.s0 = -math.expm1(-lambda0 * u)
        self.s1 = -math.expm1(-lambda1 * u)
        zcut = max(d0.z_cut, d1.z_cut)

        def pilot(z):
            return d0.density(z) + d1.density(z)

        coarse = PanelGrid.build(pilot, 0.0, zcut, tol=1e-11)
        self.grids = (coarse, coarse.bisect())
        self.logf0, self.logf1, self.f0, self.f1 = [], [], [], []
        self.H0, self.H1 = [], []
        self.lattices = []
        for g in self.grids:
            lg0 = sample_log_pdf(g.nodes, lambda0, a)
            lg1 = sample_log_pdf(g.nodes, lambda1, a)
            f0, f1 = np.exp(lg0), np.exp(lg1)
            self.logf0.append(lg0)
            self.logf1.append(lg1)
            self.f0.append(f0)
            self.f1.append(f1)
            self.H0.append(-g.integrate(f0 * np.where(f0 > 0, lg0, 0.0)))
            self.H1.append(-g.integrate(f1 * np.where(f1 > 0, lg1, 0.0)))
            v = lg0 - lg1
            self.lattices.append(_LogRatioLattice(
                v, g.weights * f1 / self.s1, g.weights * f0 / self.s0))

    # -- single sample, entropy form --------------------------------------
    def mi_single(self, mu, gi):
        g = self.grids[gi]
        f0, f1 = self.f0[gi], self.f1[gi]
        logmix = np.logaddexp(np.log(mu) + self.logf1[gi],
                              np.log1p(-mu) + self.logf0[gi])
        mix = mu * f1 + (1.0 - mu) * f0
        Hmix = -g.integrate(mix * np.where(mix > 0, logmix, 0.0))
        IC = Hmix - mu * self.H1[gi] - (1.0 - mu) * self.H0[gi]
        p = mu * self.a1 + (1.0 - mu) * self.a0
        ID = (-p * math.log(p) + mu * self.a1 * math.log(self.a1)
              + (1.0 - mu) * self.a0 * math.log(self.a0))
        return ID, IC

    # -- L samples, likelihood-ratio form ----------------------------------
    def _cell_expectations(self, mu, L, gi):
        """Per photon-pattern-size k: the two conditional expectations of
        ln(mu + (1-mu) P0/P1) and ln(mu P1/P0 + (1-mu)), plus cell masses.

        Cells group the L-sample outcome by which samples hit the atom;
        exchangeability collapses 2^L cells to k = 0..L.
        """
        log_mu = math.log(mu)
        log_nu = math.log1p(-mu)
        dla = math.log(self.a0) - math.log(self.a1)  # per-atom-cell ratio
        lat = self.lattices[gi]
        v_nodes = self.logf0[gi] - self.logf1[gi]
        w = self.grids[gi].weights
        m1_node = w * self.f1[gi] / self.s1
        m0_node = w * self.f0[gi] / self.s0
        E1 = np.empty(L + 1)
        E0 = np.empty(L + 1)
        for k in range(L + 1):
            c = (L - k) * dla
            if k == 0:
                E1[k] = np.logaddexp(log_mu, log_nu + c)
                E0[k] = np.logaddexp(log_mu - c, log_nu)
            elif k == 1:
                E1[k] = float(m1_node @ np.logaddexp(log_mu, log_nu + c + v_nodes))
                E0[k] = float(m0_node @ np.logaddexp(log_mu - c - v_nodes, log_nu))
            else:
                t, m1, m0 = lat.kfold(k)
                E1[k] = float(m1 @ np.logaddexp(log_mu, log_nu + c + t))
                E0[k] = float(m0 @ np.logaddexp(log_mu - c - t, log_nu))
        ks = np.arange(L + 1)
        comb = np.array([math.comb(L, int(k)) for k in ks], dtype=float)
        cell1 = comb * self.a1 ** (L - ks) * self.s1 ** ks
        cell0 = comb * self.a0 ** (L - ks) * self.s0 ** ks
        return E1, E0, cell1, cell0

    def mi_multi(self, mu, L, gi):
        """(discrete_part, continuous_part): k=0 cell vs the rest."""
        E1, E0, cell1, cell0 = self._cell_expectations(mu, L, gi)
        terms = -mu * cell1 * E1 - (1.0 - mu) * cell0 * E0
        return float(terms[0]), float(terms[1:].sum())

    def mi_slope_multi(self, mu, L, gi):
        """d/dmu of the L-sample mutual information.

        Equals KL(P1 || mix) - KL(P0 || mix); the mixture-weight derivative
        cancels exactly, so the same cell expectations are reused.
        """
        E1, E0, cell1, cell0 = self._cell_expectations(mu, L, gi)
        return float(-(cell1 @ E1) + (cell0 @ E0))


@lru_cache(maxsize=32)
def _table(lambda0, lambda1, a):
    return _ChannelTable(lambda0, lambda1, a)


def _mi_zero_background(mu, lambda1, a):
    """Exact closed form when lambda0 = 0 (the off symbol is a pure atom)."""
    u = -math.expm1(-a)
    a1 = math.exp(-lambda1 * u)
    s1 = -math.expm1(-lambda1 * u)
    p = mu * a1 + (1.0 - mu)
    ID = -p * math.log(p) + mu * a1 * math.log(a1)
    IC = -mu * s1 * math.log(mu)
    return ID, IC


def mutual_info_single(mu, lambda0, lambda1, a):
    """Mutual information (nats) of one mixed-law sample under OOK.

    Parameters
    ----------
    mu : float
        Duty cycle (prior of the on symbol), in (0, 1).
    lambda0, lambda1 : float
        Mean detected photons per sample for the off/on symbol.
    a : float
        Spread ratio of the normalized gain law.
    """
    _check_mu(mu)
    _check_rates(lambda0, lambda1)
    if lambda0 == 0.0:
        ID, IC = _mi_zero_background(mu, lambda1, a)
        return MutualInfoBreakdown(ID + IC, ID, IC, mu, 0.0)
    tab = _table(lambda0, lambda1, a)
    ID, IC_f = tab.mi_single(mu, 1)
    _, IC_c = tab.mi_single(mu, 0)
    err = abs(IC_f - IC_c) + 1e-14
    return MutualInfoBreakdown(ID + IC_f, ID, IC_f, mu, err)


def mutual_info_multi(mu, lambda0, lambda1, a, L):
    """Mutual information (nats) of L i.i.d. mixed-law samples under OOK.

    The 2^L atom/continuum outcome cells collapse by exchangeability to
    L+1 weighted terms; the k-sample log-likelihood-ratio distributions
    are built by lattice convolution.
    """
    if L != int(L) or L < 1:
        raise ConfigError(f"L must be a positive integer, got {L}")
    L = int(L)
    if L > MAX_SAMPLES:
        raise ConfigError(
            f"L={L} unsupported: outcome-cell expansion is limited to "
            f"L <= {MAX_SAMPLES}")
    if L == 1:
        return mutual_info_single(mu, lambda0, lambda1, a)
    _check_mu(mu)
    _check_rates(lambda0, lambda1)
    if lambda0 == 0.0:
        # L pure-atom off-samples behave as one sample with atom a1^L
        u = -math.expm1(-a)
        a1L = math.exp(-lambda1 * u * L)
        p = mu * a1L + (1.0 - mu)
        ID = -p * math.log(p) + mu * a1L * math.log(a1L)
        IC = -mu * (1.0 - a1L) * math.log(mu)
        return MutualInfoBreakdown(ID + IC, ID, IC, mu, 0.0)
    tab = _table(lambda0, lambda1, a)
    ID_f, IC_f = tab.mi_multi(mu, L, 1)
    ID_c, IC_c = tab.mi_multi(mu, L, 0)
    err = abs((ID_f + IC_f) - (ID_c + IC_c)) + 1e-14
    return MutualInfoBreakdown(ID_f + IC_f, ID_f, IC_f, mu, err)


def suboptimal_duty_single(lambda1, a, eta=1.0):
    """Closed-form near-optimal duty cycle for zero background.

    Returns min(eta, (1 - a1 + a1^{-a1/(1-a1)})^{-1}) with
    a1 = exp(-lambda1 (1 - e^{-a})).
    """
    if lambda1 <= 0:
        raise ConfigError(f"lambda1 must be > 0, got {lambda1}")
    if not (0 < eta <= 1):
        raise ConfigError(f"eta must be in (0, 1], got {eta}")
    u = -math.expm1(-a)
    log_a1 = -lambda1 * u
    a1 = math.exp(log_a1)
    s1 = -math.expm1(log_a1)  # 1 - a1
    mu = 1.0 / (s1 + math.exp(-a1 * log_a1 / s1))
    return min(eta, mu)


def suboptimal_duty_multi(lambda1, a, L, eta=1.0):
    """Closed-form near-optimal duty for L samples: a1 -> a1^L."""
    if L != int(L) or L < 1:
        raise ConfigError(f"L must be a positive integer, got {L}")
    return suboptimal_duty_single(lambda1 * int(L), a, eta)


def _bisect_slope(slope, eta):
    """Root of a decreasing slope function on the open duty interval."""
    lo, hi = _MU_LO, min(eta, _MU_HI)
    f_lo = slope(lo)
    f_hi = slope(hi)
    if f_lo < 0:
        raise NumericError(
            f"duty slope negative ({f_lo:.3e}) at mu={lo}; no interior max")
    if f_hi > 0:
        return hi  # still increasing at the constraint: boundary optimum
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = slope(mid)
        if abs(f_mid) < _ROOT_TOL:
            return mid
        if f_mid > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    raise NumericError(
        f"duty-cycle slope did not reach |slope| < {_ROOT_TOL} "
        f"(final bracket [{lo}, {hi}])")


def optimal_duty_single(lambda0, lambda1, a, eta=1.0):
    """Duty cycle maximizing mutual_info_single, by bisection on its
    concave slope KL(P1||mix) - KL(P0||mix); clamped by eta."""
    _check_rates(lambda0, lambda1)
    if not (0 < eta <= 1):
        raise ConfigError(f"eta must be in (0, 1], got {eta}")
    if lambda0 == 0.0:
        return suboptimal_duty_single(lambda1, a, eta)
    tab = _table(lambda0, lambda1, a)
    return _bisect_slope(lambda mu: tab.mi_slope_multi(mu, 1, 1), eta)


def optimal_duty_multi(lambda0, lambda1, a, L, eta=1.0):
    """Duty cycle maximizing mutual_info_multi at L samples per symbol."""
    if L != int(L) or L < 1:
        raise ConfigError(f"L must be a positive integer, got {L}")
    L = int(L)
    if L > MAX_SAMPLES:
        raise ConfigError(f"L={L} unsupported, limit is {MAX_SAMPLES}")
    if L == 1:
        return optimal_duty_single(lambda0, lambda1, a, eta)
    _check_rates(lambda0, lambda1)
    if not (0 < eta <= 1):
        raise ConfigError(f"eta must be in (0, 1], got {eta}")
    if lambda0 == 0.0:
        return suboptimal_duty_multi(lambda1, a, L, eta)
    tab = _table(lambda0, lambda1, a)
    return _bisect_slope(lambda mu: tab.mi_slope_multi(mu, L, 1), eta)


def continuum_expansion_constants(lambda1, a):
    """Diagnostic constants of the small-background expansion of the
    continuous mutual-information part.

    Returns (C1, C2) where, with g the one-photon charge density carrying
    mass 1 - e^{-a},  C1 = -int g ln f1  and  C2 = -int g ln g.
    """
    if lambda1 <= 0 or a <= 0:
        raise ConfigError("lambda1 and a must be > 0")
    d1 = sample_dist(lambda1, a)
    zcut = d1.z_cut
    # extend until the one-photon tail is dead
    while single_photon_log_pdf(np.array([zcut]), a)[0] > -45.0:
        zcut *= 1.5

    def c1_integrand(z):
        lg = single_photon_log_pdf(z, a)
        lf1 = sample_log_pdf(z, lambda1, a)
        return np.where(lg > -np.inf, -np.exp(lg) * lf1, 0.0)

    def c2_integrand(z):
        lg = single_photon_log_pdf(z, a)
        g = np.exp(lg)
        return np.where(g > 0, -g * lg, 0.0)

    C1, _ = adaptive_quad(c1_integrand, 0.0, zcut, tol=1e-11)
    C2, _ = adaptive_quad(c2_integrand, 0.0, zcut, tol=1e-11)
    return C1, C2
