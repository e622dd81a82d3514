import numpy as np
from scipy import stats

from photonwire.sim import (
    ChannelConfig, dead_time_pmf, dead_time_pmf_table, dead_time_mean,
    dead_time_var, gen_arrivals, gen_symbol_stream, synth_waveform,
    pulse_level, count_rising_edges, mean_power_exact, sample_grid,
)
from photonwire.gain import GainModel, sample_dist

rng = np.random.default_rng(7)

# --- dead-time PMF ---
rate, tau = 50.0, 0.02
tab = dead_time_pmf_table(rate, tau)
print("PMF: M =", tab.size - 1, " sum-1 =", tab.sum() - 1.0)
ns = np.arange(tab.size)
E = float(ns @ tab)
V = float((ns - E) ** 2 @ tab)
print("E[n] =", E, " vs", dead_time_mean(rate, tau), " diff", E - dead_time_mean(rate, tau))
print("D[n] =", V, " vs Eq-21", dead_time_var(rate, tau), " diff", V - dead_time_var(rate, tau))
print("min prob:", tab.min(), "at n =", ns[np.argmin(tab)])

# how many entries took the mpmath path? crude check: recompute float-only
from photonwire.sim import _pmf_terms_log, _kahan_signed_expsum
n_fallback = 0
for n in range(tab.size):
    logs, signs = _pmf_terms_log(n, rate, tau, tab.size - 1)
    s, peak, abs_sum = _kahan_signed_expsum(logs, signs)
    err_est = abs_sum * logs.size * np.finfo(float).eps
    if s <= 0 or err_est > 1e-8 * abs(s):
        n_fallback += 1
print("mpmath fallback entries:", n_fallback)

# --- equilibrium rising-edge oracle (unit gains) ---
n_sym = 100_000
counts = np.empty(n_sym, dtype=int)
cfg = ChannelConfig.oversampled(1.0, rate - 1.0, tau, 2)   # only need tau via config
for i in range(n_sym):
    t = gen_arrivals(rng, rate, (-tau, 1.0))
    g = np.ones(t.size)
    ev = np.unique(np.concatenate([[-tau - 1.0], t, t + tau]))
    wf = synth_waveform(t, g, cfg, sample_times=ev)
    counts[i] = count_rising_edges(wf, 0.5, window=(0.0, 1.0))
emp = np.bincount(counts, minlength=tab.size).astype(float)
print("MC mean:", counts.mean(), " theory:", dead_time_mean(rate, tau))
print("MC var:", counts.var(), " theory:", dead_time_var(rate, tau))
# chi^2 vs PMF, pooling tail cells with expected < 5
exp = tab * n_sym
order = np.arange(tab.size)
mask_small = exp < 5.0
chi_obs = np.append(emp[~mask_small], emp[mask_small].sum())
chi_exp = np.append(exp[~mask_small], exp[mask_small].sum())
chi2 = float(((chi_obs - chi_exp) ** 2 / chi_exp).sum())
dof = chi_obs.size - 1
pval = stats.chi2.sf(chi2, dof)
print(f"chi2 = {chi2:.2f}, dof = {dof}, p = {pval:.4f}")

# --- mean_power_exact vs brute force ---
t = np.sort(rng.uniform(0, 5, 40))
g = rng.gamma(2.0, 0.5, 40)
y = mean_power_exact(t, g, 0.3, 5)
grid = np.linspace(0, 5, 2_000_001)[1:]  # right-continuous windows
lev = pulse_level(t, g, 0.3, grid)
y_bf = lev.reshape(5, -1).mean(axis=1)  # each symbol: mean * 1
print("event sweep vs Riemann:", np.abs(y - y_bf).max())

Csat = lambda x: np.minimum(x, 1.2)
yC = mean_power_exact(t, g, 0.3, 5, C=Csat)
yC_bf = Csat(lev).reshape(5, -1).mean(axis=1)
print("event sweep (nonlinear C):", np.abs(yC - yC_bf).max())

# --- boundary leakage: photons only in [1-tau, 1), oversampled stats ---
model = GainModel.from_spread_ratio(6.6567, 12)
ks = 4
cfg2 = ChannelConfig.oversampled(0.0 + 1e-12, 50.0, tau, ks)
lam_rate = 50.0
n_tr = 40_000
leak = np.empty(n_tr)
per = cfg2.samples_per_symbol
tgrid = sample_grid(cfg2, 2)
for i in range(n_tr):
    tt = gen_arrivals(rng, lam_rate / tau, (1.0 - tau, 1.0))   # rate per unit time so mean = 50
    gg = np.ones(tt.size)
    lev = pulse_level(tt, gg, tau, tgrid)
    leak[i] = lev[per:].sum() * cfg2.Ts   # mean power in symbol 1 = Ts * sum of samples
theory = (lam_rate * tau ** 2 / 2) * (1 - 1 / ks)
se = leak.std(ddof=1) / np.sqrt(n_tr)
print("leakage MC:", leak.mean(), " theory:", theory, " z:", (leak.mean() - theory) / se)

# --- under-sampling: iid samples match sample_dist; lag-1 correlation ---
L = 10
cfgU = ChannelConfig.undersampled(0.0 + 1e-12, 100.0, tau, L)
rates = np.full(2_000, 100.0)
times, gains = gen_symbol_stream(rng, rates, model=model, gain_law="branching")
wf = synth_waveform(times, gains, cfgU, n_symbols=rates.size)
vals = wf.values
lag1 = np.corrcoef(vals[:-1], vals[1:])[0, 1]
print("lag-1 corr (under-sampling):", lag1, " n =", vals.size)
dist = sample_dist(100.0 * tau, model.spread_ratio)
pos = vals[vals > 1e-12]
atom_freq = 1 - pos.size / vals.size
print("atom freq:", atom_freq, " vs model atom:", dist.atom_weight)
u = (dist.cdf(np.sort(pos)) - dist.atom_weight) / (1 - dist.atom_weight)
ks_stat = np.abs(u - (np.arange(1, pos.size + 1) - 0.5) / pos.size).max()
print("KS vs conditional continuum:", ks_stat, " crit(1%):", 1.63 / np.sqrt(pos.size))
