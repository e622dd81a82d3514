"""Dev smoke for detect.py against independent oracles (delete before ship)."""
import time

import numpy as np

from photonwire.gain import GainModel, sample_dist, sample_pdf, support_cutoff
from photonwire.sim import ChannelConfig, draw_bits, gen_symbol_stream, mean_power_exact
from photonwire import detect as D

t0 = time.time()
model = GainModel.from_spread_ratio(6.0, stages=12)
a = model.spread_ratio

# ---- 1. symbol-integral MGF vs simulation ---------------------------------
cfg = ChannelConfig.undersampled(rate0=150.0, rateA=100.0, tau=0.02, L=1)
n = 100_000
g = np.random.Generator(np.random.Philox(np.random.SeedSequence(7)))
bits = draw_bits(g, n + 1)
rates = cfg.rate0 + cfg.rateA * bits.astype(float)
times, gains = gen_symbol_stream(g, rates, model, "model")
y = mean_power_exact(times, gains, cfg.tau, n + 1)
y, on = y[1:], bits[1:].astype(bool)
print(f"[mgf] stream built n={n}  ({time.time()-t0:.1f}s)")
# the closed form displaces the mean by rate0*tau^2/4 relative to the
# physical integral (characterized approximation); correct the oracle for it
off = cfg.rate0 * cfg.tau ** 2 / 4.0
for w in (0.5, 1.0, 2.0):
    emp1 = np.exp(-w * y[on]).mean() * np.exp(w * off)
    emp0 = np.exp(-w * y[~on]).mean() * np.exp(w * off)
    th1 = D.mpd_infinite_mgf(w, 1, cfg, model)
    th0 = D.mpd_infinite_mgf(w, 0, cfg, model)
    print(f"[mgf] w={w}: bit1 emp={emp1:.6f} th={th1:.6f} rel={abs(emp1/th1-1):.2e} | "
          f"bit0 emp={emp0:.6f} th={th0:.6f} rel={abs(emp0/th0-1):.2e}")

# ---- 2. oversample mean/var vs simulation ---------------------------------
from photonwire.sim import synth_waveform
for ks in (2, 4):
    cfg2 = ChannelConfig.oversampled(rate0=10.0, rateA=100.0, tau=0.02, ks=ks)
    nsym = 40_000
    for prev_on in (False, True):
        # alternate prev/cur so every even symbol has the desired context:
        # stream of pairs (prev, cur=on)
        bits = np.zeros(nsym, dtype=np.uint8)
        bits[1::2] = 1                      # odd symbols are "on"
        if prev_on:
            bits[:] = 1                     # all on: prev on, cur on
        rates = cfg2.rate0 + cfg2.rateA * bits.astype(float)
        gg = np.random.Generator(np.random.Philox(np.random.SeedSequence(100 + ks)))
        tt, gn = gen_symbol_stream(gg, rates, model, "model")
        wave = synth_waveform(tt, gn, cfg2, n_symbols=nsym)
        vals = wave.values.reshape(nsym, -1)
        ym = vals[:, :-1].sum(axis=1) / vals.shape[1]   # interior-grid mean
        sel = ym[3::2] if not prev_on else ym[3:]   # skip warmup symbols
        prev_rate = cfg2.rate0 + (cfg2.rateA if prev_on else 0.0)
        m_th, v_th = D._oversample_mean_var(cfg2.rate0 + cfg2.rateA, prev_rate,
                                            cfg2.tau, ks, a)
        m_emp, v_emp = sel.mean(), sel.var(ddof=1)
        se_m = np.sqrt(v_th / sel.size)
        se_v = v_th * np.sqrt(2.0 / sel.size)  # rough gaussian SE for var
        print(f"[over] ks={ks} prev_on={prev_on}: mean emp={m_emp:.6f} th={m_th:.6f} "
              f"({abs(m_emp-m_th)/se_m:.2f} SE) | var emp={v_emp:.3e} th={v_th:.3e} "
              f"({abs(v_emp-v_th)/se_v:.2f} SE)")

# ---- 3. infinite-rate MPD error: theory vs MC -----------------------------
t1 = time.time()
pe_th = D.mpd_infinite_error(cfg, model)
rep = D.ml_detect_mc(11, "mpd-infinite", cfg, model, n_symbols=50_000)
ok = abs(rep.monte_carlo_pe - pe_th) <= 2 * rep.mc_ci95
print(f"[inf] theory={pe_th:.5f} mc={rep.monte_carlo_pe:.5f}±{rep.mc_ci95:.5f} "
      f"within2CI={ok} y_cross={rep.thresholds['y_cross']:.4f} ({time.time()-t1:.1f}s)")
assert rep.theory_pe == pe_th

# ---- 4. oversample detector: theory vs MC ---------------------------------
t1 = time.time()
cfg3 = ChannelConfig.oversampled(rate0=30.0, rateA=60.0, tau=0.02, ks=4)
mu, s2, gam, pe_wa = D.mpd_oversample_stats(cfg3, model)
rep3 = D.ml_detect_mc(13, "mpd-oversample", cfg3, model, n_symbols=50_000)
print(f"[over-mc] mu={mu:.4f} s2={s2:.4f} gam={gam:.4f} pe_wa={pe_wa:.5f} "
      f"mc={rep3.monte_carlo_pe:.5f}±{rep3.mc_ci95:.5f} ({time.time()-t1:.1f}s)")

# ---- 5. undersample: theory vs MC, Gaussian comparison --------------------
t1 = time.time()
cfg4 = ChannelConfig.undersampled(rate0=5.0, rateA=45.0, tau=0.02, L=10)
pe_u = D.mpd_undersample_error(cfg4.L, cfg4.lam0, cfg4.lam1, model)
gam_g, pe_g = D.mpd_undersample_gaussian(cfg4.L, cfg4.lam0, cfg4.lam1, a)
rep4 = D.ml_detect_mc(17, "mpd-undersample", cfg4, model, n_symbols=50_000)
ok4 = abs(rep4.monte_carlo_pe - pe_u) <= 2 * rep4.mc_ci95
print(f"[under] exact={pe_u:.5f} gauss={pe_g:.5f} mc={rep4.monte_carlo_pe:.5f}"
      f"±{rep4.mc_ci95:.5f} within2CI={ok4} ({time.time()-t1:.1f}s)")

# scaling identity at L=2: density of Z1+Z2 by self-convolution vs 2λ law
lam = 0.7
d1 = sample_dist(lam, a)
zc = support_cutoff(2 * lam, a)
h = zc / 60000
u = np.arange(1, 60001) * h
f1 = sample_pdf(u, lam, a)
w1 = float(np.exp(lam * (np.exp(-a) - 1)))
conv = np.convolve(f1, f1)[: u.size] * h
f_sum = 2 * w1 * f1 + conv          # atom-cross terms + continuum convolution
f_direct = sample_pdf(u, 2 * lam, a)
sel = f_direct > 1e-6 * f_direct.max()
relerr = np.max(np.abs(f_sum[sel] - f_direct[sel]) / f_direct[sel])
print(f"[scaling] L=2 convolution vs direct: max rel err (bulk) = {relerr:.2e}")

# ---- 6. PCD: threshold search, refinement oracle, MC ----------------------
t1 = time.time()
g2, p0, p1 = D.pcd_threshold_opt(cfg4.lam0, cfg4.lam1, model)
g2f, p0f, p1f = D.pcd_threshold_opt(cfg4.lam0, cfg4.lam1, model, grid_points=20_000)
obj = lambda q0, q1: min(D.bernoulli_kl(q0, q1), D.bernoulli_kl(q1, q0))
print(f"[pcd] gamma2={g2:.6f} p0={p0:.6f} p1={p1:.6f} | fine gamma2={g2f:.6f} "
      f"obj diff={abs(obj(p0,p1)-obj(p0f,p1f)):.2e}")
n_th, p_th = D.pcd_counting_threshold(p0, p1, cfg4.L)
pe_c = D.pcd_error(cfg4.L, p0, p1)
rep5 = D.ml_detect_mc(23, "pcd", cfg4, model, n_symbols=50_000)
ok5 = abs(rep5.monte_carlo_pe - pe_c) <= 2 * rep5.mc_ci95
print(f"[pcd] n_th={n_th} p_th={p_th:.5f} pe_c={pe_c:.5f} "
      f"mc={rep5.monte_carlo_pe:.5f}±{rep5.mc_ci95:.5f} within2CI={ok5} ({time.time()-t1:.1f}s)")

# Lemma-type bracketing + Chernoff tie
assert n_th / cfg4.L <= p_th < p1 and p0 < p_th <= (n_th + 1) / cfg4.L
lam_s, expo = D.chernoff_exponent(p0, p1)
tie = abs(D.bernoulli_kl(p_th, p1) - D.bernoulli_kl(p_th, p0))
print(f"[chernoff] lambda*={lam_s:.6f} exponent={expo:.6f} KL tie={tie:.2e}")
# exponent vs -(1/L) ln pe at large L
for L in (100, 400):
    pe_L = D.pcd_error(L, p0, p1)
    print(f"[chernoff] L={L}: -(1/L)ln pe = {-np.log(pe_L)/L:.5f} vs E* = {expo:.5f}")
# symmetric case -> lambda* = 1/2
ls_sym, _ = D.chernoff_exponent(0.2, 0.8)
print(f"[chernoff] symmetric lambda* = {ls_sym:.12f}")

print(f"total {time.time()-t0:.1f}s")
