"""Dev smoke for the non-linear transfer paths (delete before ship)."""
import time

import numpy as np

from photonwire.gain import GainModel, draw_sample_exact, sample_dist, support_cutoff
from photonwire.sim import ChannelConfig
from photonwire import detect as D

t0 = time.time()
model = GainModel.from_spread_ratio(6.0, stages=12)
a = model.spread_ratio
lam = 1.5
dist = sample_dist(lam, a)
C = D.NonlinearFn(np.array([0, 1, 2, 3, 5, 10.]),
                  np.array([0, 1, 1.8, 2.2, 2.2, 1.9]))

# ---- transformed law: mass bookkeeping ------------------------------------
t = D.nonlinear_sample_density(dist, C)
pm = dict(t.point_masses)
total = t.atom_weight + t.continuous_mass() + sum(pm.values())
print(f"[nl] atom={t.atom_weight:.6f} cont={t.continuous_mass():.6f} "
      f"points={ {k: round(v,6) for k,v in pm.items()} }")
print(f"[nl] total mass = {total:.12f} (err {abs(total-1):.2e})")

# mean via original law vs transformed law
nodes, wts = dist.quad_nodes()
mean_orig = float(wts @ (dist.density(nodes) * C(nodes)))
tn, tw = t.quad_nodes()
mean_tr = float(tw @ (t.density(tn) * tn)) + sum(v * m for v, m in t.point_masses)
print(f"[nl] E[C(Z)] original-law={mean_orig:.8f} transformed-law={mean_tr:.8f} "
      f"diff={abs(mean_orig-mean_tr):.2e}")

# ---- chi^2 against exact draws --------------------------------------------
g = np.random.Generator(np.random.Philox(np.random.SeedSequence(5)))
n = 400_000
zs = draw_sample_exact(g, lam, a, n)
vs = np.asarray(C(zs), dtype=float)
edges = np.linspace(0.0, C.ceiling, 41)
# expected mass per cell from the transformed law's cdf (atoms included)
cdf_e = t.cdf(edges)
exp_mass = np.diff(cdf_e)
exp_mass = np.concatenate([[cdf_e[0]], exp_mass])  # first cell: P(V <= 0) atom
obs = np.concatenate([[np.count_nonzero(vs <= 0.0)],
                      np.histogram(vs[vs > 0.0], bins=edges)[0]])
keep = exp_mass * n >= 10
chi2 = float(np.sum((obs[keep] - n * exp_mass[keep]) ** 2 / (n * exp_mass[keep])))
dof = int(keep.sum()) - 1
from scipy.stats import chi2 as chi2_dist
pval = float(chi2_dist.sf(chi2, dof))
print(f"[nl] chi2={chi2:.1f} dof={dof} p={pval:.3f}")

# exceedance spot checks vs draws
for gam in (0.5, 1.9, 2.05, 2.2):
    th = float(t.tail_mass(gam))
    empc = float(np.mean(vs > gam))
    se = np.sqrt(max(th * (1 - th), 1e-12) / n)
    print(f"[nl] P(V>{gam}) theory={th:.6f} emp={empc:.6f} ({abs(th-empc)/se:.2f} SE)")

# ---- identity transfer reduces to the original law ------------------------
zc = support_cutoff(lam, a)
I = D.NonlinearFn.identity(1.2 * zc, 3)
tid = D.nonlinear_sample_density(dist, I)
zprobe = np.linspace(0.0, zc, 23)
err = np.max(np.abs(tid.cdf(zprobe) - dist.cdf(zprobe)))
print(f"[id] cdf max abs diff vs original = {err:.2e}")

# ---- noisy exceedance vs MC ------------------------------------------------
s0 = 0.05
gs = np.array([0.3, 1.0, 2.0, 2.3])
th = D._exceedance(dist, C, s0, gs)
noise = g.normal(0.0, s0, n)
vn = vs + noise
for gam, tt in zip(gs, th):
    empc = float(np.mean(vn > gam))
    se = np.sqrt(max(tt * (1 - tt), 1e-12) / n)
    print(f"[noise] P(V+N>{gam}) theory={tt:.6f} emp={empc:.6f} ({abs(tt-empc)/se:.2f} SE)")

# ---- PCD with transfer curve and noise ------------------------------------
cfgU = ChannelConfig.undersampled(rate0=5.0, rateA=45.0, tau=0.02, L=10)
g2, p0, p1 = D.pcd_threshold_opt(cfgU.lam0, cfgU.lam1, model, C, sigma0=0.0)
print(f"[pcd-C] gamma2={g2:.4f} p0={p0:.5f} p1={p1:.5f} pe={D.pcd_error(10, p0, p1):.5f}")
rep = D.ml_detect_mc(31, "pcd", cfgU, model, C, n_symbols=40_000)
print(f"[pcd-C] theory={rep.theory_pe:.5f} mc={rep.monte_carlo_pe:.5f}±{rep.mc_ci95:.5f} "
      f"within2CI={abs(rep.monte_carlo_pe-rep.theory_pe) <= 2*rep.mc_ci95}")
rep2 = D.ml_detect_mc(37, "pcd", cfgU, model, C, n_symbols=40_000, sigma0=0.05)
print(f"[pcd-C-noise] theory={rep2.theory_pe:.5f} mc={rep2.monte_carlo_pe:.5f}±{rep2.mc_ci95:.5f} "
      f"within2CI={abs(rep2.monte_carlo_pe-rep2.theory_pe) <= 2*rep2.mc_ci95}")

# ---- integrated-power detection through C ----------------------------------
cfg = ChannelConfig.undersampled(rate0=150.0, rateA=100.0, tau=0.02, L=1)
pe_lin = D.mpd_infinite_error(cfg, model)
pe_id = D.mpd_nonlinear_error(cfg, model, None, seed=41, n_symbols=150_000)
print(f"[mpd-nl] identity-route pe={pe_id:.5f} closed-form={pe_lin:.5f} "
      f"(diff {abs(pe_id-pe_lin):.5f})")
# saturating C at integrated-power scale: y ~ 5, so bend the curve there
Cs = D.NonlinearFn(np.array([0, 2, 4, 5, 8, 12.]),
                   np.array([0, 1.9, 3.2, 3.5, 3.5, 3.2]))
rep3 = D.ml_detect_mc(43, "mpd-infinite", cfg, model, Cs, n_symbols=60_000)
print(f"[mpd-nl] saturated theory={rep3.theory_pe:.5f} "
      f"mc={rep3.monte_carlo_pe:.5f}±{rep3.mc_ci95:.5f} "
      f"within2CI={abs(rep3.monte_carlo_pe-rep3.theory_pe) <= 2*rep3.mc_ci95}")

print(f"total {time.time()-t0:.1f}s")
