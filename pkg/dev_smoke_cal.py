"""Dev smoke for calibrate.py (delete before ship)."""
import time

import numpy as np

from photonwire.gain import GainModel
from photonwire import calibrate as C

t0 = time.time()
model = GainModel.from_spread_ratio(6.657483123612046, stages=12)
tau = 0.02
powers = np.linspace(0.0, 34.0, 31)           # per-sample means 0..0.68
grid = np.arange(201) * 0.05                   # 0..10

prob = None
t1 = time.time()
c_true = 2.4 * np.tanh(grid / 2.4)
# exact synthetic measurements from the forward model
import photonwire.calibrate as cal
pm_probe = []
prob_построй = None
prob = C.build_problem(powers, grid, tau, model,
                       g_mean=np.zeros_like(powers), g_var=np.zeros_like(powers))
print(f"[build] matrix {prob.prob_matrix.shape} in {time.time()-t1:.1f}s; "
      f"row-sum max dev {np.max(np.abs(prob.prob_matrix.sum(1)-1)):.2e}")
print(f"[build] lam=0 row: p00={prob.prob_matrix[0,0]:.12f} "
      f"rest={prob.prob_matrix[0,1:].sum():.2e}")

P = prob.prob_matrix
g1 = P @ c_true
g2 = np.sqrt(P @ c_true**2)
g_var = g2**2 - g1**2
prob = C.build_problem(powers, grid, tau, model, g_mean=g1, g_var=g_var)

# gradient vs central finite differences
rng = np.random.default_rng(3)
worst = 0.0
for _ in range(5):
    c = rng.uniform(0.1, 3.0, grid.size)
    _, g = C.objective_and_grad(c, prob)
    for j in rng.choice(grid.size, 8, replace=False):
        h = 1e-6 * (1.0 + abs(c[j]))
        cp, cm = c.copy(), c.copy()
        cp[j] += h
        cm[j] -= h
        fp, _ = C.objective_and_grad(cp, prob)
        fm, _ = C.objective_and_grad(cm, prob)
        fd = (fp - fm) / (2 * h)
        rel = abs(g[j] - fd) / max(abs(fd), 1e-12)
        worst = max(worst, rel)
print(f"[grad] worst FD rel err over 40 coords = {worst:.2e}")

# perfect-data optimum: F(c_true), grad(c_true)
F_true, g_true = C.objective_and_grad(c_true, prob)
print(f"[opt] F(c_true)={F_true:.3e} ||grad||_inf={np.max(np.abs(g_true)):.3e}")

# fit from linear init
t1 = time.time()
fn, tr = C.fit(prob, max_iter=100, tolerance=1e-10, return_trace=True)
dt = time.time() - t1
col = P.sum(axis=0)
mask = col > 1e-4
err = np.max(np.abs(fn(grid[mask]) - c_true[mask]))
mono = np.all(np.diff(tr["history"]) <= 1e-15)
print(f"[fit] {tr['n_iter']} iters in {dt:.1f}s  F={tr['objective']:.3e} "
      f"grad_inf={tr['grad_inf']:.2e}")
print(f"[fit] max |fit - truth| on constrained support = {err:.4f} (<0.05?)")
print(f"[fit] F non-increasing: {mono}")
print(f"[fit] xs={fn.xs:.3f} ceiling={fn.ceiling:.4f}")

# induced mean reproduces g1 within residual
res = np.max(np.abs(P @ fn(grid) - g1))
print(f"[fit] max |P c_fit - g1| = {res:.2e} (sqrt F = {np.sqrt(tr['objective']):.2e})")

# grid extension invariance
grid_x = np.arange(241) * 0.05                 # 0..12
prob_x = C.build_problem(powers, grid_x, tau, model, g_mean=g1, g_var=g_var)
fn_x = C.fit(prob_x, max_iter=100, tolerance=1e-10)
dev = np.max(np.abs(fn_x(grid[mask]) - fn(grid[mask])))
print(f"[ext] curve change on original constrained support = {dev:.2e} (<1e-3?)")

print(f"total {time.time()-t0:.1f}s")
