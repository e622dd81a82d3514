import time

import numpy as np
from mpmath import mp, mpf, fsum, sqrt as mpsqrt

import photonwire.calibrate as C
from photonwire.gain import GainModel

model = GainModel.from_spread_ratio(6.657483123612046)
tau = 0.02

# --- narrow (8-column) problem: unique minimizer => literal invariance? ----
powers = np.linspace(0.5, 30.0, 63)
grid = np.round(np.arange(9) * 1.25, 10)
ct = 2.4 * np.tanh(grid / 2.4)
zero = np.zeros_like(powers)
try:
    p0 = C.build_problem(powers, grid, tau, model, g_mean=zero, g_var=zero)
except Exception as e:
    print("narrow build failed:", e)
    raise SystemExit
P = p0.prob_matrix
g1 = P @ ct
gv = P @ ct**2 - g1**2
prob = C.build_problem(powers, grid, tau, model, g_mean=g1, g_var=gv)
col = P.sum(axis=0)
print("[narrow] colmass:", np.array2string(col, precision=1))
mask = col > 1e-4

t0 = time.time()
fn, tr = C.fit(prob, max_iter=20000, tolerance=1e-15, return_trace=True)
dt = time.time() - t0
err = np.abs(fn(grid[mask]) - ct[mask])
print(f"[narrow] F={tr['objective']:.2e} it={tr['n_iter']} {dt:.1f}s "
      f"stall={tr['line_search_stalled']} maxerr={err.max():.5f}")

grid_x = np.round(np.arange(11) * 1.25, 10)
prob_x = C.build_problem(powers, grid_x, tau, model, g_mean=g1, g_var=gv)
colx = prob_x.prob_matrix.sum(axis=0)
fn_x, tr_x = C.fit(prob_x, max_iter=20000, tolerance=1e-15, return_trace=True)
dev = np.max(np.abs(fn_x(grid) - fn(grid)))
print(f"[narrow-ext] appended colmass={colx[grid.size:]}, F={tr_x['objective']:.2e} "
      f"dev on original grid = {dev:.2e}")

# different-init agreement (same unique minimizer?)
fn_i = C.fit(prob, init=0.7 * grid, max_iter=20000, tolerance=1e-15)
print(f"[narrow-init] dev vs base = {np.max(np.abs(fn_i(grid) - fn(grid))):.2e}")

# --- FD problem on corrected grid --------------------------------------
powers_f = np.linspace(2.0, 10.0, 12)
grid_f = np.round(np.arange(26) * 0.3, 10)
zero = np.zeros_like(powers_f)
pf0 = C.build_problem(powers_f, grid_f, tau, model, g_mean=zero, g_var=zero)
Pf = pf0.prob_matrix
ct_f = 0.3 * grid_f
g1f = Pf @ ct_f
gvf = Pf @ ct_f**2 - g1f**2
prob_f = C.build_problem(powers_f, grid_f, tau, model, g_mean=g1f, g_var=gvf)
colf = Pf.sum(axis=0)
print(f"[fd] problem {Pf.shape}, colmass min={colf.min():.1e} max={colf.max():.1e}")

mp.dps = 30
P_mp = [[mpf(v) for v in row] for row in prob_f.prob_matrix]
g1_mp = [mpf(v) for v in prob_f.g1]
g2_mp = [mpf(v) for v in prob_f.g2]


def F_mp(c):
    tot = mpf(0)
    for row, a1, a2 in zip(P_mp, g1_mp, g2_mp):
        m1 = fsum(p * x for p, x in zip(row, c))
        m2 = fsum(p * x * x for p, x in zip(row, c))
        tot += (m1 - a1) ** 2 + (mpsqrt(m2) - a2) ** 2
    return tot


rng = np.random.default_rng(20260814)
worst = 0.0
t0 = time.time()
n_draws = 20
for _ in range(n_draws):
    c = 0.3 * grid_f + 0.2 + np.abs(rng.standard_normal(grid_f.size))
    _, g = C.objective_and_grad(c, prob_f)
    c_mp = [mpf(v) for v in c]
    for j in range(grid_f.size):
        h = mpf(1e-6) * (1 + abs(c_mp[j]))
        cp = list(c_mp)
        cm = list(c_mp)
        cp[j] += h
        cm[j] -= h
        fd = (F_mp(cp) - F_mp(cm)) / (2 * h)
        denom = max(abs(fd), mpf(1e-300))
        rel = abs(mpf(g[j]) - fd) / denom
        worst = max(worst, float(rel))
dt = time.time() - t0
print(f"[fd] {n_draws} draws in {dt:.1f}s ({dt/n_draws:.2f}s/draw): "
      f"worst rel err = {worst:.2e} (bar 1e-5)")
