import time

import numpy as np

import photonwire.calibrate as C
from photonwire.gain import GainModel

model = GainModel.from_spread_ratio(6.657483123612046)
tau = 0.02
powers = np.linspace(0.0, 34.0, 31)
grid = np.round(np.arange(201) * 0.05, 10)
c_true = 2.4 * np.tanh(grid / 2.4)

g1 = np.zeros_like(powers)
g_var = np.zeros_like(powers)
prob0 = C.build_problem(powers, grid, tau, model,
                        g_mean=g1, g_var=g_var)
P = prob0.prob_matrix
g1 = P @ c_true
g2sq = P @ c_true**2
g_var = g2sq - g1**2
prob = C.build_problem(powers, grid, tau, model, g_mean=g1, g_var=g_var)

col = P.sum(axis=0)
# column mass profile: where does it cross thresholds?
for thr in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
    idx = np.nonzero(col > thr)[0]
    print(f"colmass > {thr:.0e}: last x = {grid[idx[-1]]:.2f}  (n={idx.size})")
mask = col > 1e-4
print(f"mask size {mask.sum()} / {grid.size}, last x {grid[mask][-1]:.2f}")

# --- repro the 100-iter fit and locate the failing coordinate -------------
fn, tr = C.fit(prob, max_iter=100, tolerance=1e-10, return_trace=True)
raw = tr["raw"]
err_shaped = np.abs(fn(grid[mask]) - c_true[mask])
err_raw = np.abs(raw[1:][mask] - c_true[mask]) if raw.size == grid.size + 1 else None
print(f"[100it] F={tr['objective']:.3e} ginf={tr['grad_inf']:.3e} "
      f"iters={tr['n_iter']}")
print(f"[100it] shaped max err on mask = {err_shaped.max():.4f} "
      f"at x={grid[mask][np.argmax(err_shaped)]:.2f}")
print(f"[100it] raw vector size = {raw.size} (grid {grid.size})")
if raw.size == grid.size:
    e = np.abs(raw[mask] - c_true[mask])
    print(f"[100it] raw   max err on mask = {e.max():.4f} "
          f"at x={grid[mask][np.argmax(e)]:.2f}")
    print(f"[100it] raw[mask][-6:]    = {np.round(raw[mask][-6:], 3)}")
    print(f"[100it] truth[mask][-6:]  = {np.round(c_true[mask][-6:], 3)}")
    print(f"[100it] shaped[mask][-6:] = {np.round(fn(grid[mask][-6:]), 3)}")

# --- deep convergence ------------------------------------------------------
t0 = time.time()
fn_d, tr_d = C.fit(prob, max_iter=20000, tolerance=1e-14, return_trace=True)
dt = time.time() - t0
raw_d = tr_d["raw"]
err_d = np.abs(fn_d(grid[mask]) - c_true[mask])
print(f"[deep] {tr_d['n_iter']} iters in {dt:.1f}s  F={tr_d['objective']:.3e} "
      f"ginf={tr_d['grad_inf']:.3e}")
print(f"[deep] shaped max err on mask = {err_d.max():.5f} "
      f"at x={grid[mask][np.argmax(err_d)]:.2f}")
if raw_d.size == grid.size:
    e = np.abs(raw_d[mask] - c_true[mask])
    print(f"[deep] raw    max err on mask = {e.max():.5f}")

# --- extension invariance, deep -------------------------------------------
grid_x = np.round(np.arange(241) * 0.05, 10)
prob_x = C.build_problem(powers, grid_x, tau, model,
                         g_mean=g1, g_var=g_var)
t0 = time.time()
fn_xd = C.fit(prob_x, max_iter=20000, tolerance=1e-14)
dt = time.time() - t0
dev = np.max(np.abs(fn_xd(grid[mask]) - fn_d(grid[mask])))
dev_all = np.max(np.abs(fn_xd(grid) - fn_d(grid)))
print(f"[ext-deep] fit in {dt:.1f}s; change on mask = {dev:.2e}  "
      f"on full original grid = {dev_all:.2e}")
