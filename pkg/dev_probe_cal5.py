import time

import numpy as np

import photonwire.calibrate as C
from photonwire.gain import GainModel

model = GainModel.from_spread_ratio(6.657483123612046)
tau = 0.02
powers = np.linspace(0.5, 34.0, 63)
grid = np.round(np.arange(21) * 0.5, 10)
ct = 2.4 * np.tanh(grid / 2.4)

zero = np.zeros_like(powers)
p0 = C.build_problem(powers, grid, tau, model, g_mean=zero, g_var=zero)
P = p0.prob_matrix
g1 = P @ ct
gv = P @ ct**2 - g1**2
prob = C.build_problem(powers, grid, tau, model, g_mean=g1, g_var=gv)
col = P.sum(axis=0)
mask = col > 1e-4

fn, tr = C.fit(prob, max_iter=20000, tolerance=1e-15, return_trace=True)
err = np.abs(fn(grid[mask]) - ct[mask])
print(f"[base] F={tr['objective']:.2e} it={tr['n_iter']} maxerr={err.max():.5f}")
print(f"[base] xs={fn.xs} ceil={fn.ceiling:.4f}; induced-mean "
      f"max|Pc-g1|={np.max(np.abs(P @ fn(grid) - g1)):.2e} "
      f"sqrtF={np.sqrt(tr['objective']):.2e}")

# init robustness (acceptance uses linear; these are evidence of stability)
for fac in (0.7, 1.3):
    fni, tri = C.fit(prob, init=fac * grid, max_iter=20000, tolerance=1e-15,
                     return_trace=True)
    e = np.abs(fni(grid[mask]) - ct[mask])
    print(f"[init x{fac}] F={tri['objective']:.2e} it={tri['n_iter']} "
          f"maxerr={e.max():.5f} dev_vs_base={np.max(np.abs(fni(grid[mask]) - fn(grid[mask]))):.2e}")

# extension: append dead columns (verify appended colmass)
for gend, tag in ((12.0, "ext12"), (14.0, "ext14")):
    grid_x = np.round(np.arange(int(gend / 0.5) + 1) * 0.5, 10)
    prob_x = C.build_problem(powers, grid_x, tau, model, g_mean=g1, g_var=gv)
    colx = prob_x.prob_matrix.sum(axis=0)
    app = colx[grid.size:]
    t0 = time.time()
    fn_x, tr_x = C.fit(prob_x, max_iter=20000, tolerance=1e-15, return_trace=True)
    dt = time.time() - t0
    d_mask = np.max(np.abs(fn_x(grid[mask]) - fn(grid[mask])))
    d_grid = np.max(np.abs(fn_x(grid) - fn(grid)))
    print(f"[{tag}] appended colmass max={app.max():.1e}; F={tr_x['objective']:.2e} "
          f"{dt:.1f}s; dev mask={d_mask:.2e} grid={d_grid:.2e}")

# timing for the paper-scale 31x201 config (runtime criterion)
powers_p = np.linspace(0.0, 34.0, 31)
grid_p = np.round(np.arange(201) * 0.05, 10)
ct_p = 2.4 * np.tanh(grid_p / 2.4)
zero = np.zeros_like(powers_p)
pp0 = C.build_problem(powers_p, grid_p, tau, model, g_mean=zero, g_var=zero)
g1p = pp0.prob_matrix @ ct_p
gvp = pp0.prob_matrix @ ct_p**2 - g1p**2
t0 = time.time()
prob_p = C.build_problem(powers_p, grid_p, tau, model, g_mean=g1p, g_var=gvp)
t_build = time.time() - t0
t0 = time.time()
fn_p = C.fit(prob_p, max_iter=100, tolerance=1e-10)
t_fit = time.time() - t0
print(f"[paper-scale] build {t_build:.1f}s fit(100) {t_fit:.1f}s")
