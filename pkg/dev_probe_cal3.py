import time

import numpy as np

import photonwire.calibrate as C
from photonwire.gain import GainModel

model = GainModel.from_spread_ratio(6.657483123612046)
tau = 0.02


def make(powers, grid):
    zero = np.zeros_like(powers)
    p0 = C.build_problem(powers, grid, tau, model, g_mean=zero, g_var=zero)
    P = p0.prob_matrix
    ct = 2.4 * np.tanh(grid / 2.4)
    g1 = P @ ct
    gv = P @ ct**2 - g1**2
    return C.build_problem(powers, grid, tau, model, g_mean=g1, g_var=gv), ct


def run(tag, powers, grid, iters):
    prob, ct = make(powers, grid)
    col = prob.prob_matrix.sum(axis=0)
    mask = col > 1e-4
    t0 = time.time()
    fn, tr = C.fit(prob, max_iter=iters, tolerance=1e-15, return_trace=True)
    dt = time.time() - t0
    err = np.abs(fn(grid[mask]) - ct[mask])
    print(f"[{tag}] M1={powers.size} M2={grid.size} mask->x={grid[mask][-1]:.2f} "
          f"({mask.sum()} cols)")
    print(f"   {tr['n_iter']} it {dt:5.1f}s F={tr['objective']:.2e} "
          f"ginf={tr['grad_inf']:.2e} resets={tr['n_hessian_resets']} "
          f"bt={tr['n_backtracks']} stall={tr['line_search_stalled']}")
    print(f"   maxerr={err.max():.5f} at x={grid[mask][np.argmax(err)]:.2f}")
    return prob, fn, tr, ct, mask


grid02 = np.round(np.arange(51) * 0.2, 10)
lad63 = np.linspace(0.5, 34.0, 63)
run("V1-100k", lad63, grid02, 100_000)

lad_top = np.concatenate([np.linspace(0.5, 20.0, 32),
                          np.linspace(20.25, 34.0, 63)])
run("V2-topdense-30k", lad_top, grid02, 30_000)

grid04 = np.round(np.arange(26) * 0.4, 10)
run("V3-coarse-30k", lad_top, grid04, 30_000)
