import time

import numpy as np

import photonwire.calibrate as C
from photonwire.gain import GainModel


def design(tag, a, tau, rates, grid, iters=20000):
    model = GainModel.from_spread_ratio(a)
    powers = np.asarray(rates, dtype=float)
    grid = np.asarray(grid, dtype=float)
    ct = 2.4 * np.tanh(grid / 2.4)
    zero = np.zeros_like(powers)
    try:
        p0 = C.build_problem(powers, grid, tau, model, g_mean=zero, g_var=zero)
    except Exception as e:
        print(f"[{tag}] build failed: {e}")
        return
    P = p0.prob_matrix
    g1 = P @ ct
    gv = P @ ct**2 - g1**2
    prob = C.build_problem(powers, grid, tau, model, g_mean=g1, g_var=gv)

    col = P.sum(axis=0)
    mask = col > 1e-4
    weak = (col > 1e-6) & ~mask
    print(f"[{tag}] M1={powers.size} M2={grid.size} lam_max={powers.max()*tau:.3f}")
    print(f"   mask -> x={grid[mask][-1]:.2f} ({mask.sum()} cols), "
          f"weak cols {weak.sum()}, dead {(~mask & ~weak).sum()}")

    # residual Jacobian at the truth
    u = np.sqrt(P @ ct**2)
    J = np.vstack([P, P * (ct / u)[None, :] if False else (P * ct[None, :]) / u[:, None]])
    A_mask = J[:, mask]
    A_weak = J[:, weak]
    if A_weak.shape[1]:
        Q, _ = np.linalg.qr(A_weak)
        A_res = A_mask - Q @ (Q.T @ A_mask)
    else:
        A_res = A_mask
    s_eff = np.linalg.svd(A_res, compute_uv=False)[-1]
    s_all = np.linalg.svd(J[:, mask | weak], compute_uv=False)[-1]
    print(f"   sigma_eff(mask|weak)={s_eff:.2e}  sigma_min(free)={s_all:.2e}")

    t0 = time.time()
    fn, tr = C.fit(prob, max_iter=iters, tolerance=1e-15, return_trace=True)
    dt = time.time() - t0
    rw = np.sqrt(tr["objective"])
    err = np.abs(fn(grid[mask]) - ct[mask])
    print(f"   fit: {tr['n_iter']} it {dt:5.1f}s F={tr['objective']:.2e} "
          f"||r||={rw:.2e} stall={tr['line_search_stalled']} "
          f"bt/it={tr['n_backtracks']/max(tr['n_iter'],1):.1f}")
    print(f"   maxerr={err.max():.5f} at x={grid[mask][np.argmax(err)]:.2f}  "
          f"predicted bound ~{rw/s_eff:.3f}")
    return prob, fn, tr, ct, mask


tau = 0.02
# D1: headline a, coarse 0.5 grid over 0..10
design("D1 a=6.66 step.5", 6.657483123612046, tau,
       np.linspace(0.5, 34.0, 63), np.round(np.arange(21) * 0.5, 10))

# D2: headline a, 0.4 grid over 0..8, ladder trimmed so tails fit
design("D2 a=6.66 step.4 G=8", 6.657483123612046, tau,
       np.linspace(0.5, 22.0, 63), np.round(np.arange(21) * 0.4, 10))

# D3: a=12, 0.5 grid over 0..10, hotter ladder
design("D3 a=12 step.5", 12.0, tau,
       np.linspace(0.5, 60.0, 63), np.round(np.arange(21) * 0.5, 10))
