"""Anode transfer-curve calibration from mean/spread-vs-power measurements.

The receiver's saturating transfer curve C is not directly observable; what
an experiment provides is the mean and the standard deviation of the output
samples at a ladder of optical powers.  On a fixed grid the unknown curve
becomes a vector c, the sample law at each power becomes one row of a
probability matrix P (first column: the no-photon atom; remaining columns:
interval masses of the continuous part), and the measured first and second
moments become linear and quadratic functionals of c.  Fitting is a dense
least-squares problem solved with BFGS plus Armijo backtracking, after which
the raw grid values are shaped into a single-peak curve.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .detect import NonlinearFn
from .errors import ConfigError, NumericError
from .gain import sample_dist

__all__ = [
    "CalibrationProblem",
    "build_problem",
    "objective_and_grad",
    "fit",
]


@dataclass(frozen=True, eq=False)
class CalibrationProblem:
    """Discretized curve-fitting problem.

    ``prob_matrix`` rows hold, per power, the atom weight followed by the
    interval masses of the continuous sample law on ``grid``; ``g1`` are the
    measured means and ``g2`` the measured root second moments
    sqrt(mean^2 + variance).
    """

    powers: np.ndarray
    grid: np.ndarray
    prob_matrix: np.ndarray
    g1: np.ndarray
    g2: np.ndarray

    def __post_init__(self):
        powers = np.asarray(self.powers, dtype=float)
        grid = np.asarray(self.grid, dtype=float)
        pmat = np.asarray(self.prob_matrix, dtype=float)
        g1 = np.asarray(self.g1, dtype=float)
        g2 = np.asarray(self.g2, dtype=float)
        for name, val in (("powers", powers), ("grid", grid),
                          ("prob_matrix", pmat), ("g1", g1), ("g2", g2)):
            object.__setattr__(self, name, val)
        m1, m2 = powers.size, grid.size
        if grid.ndim != 1 or m2 < 2 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
            raise ConfigError("grid must be strictly increasing from 0")
        if pmat.shape != (m1, m2):
            raise ConfigError(f"prob_matrix shape {pmat.shape} != ({m1}, {m2})")
        if g1.shape != (m1,) or g2.shape != (m1,):
            raise ConfigError("g1/g2 must have one entry per power")
        if np.any(pmat < 0.0):
            raise ConfigError("probability matrix entries must be nonnegative")
        dev = np.max(np.abs(pmat.sum(axis=1) - 1.0))
        if dev > 1e-8:
            raise ConfigError(f"probability rows must sum to 1 (off by {dev:.2e})")
        if np.any(g1 < 0.0) or np.any(g2 < 0.0):
            raise ConfigError("measured moments must be nonnegative")
        if np.any(g2 < g1 - 1e-12):
            raise ConfigError("root second moment cannot fall below the mean")


def build_problem(powers, grid, tau, model, g_mean, g_var) -> CalibrationProblem:
    """Assemble the probability matrix and measurement vectors.

    Row i discretizes the sample law at rate ``powers[i]`` (per-sample mean
    powers[i]*tau): the first grid point is 0 and carries exactly the atom
    weight exp(powers[i]*tau*(exp(-a)-1)); column j > 1 carries the
    continuous mass on (grid[j-1], grid[j]].  Mass beyond the grid must be
    below 1e-6 per row (otherwise the grid is too short and this raises);
    the residual is renormalized away so rows sum to one exactly.
    """
    powers = np.asarray(powers, dtype=float)
    grid = np.asarray(grid, dtype=float)
    g_mean = np.asarray(g_mean, dtype=float)
    g_var = np.asarray(g_var, dtype=float)
    if powers.ndim != 1 or powers.size < 1 or np.any(powers < 0.0):
        raise ConfigError("powers must be a nonempty sequence of rates >= 0")
    if grid.ndim != 1 or grid.size < 2 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise ConfigError("grid must be strictly increasing from 0")
    if not 0.0 < tau < 1.0:
        raise ConfigError(f"tau must lie in (0, 1), got {tau}")
    if g_mean.shape != powers.shape or g_var.shape != powers.shape:
        raise ConfigError("g_mean/g_var must have one entry per power")
    if np.any(g_var < 0.0):
        raise ConfigError("variances must be nonnegative")

    a = model.spread_ratio
    pmat = np.zeros((powers.size, grid.size))
    for i, rate in enumerate(powers):
        lam = rate * tau
        dist = sample_dist(lam, a)
        pmat[i, 0] = dist.atom_weight
        cdf = dist.cdf(grid)
        pmat[i, 1:] = np.diff(cdf)
        short = 1.0 - pmat[i].sum()
        if abs(short) > 1e-6:
            raise ConfigError(
                f"law at power {rate} leaves {short:.2e} mass outside the "
                "grid; extend the grid"
            )
        pmat[i] /= pmat[i].sum()

    g2 = np.sqrt(g_mean * g_mean + g_var)
    return CalibrationProblem(powers=powers, grid=grid, prob_matrix=pmat,
                              g1=g_mean, g2=g2)


def objective_and_grad(c, problem: CalibrationProblem):
    """Least-squares misfit of curve values c and its gradient.

    F(c) = ||P c - g1||^2 + ||sqrt(P c^2) - g2||^2 with elementwise square
    and square root.  The second term's gradient is c_j * sum_i w_i p_ij
    with w_i = (u_i - g2_i)/u_i, u = sqrt(P c^2); rows with u_i = 0 are not
    differentiable there and are dropped from the gradient (with a warning).
    """
    P = problem.prob_matrix
    c = np.asarray(c, dtype=float)
    if c.shape != (P.shape[1],):
        raise ConfigError(f"curve vector must have length {P.shape[1]}")
    if not np.all(np.isfinite(c)):
        raise ConfigError("curve values must be finite")
    r1 = P @ c - problem.g1
    u = np.sqrt(P @ (c * c))
    r2 = u - problem.g2
    F = float(r1 @ r1 + r2 @ r2)
    live = u > 0.0
    w = np.zeros_like(u)
    w[live] = r2[live] / u[live]
    if not live.all():
        warnings.warn("zero second-moment row(s) dropped from the gradient",
                      RuntimeWarning)
    grad = 2.0 * (P.T @ r1) + 2.0 * c * (P.T @ w)
    return F, grad


def _shape_curve(c, problem: CalibrationProblem) -> NonlinearFn:
    """Post-process raw grid values into a single-peak transfer curve.

    Grid points whose probability column is essentially empty across all
    powers (< 1e-6 total) are unconstrained by the data; the trailing run of
    them is tied to the last constrained value.  The result is then split at
    its maximum into a strictly increasing branch (flat spots get a
    vanishing synthetic slope) and a non-increasing branch.
    """
    c = np.asarray(c, dtype=float).copy()
    col = problem.prob_matrix.sum(axis=0)
    constrained = np.nonzero(col >= 1e-6)[0]
    if constrained.size:
        last = int(constrained[-1])
        c[last + 1:] = c[last]
    c[0] = 0.0
    jp = int(np.argmax(c))
    if jp == 0 or c[jp] <= 0.0:
        raise NumericError("fitted curve has no rising branch")
    up = np.maximum.accumulate(np.maximum(c[: jp + 1], 0.0))
    flat = np.concatenate([[False], np.diff(up) <= 0.0])
    up = up + np.cumsum(flat * 1e-9)
    dn = np.maximum(np.minimum.accumulate(c[jp:]), 0.0)
    vals = np.concatenate([up, dn[1:]])
    vals[jp] = up[-1]
    return NonlinearFn(problem.grid.copy(), vals)


def fit(problem: CalibrationProblem, init=None, max_iter=100, tolerance=1e-8,
        *, return_trace=False):
    """Fit the transfer curve by BFGS with Armijo backtracking.

    Starts from ``init`` (default: the linear curve c = grid).  Steps use a
    dense inverse-Hessian approximation, reset to the identity whenever the
    proposed direction fails to descend; the line search halves the step up
    to 50 times against the Armijo bound with constant 1e-4.  Terminates
    when the gradient sup-norm falls below ``tolerance`` or after
    ``max_iter`` accepted iterations.  Returns the shaped curve; with
    ``return_trace`` also a dict with the objective history, final gradient
    norm, and iteration count.
    """
    if max_iter < 1:
        raise ConfigError("max_iter must be at least 1")
    m2 = problem.grid.size
    x = problem.grid.copy() if init is None else np.asarray(init, dtype=float).copy()
    if x.shape != (m2,) or not np.all(np.isfinite(x)):
        raise ConfigError("init must be a finite vector on the grid")

    H = np.eye(m2)
    F, g = objective_and_grad(x, problem)
    history = [F]
    n_iter = 0
    n_resets = 0
    n_backtracks = 0
    stalled = False
    for _ in range(int(max_iter)):
        if np.max(np.abs(g)) < tolerance:
            break
        p = -H @ g
        gp = float(g @ p)
        if gp >= 0.0:
            H = np.eye(m2)
            n_resets += 1
            p = -g
            gp = float(g @ p)
            if gp >= 0.0:       # gradient is exactly zero
                break
        t = 1.0
        accepted = False
        for _ in range(50):
            F_new, g_new = objective_and_grad(x + t * p, problem)
            if F_new <= F + 1e-4 * t * gp:
                accepted = True
                break
            t *= 0.5
            n_backtracks += 1
        if not accepted:
            stalled = True
            break
        s = t * p
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
            rho = 1.0 / sy
            V = np.eye(m2) - rho * np.outer(s, yv)
            H = V @ H @ V.T + rho * np.outer(s, s)
        x = x + s
        F, g = F_new, g_new
        history.append(F)
        n_iter += 1

    curve = _shape_curve(x, problem)
    if return_trace:
        trace = {
            "history": np.asarray(history),
            "objective": F,
            "grad_inf": float(np.max(np.abs(g))),
            "n_iter": n_iter,
            "raw": x,
            "n_hessian_resets": n_resets,
            "n_backtracks": n_backtracks,
            "line_search_stalled": stalled,
        }
        return curve, trace
    return curve
