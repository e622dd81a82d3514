import time
import numpy as np

from photonwire.inforate import (
    mutual_info_single, mutual_info_multi, suboptimal_duty_single,
    suboptimal_duty_multi, optimal_duty_single, optimal_duty_multi,
    continuum_expansion_constants, binary_entropy, _table,
)

rng = np.random.default_rng(11)


def draw_mixed(rng, lam_vec, a):
    n1 = rng.poisson(lam_vec)
    k = rng.poisson(a * n1)
    z = np.zeros(lam_vec.size)
    pos = k > 0
    z[pos] = rng.standard_gamma(k[pos]) / a
    return z


def plug_in_mi(rng, mu, lam0, lam1, a, n, bins, L=1):
    bits = rng.random(n) < mu
    lam = np.where(bits, lam1, lam0)
    zs = np.stack([draw_mixed(rng, lam, a) for _ in range(L)], axis=1)
    zmax = zs.max() + 1e-9
    edges = np.linspace(1e-300, zmax, bins + 1)  # cell 0 = atom
    codes = np.zeros(n, dtype=np.int64)
    for j in range(L):
        cj = np.searchsorted(edges, zs[:, j])  # 0 if atom, 1..bins else
        codes = codes * (bins + 1) + cj
    # joint counts over (bit, code)
    uniq, inv = np.unique(codes, return_inverse=True)
    K = uniq.size
    joint = np.zeros((2, K))
    np.add.at(joint, (bits.astype(int), inv), 1.0)
    joint /= n
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = joint * np.log(joint / (px * py))
    I = np.nansum(terms)
    K_joint = np.count_nonzero(joint)
    K_y = np.count_nonzero(py)
    bias = (K_joint - K_y - 2 + 1) / (2 * n)  # first-order plug-in bias
    return I + bias


# --- trivial limits ---
r = mutual_info_single(0.4, 2.0, 2.0, 6.0)
print("equal rates ->", r.total, " (err est", r.quadrature_error_estimate, ")")
print("mu->0:", mutual_info_single(1e-5, 0.5, 3.0, 6.0).total)
print("mu->1:", mutual_info_single(1 - 1e-5, 0.5, 3.0, 6.0).total)

# --- MC oracle, L=1 ---
mu, lam0, lam1, a = 0.4, 0.5, 3.0, 6.0
t0 = time.time()
r1 = mutual_info_single(mu, lam0, lam1, a)
t_build = time.time() - t0
mc = plug_in_mi(rng, mu, lam0, lam1, a, 1_000_000, 400)
print(f"MI single: {r1.total:.6f} (D {r1.discrete_part:.6f} C {r1.continuous_part:.6f}) "
      f"MC {mc:.6f} diff {r1.total - mc:.2e}  build {t_build:.2f}s")
print("bound H2:", r1.total <= binary_entropy(mu), " >=0:", r1.total >= 0)

# repeat eval timing
t0 = time.time()
for m in np.linspace(0.05, 0.95, 100):
    mutual_info_single(m, lam0, lam1, a)
print("100 cached MI evals: %.3fs" % (time.time() - t0))

# --- kform at L=1 equals entropy form ---
tab = _table(lam0, lam1, a)
d1k, c1k = tab.mi_multi(mu, 1, 1)
print("kform L=1 vs entropy:", d1k - r1.discrete_part, c1k - r1.continuous_part)

# --- L=2: tensor-quadrature oracle for the k=2 cell ---
g = tab.grids[1]
w = g.weights
f0v, f1v = tab.f0[1], tab.f1[1]
v = tab.logf0[1] - tab.logf1[1]
m1 = w * f1v / tab.s1
m0 = w * f0v / tab.s0
lmu, lnu = np.log(mu), np.log1p(-mu)
V2 = v[:, None] + v[None, :]
E1_2 = float(m1 @ np.logaddexp(lmu, lnu + V2) @ m1)
E0_2 = float(m0 @ np.logaddexp(lmu - V2, lnu) @ m0)
E1, E0, cell1, cell0 = tab._cell_expectations(mu, 2, 1)
print("lattice vs tensor k=2:", E1[2] - E1_2, E0[2] - E0_2)

r2 = mutual_info_multi(mu, lam0, lam1, a, 2)
print("MI multi L=2:", r2.total, " >= L1:", r2.total >= r1.total)
mc2 = plug_in_mi(rng, mu, lam0, lam1, a, 1_000_000, 60, L=2)
print("L=2 MC oracle:", mc2, " diff:", r2.total - mc2)

# --- duty cycles ---
print("subopt lamA->0:", suboptimal_duty_single(1e-4, a), "vs 1/e", 1 / np.e)
print("subopt lamA->inf:", suboptimal_duty_single(1e3, a))
print("subopt clamp:", suboptimal_duty_single(1e-4, a, eta=0.1))
print("subopt multi L=2 vs a1^2:", suboptimal_duty_multi(1.0, 6.0, 2)
      - suboptimal_duty_single(2.0, 6.0))

t0 = time.time()
mu_star = optimal_duty_single(0.2, 2.0, 6.0)
print("optimal duty (0.2,2,6):", mu_star, " slope:",
      _table(0.2, 2.0, 6.0).mi_slope_multi(mu_star, 1, 1), " %.2fs" % (time.time() - t0))
t0 = time.time()
grid = np.arange(1e-3, 1.0, 1e-3)
vals = np.array([mutual_info_single(m, 0.2, 2.0, 6.0).total for m in grid])
mu_grid = grid[np.argmax(vals)]
print("grid argmax:", mu_grid, " diff:", mu_star - mu_grid, " grid time %.2fs" % (time.time() - t0))

mu_m = optimal_duty_multi(0.2, 2.0, 6.0, 4)
t0 = time.time()
vals_m = np.array([mutual_info_multi(m, 0.2, 2.0, 6.0, 4).total for m in grid])
print("multi L=4 argmax:", grid[np.argmax(vals_m)], " opt:", mu_m,
      " grid time %.2fs" % (time.time() - t0))

print("opt ~ subopt at tiny lam0:",
      optimal_duty_single(1e-6 * 2.0, 2.0, 6.0), suboptimal_duty_single(2.0, 6.0))

# --- concavity of single-sample MI ---
gridc = np.arange(0.01, 1.0, 0.01)
valsc = np.array([mutual_info_single(m, 0.5, 3.0, 6.0).total for m in gridc])
d2 = np.diff(valsc, 2)
print("max second difference:", d2.max())

# --- small-background expansion ---
lam0s, lam1e, ae, mue = 1e-4, 1.0, 6.0, 0.3
C1, C2 = continuum_expansion_constants(lam1e, ae)
print("C1, C2 =", C1, C2)
ICx = mutual_info_single(mue, lam0s, lam1e, ae).continuous_part
u = 1 - np.exp(-ae)
a1 = np.exp(-lam1e * u)
base = -mue * np.log(mue) * (1 - a1)
for s1 in (+1, -1):
    for s2 in (+1, -1):
        approx = (base
                  + s1 * (1 - mue) * lam0s * u * np.log(mue / lam0s)
                  - (1 - mue) * lam0s * u
                  + s2 * (1 - mue) * lam0s * (C1 - C2))
        print(f"  expansion s1={s1:+d} s2={s2:+d}: diff = {ICx - approx:.3e}")
