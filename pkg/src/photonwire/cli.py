"""Command-line front end: batch experiment runner over the analysis modules.

One declarative JSON config file (with an ``include`` mechanism for shared
channel blocks) describes an experiment; every subcommand reads the blocks
it needs, runs single-threaded unless asked otherwise, and writes CSV
tables next to JSON metadata sidecars.  Physical quantities carry SI units
in the file and are converted to symbol-normalized values (Tb = 1) here and
only here; everything downstream of this module is dimensionless.

Reruns with the same config, seed and code revision produce byte-identical
artifacts: no timestamps are written, floats are serialized with shortest
round-trip repr, and all Monte-Carlo seeds derive from the master seed
through fixed spawn keys.

Exit codes: 0 on success, 2 on a configuration error, 3 on a numeric
failure, 4 on a violated run invariant.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calibrate import build_problem, fit
from .detect import NonlinearFn, ml_detect_mc
from .errors import ConfigError, InvariantViolation, NumericError
from .gain import GainModel, sample_dist, sample_pdf, support_cutoff
from .inforate import (mutual_info_multi, mutual_info_single,
                       optimal_duty_multi, optimal_duty_single,
                       suboptimal_duty_multi, suboptimal_duty_single)
from .regimes import build_thresholds, classify
from .sim import ChannelConfig, draw_bits, gen_symbol_stream, synth_waveform

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_INVARIANT = 4

# spawn keys separating the subcommands' child streams from each other and
# from the seeds used inside the detect module
_KEY_REGIMES = 0x5E6
_KEY_BER = 0xBE5
_KEY_SIMULATE = 0x51E

_DETECTOR_CHOICES = ("mpd-infinite", "mpd-oversample", "mpd-undersample", "pcd")

# Block-by-block schema: every allowed key with its default.  Defaults for
# the channel follow the hardware sketch the package targets (1 us symbols,
# 20 ns dead time, 1e5 counts/s background, mean gain 3e7 over 12 stages).
_BLOCK_DEFAULTS: dict[str, dict] = {
    "channel": {
        "symbol_time_s": 1.0e-6,
        "dead_time_s": 2.0e-8,
        "background_rate_per_s": 1.0e5,
        "signal_rate_per_s": None,
        "eta": 1.0,
    },
    "model": {
        "mean_gain": 3.0e7,
        "stages": 12,
        "spread_ratio": None,
    },
    "gain_pdf": {
        "lam": (0.5, 1.0, 2.0),
        "points": 400,
        "z_max": None,
    },
    "duty_cycle": {
        "lambda_signal": (1.0e-4, 1.0e-2, 0.1, 1.0),
        "lambda_background": (1.0e-4, 1.0e-2),
        "L": (1, 2),
        "grid_step": 0.01,
    },
    "regimes": {
        "l_max": 2.4,
        "epsilon": 0.015,
        "n_symbols": 6,
        "samples_per_dead_time": 8,
        "gain_law": "model",
        "rates": None,
    },
    "ber": {
        "lambda_signal": (0.2, 0.35, 0.5),
        "lambda_background": 0.1,
        "L": (10, 25, 50),
        "ks": (1, 2, 4),
        "detectors": None,
        "n_symbols": 50_000,
        "gain_law": "model",
        "nonlinearity": None,
        "sigma0_sq": 0.0,
    },
    "fit": {
        "data_csv": None,
        "grid_max": 10.0,
        "grid_points": 201,
        "max_iter": 100,
        "tolerance": 1.0e-8,
        "rate_per_power_unit": 1.0,
    },
    "simulate": {
        "n_symbols": 16,
        "duty": 0.5,
        "L": 50,
        "ks": None,
        "gain_law": "branching",
        "include_arrivals": False,
    },
}

_TOP_KEYS = {"schema_version", "include", "seed"} | set(_BLOCK_DEFAULTS)


# ---------------------------------------------------------------------------
# configuration loading and normalization
# ---------------------------------------------------------------------------

def _deep_merge(base, override):
    """Merge ``override`` on top of ``base``; nested dicts merge recursively."""
    merged = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], val)
        else:
            merged[key] = val
    return merged


def load_config(path, _seen=None) -> dict:
    """Read a JSON config file, resolving ``include`` chains depth-first.

    The included file is loaded first and the including file's keys merge
    over it, so local settings win.  Include paths are relative to the
    file that names them; cycles are rejected.
    """
    path = Path(path).resolve()
    seen = set() if _seen is None else _seen
    if path in seen:
        raise ConfigError(f"config include cycle through {path}")
    seen.add(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path.name}:{exc.lineno}: invalid JSON: {exc.msg}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path.name}: top level must be a JSON object")
    include = raw.pop("include", None)
    if include is None:
        return raw
    if not isinstance(include, str):
        raise ConfigError(f"{path.name}: include must be a path string")
    base = load_config(path.parent / include, seen)
    return _deep_merge(base, raw)


def _check_keys(block_name, block, allowed):
    for key in block:
        if key not in allowed:
            raise ConfigError(f"unknown key {block_name}.{key!r} "
                              f"(allowed: {', '.join(sorted(allowed))})")


def _positive(name, value):
    value = float(value)
    if not value > 0.0:
        raise ConfigError(f"{name} must be > 0, got {value}")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    """Normalized (Tb = 1) description of a full experiment.

    ``rateA`` is the extra arrival rate while the symbol is on, in photons
    per symbol, or None when the config gives no signal power (sweeps set
    it per point).  ``blocks`` holds the per-subcommand option dicts with
    schema defaults already applied; ``raw`` is the merged config as read,
    retained so artifacts can embed its hash.
    """

    schema_version: int
    seed: int
    tau: float
    rate0: float
    rateA: float | None
    eta: float
    model: GainModel
    blocks: dict
    raw: dict

    @property
    def sha256(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def normalize_config(raw: dict) -> ExperimentConfig:
    """Validate the merged config and convert units to Tb = 1."""
    _check_keys("top-level", raw, _TOP_KEYS)
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} "
                          f"(this build reads {SCHEMA_VERSION})")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")

    blocks = {}
    for name, defaults in _BLOCK_DEFAULTS.items():
        given = raw.get(name, {})
        if not isinstance(given, dict):
            raise ConfigError(f"{name} block must be a JSON object")
        _check_keys(name, given, set(defaults))
        blocks[name] = {**defaults, **given}

    ch = blocks["channel"]
    tb = _positive("channel.symbol_time_s", ch["symbol_time_s"])
    tau = _positive("channel.dead_time_s", ch["dead_time_s"]) / tb
    if not tau < 1.0:
        raise ConfigError(f"dead time must be shorter than the symbol "
                          f"(tau = {tau})")
    rate0 = float(ch["background_rate_per_s"]) * tb
    if rate0 < 0.0:
        raise ConfigError(f"background rate must be >= 0, got {rate0}")
    rateA = None
    if ch["signal_rate_per_s"] is not None:
        rateA = _positive("channel.signal_rate_per_s",
                          ch["signal_rate_per_s"]) * tb
    eta = float(ch["eta"])
    if not 0.0 < eta <= 1.0:
        raise ConfigError(f"eta must be in (0, 1], got {eta}")

    mb = blocks["model"]
    stages = mb["stages"]
    if not isinstance(stages, int) or isinstance(stages, bool) or stages < 1:
        raise ConfigError(f"model.stages must be a positive integer, "
                          f"got {stages!r}")
    if mb["spread_ratio"] is not None:
        model = GainModel.from_spread_ratio(float(mb["spread_ratio"]), stages)
    else:
        model = GainModel(float(mb["mean_gain"]), stages)

    return ExperimentConfig(version, seed, tau, rate0, rateA, eta,
                            model, blocks, raw)


# ---------------------------------------------------------------------------
# deterministic artifact writers
# ---------------------------------------------------------------------------

def _fmt_value(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_text(path: Path, text: str):
    path.write_text(text)
    print(f"wrote {path}")


def write_table(out_dir: Path, name: str, columns, rows, fmt: str) -> str:
    """Write one table as ``<name>.csv`` or ``<name>.json``; returns the
    file name.  Rows are sequences aligned with ``columns``."""
    if fmt == "csv":
        lines = [",".join(columns)]
        lines += [",".join(_fmt_value(v) for v in row) for row in rows]
        fname = f"{name}.csv"
        _write_text(out_dir / fname, "\n".join(lines) + "\n")
    else:
        payload = {"columns": list(columns),
                   "rows": [[(v if isinstance(v, (str, bool)) else
                              (int(v) if isinstance(v, (int, np.integer))
                               else float(v))) for v in row] for row in rows]}
        fname = f"{name}.json"
        _write_text(out_dir / fname, json.dumps(payload, sort_keys=True,
                                                indent=2) + "\n")
    return fname


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent, capture_output=True,
            text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 else "unknown"


def write_meta(out_dir: Path, name: str, command: str, cfg: ExperimentConfig,
               seed: int, tables, extra=None):
    meta = {
        "command": command,
        "schema_version": cfg.schema_version,
        "seed": seed,
        "config_sha256": cfg.sha256,
        "git_describe": _git_describe(),
        "tables": list(tables),
    }
    if extra:
        meta.update(extra)
    _write_text(out_dir / f"{name}.meta.json",
                json.dumps(meta, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# subcommand runners
# ---------------------------------------------------------------------------

def run_gain_pdf(cfg: ExperimentConfig, out_dir: Path, seed: int, fmt: str,
                 threads: int):
    blk = cfg.blocks["gain_pdf"]
    lams = np.atleast_1d(np.asarray(blk["lam"], dtype=float))
    if lams.size == 0 or np.any(lams <= 0.0):
        raise ConfigError("gain_pdf.lam needs positive per-window means")
    points = int(blk["points"])
    if points < 2:
        raise ConfigError(f"gain_pdf.points must be >= 2, got {points}")
    a = cfg.model.spread_ratio

    rows = []
    atoms = []
    for lam in lams:
        dist = sample_dist(lam, a)
        total = dist.atom_weight + dist.continuous_mass()
        if abs(total - 1.0) > 1e-7:
            raise NumericError(f"law at lam={lam} integrates to {total}")
        atoms.append([float(lam), float(dist.atom_weight)])
        z_hi = float(blk["z_max"]) if blk["z_max"] is not None else \
            float(support_cutoff(lam, a))
        zs = np.linspace(0.0, z_hi, points + 1)[1:]
        dens = sample_pdf(zs, lam, a)
        cum = dist.atom_weight + (dist.cdf(zs) - dist.cdf(0.0))
        for z, d, c in zip(zs, dens, cum):
            rows.append([float(lam), float(z), float(d), float(c)])

    tables = [write_table(out_dir, "gain_pdf",
                          ("lam", "z", "density", "cumulative"), rows, fmt)]
    write_meta(out_dir, "gain_pdf", "gain-pdf", cfg, seed, tables,
               {"spread_ratio": a, "atom_weights": atoms})


def run_duty_cycle_sweep(cfg: ExperimentConfig, out_dir: Path, seed: int,
                         fmt: str, threads: int):
    blk = cfg.blocks["duty_cycle"]
    lam_sig = [float(v) for v in np.atleast_1d(blk["lambda_signal"])]
    lam_bg = [float(v) for v in np.atleast_1d(blk["lambda_background"])]
    Ls = [int(v) for v in np.atleast_1d(blk["L"])]
    step = float(blk["grid_step"])
    if not 0.0 < step < 0.5:
        raise ConfigError(f"duty_cycle.grid_step must be in (0, 0.5), "
                          f"got {step}")
    a = cfg.model.spread_ratio
    eta = cfg.eta
    mu_axis = np.arange(step, eta + step / 2, step)
    mu_axis = mu_axis[mu_axis < 1.0]

    def info(mu, lam0, lam1, L):
        if L == 1:
            return mutual_info_single(mu, lam0, lam1, a).total
        return mutual_info_multi(mu, lam0, lam1, a, L).total

    rows = []
    gaps = {}
    mi_by_L = {}
    for ls in lam_sig:
        for l0 in lam_bg:
            l1 = l0 + ls
            for L in Ls:
                if L == 1:
                    mu_opt = optimal_duty_single(l0, l1, a, eta)
                    mu_sub = suboptimal_duty_single(l1, a, eta)
                else:
                    mu_opt = optimal_duty_multi(l0, l1, a, L, eta)
                    mu_sub = suboptimal_duty_multi(l1, a, L, eta)
                mi_opt = info(mu_opt, l0, l1, L)
                mi_sub = info(mu_sub, l0, l1, L)
                surface = [info(mu, l0, l1, L) for mu in mu_axis]
                j = int(np.argmax(surface))
                rows.append([ls, l0, L, mu_opt, mu_sub, mi_opt, mi_sub,
                             float(mu_axis[j]), float(surface[j])])
                gaps[(ls, l0, L)] = (mi_opt - mi_sub) / max(mi_opt, 1e-300)
                mi_by_L[(ls, l0, L)] = mi_opt

    # table invariants: more samples never hurt, and the closed-form duty
    # approaches the true optimum as the background vanishes
    for ls in lam_sig:
        for l0 in lam_bg:
            for La, Lb in zip(Ls, Ls[1:]):
                if mi_by_L[(ls, l0, Lb)] < mi_by_L[(ls, l0, La)] - 1e-12:
                    raise InvariantViolation(
                        f"capacity dropped from L={La} to L={Lb} at "
                        f"(lambda_signal={ls}, lambda_background={l0})")
        if len(lam_bg) >= 2:
            lo, hi = min(lam_bg), max(lam_bg)
            for L in Ls:
                if gaps[(ls, lo, L)] > gaps[(ls, hi, L)] + 1e-9:
                    raise InvariantViolation(
                        f"closed-form duty gap grew as the background fell "
                        f"(lambda_signal={ls}, L={L})")

    tables = [write_table(
        out_dir, "duty_cycle",
        ("lambda_signal", "lambda_background", "L", "mu_optimal",
         "mu_suboptimal", "mi_optimal", "mi_suboptimal", "mu_grid_argmax",
         "mi_grid_max"), rows, fmt)]
    write_meta(out_dir, "duty_cycle", "duty-cycle", cfg, seed, tables,
               {"spread_ratio": a, "eta": eta, "grid_step": step})


def run_regime_demo(cfg: ExperimentConfig, out_dir: Path, seed: int,
                    fmt: str, threads: int):
    blk = cfg.blocks["regimes"]
    tau = cfg.tau
    a = cfg.model.spread_ratio
    thresholds = build_thresholds(tau, a, l_max=float(blk["l_max"]),
                                  epsilon=float(blk["epsilon"]))
    th1, th2 = thresholds.lambda_th1, thresholds.lambda_th2
    if blk["rates"] is not None:
        rates = [float(r) for r in blk["rates"]]
    else:
        rates = [0.5 * th1, th1, math.sqrt(th1 * th2), th2, 2.0 * th2]
    n_symbols = int(blk["n_symbols"])
    if n_symbols < 1:
        raise ConfigError("regimes.n_symbols must be >= 1")
    ks = int(blk["samples_per_dead_time"])

    tables = [write_table(
        out_dir, "regime_thresholds", ("quantity", "value"),
        [["lambda_th1", th1], ["lambda_th2", th2],
         ["l_max", thresholds.l_max], ["epsilon", thresholds.epsilon],
         ["tau", tau], ["spread_ratio", a]], fmt)]

    dumps = []
    for k, rate in enumerate(rates, start=1):
        rng = np.random.default_rng(
            np.random.SeedSequence(seed, spawn_key=(_KEY_REGIMES, k)))
        times, gains = gen_symbol_stream(
            rng, np.full(n_symbols, rate), cfg.model, blk["gain_law"])
        grid_cfg = ChannelConfig.oversampled(
            rate0=cfg.rate0 if cfg.rate0 > 0 else rate, rateA=rate,
            tau=tau, ks=ks)
        wave = synth_waveform(times, gains, grid_cfg, n_symbols=n_symbols)
        name = f"regime_waveform_{k}"
        tables.append(write_table(
            out_dir, name, ("t", "level"),
            [[float(t), float(v)] for t, v in
             zip(wave.sample_times, wave.values)], fmt))
        dumps.append({"table": name, "rate": float(rate),
                      "regime": classify(rate, thresholds)})

    write_meta(out_dir, "regimes", "regimes", cfg, seed, tables,
               {"waveforms": dumps, "lambda_th1": th1, "lambda_th2": th2})


def _ber_tasks(cfg: ExperimentConfig, blk, C, sigma0):
    """Expand the ber block into a flat, deterministic task list."""
    tau = cfg.tau
    lam_sig = [float(v) for v in np.atleast_1d(blk["lambda_signal"])]
    lam0 = float(blk["lambda_background"])
    if not lam0 > 0.0:
        raise ConfigError("ber.lambda_background must be > 0; the averaging "
                          "detectors normalize by the off-state variance")
    Ls = [int(v) for v in np.atleast_1d(blk["L"])]
    kss = [int(v) for v in np.atleast_1d(blk["ks"])]
    detectors = blk["detectors"]
    if detectors is None:
        detectors = (("mpd-infinite", "pcd") if C is not None else
                     ("mpd-undersample", "mpd-oversample", "pcd"))
    for det in detectors:
        if det not in _DETECTOR_CHOICES:
            raise ConfigError(f"unknown detector {det!r} in ber.detectors")
        if C is not None and det in ("mpd-undersample", "mpd-oversample"):
            raise ConfigError(f"{det} is a linear-regime detector; drop it "
                              "from ber.detectors when a nonlinearity is set")

    tasks = []
    for ls in lam_sig:
        rate0, rateA = lam0 / tau, ls / tau
        for det in detectors:
            if det == "mpd-infinite":
                config = ChannelConfig.undersampled(rate0, rateA, tau, L=1)
                tasks.append((det, ls, 0, config, C, 0.0))
            elif det == "mpd-oversample":
                for k in kss:
                    config = ChannelConfig.oversampled(rate0, rateA, tau, k)
                    tasks.append((det, ls, k, config, None, 0.0))
            elif det == "mpd-undersample":
                for L in Ls:
                    config = ChannelConfig.undersampled(rate0, rateA, tau, L)
                    tasks.append((det, ls, L, config, None, 0.0))
            else:
                for L in Ls:
                    config = ChannelConfig.undersampled(rate0, rateA, tau, L)
                    tasks.append((det, ls, L, config, C, sigma0))
    return tasks


def run_ber_sweep(cfg: ExperimentConfig, out_dir: Path, seed: int, fmt: str,
                  threads: int):
    blk = cfg.blocks["ber"]
    n_symbols = int(blk["n_symbols"])
    sigma0_sq = float(blk["sigma0_sq"])
    if sigma0_sq < 0.0:
        raise ConfigError(f"ber.sigma0_sq must be >= 0, got {sigma0_sq}")
    sigma0 = math.sqrt(sigma0_sq)
    C = None
    if blk["nonlinearity"] is not None:
        nl = blk["nonlinearity"]
        if not isinstance(nl, dict) or set(nl) != {"x", "c"}:
            raise ConfigError("ber.nonlinearity must be an object with "
                              "grids 'x' and 'c'")
        C = NonlinearFn(np.asarray(nl["x"], dtype=float),
                        np.asarray(nl["c"], dtype=float))
    tasks = _ber_tasks(cfg, blk, C, sigma0)
    gain_law = blk["gain_law"]

    def run_one(idx_task):
        idx, (det, ls, param, config, C_task, s0) = idx_task
        child = int(np.random.SeedSequence(
            seed, spawn_key=(_KEY_BER, idx)).generate_state(1)[0])
        report = ml_detect_mc(child, det, config, cfg.model, C=C_task,
                              n_symbols=n_symbols, sigma0=s0,
                              gain_law=gain_law)
        return idx, ls, param, report

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_one, enumerate(tasks)))
    else:
        results = [run_one(it) for it in enumerate(tasks)]
    results.sort(key=lambda r: r[0])

    rows = []
    for idx, ls, param, report in results:
        rows.append([report.detector_kind, ls,
                     float(blk["lambda_background"]), param,
                     report.theory_pe, report.monte_carlo_pe,
                     report.mc_ci95, report.n_symbols, report.n_errors,
                     report.seed])
    tables = [write_table(
        out_dir, "ber",
        ("detector", "lambda_signal", "lambda_background", "L_or_ks",
         "theory_pe", "mc_pe", "mc_ci95", "n_symbols", "n_errors", "seed"),
        rows, fmt)]
    write_meta(out_dir, "ber", "ber", cfg, seed, tables,
               {"gain_law": gain_law, "sigma0_sq": sigma0_sq,
                "nonlinear": C is not None, "threads": threads})


def _read_fit_csv(path: Path):
    """Parse a power,mean,std measurement table with line-numbered errors."""
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read fit data {path}: {exc}") from None
    if not lines:
        raise ConfigError(f"{path.name}:1: empty data file")
    header = [h.strip().lower() for h in lines[0].split(",")]
    if header != ["power", "mean", "std"]:
        raise ConfigError(f"{path.name}:1: expected header power,mean,std, "
                          f"got {lines[0]!r}")
    powers, means, stds = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ConfigError(f"{path.name}:{lineno}: expected 3 fields, "
                              f"got {len(parts)}")
        try:
            p, m, s = (float(x) for x in parts)
        except ValueError:
            raise ConfigError(f"{path.name}:{lineno}: non-numeric field in "
                              f"{line!r}") from None
        if not (math.isfinite(p) and math.isfinite(m) and math.isfinite(s)):
            raise ConfigError(f"{path.name}:{lineno}: non-finite value")
        if p < 0.0 or s < 0.0:
            raise ConfigError(f"{path.name}:{lineno}: power and std must "
                              "be >= 0")
        powers.append(p)
        means.append(m)
        stds.append(s)
    if not powers:
        raise ConfigError(f"{path.name}:2: no data rows")
    return np.array(powers), np.array(means), np.array(stds)


def run_fit(cfg: ExperimentConfig, out_dir: Path, seed: int, fmt: str,
            threads: int, config_dir: Path):
    blk = cfg.blocks["fit"]
    if blk["data_csv"] is None:
        raise ConfigError("fit.data_csv is required")
    data_path = Path(blk["data_csv"])
    if not data_path.is_absolute():
        data_path = config_dir / data_path
    powers, means, stds = _read_fit_csv(data_path)
    scale = _positive("fit.rate_per_power_unit", blk["rate_per_power_unit"])
    grid_points = int(blk["grid_points"])
    if grid_points < 2:
        raise ConfigError("fit.grid_points must be >= 2")
    grid = np.linspace(0.0, _positive("fit.grid_max", blk["grid_max"]),
                       grid_points)

    problem = build_problem(powers * scale, grid, cfg.tau, cfg.model,
                            g_mean=means, g_var=stds ** 2)
    curve, trace = fit(problem, max_iter=int(blk["max_iter"]),
                       tolerance=float(blk["tolerance"]), return_trace=True)
    if not math.isfinite(trace["objective"]):
        raise NumericError(f"fit diverged: residual {trace['objective']}")

    rows = [[float(x), float(c)] for x, c in zip(curve.grid_x, curve.grid_c)]
    tables = [write_table(out_dir, "fit_curve", ("x", "C"), rows, fmt)]
    write_meta(out_dir, "fit_curve", "fit", cfg, seed, tables,
               {"xs": float(curve.xs), "l_max": float(curve.ceiling),
                "fit_residual": float(trace["objective"]), "seed": seed,
                "n_iter": trace["n_iter"],
                "grad_inf": float(trace["grad_inf"]),
                "data_csv": data_path.name})
    print(f"fit residual {trace['objective']:.6e} after "
          f"{trace['n_iter']} iterations")


def run_simulate(cfg: ExperimentConfig, out_dir: Path, seed: int, fmt: str,
                 threads: int):
    blk = cfg.blocks["simulate"]
    if cfg.rateA is None:
        raise ConfigError("simulate needs channel.signal_rate_per_s")
    n_symbols = int(blk["n_symbols"])
    if n_symbols < 1:
        raise ConfigError("simulate.n_symbols must be >= 1")
    duty = float(blk["duty"])
    if not 0.0 < duty < 1.0:
        raise ConfigError(f"simulate.duty must be in (0, 1), got {duty}")
    if blk["ks"] is not None:
        config = ChannelConfig.oversampled(cfg.rate0, cfg.rateA, cfg.tau,
                                           int(blk["ks"]), cfg.eta)
    else:
        config = ChannelConfig.undersampled(cfg.rate0, cfg.rateA, cfg.tau,
                                            int(blk["L"]), cfg.eta)

    rng = np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(_KEY_SIMULATE,)))
    bits = draw_bits(rng, n_symbols, duty)
    rates = cfg.rate0 + bits * cfg.rateA
    times, gains = gen_symbol_stream(rng, rates, cfg.model, blk["gain_law"])
    wave = synth_waveform(times, gains, config, n_symbols=n_symbols)

    tables = [
        write_table(out_dir, "simulate_symbols", ("symbol", "bit"),
                    [[i, int(b)] for i, b in enumerate(bits)], fmt),
        write_table(out_dir, "simulate_samples", ("t", "level"),
                    [[float(t), float(v)] for t, v in
                     zip(wave.sample_times, wave.values)], fmt),
    ]
    if blk["include_arrivals"]:
        tables.append(write_table(
            out_dir, "simulate_arrivals", ("t", "gain"),
            [[float(t), float(g)] for t, g in zip(times, gains)], fmt))
    write_meta(out_dir, "simulate", "simulate", cfg, seed, tables,
               {"mode": config.mode, "samples_per_symbol":
                config.samples_per_symbol, "duty": duty,
                "gain_law": blk["gain_law"], "n_arrivals": int(times.size)})


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

_RUNNERS = {
    "gain-pdf": run_gain_pdf,
    "duty-cycle": run_duty_cycle_sweep,
    "regimes": run_regime_demo,
    "ber": run_ber_sweep,
    "simulate": run_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photonwire",
        description="Simulation and analysis runner for saturable "
                    "photon-counting receivers.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="JSON experiment description (defaults apply "
                             "when omitted)")
    common.add_argument("--seed", type=int, metavar="U64",
                        help="master seed; overrides the config")
    common.add_argument("--out", default="photonwire_out", metavar="DIR",
                        help="output directory (default %(default)s)")
    common.add_argument("--threads", type=int, metavar="N",
                        help="worker threads for independent sweep points "
                             "(default: PHOTONWIRE_THREADS or 1)")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="table format (default %(default)s)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gain-pdf", parents=[common],
                   help="tabulate the normalized per-window charge law")
    sub.add_parser("duty-cycle", parents=[common],
                   help="sweep information-optimal duty cycles")
    sub.add_parser("regimes", parents=[common],
                   help="dump example waveforms across the rate regimes")
    sub.add_parser("ber", parents=[common],
                   help="sweep detector error rates, theory vs Monte Carlo")
    sub.add_parser("fit", parents=[common],
                   help="recover the anode transfer curve from moment data")
    sub.add_parser("simulate", parents=[common],
                   help="dump one simulated symbol stream")
    return parser


def _resolve_threads(arg_threads) -> int:
    if arg_threads is not None:
        threads = arg_threads
    else:
        env = os.environ.get("PHOTONWIRE_THREADS")
        if env is None:
            return 1
        try:
            threads = int(env)
        except ValueError:
            raise ConfigError(
                f"PHOTONWIRE_THREADS must be an integer, got {env!r}")
    if threads < 1:
        raise ConfigError(f"thread count must be >= 1, got {threads}")
    return threads


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = _resolve_threads(args.threads)
        if args.config is not None:
            raw = load_config(args.config)
            config_dir = Path(args.config).resolve().parent
        else:
            raw = {}
            config_dir = Path.cwd()
        cfg = normalize_config(raw)
        seed = cfg.seed if args.seed is None else args.seed
        if seed < 0:
            raise ConfigError(f"seed must be >= 0, got {seed}")
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "fit":
            run_fit(cfg, out_dir, seed, args.format, threads, config_dir)
        else:
            _RUNNERS[args.command](cfg, out_dir, seed, args.format, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
