"""``simulate``: distance sweeps of S and K from a flat INI configuration.

Example configuration::

    layout = esr
    L_start = 0
    L_stop = 150
    L_step = 10
    eta_D = 1.0
    eta_HD = 0.2, 0.6, 1.0
    P_DC = 0
    P_DCH = 0
    lambda = 1.0
    objective = S
    angles_mode = fixed
    seed = 7

Comma lists define a family of curves; lists of equal length are paired
element by element and scalars apply to every curve. Results are written as
CSV, one row per (curve, distance), with an ``error`` column that stays empty
unless that point failed; progress goes to standard error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .annealing import AnnealingSchedule, ObjectiveError, OptimizationSpace, optimize
from .detection import NumericalConsistencyError
from .metrics import MeasurementSettings
from .protocol import NetworkConfig, SourceSettings
from .source import SchmidtSpectrum

CSV_HEADER = [
    "L_km", "eta_D", "eta_HD", "P_DC", "P_DCH", "lambda_spectrum", "S", "Q", "P_s", "K",
    "mu_A", "mu_B", "balance", "seed", "error",
]
FAMILY_KEYS = ("eta_D", "eta_HD", "P_DC", "P_DCH", "lambda")
KNOWN_KEYS = {
    "layout", "L_start", "L_stop", "L_step", "alpha_db_km", *FAMILY_KEYS, "objective", "angles_mode",
    "seed", "threads", "output_path", "schedule", "anneal_T0", "anneal_cooling", "anneal_steps",
    "anneal_Tmin", "anneal_sigma", "mu_min", "mu_max", "ratio_min", "ratio_max", "balance_min",
    "balance_max", "cold_start_every",
}
COLD_START_EVERY = 10


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class Curve:
    eta_d: float
    eta_hd: float
    p_dc: float
    p_dch: float
    lam: float


@dataclass(frozen=True)
class SweepConfig:
    layout: str
    lengths: tuple
    curves: tuple
    alpha_db_km: float = 0.2
    objective: str = "S"
    angles_mode: str = "fixed"
    seed: int = 0
    threads: int = 1
    output_path: str | None = None
    schedule: AnnealingSchedule = field(default_factory=AnnealingSchedule.quick)
    cold_schedule: AnnealingSchedule = field(default_factory=AnnealingSchedule.quick)
    space: OptimizationSpace = field(default_factory=OptimizationSpace)
    cold_start_every: int = COLD_START_EVERY


def _read_ini(path: Path) -> dict:
    text = path.read_text()
    if not text.lstrip().startswith("["):
        text = "[sweep]\n" + text
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    values = {}
    for section in parser.sections():
        values.update(parser[section])
    unknown = sorted(set(values) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}")
    return values


def _number(values: dict, key: str, default=None, kind=float):
    if key not in values:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        v = kind(values[key])
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot read {values[key]!r} as {kind.__name__}") from exc
    if kind is float and not math.isfinite(v):
        raise ConfigError(f"key {key!r} must be finite")
    return v


def _family(values: dict, key: str, default: float) -> list:
    raw = values.get(key)
    if raw is None:
        return [default]
    try:
        out = [float(x) for x in raw.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected a number or comma list, got {raw!r}") from exc
    if not out:
        raise ConfigError(f"key {key!r} is empty")
    return out


def parse_config(path) -> SweepConfig:
    """Read and validate a sweep configuration; raises ``ConfigError`` naming the bad key."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file {path} not found")
    values = _read_ini(path)
    layout = values.get("layout", "esr").strip()
    if layout not in ("direct", "esr"):
        raise ConfigError(f"key 'layout' must be direct or esr, got {layout!r}")
    start = _number(values, "L_start", 0.0)
    stop = _number(values, "L_stop")
    step = _number(values, "L_step", 1.0)
    if start < 0 or stop < start:
        raise ConfigError("key 'L_stop' must be >= L_start >= 0")
    if step <= 0:
        raise ConfigError("key 'L_step' must be > 0")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    lengths = tuple(round(start + k * step, 10) for k in range(n))

    fam = {
        "eta_D": _family(values, "eta_D", 1.0),
        "eta_HD": _family(values, "eta_HD", 1.0),
        "P_DC": _family(values, "P_DC", 0.0),
        "P_DCH": _family(values, "P_DCH", 0.0),
        "lambda": _family(values, "lambda", 1.0),
    }
    lists = {k: len(v) for k, v in fam.items() if len(v) > 1}
    if len(set(lists.values())) > 1:
        detail = ", ".join(f"{k!r} has {n}" for k, n in lists.items())
        raise ConfigError(f"comma lists must have equal length: {detail}")
    size = max(len(v) for v in fam.values())
    curves = []
    for i in range(size):
        pick = {k: (v[i] if len(v) > 1 else v[0]) for k, v in fam.items()}
        for key in ("eta_D", "eta_HD", "lambda"):
            if not 0 < pick[key] <= 1:
                raise ConfigError(f"key {key!r} values must lie in (0, 1], got {pick[key]}")
        for key in ("P_DC", "P_DCH"):
            if not 0 <= pick[key] < 1:
                raise ConfigError(f"key {key!r} values must lie in [0, 1), got {pick[key]}")
        curves.append(Curve(pick["eta_D"], pick["eta_HD"], pick["P_DC"], pick["P_DCH"], pick["lambda"]))

    objective = values.get("objective", "S").strip()
    if objective not in ("S", "K"):
        raise ConfigError(f"key 'objective' must be S or K, got {objective!r}")
    angles_mode = values.get("angles_mode", "fixed").strip()
    if angles_mode not in ("fixed", "free"):
        raise ConfigError(f"key 'angles_mode' must be fixed or free, got {angles_mode!r}")
    seed = _number(values, "seed", 0, int)
    threads = _number(values, "threads", 1, int)
    if threads < 1:
        raise ConfigError("key 'threads' must be >= 1")
    alpha = _number(values, "alpha_db_km", 0.2)
    if alpha < 0:
        raise ConfigError("key 'alpha_db_km' must be >= 0")

    preset = values.get("schedule", "quick").strip()
    if preset not in ("quick", "full"):
        raise ConfigError(f"key 'schedule' must be quick or full, got {preset!r}")
    base = AnnealingSchedule.quick() if preset == "quick" else AnnealingSchedule()
    try:
        schedule = AnnealingSchedule(
            _number(values, "anneal_T0", base.initial_temperature),
            _number(values, "anneal_cooling", base.cooling_factor),
            _number(values, "anneal_steps", base.steps_per_temperature, int),
            _number(values, "anneal_Tmin", base.min_temperature),
            _number(values, "anneal_sigma", base.proposal_scale),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"annealing keys: {exc}") from exc
    sd = OptimizationSpace()
    try:
        space = OptimizationSpace(
            (_number(values, "mu_min", sd.mu_bounds[0]), _number(values, "mu_max", sd.mu_bounds[1])),
            (_number(values, "ratio_min", sd.ratio_bounds[0]), _number(values, "ratio_max", sd.ratio_bounds[1])),
            (_number(values, "balance_min", sd.balance_bounds[0]), _number(values, "balance_max", sd.balance_bounds[1])),
            free_angles=angles_mode == "free",
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"search bounds: {exc}") from exc
    cold_every = _number(values, "cold_start_every", COLD_START_EVERY, int)
    if cold_every < 1:
        raise ConfigError("key 'cold_start_every' must be >= 1")
    return SweepConfig(
        layout, lengths, tuple(curves), alpha, objective, angles_mode, seed, threads,
        values.get("output_path"), schedule, schedule, space, cold_every,
    )


def point_seed(master: int, curve_index: int, length_km: float) -> int:
    """Seed of one sweep point, a function of the master seed, the curve and L only."""
    seq = np.random.SeedSequence([master, curve_index, int(round(length_km * 1000))])
    return int(seq.generate_state(1)[0])


def _with_seed(schedule: AnnealingSchedule, seed: int) -> AnnealingSchedule:
    return replace(schedule, rng_seed=seed)


def run_curve(cfg: SweepConfig, index: int, log=None) -> list[dict]:
    """Optimize every distance of one curve, warm-starting each point from the previous optimum."""
    curve = cfg.curves[index]
    spectrum = SchmidtSpectrum.two_mode(curve.lam)
    rows = []
    warm = None
    for k, length in enumerate(cfg.lengths):
        seed = point_seed(cfg.seed, index, length)
        net = NetworkConfig(cfg.layout, length, cfg.alpha_db_km, curve.eta_d, curve.eta_hd, curve.p_dc, curve.p_dch, spectrum)
        row = {
            "L_km": length, "eta_D": curve.eta_d, "eta_HD": curve.eta_hd, "P_DC": curve.p_dc,
            "P_DCH": curve.p_dch, "lambda_spectrum": curve.lam, "seed": seed,
        }
        t0 = time.perf_counter()
        try:
            cold = warm is None or k % cfg.cold_start_every == 0
            res = optimize(cfg.objective, net, cfg.space, _with_seed(cfg.schedule, seed), start=warm)
            if cold and warm is not None:
                alt = optimize(cfg.objective, net, cfg.space, _with_seed(cfg.cold_schedule, seed))
                better = alt.S > res.S if cfg.objective == "S" else alt.K > res.K
                res = alt if better else res
            p = res.parameters
            warm = (SourceSettings(p["mu_A"], p["ratio"], p["balance"]), _settings_of(p))
            row.update(S=res.S, Q=res.Q, P_s=res.P_s, K=res.K, mu_A=p["mu_A"], mu_B=p["mu_B"], balance=p["balance"])
            row["error"] = ""
        except (ObjectiveError, NumericalConsistencyError, ArithmeticError, ValueError) as exc:
            row.update(S=math.nan, Q=math.nan, P_s=math.nan, K=math.nan, mu_A=math.nan, mu_B=math.nan, balance=math.nan)
            row["error"] = str(exc)
        rows.append(row)
        if log is not None:
            status = f"ERROR {row['error']}" if row["error"] else f"S={row['S']:.6f} K={row['K']:.3e}"
            log(f"[curve {index + 1}/{len(cfg.curves)}] L={length:g} km {status} ({time.perf_counter() - t0:.1f} s)")
    return rows


def _settings_of(params: dict) -> MeasurementSettings:
    return MeasurementSettings(tuple(params["alice_angles"]), tuple(params["bob_angles"]))


def _format(row: dict) -> list[str]:
    out = []
    for key in CSV_HEADER:
        v = row[key]
        out.append(str(v) if key in ("seed", "error") else f"{v:.12g}")
    return out


def _curve_worker(args):
    cfg, index = args
    return run_curve(cfg, index)


def run_sweep(cfg: SweepConfig, output, log=None) -> int:
    """Run every curve and write the CSV to ``output`` (a text stream). Returns the failure count."""
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    output.flush()
    failures = 0
    if cfg.threads == 1 or len(cfg.curves) == 1:
        for i in range(len(cfg.curves)):
            for row in run_curve(cfg, i, log):
                writer.writerow(_format(row))
                output.flush()
                failures += bool(row["error"])
    else:
        with ProcessPoolExecutor(max_workers=min(cfg.threads, len(cfg.curves))) as pool:
            for i, rows in enumerate(pool.map(_curve_worker, [(cfg, i) for i in range(len(cfg.curves))])):
                for row in rows:
                    writer.writerow(_format(row))
                    failures += bool(row["error"])
                    if log is not None and row["error"]:
                        log(f"[curve {i + 1}] L={row['L_km']:g} km ERROR {row['error']}")
                output.flush()
                if log is not None:
                    log(f"[curve {i + 1}/{len(cfg.curves)}] done")
    return failures


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="simulate", description="Distance sweeps of S and K for DIQKD with and without a relay.")
    parser.add_argument("config", help="INI-style sweep configuration")
    parser.add_argument("--output", help="CSV output path (overrides output_path; default stdout)")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--threads", type=int, help="worker processes (overrides the config)")
    args = parser.parse_args(argv)

    def log(msg):
        print(msg, file=sys.stderr, flush=True)

    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            cfg = replace(cfg, threads=args.threads)
    except ConfigError as exc:
        log(f"configuration error: {exc}")
        return 1
    out_path = args.output or cfg.output_path
    if out_path:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", newline="") as fh:
            failures = run_sweep(cfg, fh, log)
    else:
        failures = run_sweep(cfg, sys.stdout, log)
    if failures:
        log(f"{failures} point(s) failed")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
