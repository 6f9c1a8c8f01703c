"""Simulated-annealing search over source parameters and (optionally) analyzer angles.

Source parameters live in log space; angles are searched directly in radians.
The chain starts from the best point of a coarse grid over the source
parameters (or from a warm start), anneals with Gaussian proposals and
Metropolis acceptance under geometric cooling, and ends with a
coordinate-descent polish whose step is halved down to ``polish_tol``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .detection import NumericalConsistencyError
from .metrics import MeasurementSettings, ProtocolResult
from .protocol import NetworkConfig, SourceSettings, chsh_only, evaluate, secret_fraction

PAPER_SETTINGS = MeasurementSettings()
K_FLOOR = 1e-30
# energy offset for parameter points without a positive secret fraction
INFEASIBLE_ENERGY = 40.0


class ObjectiveError(RuntimeError):
    """Objective evaluation failed; ``params`` holds the offending parameter vector."""

    def __init__(self, message: str, params: dict):
        super().__init__(f"{message} at {params}")
        self.params = params


@dataclass(frozen=True)
class OptimizationSpace:
    """Search bounds. ``ratio`` is primary/relay mean photon number (ESR only)."""

    mu_bounds: tuple = (1e-5, 1.0)
    ratio_bounds: tuple = (1e-2, 1e4)
    balance_bounds: tuple = (0.1, 10.0)
    free_angles: bool = False
    settings: MeasurementSettings = field(default_factory=MeasurementSettings)

    def __post_init__(self):
        for name in ("mu_bounds", "ratio_bounds", "balance_bounds"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < low <= high, got {(lo, hi)}")

    def names(self, layout: str) -> tuple:
        src = ("mu", "ratio", "balance") if layout == "esr" else ("mu", "balance")
        return src + (("x1", "x2", "y1", "y2") if self.free_angles else ())

    def bounds(self, layout: str) -> np.ndarray:
        """Bounds in search coordinates (log for source parameters, radians for angles)."""
        table = {
            "mu": np.log(self.mu_bounds),
            "ratio": np.log(self.ratio_bounds),
            "balance": np.log(self.balance_bounds),
        }
        rows = [table.get(n, (-2 * math.pi, 2 * math.pi)) for n in self.names(layout)]
        return np.array(rows, dtype=float)

    def decode(self, x: np.ndarray, layout: str) -> tuple[SourceSettings, MeasurementSettings]:
        vals = dict(zip(self.names(layout), x))
        source = SourceSettings(
            float(np.exp(vals["mu"])),
            float(np.exp(vals.get("ratio", 0.0))),
            float(np.exp(vals["balance"])),
        )
        if not self.free_angles:
            return source, self.settings
        x0 = self.settings.alice_angles[0]
        return source, MeasurementSettings((x0, vals["x1"], vals["x2"]), (vals["y1"], vals["y2"]))

    def encode(self, source: SourceSettings, settings: MeasurementSettings, layout: str) -> np.ndarray:
        vals = {"mu": math.log(source.mu_abs), "ratio": math.log(source.ratio), "balance": math.log(source.balance)}
        vals.update(zip(("x1", "x2"), settings.alice_angles[1:]))
        vals.update(zip(("y1", "y2"), settings.bob_angles))
        x = np.array([vals[n] for n in self.names(layout)])
        b = self.bounds(layout)
        return np.clip(x, b[:, 0], b[:, 1])


@dataclass(frozen=True)
class AnnealingSchedule:
    initial_temperature: float = 1.0
    cooling_factor: float = 0.93
    steps_per_temperature: int = 60
    min_temperature: float = 1e-4
    proposal_scale: float = 0.3
    rng_seed: int = 0
    polish_tol: float = 1e-6
    grid_points: int = 5

    def __post_init__(self):
        if not 0 < self.cooling_factor < 1:
            raise ValueError("cooling_factor must lie in (0, 1)")
        if not (self.initial_temperature > 0 and self.min_temperature > 0):
            raise ValueError("temperatures must be > 0")
        if self.steps_per_temperature < 1 or self.proposal_scale <= 0:
            raise ValueError("need at least one step per temperature and a positive proposal scale")

    @classmethod
    def quick(cls, rng_seed: int = 0) -> "AnnealingSchedule":
        """Short schedule for warm-started sweep points."""
        return cls(0.1, 0.8, 15, 1e-4, 0.3, rng_seed)

    @property
    def n_temperatures(self) -> int:
        if self.initial_temperature <= self.min_temperature:
            return 1
        return int(math.ceil(math.log(self.min_temperature / self.initial_temperature) / math.log(self.cooling_factor))) + 1


@dataclass
class OptimizationTrace:
    """Every accepted point of the chain, for determinism checks."""

    points: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    evaluations: int = 0
    rejected: int = 0


class _Objective:
    def __init__(self, objective: str, config: NetworkConfig, space: OptimizationSpace):
        if objective not in ("S", "K"):
            raise ValueError(f"objective must be 'S' or 'K', got {objective!r}")
        self.objective = objective
        self.config = config
        self.space = space
        self.key_offset = 0.0
        self.calls = 0
        self.rejected = 0

    def key_candidates(self, settings: MeasurementSettings) -> tuple:
        # the refreshed offset plus the two pairings it most often jumps between
        y1 = settings.bob_angles[0]
        return (y1 + self.key_offset, y1, y1 + 0.5 * math.pi)

    def energy(self, x: np.ndarray) -> float:
        self.calls += 1
        source, settings = self.space.decode(x, self.config.layout)
        try:
            if self.objective == "S":
                return -chsh_only(self.config, source, settings)
            res = evaluate(self.config, source, settings, key_angle=self.key_candidates(settings))
        except NumericalConsistencyError:
            # conditional statistics below the precision floor: reject the move
            self.rejected += 1
            return math.inf
        except (ArithmeticError, ValueError) as exc:
            raise ObjectiveError(f"{type(exc).__name__}: {exc}", _describe(source, settings)) from exc
        frac = secret_fraction(res.S, res.Q)
        if frac <= 0 or res.P_s <= 0:
            # the key-feasible region sits inside the high-S region, while f -> 0-
            # also at the trivial S = 2, Q = 0 corner; so climb S first
            return INFEASIBLE_ENERGY - res.S - max(frac, -1.0)
        return -math.log10(max(res.P_s * frac, K_FLOOR))

    def refresh_key_angle(self, x: np.ndarray) -> None:
        source, settings = self.space.decode(x, self.config.layout)
        res = evaluate(self.config, source, settings)
        self.key_offset = res.parameters["alice_angles"][0] - settings.bob_angles[0]


def _describe(source: SourceSettings, settings: MeasurementSettings) -> dict:
    return {
        "mu_abs": source.mu_abs,
        "ratio": source.ratio,
        "balance": source.balance,
        "alice_angles": tuple(settings.alice_angles),
        "bob_angles": tuple(settings.bob_angles),
    }


def _grid_start(obj: _Objective, bounds: np.ndarray, x_ref: np.ndarray, n_src: int, points: int):
    """Best point of a ``points``-per-axis grid over the source coordinates."""
    axes = [np.linspace(lo, hi, points) for lo, hi in bounds[:n_src]]
    best_x, best_e = x_ref, math.inf
    for combo in itertools.product(*axes):
        x = x_ref.copy()
        x[:n_src] = combo
        e = obj.energy(x)
        if e < best_e:
            best_x, best_e = x, e
    return best_x, best_e


def _polish(obj: _Objective, x: np.ndarray, e: float, bounds: np.ndarray, step: float, tol: float):
    """Coordinate descent: try +-step on each axis, halve the step when nothing improves."""
    x = x.copy()
    while step >= tol:
        improved = False
        for k in range(x.size):
            for sign in (1.0, -1.0):
                trial = x.copy()
                trial[k] = np.clip(trial[k] + sign * step, bounds[k, 0], bounds[k, 1])
                if trial[k] == x[k]:
                    continue
                et = obj.energy(trial)
                if et < e:
                    x, e, improved = trial, et, True
                    break
        if not improved:
            step /= 2
    return x, e


def optimize(
    objective: str,
    config: NetworkConfig,
    space: OptimizationSpace | None = None,
    schedule: AnnealingSchedule | None = None,
    start: tuple[SourceSettings, MeasurementSettings] | None = None,
    trace: OptimizationTrace | None = None,
    chsh_seed: bool = True,
) -> ProtocolResult:
    """Maximize S or K for one network configuration.

    Parameters
    ----------
    objective : {"S", "K"}
    start : (SourceSettings, MeasurementSettings), optional
        Warm start. It competes with the coarse grid for the initial point.
    trace : OptimizationTrace, optional
        Filled with the accepted chain points.
    chsh_seed : bool
        Objective K only. First maximize S with the same schedule and offer
        that optimum as a further starting point. Away from the small region
        of positive key the K landscape is nearly flat, while the S optimum
        usually lies next to that region.

    Returns
    -------
    ProtocolResult
        Full evaluation (S, Q, P_s, K) at the best point, with the key angle
        re-optimized there.
    """
    space = space or OptimizationSpace()
    schedule = schedule or AnnealingSchedule()
    trace = trace if trace is not None else OptimizationTrace()
    layout = config.layout
    obj = _Objective(objective, config, space)
    bounds = space.bounds(layout)
    n_src = 3 if layout == "esr" else 2
    rng = np.random.default_rng(schedule.rng_seed)

    x_ref = space.encode(SourceSettings(1e-2), space.settings, layout)
    if objective == "K":
        obj.refresh_key_angle(x_ref)
    x, e = _grid_start(obj, bounds, x_ref, n_src, schedule.grid_points) if schedule.grid_points > 1 else (x_ref, obj.energy(x_ref))
    starts = [start] if start is not None else []
    seed_calls = 0
    if objective == "K" and chsh_seed:
        pre = optimize("S", config, space, schedule, start=start)
        seed_calls = pre.parameters["evaluations"]
        starts.append((_source_of(pre), _settings_of(pre)))
    for candidate in starts:
        xs = space.encode(*candidate, layout)
        es = obj.energy(xs)
        if es < e:
            x, e = xs, es
    if objective == "K":
        obj.refresh_key_angle(x)
        e = obj.energy(x)

    if not math.isfinite(e):
        source, settings = space.decode(x, layout)
        raise ObjectiveError("no grid point could be evaluated", _describe(source, settings))
    best_x, best_e = x.copy(), e
    trace.points.append(x.copy())
    trace.energies.append(e)
    temp = schedule.initial_temperature
    for _ in range(schedule.n_temperatures):
        for _ in range(schedule.steps_per_temperature):
            trial = x + schedule.proposal_scale * rng.standard_normal(x.size)
            trial = np.clip(trial, bounds[:, 0], bounds[:, 1])
            et = obj.energy(trial)
            if et <= e or (math.isfinite(et) and rng.random() < math.exp(-(et - e) / temp)):
                x, e = trial, et
                trace.points.append(x.copy())
                trace.energies.append(e)
                if e < best_e:
                    best_x, best_e = x.copy(), e
        temp *= schedule.cooling_factor

    best_x, best_e = _polish(obj, best_x, best_e, bounds, schedule.proposal_scale, schedule.polish_tol)
    if objective == "K":
        obj.refresh_key_angle(best_x)
        best_x, best_e = _polish(obj, best_x, obj.energy(best_x), bounds, schedule.proposal_scale / 8, schedule.polish_tol)
    trace.evaluations = obj.calls + seed_calls
    trace.rejected = obj.rejected

    source, settings = space.decode(best_x, layout)
    try:
        result = evaluate(config, source, settings)
    except (ArithmeticError, ValueError) as exc:
        raise ObjectiveError(f"{type(exc).__name__}: {exc}", _describe(source, settings)) from exc
    result.parameters["objective"] = objective
    result.parameters["evaluations"] = obj.calls + seed_calls
    return result


def _source_of(result: ProtocolResult) -> SourceSettings:
    p = result.parameters
    return SourceSettings(p["mu_A"], p["ratio"], p["balance"])


def _settings_of(result: ProtocolResult) -> MeasurementSettings:
    p = result.parameters
    return MeasurementSettings(tuple(p["alice_angles"]), tuple(p["bob_angles"]))
