"""Distance thresholds: the largest L at which the optimized S exceeds 2 or K is positive."""

from __future__ import annotations

from dataclasses import dataclass, field

from .annealing import AnnealingSchedule, OptimizationSpace, optimize
from .metrics import MeasurementSettings, ProtocolResult
from .protocol import NetworkConfig, SourceSettings

# S within this of 2 is the trivial local value reached by deterministic assignment
S_MARGIN = 1e-9


@dataclass
class CutoffSearch:
    """Bisection record: every probed length with its optimized result."""

    probes: dict = field(default_factory=dict)
    cutoff: float = float("nan")

    def feasible(self, objective: str) -> list:
        return sorted(L for L, r in self.probes.items() if _ok(r, objective))


def _ok(result: ProtocolResult, objective: str) -> bool:
    return result.S > 2.0 + S_MARGIN if objective == "S" else result.K > 0.0


def _start_of(result: ProtocolResult) -> tuple[SourceSettings, MeasurementSettings]:
    p = result.parameters
    return (
        SourceSettings(p["mu_A"], p["ratio"], p["balance"]),
        MeasurementSettings(tuple(p["alice_angles"]), tuple(p["bob_angles"])),
    )


def cutoff_length(
    config: NetworkConfig,
    objective: str = "S",
    lo: float = 0.0,
    hi: float = 150.0,
    tol: float = 0.5,
    step: float = 10.0,
    schedule: AnnealingSchedule | None = None,
    space: OptimizationSpace | None = None,
    search: CutoffSearch | None = None,
) -> float:
    """Largest length (to within ``tol``) where the optimized objective is still useful.

    The figure of merit is S > 2 (beyond ``S_MARGIN``) for ``objective="S"`` and K > 0 for
    ``objective="K"``. Feasibility is assumed monotone in L. The search
    marches up from ``lo`` in increments of ``step`` and then bisects the
    last interval; every probe is warm-started from the optimum at the
    longest feasible length so far, because the optimal source parameters
    drift with L and the useful region can be too narrow for a cold search.
    Returns ``lo`` when even ``lo`` fails and ``hi`` when ``hi`` passes.
    """
    schedule = schedule or AnnealingSchedule.quick()
    search = search if search is not None else CutoffSearch()
    warm = None

    def probe(length: float) -> bool:
        nonlocal warm
        res = optimize(objective, config.at_length(length), space, schedule, start=warm)
        search.probes[length] = res
        ok = _ok(res, objective)
        if ok:
            warm = _start_of(res)
        return ok

    if not probe(lo):
        search.cutoff = lo
        return lo
    while True:
        nxt = min(lo + step, hi)
        if not probe(nxt):
            hi = nxt
            break
        lo = nxt
        if lo >= hi:
            search.cutoff = hi
            return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if probe(mid):
            lo = mid
        else:
            hi = mid
    search.cutoff = 0.5 * (lo + hi)
    return search.cutoff
