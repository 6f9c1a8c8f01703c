"""Protocol quantities: outcome statistics, CHSH, QBER and the Devetak-Winter rate.

Outcomes use the deterministic assignment rule: a party outputs +1 only when
its "+" detector clicks alone; no-click and double-click events output -1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .detection import ClickPattern, ClickStatistics, NumericalConsistencyError

CIRELSON = 2.0 * math.sqrt(2.0)
_EMPTY = ClickPattern()


@dataclass(frozen=True)
class OutcomeDistribution:
    """``p[a][b]`` with index 0 for outcome +1 and index 1 for outcome -1."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(2, 2)
        if np.any(p < -1e-9) or abs(p.sum() - 1.0) > 1e-9:
            raise NumericalConsistencyError(f"invalid outcome distribution {p.tolist()}")
        object.__setattr__(self, "p", np.clip(p, 0.0, 1.0))

    @property
    def p_equal(self) -> float:
        return float(self.p[0, 0] + self.p[1, 1])

    @property
    def p_differ(self) -> float:
        return float(self.p[0, 1] + self.p[1, 0])


@dataclass(frozen=True)
class MeasurementSettings:
    """Polarizer angles (radians): Alice (X0, X1, X2), Bob (Y1, Y2). X0 is the key setting."""

    alice_angles: tuple = (0.0, 0.0, math.pi / 6)
    bob_angles: tuple = (math.pi / 2, 2 * math.pi / 3)

    def __post_init__(self):
        if len(self.alice_angles) != 3 or len(self.bob_angles) != 2:
            raise ValueError("need three Alice angles and two Bob angles")
        if not all(math.isfinite(a) for a in (*self.alice_angles, *self.bob_angles)):
            raise ValueError("angles must be finite")

    def with_key_angle(self, theta_x0: float) -> "MeasurementSettings":
        return MeasurementSettings((theta_x0, *self.alice_angles[1:]), self.bob_angles)


@dataclass
class ProtocolResult:
    S: float
    Q: float
    P_s: float
    K: float
    parameters: dict = field(default_factory=dict)


def _merge(*patterns: ClickPattern) -> ClickPattern:
    click = frozenset().union(*(p.click for p in patterns))
    noclick = frozenset().union(*(p.noclick for p in patterns))
    return ClickPattern(click, noclick)


def outcome_patterns(spec, condition: ClickPattern | None = None):
    """The four patterns behind one outcome distribution: (a+b+, a+, b+, condition)."""
    cond = condition or _EMPTY
    a_plus = ClickPattern(frozenset({spec.alice[0]}), frozenset({spec.alice[1]}))
    b_plus = ClickPattern(frozenset({spec.bob[0]}), frozenset({spec.bob[1]}))
    return _merge(cond, a_plus, b_plus), _merge(cond, a_plus), _merge(cond, b_plus), cond


def joint_outcome_probabilities(stats: ClickStatistics, spec, condition: ClickPattern | None = None):
    """Unnormalized ``P(a, b, condition)`` as a 2x2 array, plus ``P(condition)``."""
    pats = outcome_patterns(spec, condition)
    stats.prefetch([m for p in pats for m in stats.pattern_masks(p)])
    pab, pa, pb, pc = (stats.pattern_probability(p) for p in pats)
    joint = np.array([[pab, pa - pab], [pb - pab, pc - pa - pb + pab]])
    return joint, pc


def outcome_distribution(state, spec, condition: ClickPattern | None = None) -> OutcomeDistribution:
    """Outcome distribution at the analyzer angles already applied to ``state``.

    With a ``condition`` (a herald pattern) the joint probabilities are divided
    by the probability of that pattern.
    """
    stats = ClickStatistics(state, spec.dark_counts)
    joint, pc = joint_outcome_probabilities(stats, spec, condition)
    if pc <= 0:
        raise ZeroDivisionError("conditioning event has zero probability")
    return OutcomeDistribution(joint / pc)


def correlator(dist: OutcomeDistribution) -> float:
    return dist.p_equal - dist.p_differ


def chsh_value(e11: float, e12: float, e21: float, e22: float) -> float:
    return e11 + e12 + e21 - e22


def best_chsh(e11: float, e12: float, e21: float, e22: float) -> float:
    """Largest CHSH expression over relabelings of settings and outcomes.

    Moving the minus sign to another correlator or flipping every sign are
    relabelings available to the parties, so the protocol uses the best one.
    """
    e = np.array([e11, e12, e21, e22])
    return float(max(abs(e.sum() - 2 * x) for x in e))


def binary_entropy(x: float) -> float:
    if not -1e-12 <= x <= 1 + 1e-12:
        raise ValueError(f"binary entropy needs x in [0, 1], got {x}")
    x = min(max(x, 0.0), 1.0)
    if x in (0.0, 1.0):
        return 0.0
    return float(-x * math.log2(x) - (1 - x) * math.log2(1 - x))


def chi(S: float) -> float:
    """Eve's Holevo information bound as a function of the CHSH value (clamped to S >= 2)."""
    if S > CIRELSON + 1e-9:
        raise ValueError(f"S = {S} exceeds the Cirelson bound")
    S = min(max(S, 2.0), CIRELSON)
    return binary_entropy((1.0 + math.sqrt(max((S / 2.0) ** 2 - 1.0, 0.0))) / 2.0)


def key_rate(S: float, Q: float, P_s: float = 1.0) -> float:
    return P_s * max(0.0, 1.0 - binary_entropy(Q) - chi(S))
