"""On-off photodetection statistics for multimode Gaussian states.

A physical detector cannot tell Schmidt modes apart, so it stays silent only
if every Schmidt component is in vacuum on its channel and no dark count
fires. Click patterns follow by inclusion-exclusion over the click set.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .gaussian import GaussianState, logdet_eye_plus

NEGATIVE_TOL = 1e-10
NORMALIZATION_TOL = 1e-9


class NumericalConsistencyError(ArithmeticError):
    """A probability came out outside [0, 1] beyond rounding tolerance."""


@dataclass(frozen=True)
class DetectorParams:
    """On-off detector. ``efficiency`` is applied upstream as a loss channel."""

    efficiency: float = 1.0
    dark_count_prob: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"detector efficiency must lie in [0, 1], got {self.efficiency}")
        if not 0.0 <= self.dark_count_prob < 1.0:
            raise ValueError(f"dark count probability must lie in [0, 1), got {self.dark_count_prob}")


@dataclass(frozen=True)
class MultimodeState:
    """Tensor product of Gaussian states, one per Schmidt mode, over shared channels."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("need at least one Schmidt component")
        n = comps[0].n_channels
        if any(c.n_channels != n for c in comps):
            raise ValueError("all Schmidt components must share the channel count")
        object.__setattr__(self, "components", comps)

    @property
    def n_channels(self) -> int:
        return self.components[0].n_channels

    def map(self, fn, *args, **kwargs) -> "MultimodeState":
        """Apply a channel map ``fn(component, *args)`` to every Schmidt component."""
        return MultimodeState(tuple(fn(c, *args, **kwargs) for c in self.components))


@dataclass(frozen=True)
class ClickPattern:
    click: frozenset = frozenset()
    noclick: frozenset = frozenset()

    def __post_init__(self):
        click, noclick = frozenset(self.click), frozenset(self.noclick)
        if click & noclick:
            raise ValueError(f"channels {sorted(click & noclick)} both click and stay silent")
        object.__setattr__(self, "click", click)
        object.__setattr__(self, "noclick", noclick)


def _as_multimode(state) -> MultimodeState:
    if isinstance(state, GaussianState):
        return MultimodeState((state,))
    return state


def _dark_vector(nu, n: int) -> np.ndarray:
    nu = np.broadcast_to(np.asarray(nu, dtype=float), (n,))
    if np.any(nu < 0) or np.any(nu >= 1):
        raise ValueError("dark count probabilities must lie in [0, 1)")
    return nu


def _mask(channels: Iterable[int]) -> int:
    m = 0
    for c in channels:
        m |= 1 << c
    return m


class ClickStatistics:
    """Memoized no-click log-probabilities of one multimode state.

    Parameters
    ----------
    state : MultimodeState or GaussianState
    nu : float or sequence of float
        Dark-count probability, scalar or one entry per channel.

    Subsets are keyed by bitmask; each subset's determinant is computed once
    per instance. ``prefetch`` evaluates many subsets in one batched call.
    """

    def __init__(self, state, nu=0.0):
        self.state = _as_multimode(state)
        n = self.state.n_channels
        self.nu = _dark_vector(nu, n)
        self._log_dark = np.log1p(-self.nu.astype(np.longdouble))
        self._half_excess = np.stack([0.5 * c.excess for c in self.state.components])
        self._cache: dict[int, np.longdouble] = {0: np.longdouble(0)}

    @property
    def n_channels(self) -> int:
        return self.state.n_channels

    def _quad_mask(self, mask: int) -> np.ndarray:
        n = self.n_channels
        sel = np.array([(mask >> c) & 1 for c in range(n)], dtype=float)
        return np.concatenate([sel, sel])

    def prefetch(self, masks: Iterable[int]) -> None:
        todo = sorted({m for m in masks if m not in self._cache})
        if not todo:
            return
        n = self.n_channels
        if any(m >> n for m in todo):
            raise IndexError("channel subset exceeds the state's channel count")
        sel = np.stack([self._quad_mask(m) for m in todo])
        window = sel[:, :, None] * sel[:, None, :]
        # (subset, component, 2n, 2n); channels outside the subset have zero excess
        mats = window[:, None, :, :] * self._half_excess[None, :, :, :]
        logdet = logdet_eye_plus(mats).sum(axis=1)
        for m, ld, s in zip(todo, logdet, sel[:, :n]):
            self._cache[m] = -0.5 * ld + np.sum(self._log_dark[s.astype(bool)])

    def log_no_click(self, mask: int) -> np.longdouble:
        if mask not in self._cache:
            self.prefetch([mask])
        return self._cache[mask]

    def no_click(self, channels: Iterable[int]) -> float:
        return float(np.exp(self.log_no_click(_mask(channels))))

    def pattern_masks(self, pattern: ClickPattern) -> list[int]:
        return pattern_masks(pattern)

    def pattern_probability(self, pattern: ClickPattern) -> float:
        for c in pattern.click | pattern.noclick:
            if not 0 <= c < self.n_channels:
                raise IndexError(f"channel {c} out of range")
        self.prefetch(self.pattern_masks(pattern))
        return inclusion_exclusion(self._cache.__getitem__, pattern)


def pattern_masks(pattern: ClickPattern) -> list[int]:
    """Bitmasks of every no-click event needed for ``pattern``: noclick set plus each click subset."""
    base = _mask(pattern.noclick)
    click = sorted(pattern.click)
    return [base | _mask(sub) for k in range(len(click) + 1) for sub in itertools.combinations(click, k)]


def inclusion_exclusion(log_no_click, pattern: ClickPattern) -> float:
    """Probability of ``pattern`` from no-click log-probabilities, ``log_no_click(mask)``.

    The alternating sum is written as ``P0(N) * sum (-1)^|s| expm1(f(s u N) - f(N))``
    so that the O(1) leading terms cancel exactly.
    """
    base = _mask(pattern.noclick)
    click = sorted(pattern.click)
    f0 = log_no_click(base)
    if not click:
        return float(np.exp(f0))
    total = np.longdouble(0)
    for k in range(len(click) + 1):
        sign = -1 if k % 2 else 1
        for sub in itertools.combinations(click, k):
            total += sign * np.expm1(log_no_click(base | _mask(sub)) - f0)
    return _clamp(float(np.exp(f0) * total), pattern)


def _clamp(p: float, what) -> float:
    if p < -NEGATIVE_TOL or p > 1 + NEGATIVE_TOL or not np.isfinite(p):
        raise NumericalConsistencyError(f"probability {p!r} for {what} is outside [0, 1]")
    return min(max(p, 0.0), 1.0)


def no_click_probability(state, channels: Sequence[int], nu=0.0) -> float:
    """``prod_i (1 - nu_i) * prod_components P_vac(component, channels)``."""
    stats = ClickStatistics(state, nu)
    channels = list(channels)
    for c in channels:
        if not 0 <= c < stats.n_channels:
            raise IndexError(f"channel {c} out of range")
    return stats.no_click(channels)


def pattern_probability(state, pattern: ClickPattern, nu=0.0) -> float:
    return ClickStatistics(state, nu).pattern_probability(pattern)


def exhaustive_patterns(detectors: Sequence[int]) -> list[ClickPattern]:
    detectors = list(detectors)
    out = []
    for bits in itertools.product((0, 1), repeat=len(detectors)):
        click = frozenset(d for d, b in zip(detectors, bits) if b)
        out.append(ClickPattern(click, frozenset(detectors) - click))
    return out


def all_patterns_total(state, detectors: Sequence[int], nu=0.0) -> float:
    """Sum over every click/no-click assignment of ``detectors``; equals 1 for a valid POVM."""
    stats = ClickStatistics(state, nu)
    total = sum(stats.pattern_probability(p) for p in exhaustive_patterns(detectors))
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NumericalConsistencyError(f"click patterns sum to {total!r}, not 1")
    return total
