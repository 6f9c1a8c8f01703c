"""End-to-end protocol evaluation: network + analyzers -> S, Q, P_s, K.

The state before the polarizers depends only on the source and loss
parameters, so it is built once per parameter point. Analyzer rotations act
only inside Alice's (or Bob's) H/V pair, and the joint vacuum probability of
both channels of a pair is invariant under that rotation. No-click terms are
therefore cached per (mask, relevant angles), and all determinants an
evaluation needs go through one batched call.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .detection import (
    ClickPattern,
    DetectorParams,
    MultimodeState,
    _dark_vector,
    _mask,
    inclusion_exclusion,
    pattern_masks,
)
from .gaussian import logdet_eye_plus, rotation_symplectic
from .metrics import (
    MeasurementSettings,
    OutcomeDistribution,
    ProtocolResult,
    best_chsh,
    binary_entropy,
    chi,
    correlator,
    key_rate,
    outcome_patterns,
)
from .network import ChannelParams, NetworkSpec, prepare_direct, prepare_esr
from .source import SchmidtSpectrum, SourceParams

KEY_ANGLE_GRID = 12
KEY_ANGLE_XTOL = 1e-6


@dataclass(frozen=True)
class NetworkConfig:
    """Physical configuration of one layout at one distance.

    ``eta_d`` and ``eta_hd`` are the products of coupling and detector
    efficiency for the users and for the herald detectors.
    """

    layout: str = "esr"
    length_km: float = 0.0
    alpha_db_km: float = 0.2
    eta_d: float = 1.0
    eta_hd: float = 1.0
    p_dc: float = 0.0
    p_dch: float = 0.0
    spectrum: SchmidtSpectrum = field(default_factory=SchmidtSpectrum)

    def __post_init__(self):
        if self.layout not in ("direct", "esr"):
            raise ValueError(f"unknown layout {self.layout!r}")
        # validation of the remaining fields is delegated to the parameter types
        self.channel
        DetectorParams(self.eta_d, self.p_dc)
        DetectorParams(self.eta_hd, self.p_dch)

    @property
    def channel(self) -> ChannelParams:
        return ChannelParams(self.length_km, self.alpha_db_km)

    def at_length(self, length_km: float) -> "NetworkConfig":
        return replace(self, length_km=length_km)

    def prepare(self, source: "SourceSettings") -> tuple[MultimodeState, NetworkSpec]:
        """State before the analyzers, and the detector labeling."""
        users = DetectorParams(self.eta_d, self.p_dc)
        primary = SourceParams.from_mean_photons(source.mu_abs, self.spectrum, source.balance)
        if self.layout == "direct":
            return prepare_direct(primary, self.channel, users)
        relay = SourceParams.from_mean_photons(source.mu_relay, self.spectrum, source.balance)
        return prepare_esr(primary, relay, self.channel, users, DetectorParams(self.eta_hd, self.p_dch))


@dataclass(frozen=True)
class SourceSettings:
    """Mean photon number of the primary source, primary/relay ratio and intra-source balance.

    ``mu_abs`` is ``sinh^2 r`` of each internal process at balance 1; the relay
    source uses ``mu_abs / ratio``. The direct layout ignores ``ratio``.
    """

    mu_abs: float
    ratio: float = 1.0
    balance: float = 1.0

    def __post_init__(self):
        if not (self.mu_abs >= 0 and math.isfinite(self.mu_abs)):
            raise ValueError(f"mu_abs must be finite and >= 0, got {self.mu_abs}")
        if not (self.ratio > 0 and math.isfinite(self.ratio)):
            raise ValueError(f"ratio must be finite and > 0, got {self.ratio}")
        if not (self.balance > 0 and math.isfinite(self.balance)):
            raise ValueError(f"balance must be finite and > 0, got {self.balance}")

    @property
    def mu_relay(self) -> float:
        return self.mu_abs / self.ratio


def _rotation_pair(n: int, spec: NetworkSpec, theta_a: float, theta_b: float) -> np.ndarray:
    return rotation_symplectic(n, *spec.alice, theta_a) @ rotation_symplectic(n, *spec.bob, theta_b)


class AnalyzerStatistics:
    """Click statistics of a prepared network for arbitrary analyzer angles.

    Parameters
    ----------
    state : MultimodeState
        Network state before the polarizers.
    spec : NetworkSpec
        Channel labeling and dark counts.
    """

    def __init__(self, state: MultimodeState, spec: NetworkSpec):
        self.state = state
        self.spec = spec
        self.n = state.n_channels
        self._half = np.stack([0.5 * c.excess for c in state.components])
        self._log_dark = np.log1p(-_dark_vector(spec.dark_counts, self.n).astype(np.longdouble))
        self._amask = _mask(spec.alice)
        self._bmask = _mask(spec.bob)
        self._cache: dict = {}

    def _key(self, mask: int, theta_a: float, theta_b: float):
        ka = theta_a if (mask & self._amask) not in (0, self._amask) else None
        kb = theta_b if (mask & self._bmask) not in (0, self._bmask) else None
        return mask, ka, kb

    def _requests(self, pattern: ClickPattern, theta_a: float, theta_b: float):
        return [self._key(m, theta_a, theta_b) for m in pattern_masks(pattern)]

    def prefetch(self, keys) -> None:
        todo = sorted({k for k in keys if k not in self._cache}, key=repr)
        if not todo:
            return
        n = self.n
        rotated = {}
        mats = []
        for mask, ka, kb in todo:
            angles = (ka or 0.0, kb or 0.0)
            if angles not in rotated:
                s = _rotation_pair(n, self.spec, *angles)
                rotated[angles] = np.einsum("ji,cjk,kl->cil", s, self._half, s)
            sel = np.array([(mask >> c) & 1 for c in range(n)] * 2, dtype=float)
            mats.append(rotated[angles] * np.outer(sel, sel))
        logdet = logdet_eye_plus(np.stack(mats)).sum(axis=1)
        for key, ld in zip(todo, logdet):
            sel = np.array([(key[0] >> c) & 1 for c in range(n)], dtype=bool)
            self._cache[key] = -0.5 * ld + np.sum(self._log_dark[sel])

    def pattern_probability(self, pattern: ClickPattern, theta_a: float, theta_b: float) -> float:
        self.prefetch(self._requests(pattern, theta_a, theta_b))
        return inclusion_exclusion(lambda m: self._cache[self._key(m, theta_a, theta_b)], pattern)

    def prefetch_settings(self, pairs, condition: ClickPattern | None = None) -> None:
        keys = []
        for ta, tb in pairs:
            for pat in outcome_patterns(self.spec, condition):
                keys.extend(self._requests(pat, ta, tb))
        self.prefetch(keys)

    def joint(self, theta_a: float, theta_b: float, condition: ClickPattern | None = None):
        """Unnormalized ``P(a, b, condition)`` (index 0 is outcome +1) and ``P(condition)``."""
        self.prefetch_settings([(theta_a, theta_b)], condition)
        pab, pa, pb, pc = (self.pattern_probability(p, theta_a, theta_b) for p in outcome_patterns(self.spec, condition))
        return np.array([[pab, pa - pab], [pb - pab, pc - pa - pb + pab]]), pc

    def distribution(self, theta_a: float, theta_b: float, condition: ClickPattern | None = None) -> OutcomeDistribution:
        joint, pc = self.joint(theta_a, theta_b, condition)
        if pc <= 0:
            raise ZeroDivisionError("conditioning event has zero probability")
        return OutcomeDistribution(joint / pc)


def chsh_from_statistics(stats: AnalyzerStatistics, settings: MeasurementSettings, condition=None) -> float:
    xs, ys = settings.alice_angles[1:], settings.bob_angles
    pairs = [(x, y) for x in xs for y in ys]
    stats.prefetch_settings(pairs, condition)
    e = [correlator(stats.distribution(x, y, condition)) for x, y in pairs]
    return best_chsh(*e)


def key_error(stats: AnalyzerStatistics, theta_x0: float, theta_y1: float, condition=None) -> float:
    """QBER at one key setting, after the better of the two global bit relabelings."""
    p_differ = stats.distribution(theta_x0, theta_y1, condition).p_differ
    return min(p_differ, 1.0 - p_differ)


def optimal_key_angle(stats: AnalyzerStatistics, theta_y1: float, condition=None) -> tuple[float, float]:
    """(theta_X0, Q) minimizing the QBER: coarse grid over one period, then golden-section refinement."""
    grid = theta_y1 + np.pi * np.arange(KEY_ANGLE_GRID) / KEY_ANGLE_GRID
    stats.prefetch_settings([(t, theta_y1) for t in grid], condition)
    vals = [key_error(stats, t, theta_y1, condition) for t in grid]
    k = int(np.argmin(vals))
    step = np.pi / KEY_ANGLE_GRID
    lo, mid, hi = grid[k] - step, grid[k], grid[k] + step
    f = lambda t: key_error(stats, t, theta_y1, condition)  # noqa: E731
    if not (f(mid) < f(lo) and f(mid) < f(hi)):
        return float(mid), float(vals[k])
    res = minimize_scalar(f, bracket=(lo, mid, hi), method="golden", tol=KEY_ANGLE_XTOL)
    if res.fun <= vals[k]:
        return float(res.x), float(res.fun)
    return float(mid), float(vals[k])


def evaluate(
    config: NetworkConfig,
    source: SourceSettings,
    settings: MeasurementSettings | None = None,
    key_angle: float | Sequence[float] | None = None,
    both_heralds: bool = False,
) -> ProtocolResult:
    """S, Q, P_s and K of one configuration.

    Parameters
    ----------
    key_angle : float or sequence of float, optional
        Alice's key setting theta_X0. A sequence is a candidate list and the
        candidate with the lowest QBER is kept. When omitted the angle is
        chosen by a full search against Bob's Y1 setting.
    both_heralds : bool
        ESR only. By default the statistics of the first herald pattern are
        used and P_s is twice its probability. With ``both_heralds`` each
        pattern is evaluated on its own (with its own best relabeling) and
        S, Q are averaged with the pattern probabilities as weights.
    """
    settings = settings or MeasurementSettings()
    state, spec = config.prepare(source)
    stats = AnalyzerStatistics(state, spec)
    theta_y1 = settings.bob_angles[0]
    heralds = spec.heralds if spec.layout == "esr" else (None,)
    if spec.layout == "esr" and not both_heralds:
        heralds = heralds[:1]
    rows = []
    for cond in heralds:
        p = 1.0 if cond is None else stats.pattern_probability(cond, 0.0, 0.0)
        s = chsh_from_statistics(stats, settings, cond)
        if key_angle is None:
            theta_x0, q = optimal_key_angle(stats, theta_y1, cond)
        else:
            cands = np.atleast_1d(np.asarray(key_angle, dtype=float))
            stats.prefetch_settings([(t, theta_y1) for t in cands], cond)
            errs = [key_error(stats, t, theta_y1, cond) for t in cands]
            k = int(np.argmin(errs))
            theta_x0, q = float(cands[k]), errs[k]
        rows.append((p, s, q, theta_x0))
    if len(rows) == 1:
        p, S, Q, theta_x0 = rows[0]
        P_s = p if spec.layout == "direct" else 2.0 * p
    else:
        w = np.array([r[0] for r in rows])
        P_s = float(w.sum())
        S = float(np.dot(w, [r[1] for r in rows]) / P_s)
        Q = float(np.dot(w, [r[2] for r in rows]) / P_s)
        theta_x0 = rows[0][3]
    K = key_rate(min(S, 2 * math.sqrt(2)), Q, P_s)
    params = {
        "mu_A": source.mu_abs,
        "mu_B": source.mu_relay if spec.layout == "esr" else source.mu_abs,
        "ratio": source.ratio,
        "balance": source.balance,
        "alice_angles": (theta_x0, *settings.alice_angles[1:]),
        "bob_angles": tuple(settings.bob_angles),
    }
    return ProtocolResult(S=float(S), Q=float(Q), P_s=float(P_s), K=float(K), parameters=params)


def chsh_only(config: NetworkConfig, source: SourceSettings, settings: MeasurementSettings | None = None) -> float:
    """S alone (first herald pattern for the ESR layout); skips the key-angle search."""
    settings = settings or MeasurementSettings()
    state, spec = config.prepare(source)
    stats = AnalyzerStatistics(state, spec)
    cond = spec.heralds[0] if spec.layout == "esr" else None
    return chsh_from_statistics(stats, settings, cond)


def secret_fraction(S: float, Q: float) -> float:
    """``1 - h(Q) - chi(S)`` before the success-probability factor (may be negative)."""
    return 1.0 - binary_entropy(Q) - chi(min(S, 2 * math.sqrt(2)))
