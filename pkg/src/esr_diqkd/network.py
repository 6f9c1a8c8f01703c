"""Optical layouts: direct transmission and the entanglement-swapping relay (ESR).

Channel numbering equals detector numbering minus one:

=======  =========================  ===================================
channel  direct layout              ESR layout
=======  =========================  ===================================
0 (D1)   Alice H                    Alice H
1 (D2)   Alice V                    Alice V
2 (D3)   Bob H                      Bob H
3 (D4)   Bob V                      Bob V
4 (D5)                              relay port Y, H (relay source in)
5 (D6)                              relay port X, V (source-A fibre in)
6 (D7)                              relay port X, H (source-A fibre in)
7 (D8)                              relay port Y, V (relay source in)
=======  =========================  ===================================

In the ESR layout the 50:50 beamsplitters mix channel 6 with 4 (H) and 5 with
7 (V). A relay success is D6 & D7 clicking with D5 & D8 silent, or the mirror
image: two orthogonally polarized photons leaving the same output port.
Polarizers are rotations by theta between a party's H and V channels, i.e.
beamsplitters of transmittivity cos^2(theta) carrying the sign of cos(theta).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detection import ClickPattern, DetectorParams, MultimodeState
from .gaussian import apply_beamsplitter, apply_loss, apply_rotation
from .source import SourceParams, build_polarization_source, vacuum_multimode

ALICE = (0, 1)
BOB = (2, 3)
RELAY_IN = (6, 5)
RELAY_LOCAL = (4, 7)
HERALD_PATTERNS = (
    ClickPattern(frozenset({5, 6}), frozenset({4, 7})),
    ClickPattern(frozenset({4, 7}), frozenset({5, 6})),
)


@dataclass(frozen=True)
class ChannelParams:
    length_km: float = 0.0
    attenuation_db_per_km: float = 0.2
    coupling: float = 1.0

    def __post_init__(self):
        if self.length_km < 0:
            raise ValueError(f"fibre length must be >= 0, got {self.length_km}")
        if self.attenuation_db_per_km < 0:
            raise ValueError("attenuation must be >= 0")
        if not 0.0 <= self.coupling <= 1.0:
            raise ValueError(f"coupling efficiency must lie in [0, 1], got {self.coupling}")

    @property
    def transmission(self) -> float:
        return transmission_efficiency(self.length_km, self.attenuation_db_per_km)


@dataclass(frozen=True)
class NetworkSpec:
    layout: str
    n_channels: int
    dark_counts: tuple
    alice: tuple = ALICE
    bob: tuple = BOB
    heralds: tuple = ()

    def __post_init__(self):
        if self.layout not in ("direct", "esr"):
            raise ValueError(f"unknown layout {self.layout!r}")
        expected = 4 if self.layout == "direct" else 8
        if self.n_channels != expected or len(self.dark_counts) != expected:
            raise ValueError(f"{self.layout} layout has {expected} channels")
        if self.layout == "esr" and len(self.heralds) != 2:
            raise ValueError("ESR layout needs two herald patterns")

    @property
    def herald_detectors(self) -> tuple:
        return tuple(sorted(set().union(*(p.click | p.noclick for p in self.heralds)))) if self.heralds else ()


def transmission_efficiency(length_km: float, alpha_db_per_km: float = 0.2) -> float:
    if length_km < 0:
        raise ValueError("fibre length must be >= 0")
    return 10.0 ** (-alpha_db_per_km * length_km / 10.0)


def polarizer_transmittivity(theta: float) -> float:
    return float(np.cos(theta) ** 2)


def apply_analyzers(state: MultimodeState, spec: NetworkSpec, theta_a: float, theta_b: float) -> MultimodeState:
    """Polarizers at Alice and Bob, as rotations between each party's H and V channels.

    For theta in [0, pi/2] this is the beamsplitter of transmittivity
    cos^2(theta); beyond that the sign of cos(theta) distinguishes e.g.
    2pi/3 from pi/3.
    """
    state = state.map(apply_rotation, spec.alice[0], spec.alice[1], theta_a)
    return state.map(apply_rotation, spec.bob[0], spec.bob[1], theta_b)


def _lossy(state: MultimodeState, channels, eta: float) -> MultimodeState:
    for c in channels:
        state = state.map(apply_loss, c, eta)
    return state


def prepare_direct(source: SourceParams, channel: ChannelParams, det: DetectorParams):
    """Direct layout up to (not including) the polarizers."""
    eta_d = channel.coupling * det.efficiency
    state = vacuum_multimode(4, source.spectrum)
    state = build_polarization_source(source, state, (ALICE[0], ALICE[1], BOB[0], BOB[1]))
    state = _lossy(state, ALICE, eta_d)
    state = _lossy(state, BOB, eta_d * channel.transmission)
    spec = NetworkSpec("direct", 4, (det.dark_count_prob,) * 4)
    return state, spec


def prepare_esr(
    source_a: SourceParams,
    source_b: SourceParams,
    channel: ChannelParams,
    det_users: DetectorParams,
    det_herald: DetectorParams,
):
    """ESR layout up to (not including) the polarizers."""
    if source_a.spectrum != source_b.spectrum:
        raise ValueError("both sources must share one Schmidt spectrum")
    eta_d = channel.coupling * det_users.efficiency
    eta_hd = channel.coupling * det_herald.efficiency
    state = vacuum_multimode(8, source_a.spectrum)
    state = build_polarization_source(source_a, state, (ALICE[0], ALICE[1], RELAY_IN[0], RELAY_IN[1]))
    state = build_polarization_source(source_b, state, (RELAY_LOCAL[0], RELAY_LOCAL[1], BOB[0], BOB[1]))
    state = _lossy(state, ALICE, eta_d)
    state = _lossy(state, RELAY_IN, channel.transmission)
    state = state.map(apply_beamsplitter, RELAY_IN[0], RELAY_LOCAL[0], 0.5)
    state = state.map(apply_beamsplitter, RELAY_IN[1], RELAY_LOCAL[1], 0.5)
    state = _lossy(state, RELAY_IN + RELAY_LOCAL, eta_hd)
    state = _lossy(state, BOB, eta_d)
    nu_u, nu_h = det_users.dark_count_prob, det_herald.dark_count_prob
    spec = NetworkSpec("esr", 8, (nu_u,) * 4 + (nu_h,) * 4, heralds=HERALD_PATTERNS)
    return state, spec


def build_direct_network(source, channel, det, theta_a: float, theta_b: float):
    state, spec = prepare_direct(source, channel, det)
    return apply_analyzers(state, spec, theta_a, theta_b), spec


def build_esr_network(source_a, source_b, channel, det_users, det_herald, theta_a: float, theta_b: float):
    state, spec = prepare_esr(source_a, source_b, channel, det_users, det_herald)
    return apply_analyzers(state, spec, theta_a, theta_b), spec
