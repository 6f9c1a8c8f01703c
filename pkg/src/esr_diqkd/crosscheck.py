"""Dual-route check: click-pattern tables from the Gaussian engine and from the Fock oracle."""

from __future__ import annotations

import itertools

import numpy as np

from .detection import ClickPattern, ClickStatistics, DetectorParams
from .fock import direct_patterns, esr_patterns
from .network import ChannelParams, build_direct_network, build_esr_network
from .source import SourceParams, internal_squeezing, mean_photons_per_schmidt_mode

# per-TMSV mean photon number up to which the oracle truncation is trusted
ORACLE_MU_MAX = 0.05


def tmsv_means(source: SourceParams) -> tuple:
    """Mean photon numbers of the two internal processes (single Schmidt mode)."""
    return tuple(float(mean_photons_per_schmidt_mode(r, source.spectrum)[0]) for r in internal_squeezing(source))


def gaussian_table(state, spec) -> np.ndarray:
    n = spec.n_channels
    stats = ClickStatistics(state, spec.dark_counts)
    table = np.empty((2,) * n)
    for bits in itertools.product((0, 1), repeat=n):
        click = frozenset(i for i, b in enumerate(bits) if b)
        table[bits] = stats.pattern_probability(ClickPattern(click, frozenset(range(n)) - click))
    return table


def random_esr_case(rng: np.random.Generator, mu_max: float):
    """Random ESR network whose per-TMSV mean photon numbers stay below ``mu_max``."""
    src = [SourceParams.from_mean_photons(rng.uniform(1e-3, mu_max / 1.5), balance=rng.uniform(0.8, 1.25)) for _ in range(2)]
    channel = ChannelParams(rng.uniform(0, 50))
    users = DetectorParams(rng.uniform(0.5, 1.0), rng.choice([0.0, rng.uniform(0, 1e-3)]))
    herald = DetectorParams(rng.uniform(0.2, 1.0), rng.choice([0.0, rng.uniform(0, 1e-3)]))
    angles = rng.uniform(-np.pi, np.pi, 2)
    return src, channel, users, herald, angles


def esr_difference(src, channel, users, herald, angles) -> float:
    mu_a, mu_b = tmsv_means(src[0]), tmsv_means(src[1])
    if max(mu_a + mu_b) > ORACLE_MU_MAX + 1e-12:
        raise ValueError(f"per-TMSV mean photon number above {ORACLE_MU_MAX}: {mu_a + mu_b}")
    state, spec = build_esr_network(src[0], src[1], channel, users, herald, *angles)
    gauss = gaussian_table(state, spec)
    fock = esr_patterns(
        mu_a, mu_b, *angles, channel.transmission, users.efficiency, herald.efficiency,
        users.dark_count_prob, herald.dark_count_prob,
    )
    return float(np.max(np.abs(gauss - fock)))


def direct_difference(source, channel, det, angles) -> float:
    state, spec = build_direct_network(source, channel, det, *angles)
    gauss = gaussian_table(state, spec)
    fock = direct_patterns(tmsv_means(source), *angles, det.efficiency, det.efficiency * channel.transmission, det.dark_count_prob)
    return float(np.max(np.abs(gauss - fock)))
