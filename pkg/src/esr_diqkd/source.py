"""Pulsed type-II SPDC polarization source.

The joint spectral amplitude factorizes into Schmidt modes; in that basis the
emitted state is a product of two-mode squeezed vacua with effective squeezing
``r * sqrt(lambda_l)``. Detectors here are spectrally flat, so only the
eigenvalues ``lambda_l`` matter downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .detection import MultimodeState
from .gaussian import apply_tmsv, is_vacuum, vacuum_state

R_MAX = 5.0
# below this squeezing the balance split uses the quadratic expansion of log cosh
SMALL_R = 1e-6


@dataclass(frozen=True)
class SchmidtSpectrum:
    """Schmidt eigenvalues, normalized and sorted in descending order."""

    eigenvalues: tuple = (1.0,)

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float).ravel()
        if lam.size == 0 or np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ValueError(f"invalid Schmidt eigenvalues {self.eigenvalues!r}")
        if abs(lam.sum() - 1.0) > 1e-9:
            raise ValueError(f"Schmidt eigenvalues must sum to 1, got {lam.sum()!r}")
        lam = np.sort(lam)[::-1]
        object.__setattr__(self, "eigenvalues", tuple(float(x) for x in lam))

    @classmethod
    def two_mode(cls, leading: float) -> "SchmidtSpectrum":
        """Spectrum ``(lambda, 1 - lambda)``; collapses to a single mode at lambda = 1."""
        if leading >= 1.0:
            return cls((1.0,))
        return cls((leading, 1.0 - leading))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.eigenvalues)

    @property
    def schmidt_number(self) -> float:
        return 1.0 / float(np.sum(self.array**2))


@dataclass(frozen=True)
class SourceParams:
    """Dual-SPDC source.

    ``r`` is the squeezing of each internal process at ``balance = 1``.
    ``balance`` sets the ratio r1/r2 of the two processes while holding the
    total pair-generation probability of the source fixed.
    """

    r: float = 0.0
    spectrum: SchmidtSpectrum = field(default_factory=SchmidtSpectrum)
    balance: float = 1.0

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"squeezing must be >= 0, got {self.r}")
        if not self.balance > 0:
            raise ValueError(f"balance must be > 0, got {self.balance}")

    @classmethod
    def from_mean_photons(cls, mu: float, spectrum: SchmidtSpectrum | None = None, balance: float = 1.0):
        """Source whose internal processes have ``sinh^2(r) = mu`` at balance 1."""
        return cls(float(np.arcsinh(np.sqrt(mu))), spectrum or SchmidtSpectrum(), balance)


@dataclass(frozen=True)
class JsaGrid:
    amplitudes: np.ndarray
    spacing: float = 1.0

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.ndim != 2 or min(amp.shape) < 2:
            raise ValueError("JSA grid must be a matrix with at least 2 samples per axis")
        if not np.all(np.isfinite(amp)):
            raise ValueError("JSA grid has non-finite entries")
        object.__setattr__(self, "amplitudes", amp)


def load_jsa(path) -> JsaGrid:
    """Read a JSA grid: one row per signal frequency, whitespace-separated ``re im`` pairs."""
    data = np.loadtxt(Path(path), ndmin=2)
    if data.shape[1] % 2:
        raise ValueError(f"{path}: expected an even number of columns (re/im pairs)")
    return JsaGrid(data[:, 0::2] + 1j * data[:, 1::2])


def schmidt_from_jsa(jsa: JsaGrid, rtol: float = 1e-12) -> SchmidtSpectrum:
    """Schmidt eigenvalues of a sampled joint spectral amplitude via SVD.

    Singular values below ``rtol`` times the largest are discarded.
    """
    sv = np.linalg.svd(jsa.amplitudes, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        raise ValueError("JSA grid is identically zero")
    sv = sv[sv > rtol * sv[0]]
    lam = sv**2 / np.sum(sv**2)
    return SchmidtSpectrum(tuple(lam))


def pair_rate(r: float, spectrum: SchmidtSpectrum) -> float:
    """Probability that one SPDC process emits at least one pair: ``1 - prod cosh^-2(r sqrt(lambda))``."""
    eff = r * np.sqrt(spectrum.array)
    # 1 - prod(sech^2) = -expm1(sum(log sech^2)), keeps precision for small r
    return float(-np.expm1(-2.0 * np.sum(np.log(np.cosh(eff)))))


def r_from_pair_rate(p: float, spectrum: SchmidtSpectrum) -> float:
    if not 0.0 <= p < 1.0:
        raise ValueError(f"pair-generation probability must lie in [0, 1), got {p}")
    if p == 0.0:
        return 0.0
    if p > pair_rate(R_MAX, spectrum):
        raise ValueError(f"pair rate {p} needs squeezing beyond r = {R_MAX}")
    return float(brentq(lambda r: pair_rate(r, spectrum) - p, 0.0, R_MAX, xtol=1e-15, rtol=1e-15))


def mean_photons_per_schmidt_mode(r: float, spectrum: SchmidtSpectrum) -> np.ndarray:
    if r < 0:
        raise ValueError("squeezing must be >= 0")
    return np.sinh(r * np.sqrt(spectrum.array)) ** 2


def internal_squeezing(params: SourceParams) -> tuple[float, float]:
    """(r1, r2) of the two internal processes: r1/r2 = balance at the balanced total pair rate."""
    if params.balance == 1.0 or params.r == 0.0:
        return params.r, params.r
    lam = np.sqrt(params.spectrum.array)
    rb = np.sqrt(params.balance)
    if params.r < SMALL_R:
        # log cosh x = x^2 / 2 to relative O(x^2): r1^2 + r2^2 = 2 r^2
        s = params.r * math.sqrt(2.0 / (params.balance + 1.0 / params.balance))
        return s * rb, s / rb
    target = 2.0 * np.sum(np.log(np.cosh(params.r * lam)))

    def excess_log(s):
        return np.sum(np.log(np.cosh(s * rb * lam))) + np.sum(np.log(np.cosh(s / rb * lam))) - target

    hi = params.r * max(rb, 1.0 / rb)
    s = brentq(excess_log, 0.0, hi, xtol=1e-15, rtol=1e-14)
    return s * rb, s / rb


def build_polarization_source(params: SourceParams, state: MultimodeState, channels: Sequence[int]) -> MultimodeState:
    """Load the source onto channels ``(aH, aV, bH, bV)``.

    One TMSV couples aH with bV, the other aV with bH, in every Schmidt
    component. ``state`` must have one component per Schmidt eigenvalue.
    """
    a_h, a_v, b_h, b_v = channels
    lam = params.spectrum.array
    if len(state.components) != lam.size:
        raise ValueError(f"state has {len(state.components)} components, spectrum has {lam.size}")
    for comp in state.components:
        if not is_vacuum(comp, channels):
            raise ValueError(f"source channels {tuple(channels)} are not in vacuum")
    r1, r2 = internal_squeezing(params)
    mu1 = mean_photons_per_schmidt_mode(r1, params.spectrum)
    mu2 = mean_photons_per_schmidt_mode(r2, params.spectrum)
    comps = []
    for comp, m1, m2 in zip(state.components, mu1, mu2):
        comp = apply_tmsv(comp, a_h, b_v, m1)
        comp = apply_tmsv(comp, a_v, b_h, m2)
        comps.append(comp)
    return MultimodeState(tuple(comps))


def vacuum_multimode(n_channels: int, spectrum: SchmidtSpectrum) -> MultimodeState:
    return MultimodeState(tuple(vacuum_state(n_channels) for _ in spectrum.eigenvalues))
