import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from esr_diqkd.crosscheck import direct_difference, esr_difference, random_esr_case
from esr_diqkd.detection import ClickPattern, DetectorParams, pattern_probability
from esr_diqkd.fock import (
    FockState,
    TruncationError,
    density,
    fock_beamsplitter,
    fock_click_probability,
    fock_loss,
    fock_rotation,
    fock_tmsv,
    fock_vacuum,
    pair_povm,
    tmsv_amplitudes,
)
from esr_diqkd.gaussian import apply_beamsplitter, apply_tmsv, vacuum_state
from esr_diqkd.network import ChannelParams
from esr_diqkd.source import SourceParams


def single_photon(n_modes: int, mode: int, n_max: int = 6) -> FockState:
    amp = np.zeros((n_max + 1,) * n_modes, dtype=complex)
    idx = [0] * n_modes
    idx[mode] = 1
    amp[tuple(idx)] = 1.0
    return FockState(amp, n_max)


def test_tmsv_examples():
    np.testing.assert_array_equal(fock_tmsv(0.0).amplitudes, fock_vacuum(2).amplitudes)
    assert abs(fock_tmsv(0.25).amplitudes[0, 0]) ** 2 == pytest.approx(0.8, abs=1e-15)


def test_norm_defect_is_geometric_tail():
    # |c_n|^2 = (1 - x) x^n with x = mu / (1 + mu): the defect above n_max is x^(n_max + 1)
    mu, n_max = 0.05, 6
    x = mu / (1 + mu)
    defect = 1.0 - float(np.sum(tmsv_amplitudes(mu, n_max) ** 2))
    assert defect == pytest.approx(x ** (n_max + 1), rel=1e-5)
    assert defect < 1e-9


def test_single_photon_splitting_and_loss():
    out = fock_beamsplitter(single_photon(2, 0), 0, 1, 0.5)
    rho = density(out)
    assert fock_click_probability(rho, 0) == pytest.approx(0.5, abs=1e-14)
    assert fock_click_probability(rho, 1) == pytest.approx(0.5, abs=1e-14)
    lossy = fock_loss(density(single_photon(1, 0)), 0, 0.3)
    assert fock_click_probability(lossy, 0) == pytest.approx(0.3, abs=1e-15)


def test_rotation_matches_gaussian_sign_convention():
    # U a0^dag U^dag = cos(theta) a0^dag + sin(theta) a1^dag
    theta = 0.4
    out = fock_rotation(single_photon(2, 0), 0, 1, theta)
    assert out.amplitudes[1, 0].real == pytest.approx(math.cos(theta))
    assert out.amplitudes[0, 1].real == pytest.approx(math.sin(theta))


def test_two_tmsv_beamsplitter_coincidence_against_gaussian():
    mu = 0.01
    fock = fock_beamsplitter(fock_tmsv(mu).tensor(fock_tmsv(mu)), 1, 2, 0.5)
    pops = np.abs(fock.amplitudes) ** 2
    fock_coinc = float(pops[:, 1:, 1:, :].sum())
    g = apply_tmsv(apply_tmsv(vacuum_state(4), 0, 1, mu), 2, 3, mu)
    g = apply_beamsplitter(g, 1, 2, 0.5)
    gauss_coinc = pattern_probability(g, ClickPattern(frozenset({1, 2})))
    assert fock_coinc == pytest.approx(gauss_coinc, abs=1e-9)


def test_vacuum_probability_against_gaussian():
    mu = 0.03
    rho = density(fock_tmsv(mu))
    assert 1 - fock_click_probability(rho, 0) == pytest.approx(1 / (1 + mu), abs=1e-10)


def test_truncation_overflow_is_flagged():
    with pytest.raises(TruncationError):
        fock_beamsplitter(fock_tmsv(1.0).tensor(fock_tmsv(1.0)), 1, 2, 0.5)


def test_povm_completeness():
    povm = pair_povm(0.7, 0.8, 1e-3, 4)
    total = povm.sum(axis=(0, 1)).reshape(25, 25)
    np.testing.assert_allclose(total, np.eye(25), atol=1e-12)


def test_direct_patterns_against_gaussian():
    src = SourceParams.from_mean_photons(0.02)
    assert direct_difference(src, ChannelParams(4.0), DetectorParams(0.85, 1e-4), (0.3, 1.9)) < 1e-8


def test_esr_patterns_against_gaussian_single_draw():
    case = random_esr_case(np.random.default_rng(7), 0.05)
    assert esr_difference(*case) < 1e-6


@given(st.floats(0.0, 0.05), st.floats(0.5, 2.0), st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi), st.floats(0.0, 30.0))
def test_direct_patterns_property(mu, balance, ta, tb, length):
    src = SourceParams.from_mean_photons(mu / max(balance, 1 / balance), balance=balance)
    assert direct_difference(src, ChannelParams(length), DetectorParams(0.9, 1e-4), (ta, tb)) < 1e-8
