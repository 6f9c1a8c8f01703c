import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from esr_diqkd.detection import ClickPattern, pattern_probability
from esr_diqkd.gaussian import apply_tmsv, reduce, vacuum_state
from esr_diqkd.source import (
    JsaGrid,
    SchmidtSpectrum,
    SourceParams,
    build_polarization_source,
    internal_squeezing,
    load_jsa,
    mean_photons_per_schmidt_mode,
    pair_rate,
    r_from_pair_rate,
    schmidt_from_jsa,
    vacuum_multimode,
)

spectra = st.lists(st.floats(0.01, 1.0), min_size=1, max_size=4).map(lambda v: SchmidtSpectrum(tuple(np.array(v) / sum(v))))


def test_schmidt_spectrum_validation():
    assert SchmidtSpectrum((0.2, 0.8)).eigenvalues == (0.8, 0.2)
    assert SchmidtSpectrum.two_mode(1.0).eigenvalues == (1.0,)
    with pytest.raises(ValueError):
        SchmidtSpectrum((0.5, 0.6))
    with pytest.raises(ValueError):
        SchmidtSpectrum(())


def test_jsa_examples():
    x = np.linspace(-1, 1, 32)
    separable = JsaGrid(np.outer(np.exp(-x**2), np.cos(x)))
    assert schmidt_from_jsa(separable).eigenvalues == pytest.approx((1.0,), abs=1e-12)
    u, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(16, 16)))
    v, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(16, 16)))
    rank2 = JsaGrid(2 * np.outer(u[:, 0], v[:, 0]) + np.outer(u[:, 1], v[:, 1]))
    assert schmidt_from_jsa(rank2).eigenvalues == pytest.approx((0.8, 0.2), abs=1e-12)


def test_correlated_gaussian_jsa_against_mehler():
    # exp(-(x+y)^2 / 2s^2 - (x-y)^2 / 2t^2) has lambda_n = (1-q) q^n, q = ((t-s)/(t+s))^2;
    # t = 2s gives Schmidt number (t^2 + s^2) / 2ts = 1.25 and lambda_1 = 8/9
    s, t = 1.0, 2.0
    x = np.linspace(-12, 12, 256)
    xs, ys = np.meshgrid(x, x, indexing="ij")
    jsa = JsaGrid(np.exp(-((xs + ys) ** 2) / (2 * s**2) - (xs - ys) ** 2 / (2 * t**2)))
    spec = schmidt_from_jsa(jsa)
    assert spec.eigenvalues[0] == pytest.approx(8 / 9, abs=1e-3)
    assert spec.schmidt_number == pytest.approx(1.25, abs=1e-3)


def test_load_jsa(tmp_path):
    path = tmp_path / "jsa.txt"
    path.write_text("1 0 0 0\n0 0 0.5 0\n")
    spec = schmidt_from_jsa(load_jsa(path))
    assert spec.eigenvalues == pytest.approx((0.8, 0.2), abs=1e-12)
    (tmp_path / "odd.txt").write_text("1 0 0\n0 0 1\n")
    with pytest.raises(ValueError):
        load_jsa(tmp_path / "odd.txt")


def test_pair_rate_examples():
    single = SchmidtSpectrum()
    assert r_from_pair_rate(0.0, single) == 0.0
    assert r_from_pair_rate(0.01, single) == pytest.approx(math.acosh(1 / math.sqrt(0.99)), abs=1e-12)
    assert r_from_pair_rate(0.01, single) == pytest.approx(0.10034, abs=1e-5)
    two = SchmidtSpectrum((0.5, 0.5))
    assert r_from_pair_rate(pair_rate(0.2, two), two) == pytest.approx(0.2, abs=1e-9)
    with pytest.raises(ValueError):
        r_from_pair_rate(1.0, single)


def test_mean_photon_examples():
    assert np.all(mean_photons_per_schmidt_mode(0.0, SchmidtSpectrum((0.6, 0.4))) == 0)
    assert mean_photons_per_schmidt_mode(0.1, SchmidtSpectrum())[0] == pytest.approx(0.010033, abs=1e-6)
    mu = mean_photons_per_schmidt_mode(0.2, SchmidtSpectrum((0.75, 0.25)))
    np.testing.assert_allclose(mu, [math.sinh(0.2 * math.sqrt(0.75)) ** 2, math.sinh(0.1) ** 2], rtol=1e-14)


@given(st.floats(1e-6, 0.95), spectra)
def test_pair_rate_round_trip(p, spectrum):
    assert pair_rate(r_from_pair_rate(p, spectrum), spectrum) == pytest.approx(p, abs=1e-9)


@given(st.floats(0.0, 1.5), st.floats(0.1, 10.0), spectra)
def test_balance_preserves_total_pair_rate(r, balance, spectrum):
    r1, r2 = internal_squeezing(SourceParams(r, spectrum, balance))
    assert pair_rate(r1, spectrum) + pair_rate(r2, spectrum) - pair_rate(r1, spectrum) * pair_rate(r2, spectrum) == pytest.approx(
        1 - (1 - pair_rate(r, spectrum)) ** 2, abs=1e-12
    )
    if r > 0:
        assert r1 / r2 == pytest.approx(balance, rel=1e-9)


def test_source_zero_squeezing_is_vacuum():
    state = build_polarization_source(SourceParams(0.0), vacuum_multimode(4, SchmidtSpectrum()), (0, 1, 2, 3))
    assert np.all(state.components[0].excess == 0)


def test_source_structure_single_mode():
    mu = 0.3
    src = SourceParams.from_mean_photons(mu)
    comp = build_polarization_source(src, vacuum_multimode(4, SchmidtSpectrum()), (0, 1, 2, 3)).components[0]
    ref = apply_tmsv(vacuum_state(2), 0, 1, mu)
    np.testing.assert_allclose(reduce(comp, [0, 3]).excess, ref.excess, atol=1e-12)
    product = reduce(comp, [0, 2]).cov
    np.testing.assert_allclose(product, (2 * mu + 1) * np.eye(4), atol=1e-12)


def test_source_emits_hv_vh_pairs():
    # at small squeezing the two-photon part is |H,V> + |V,H>: no H,H or V,V coincidences
    src = SourceParams.from_mean_photons(1e-4)
    comp = build_polarization_source(src, vacuum_multimode(4, SchmidtSpectrum()), (0, 1, 2, 3)).components[0]
    hv = pattern_probability(comp, ClickPattern(frozenset({0, 3})))
    hh = pattern_probability(comp, ClickPattern(frozenset({0, 2})))
    # H,H needs two pairs: suppressed by a further factor of order mu
    assert hh < 2e-4 * hv


def test_multimode_source_components():
    spec = SchmidtSpectrum((0.7, 0.3))
    state = build_polarization_source(SourceParams(0.3, spec), vacuum_multimode(4, spec), (0, 1, 2, 3))
    assert len(state.components) == 2
    with pytest.raises(ValueError):
        build_polarization_source(SourceParams(0.3, spec), vacuum_multimode(4, SchmidtSpectrum()), (0, 1, 2, 3))
    with pytest.raises(ValueError):
        SourceParams(-0.1)
