import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from esr_diqkd.detection import (
    ClickPattern,
    ClickStatistics,
    DetectorParams,
    MultimodeState,
    NumericalConsistencyError,
    all_patterns_total,
    exhaustive_patterns,
    inclusion_exclusion,
    no_click_probability,
    pattern_masks,
    pattern_probability,
)
from esr_diqkd.gaussian import GaussianState, apply_loss, apply_tmsv, vacuum_state
from esr_diqkd.network import ChannelParams, build_esr_network
from esr_diqkd.source import SchmidtSpectrum, SourceParams

from test_gaussian import random_state


def pat(click=(), noclick=()):
    return ClickPattern(frozenset(click), frozenset(noclick))


def test_no_click_examples():
    assert no_click_probability(vacuum_state(3), [0, 1, 2]) == 1.0
    assert no_click_probability(vacuum_state(2), [0, 1], nu=0.1) == pytest.approx(0.81, abs=1e-15)
    thermal = GaussianState.from_cov(3.0 * np.eye(2))
    assert no_click_probability(apply_loss(thermal, 0, 0.5), [0]) == pytest.approx(1 / 1.5, abs=1e-15)


def test_pattern_examples():
    v = vacuum_state(2)
    assert pattern_probability(v, pat()) == 1.0
    assert pattern_probability(v, pat([0])) == 0.0
    mu = 0.1
    s = apply_tmsv(vacuum_state(2), 0, 1, mu)
    assert pattern_probability(s, pat([0, 1])) == pytest.approx(mu / (1 + mu), abs=1e-14)


def test_normalization_examples():
    s = apply_tmsv(vacuum_state(2), 0, 1, 0.4)
    assert all_patterns_total(s, [0, 1]) == pytest.approx(1.0, abs=1e-10)
    assert all_patterns_total(vacuum_state(8), range(8), nu=0.5) == pytest.approx(1.0, abs=1e-12)
    src = SourceParams.from_mean_photons(0.05)
    state, spec = build_esr_network(src, src, ChannelParams(50.0), DetectorParams(0.9, 1e-4), DetectorParams(0.5, 1e-5), 0.3, 1.2)
    assert all_patterns_total(state, range(8), spec.dark_counts) == pytest.approx(1.0, abs=1e-9)


def test_pattern_validation():
    with pytest.raises(ValueError):
        pat([0], [0])
    with pytest.raises(IndexError):
        pattern_probability(vacuum_state(2), pat([3]))
    with pytest.raises(ValueError):
        DetectorParams(1.2)
    with pytest.raises(ValueError):
        DetectorParams(0.5, 1.0)
    with pytest.raises(ValueError):
        ClickStatistics(vacuum_state(1), nu=-0.1)


def test_inclusion_exclusion_rejects_negative_result():
    # no-click probabilities that violate monotonicity cannot come from a state
    logs = {0b10: np.log(0.5), 0b11: np.log(0.6)}
    with pytest.raises(NumericalConsistencyError):
        inclusion_exclusion(logs.__getitem__, pat([0], [1]))


def test_pattern_masks_cover_every_click_subset():
    masks = pattern_masks(pat([1, 3], [0]))
    assert sorted(masks) == [0b0001, 0b0011, 0b1001, 0b1011]


def test_small_probabilities_keep_relative_precision():
    # two-fold coincidence far below double-precision epsilon relative to 1
    mu = 1e-9
    s = apply_tmsv(vacuum_state(2), 0, 1, mu)
    assert pattern_probability(s, pat([0, 1])) == pytest.approx(mu / (1 + mu), rel=1e-9)


def test_multimode_product():
    a = apply_tmsv(vacuum_state(2), 0, 1, 0.3)
    b = apply_tmsv(vacuum_state(2), 0, 1, 0.2)
    joint = no_click_probability(MultimodeState((a, b)), [0])
    assert joint == pytest.approx(no_click_probability(a, [0]) * no_click_probability(b, [0]), rel=1e-14)


@given(st.integers(0, 10_000), st.lists(st.floats(0, 0.2), min_size=4, max_size=4))
def test_random_network_patterns_normalized(seed, nu):
    s = random_state(seed)
    assert all_patterns_total(s, range(4), nu) == pytest.approx(1.0, abs=1e-9)


@given(st.integers(0, 10_000))
def test_marginal_consistency(seed):
    s = random_state(seed)
    stats = ClickStatistics(s, 0.01)
    for p in exhaustive_patterns([0, 2]):
        total = sum(stats.pattern_probability(ClickPattern(p.click | q.click, p.noclick | q.noclick)) for q in exhaustive_patterns([1]))
        assert total == pytest.approx(stats.pattern_probability(p), abs=1e-12)


@given(st.integers(0, 10_000))
def test_probabilities_in_unit_interval(seed):
    stats = ClickStatistics(random_state(seed), 1e-3)
    for p in exhaustive_patterns(range(4)):
        assert 0.0 <= stats.pattern_probability(p) <= 1.0
