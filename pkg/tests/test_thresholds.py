import pytest

from esr_diqkd import thresholds
from esr_diqkd.metrics import MeasurementSettings, ProtocolResult
from esr_diqkd.protocol import NetworkConfig
from esr_diqkd.thresholds import CutoffSearch, cutoff_length


def fake_optimizer(edge, calls):
    """S above 2 exactly up to ``edge``; records (length, warm start) of every call."""

    def run(objective, config, space=None, schedule=None, start=None, **kwargs):
        calls.append((config.length_km, start))
        L = config.length_km
        s = 2.1 if L <= edge else 1.99
        params = {"mu_A": 0.01 + L, "ratio": 1.0, "balance": 1.0, "alice_angles": (0.0, 0.0, 0.5), "bob_angles": (1.5, 2.0)}
        return ProtocolResult(S=s, Q=0.0, P_s=1.0, K=0.0, parameters=params)

    return run


@pytest.mark.parametrize("edge", [0.0, 3.3, 27.2, 99.0])
def test_cutoff_brackets_edge(monkeypatch, edge):
    calls = []
    monkeypatch.setattr(thresholds, "optimize", fake_optimizer(edge, calls))
    search = CutoffSearch()
    c = cutoff_length(NetworkConfig("direct"), "S", 0.0, 100.0, tol=0.25, step=10.0, search=search)
    assert abs(c - edge) <= 0.25
    assert search.cutoff == c
    assert all(L <= edge for L in search.feasible("S"))


def test_cutoff_limits(monkeypatch):
    calls = []
    monkeypatch.setattr(thresholds, "optimize", fake_optimizer(-1.0, calls))
    assert cutoff_length(NetworkConfig("direct"), "S", 5.0, 50.0) == 5.0
    monkeypatch.setattr(thresholds, "optimize", fake_optimizer(1e9, calls))
    assert cutoff_length(NetworkConfig("direct"), "S", 0.0, 50.0, step=20.0) == 50.0


def test_probes_warm_start_from_last_feasible(monkeypatch):
    calls = []
    monkeypatch.setattr(thresholds, "optimize", fake_optimizer(25.0, calls))
    cutoff_length(NetworkConfig("direct"), "S", 0.0, 100.0, tol=1.0, step=10.0)
    assert calls[0][1] is None
    best_feasible = 0.0
    for length, start in calls[1:]:
        source, settings = start
        assert source.mu_abs == pytest.approx(0.01 + best_feasible)
        assert isinstance(settings, MeasurementSettings)
        if length <= 25.0:
            best_feasible = max(best_feasible, length)


def test_trivial_value_is_not_a_violation(monkeypatch):
    def run(objective, config, space=None, schedule=None, start=None, **kwargs):
        params = {"mu_A": 0.1, "ratio": 1.0, "balance": 1.0, "alice_angles": (0.0, 0.0, 0.5), "bob_angles": (1.5, 2.0)}
        return ProtocolResult(S=2.0 + 1e-12, Q=0.0, P_s=1.0, K=0.0, parameters=params)

    monkeypatch.setattr(thresholds, "optimize", run)
    assert cutoff_length(NetworkConfig("direct"), "S", 0.0, 10.0) == 0.0
