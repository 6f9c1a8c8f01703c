"""Simulation of device-independent QKD with an entanglement-swapping relay.

Gaussian covariance-matrix engine for SPDC sources, linear optics and on-off
photodetection, with CHSH/QBER/key-rate evaluation and an annealing optimizer.
"""

from .detection import ClickPattern, DetectorParams, MultimodeState, NumericalConsistencyError
from .metrics import MeasurementSettings, ProtocolResult
from .protocol import NetworkConfig, SourceSettings, evaluate
from .source import SchmidtSpectrum, SourceParams

__all__ = [
    "ClickPattern",
    "DetectorParams",
    "MeasurementSettings",
    "MultimodeState",
    "NetworkConfig",
    "NumericalConsistencyError",
    "ProtocolResult",
    "SchmidtSpectrum",
    "SourceParams",
    "SourceSettings",
    "evaluate",
]
