"""Noise-adaptive two-qubit gate decomposition over multi-gate instruction sets."""

from gatesynth.decomp import (
    Decomposition,
    OptimizerConfig,
    decompose_approx,
    decompose_continuous,
    decompose_exact,
    decompose_exact_best,
)
from gatesynth.errors import (
    CapacityExceededError,
    ConnectivityError,
    GateSynthError,
    InvalidArgumentError,
    MissingCalibrationError,
    NotFoundError,
    ParseError,
)
from gatesynth.qgates import GateKind, fsim, parse_gate

__version__ = "0.1.0"

__all__ = [
    "CapacityExceededError",
    "ConnectivityError",
    "Decomposition",
    "GateKind",
    "GateSynthError",
    "InvalidArgumentError",
    "MissingCalibrationError",
    "NotFoundError",
    "OptimizerConfig",
    "ParseError",
    "__version__",
    "decompose_approx",
    "decompose_continuous",
    "decompose_exact",
    "decompose_exact_best",
    "fsim",
    "parse_gate",
]
