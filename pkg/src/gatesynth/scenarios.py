"""Ready-made devices and circuits for demonstrations and tests."""

from __future__ import annotations

import numpy as np

from gatesynth.circuitpass import Circuit, UnitaryOp
from gatesynth.decomp import child_seed
from gatesynth.devicemodel import DeviceModel
from gatesynth.qgates import ALIASES, haar_su4

CZ_GATE = ALIASES["cz"]
SQISWAP_GATE = ALIASES["sqiswap"]

# Per-gate sqrt(iSWAP) fidelity on the CZ-friendly pair: three applications give 0.7.
SQISWAP_WEAK = 0.7 ** (1 / 3)


def two_pair_device(
    cz_good: float = 0.94,
    sqiswap_weak: float = SQISWAP_WEAK,
    cz_weak: float = 0.85,
    sqiswap_good: float = 0.97,
) -> DeviceModel:
    """Five-qubit line whose pairs (2, 3) and (3, 4) favour different gates.

    On (2, 3) CZ is the better-calibrated gate; on (3, 4) sqrt(iSWAP) is.
    Qubits 0 and 1 are spectators so the active pairs keep their labels.
    """
    edges = [(0, 1), (1, 2), (2, 3), (3, 4)]
    fids = {
        ((2, 3), CZ_GATE): cz_good,
        ((2, 3), SQISWAP_GATE): sqiswap_weak,
        ((3, 4), CZ_GATE): cz_weak,
        ((3, 4), SQISWAP_GATE): sqiswap_good,
    }
    for e in [(0, 1), (1, 2)]:
        fids[(e, CZ_GATE)] = 0.99
        fids[(e, SQISWAP_GATE)] = 0.99
    return DeviceModel(5, edges, fids)


def two_pair_circuit(seed: int = 0) -> Circuit:
    """Two Haar-random unitaries, on (2, 3) then on (3, 4)."""
    ops = [
        UnitaryOp((2, 3), haar_su4(np.random.default_rng(child_seed(seed, 0)))),
        UnitaryOp((3, 4), haar_su4(np.random.default_rng(child_seed(seed, 1)))),
    ]
    return Circuit(5, ops)
