"""Expressivity sweeps over the fSim (theta, phi) parameter grid.

For every grid point the gate fSim(theta, phi) is used to decompose each
member of an application ensemble exactly; the per-point layer statistics
form the heatmap data. Members that cannot be decomposed within
``cfg.max_layers`` (for example anything entangling at the identity corner)
are counted as failures and left out of the count statistics.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from gatesynth.decomp import OptimizerConfig, child_seed, decompose_exact
from gatesynth.errors import CapacityExceededError, InvalidArgumentError
from gatesynth.qgates import (
    SWAP,
    GateKind,
    Matrix,
    controlled_phase,
    fsim,
    haar_su4,
    xxyy_interaction,
    zz_interaction,
)

log = logging.getLogger(__name__)

THETA_RANGE = (0.0, math.pi / 2)
PHI_RANGE = (0.0, math.pi)


class Ensemble(str, Enum):
    QV = "QV"
    QAOA = "QAOA"
    QFT = "QFT"
    FH = "FH"
    SWAP = "SWAP"


DESK_SIZES = {
    Ensemble.QV: 50,
    Ensemble.QAOA: 50,
    Ensemble.QFT: 10,
    Ensemble.FH: 60,
    Ensemble.SWAP: 1,
}
FULL_SIZES = {
    Ensemble.QV: 1000,
    Ensemble.QAOA: 1000,
    Ensemble.QFT: 10,
    Ensemble.FH: 60,
    Ensemble.SWAP: 1,
}

# Stream index used for ensemble sampling, separate from optimizer streams.
_ENSEMBLE_STREAM = 1_000_003


def default_size(ensemble: Ensemble | str, full: bool = False) -> int:
    """Ensemble size for desk-scale runs, or the full published sizes with ``full``."""
    e = Ensemble(ensemble.upper() if isinstance(ensemble, str) else ensemble)
    return (FULL_SIZES if full else DESK_SIZES)[e]


@dataclass(frozen=True)
class SweepSpec:
    ensemble: Ensemble
    ensemble_size: int | None = None
    theta_points: int = 19
    phi_points: int = 19
    seed: int = 0
    exact_infidelity: float = 1e-6

    def __post_init__(self) -> None:
        e = self.ensemble
        object.__setattr__(self, "ensemble", Ensemble(e.upper() if isinstance(e, str) else e))
        if self.ensemble_size is None:
            object.__setattr__(self, "ensemble_size", DESK_SIZES[self.ensemble])
        if self.ensemble_size < 1:
            raise InvalidArgumentError("ensemble_size must be >= 1")
        if self.theta_points < 1 or self.phi_points < 1:
            raise InvalidArgumentError("grid needs at least one point per axis")
        if not 0.0 < self.exact_infidelity < 1.0:
            raise InvalidArgumentError("exact_infidelity must lie in (0, 1)")

    @property
    def thetas(self) -> np.ndarray:
        return _axis(THETA_RANGE, self.theta_points)

    @property
    def phis(self) -> np.ndarray:
        return _axis(PHI_RANGE, self.phi_points)

    def to_json(self) -> dict[str, Any]:
        return {
            "ensemble": self.ensemble.value,
            "ensemble_size": self.ensemble_size,
            "theta_points": self.theta_points,
            "phi_points": self.phi_points,
            "theta_range": list(THETA_RANGE),
            "phi_range": list(PHI_RANGE),
            "seed": self.seed,
            "exact_infidelity": self.exact_infidelity,
        }


def _axis(bounds: tuple[float, float], points: int) -> np.ndarray:
    if points == 1:
        return np.array([bounds[0]])
    return np.linspace(bounds[0], bounds[1], points)


def ensemble_members(ensemble: Ensemble | str, size: int, seed: int = 0) -> list[Matrix]:
    """Target unitaries of an application ensemble.

    * ``QV``: Haar-random SU(4) members.
    * ``QAOA``: ZZ(beta) with beta uniform in [0, pi).
    * ``QFT``: controlled phases pi / 2**t for t = 1..size.
    * ``FH``: every third member ZZ(beta), the others XXYY(beta); beta uniform in [0, pi).
    * ``SWAP``: the SWAP gate, repeated ``size`` times.
    """
    e = Ensemble(ensemble.upper() if isinstance(ensemble, str) else ensemble)
    if size < 1:
        raise InvalidArgumentError("ensemble size must be >= 1")
    if e is Ensemble.SWAP:
        return [SWAP.copy() for _ in range(size)]
    if e is Ensemble.QFT:
        return [controlled_phase(math.pi / 2**t) for t in range(1, size + 1)]
    if e is Ensemble.QV:
        return [haar_su4(np.random.default_rng(child_seed(seed, _ENSEMBLE_STREAM, k))) for k in range(size)]
    rng = np.random.default_rng(child_seed(seed, _ENSEMBLE_STREAM))
    betas = rng.uniform(0.0, math.pi, size=size)
    if e is Ensemble.QAOA:
        return [zz_interaction(float(b)) for b in betas]
    return [
        zz_interaction(float(b)) if k % 3 == 0 else xxyy_interaction(float(b))
        for k, b in enumerate(betas)
    ]


@dataclass
class SweepResult:
    """Per-cell layer statistics, indexed ``[theta_index, phi_index]``.

    ``mean_count``, ``min_count`` and ``max_count`` cover the members that
    decomposed; a cell where every member failed holds ``nan`` and ``-1``.
    """

    spec: SweepSpec
    mean_count: np.ndarray
    min_count: np.ndarray
    max_count: np.ndarray
    failures: np.ndarray
    wall_time: float = 0.0
    counts: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.spec.theta_points, self.spec.phi_points)

    def cell(self, theta: float, phi: float) -> tuple[int, int]:
        """Index of the grid point nearest to ``(theta, phi)``."""
        i = int(np.argmin(np.abs(self.spec.thetas - theta)))
        j = int(np.argmin(np.abs(self.spec.phis - phi)))
        return i, j

    def mean_at(self, theta: float, phi: float) -> float:
        return float(self.mean_count[self.cell(theta, phi)])

    def rows(self) -> list[tuple[float, float, float, int, int, int]]:
        """``(theta, phi, mean, min, max, failures)`` in theta-major order."""
        out = []
        for i, theta in enumerate(self.spec.thetas):
            for j, phi in enumerate(self.spec.phis):
                out.append(
                    (
                        float(theta),
                        float(phi),
                        float(self.mean_count[i, j]),
                        int(self.min_count[i, j]),
                        int(self.max_count[i, j]),
                        int(self.failures[i, j]),
                    )
                )
        return out

    def to_json(self) -> dict[str, Any]:
        def _mean(v: float) -> float | None:
            return None if math.isnan(v) else v

        return {
            "spec": self.spec.to_json(),
            "wall_time_s": self.wall_time,
            "grid": [
                {"theta": t, "phi": p, "mean_count": _mean(m), "min": lo, "max": hi, "failures": f}
                for t, p, m, lo, hi, f in self.rows()
            ],
        }


def _member_layers(target: Matrix, gate: GateKind, cfg: OptimizerConfig) -> int:
    """Layer count of the exact decomposition, or -1 on failure."""
    try:
        return decompose_exact(target, gate, cfg).layers
    except CapacityExceededError:
        return -1


def run_sweep(
    spec: SweepSpec, cfg: OptimizerConfig = OptimizerConfig(), parallelism: int = 1
) -> SweepResult:
    """Decompose every ensemble member at every grid point.

    The optimizer's ``exact_infidelity`` is taken from ``spec``. Results are
    assembled by position and every decomposition draws from seed-derived
    streams, so the output does not depend on ``parallelism``.
    """
    if parallelism < 1:
        raise InvalidArgumentError("parallelism must be >= 1")
    cfg = OptimizerConfig(**{**cfg.__dict__, "exact_infidelity": spec.exact_infidelity})
    members = ensemble_members(spec.ensemble, spec.ensemble_size, spec.seed)
    thetas, phis = spec.thetas, spec.phis
    jobs = [
        (i, j, k)
        for i in range(len(thetas))
        for j in range(len(phis))
        for k in range(len(members))
    ]

    def run(job: tuple[int, int, int]) -> int:
        i, j, k = job
        return _member_layers(members[k], fsim(thetas[i], phis[j]), cfg)

    start = time.perf_counter()
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            flat = list(pool.map(run, jobs, chunksize=max(1, len(members))))
    else:
        flat = [run(job) for job in jobs]
    wall = time.perf_counter() - start

    counts = np.array(flat, dtype=int).reshape(len(thetas), len(phis), len(members))
    ok = counts >= 0
    failures = (~ok).sum(axis=2)
    n_ok = ok.sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(n_ok > 0, np.where(ok, counts, 0).sum(axis=2) / np.maximum(n_ok, 1), np.nan)
    big = np.iinfo(int).max
    lo = np.where(ok, counts, big).min(axis=2)
    hi = np.where(ok, counts, -1).max(axis=2)
    lo = np.where(n_ok > 0, lo, -1)
    log.info(
        "sweep %s: %d decompositions in %.1fs, %d failures",
        spec.ensemble.value,
        len(jobs),
        wall,
        int(failures.sum()),
    )
    return SweepResult(spec, mean, lo, hi, failures, wall, counts)


def select_gate_shortlist(results: Sequence[SweepResult], k: int) -> list[GateKind]:
    """Grid points with the lowest mean count summed over ``results``.

    Cells where any ensemble has failures rank after all fully decomposed
    cells. Points are deduplicated under fSim canonicalization, so fewer
    than ``k`` gates come back only if the grid has fewer distinct classes.
    """
    if not results:
        raise InvalidArgumentError("need at least one sweep result")
    if k < 1:
        raise InvalidArgumentError("k must be >= 1")
    first = results[0].spec
    for r in results[1:]:
        s = r.spec
        if (s.theta_points, s.phi_points) != (first.theta_points, first.phi_points):
            raise InvalidArgumentError("sweep results cover different grids")
    total = np.zeros(results[0].shape)
    failed = np.zeros(results[0].shape, dtype=bool)
    for r in results:
        failed |= r.failures > 0
        total += np.nan_to_num(r.mean_count, nan=0.0)
    thetas, phis = first.thetas, first.phis
    order = sorted(
        np.ndindex(*total.shape), key=lambda ij: (bool(failed[ij]), float(total[ij]), ij)
    )
    picked: list[GateKind] = []
    seen: set[tuple] = set()
    for i, j in order:
        g = fsim(thetas[i], phis[j])
        key = g.canonical().key
        if key in seen:
            continue
        seen.add(key)
        picked.append(g)
        if len(picked) == k:
            break
    return picked


HEATMAP_COLUMNS = ("theta", "phi", "mean_count", "min", "max", "failures")


def heatmap_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEATMAP_COLUMNS)
    for t, p, m, lo, hi, f in result.rows():
        w.writerow([repr(t), repr(p), repr(m), lo, hi, f])
    return buf.getvalue()


def export_heatmap_csv(result: SweepResult, path: str | Path) -> None:
    """Write the heatmap as CSV (theta-major); raises ``OSError`` if unwritable."""
    Path(path).write_text(heatmap_csv(result), encoding="utf-8")


def dump_result(result: SweepResult, path: str | Path) -> None:
    Path(path).write_text(json.dumps(result.to_json(), indent=2), encoding="utf-8")


__all__ = [
    "DESK_SIZES",
    "Ensemble",
    "FULL_SIZES",
    "HEATMAP_COLUMNS",
    "SweepResult",
    "SweepSpec",
    "default_size",
    "dump_result",
    "ensemble_members",
    "export_heatmap_csv",
    "heatmap_csv",
    "run_sweep",
    "select_gate_shortlist",
]
