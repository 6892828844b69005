"""Device topology and calibration data, instruction sets, calibration cost."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import IO, Any, Iterable, Mapping, Sequence

from gatesynth.decomp import FULL_FSIM, FULL_XY
from gatesynth.errors import InvalidArgumentError, NotFoundError, ParseError
from gatesynth.qgates import ALIASES, GateKind, fsim, parse_gate

Edge = tuple[int, int]


def normalize_edge(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


@dataclass
class DeviceModel:
    """Qubit connectivity with per-edge, per-gate-kind fidelities.

    Edges are undirected and stored as ``(a, b)`` with ``a < b``.
    """

    qubit_count: int
    edges: list[Edge] = field(default_factory=list)
    edge_fidelities: dict[tuple[Edge, GateKind], float] = field(default_factory=dict)
    single_qubit_fidelity: dict[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.qubit_count < 1:
            raise InvalidArgumentError("qubit_count must be >= 1")
        seen = set()
        normalized = []
        for a, b in self.edges:
            self._check_qubit(a)
            self._check_qubit(b)
            if a == b:
                raise InvalidArgumentError(f"self-loop on qubit {a}")
            e = normalize_edge(a, b)
            if e in seen:
                raise InvalidArgumentError(f"duplicate edge {e}")
            seen.add(e)
            normalized.append(e)
        self.edges = normalized
        fids = {}
        for (edge, gate), f in self.edge_fidelities.items():
            e = normalize_edge(*edge)
            if e not in seen:
                raise InvalidArgumentError(f"fidelity given for non-edge {e}")
            _check_fidelity(f, f"edge {e} gate {gate}")
            fids[(e, gate)] = float(f)
        self.edge_fidelities = fids
        for q, f in self.single_qubit_fidelity.items():
            self._check_qubit(q)
            _check_fidelity(f, f"qubit {q}")

    def _check_qubit(self, q: int) -> None:
        if not 0 <= q < self.qubit_count:
            raise InvalidArgumentError(f"qubit index {q} out of range [0, {self.qubit_count})")

    def has_edge(self, a: int, b: int) -> bool:
        return normalize_edge(a, b) in set(self.edges)

    def gates_on(self, a: int, b: int) -> dict[GateKind, float]:
        """Calibrated gate kinds on an edge mapped to their fidelities."""
        e = normalize_edge(a, b)
        return {g: f for (edge, g), f in self.edge_fidelities.items() if edge == e}

    def fidelity(self, a: int, b: int, gate: GateKind) -> float | None:
        return self.edge_fidelities.get((normalize_edge(a, b), gate))

    def f1q(self, q: int) -> float:
        return self.single_qubit_fidelity.get(q, 1.0)

    def to_json(self) -> dict[str, Any]:
        edges = []
        for e in self.edges:
            gates = {g.label: f for g, f in self.gates_on(*e).items()}
            edges.append({"a": e[0], "b": e[1], "gates": gates})
        out: dict[str, Any] = {"qubits": self.qubit_count, "edges": edges}
        if self.single_qubit_fidelity:
            out["single_qubit_fidelity"] = {
                str(q): f for q, f in sorted(self.single_qubit_fidelity.items())
            }
        return out

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


def _check_fidelity(f: Any, where: str) -> None:
    if isinstance(f, bool) or not isinstance(f, (int, float)) or not 0.0 < f <= 1.0:
        raise InvalidArgumentError(f"{where}: fidelity must lie in (0, 1], got {f!r}")


def _int_field(obj: Mapping, key: str, where: str) -> int:
    if key not in obj:
        raise ParseError(f"{where}: missing field {key!r}")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"{where}.{key}: expected integer, got {v!r}")
    return v


def device_from_json(data: Any) -> DeviceModel:
    """Validate a parsed device document (see README for the schema)."""
    if not isinstance(data, dict):
        raise ParseError("device: top level must be an object")
    unknown = set(data) - {"qubits", "edges", "single_qubit_fidelity"}
    if unknown:
        raise ParseError(f"device: unknown fields {sorted(unknown)}")
    n = _int_field(data, "qubits", "device")
    if n < 1:
        raise ParseError("device.qubits: must be >= 1")
    raw_edges = data.get("edges", [])
    if not isinstance(raw_edges, list):
        raise ParseError("device.edges: expected a list")
    edges: list[Edge] = []
    fids: dict[tuple[Edge, GateKind], float] = {}
    for i, item in enumerate(raw_edges):
        where = f"device.edges[{i}]"
        if not isinstance(item, dict):
            raise ParseError(f"{where}: expected an object")
        a = _int_field(item, "a", where)
        b = _int_field(item, "b", where)
        for q, key in ((a, "a"), (b, "b")):
            if not 0 <= q < n:
                raise ParseError(f"{where}.{key}: qubit {q} out of range [0, {n})")
        if a == b:
            raise ParseError(f"{where}: self-loop on qubit {a}")
        e = normalize_edge(a, b)
        if e in edges:
            raise ParseError(f"{where}: duplicate edge {e}")
        edges.append(e)
        gates = item.get("gates", {})
        if not isinstance(gates, dict):
            raise ParseError(f"{where}.gates: expected an object")
        for name, f in gates.items():
            gwhere = f"{where}.gates[{name!r}]"
            try:
                gate = parse_gate(name)
            except ParseError as exc:
                raise ParseError(f"{gwhere}: {exc}") from None
            try:
                _check_fidelity(f, gwhere)
            except InvalidArgumentError as exc:
                raise ParseError(str(exc)) from None
            if (e, gate) in fids:
                raise ParseError(f"{gwhere}: gate listed twice on this edge")
            fids[(e, gate)] = float(f)
    sq = data.get("single_qubit_fidelity", {})
    if not isinstance(sq, dict):
        raise ParseError("device.single_qubit_fidelity: expected an object")
    single: dict[int, float] = {}
    for key, f in sq.items():
        where = f"device.single_qubit_fidelity[{key!r}]"
        try:
            q = int(key)
        except ValueError:
            raise ParseError(f"{where}: key is not a qubit index") from None
        if not 0 <= q < n:
            raise ParseError(f"{where}: qubit {q} out of range [0, {n})")
        try:
            _check_fidelity(f, where)
        except InvalidArgumentError as exc:
            raise ParseError(str(exc)) from None
        single[q] = float(f)
    return DeviceModel(n, edges, fids, single)


def load_device(source: str | Path | IO[str]) -> DeviceModel:
    """Load a device from a JSON file path or an open text stream."""
    if hasattr(source, "read"):
        text = source.read()  # type: ignore[union-attr]
        name = getattr(source, "name", "<stream>")
    else:
        name = str(source)
        text = Path(source).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{name}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return device_from_json(data)
    except ParseError as exc:
        raise ParseError(f"{name}: {exc}") from exc


# --------------------------------------------------------------------------
# Topology fixtures
# --------------------------------------------------------------------------

# 54-qubit Sycamore layout; letters mark qubit sites on a square grid.
_SYCAMORE_LAYOUT = """\
-----AB---
----ABCD--
---ABCDEF-
--ABCDEFGH
-ABCDEFGHI
ABCDEFGHI-
-CDEFGHI--
--EFGHI---
---GHI----
----I-----
"""


def _uniform_fids(edges: Iterable[Edge], gates: Mapping[GateKind, float]) -> dict:
    return {(e, g): f for e in edges for g, f in gates.items()}


def grid_device(rows: int, cols: int, gates: Mapping[GateKind, float] | None = None) -> DeviceModel:
    """Rectangular nearest-neighbour grid; qubit ``r * cols + c``."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            q = r * cols + c
            if c + 1 < cols:
                edges.append((q, q + 1))
            if r + 1 < rows:
                edges.append((q, q + cols))
    return DeviceModel(rows * cols, edges, _uniform_fids(edges, gates or {}))


def sycamore_device(gates: Mapping[GateKind, float] | None = None) -> DeviceModel:
    """Sycamore-like 54-qubit diagonal grid with 88 couplers."""
    sites = [
        (r, c)
        for r, line in enumerate(_SYCAMORE_LAYOUT.splitlines())
        for c, ch in enumerate(line)
        if ch != "-"
    ]
    index = {s: i for i, s in enumerate(sites)}
    edges = []
    for (r, c), q in index.items():
        for nb in ((r, c + 1), (r + 1, c)):
            if nb in index:
                edges.append((q, index[nb]))
    return DeviceModel(len(sites), edges, _uniform_fids(edges, gates or {}))


def ring_device(n: int = 8, gates: Mapping[GateKind, float] | None = None) -> DeviceModel:
    """Aspen-like ring of ``n`` qubits."""
    edges = [(i, (i + 1) % n) for i in range(n)]
    return DeviceModel(n, edges, _uniform_fids((normalize_edge(*e) for e in edges), gates or {}))


# --------------------------------------------------------------------------
# Instruction sets
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class InstructionSet:
    """A named set of hardware gate kinds, or a continuous family marker."""

    name: str
    members: tuple[GateKind, ...] = ()
    continuous: str | None = None

    @property
    def is_continuous(self) -> bool:
        return self.continuous is not None

    @property
    def num_types(self) -> int | None:
        """Number of distinct gate types; ``None`` for a continuous family."""
        return None if self.is_continuous else len(self.members)

    def __contains__(self, gate: object) -> bool:
        return gate in self.members


_SINGLE: dict[str, GateKind] = {
    "S1": ALIASES["syc"],
    "S2": ALIASES["sqiswap"],
    "S3": ALIASES["cz"],
    "S4": ALIASES["iswap"],
    "S5": fsim(math.pi / 3, 0.0),
    "S6": fsim(3 * math.pi / 8, 0.0),
    "S7": fsim(math.pi / 6, math.pi),
}

_COMBOS: dict[str, tuple[str, ...]] = {
    "G1": ("S1", "S2"),
    "G2": ("S1", "S2", "S3"),
    "G3": ("S1", "S2", "S3", "S4"),
    "G4": ("S1", "S2", "S3", "S4", "S5"),
    "G5": ("S1", "S2", "S3", "S4", "S5", "S6"),
    "G6": ("S1", "S2", "S3", "S4", "S5", "S6", "S7"),
    "G7": ("S1", "S2", "S3", "S4", "S5", "S6", "S7", "SWAP"),
    "R1": ("S3", "S4"),
    "R2": ("S2", "S3", "S4"),
    "R3": ("S2", "S3", "S4", "S5"),
    "R4": ("S2", "S3", "S4", "S5", "S6"),
    "R5": ("S2", "S3", "S4", "S5", "S6", "SWAP"),
}


def _build_registry() -> dict[str, InstructionSet]:
    reg: dict[str, InstructionSet] = {}
    for name, g in _SINGLE.items():
        reg[name] = InstructionSet(name, (g,))
    lookup = dict(_SINGLE, SWAP=ALIASES["swap"])
    for name, parts in _COMBOS.items():
        reg[name] = InstructionSet(name, tuple(lookup[p] for p in parts))
    reg[FULL_XY] = InstructionSet(FULL_XY, continuous=FULL_XY)
    reg[FULL_FSIM] = InstructionSet(FULL_FSIM, continuous=FULL_FSIM)
    return reg


REGISTRY: dict[str, InstructionSet] = _build_registry()


def instruction_set(name: str) -> InstructionSet:
    """Look up a registered instruction set (case-insensitive)."""
    for key, iset in REGISTRY.items():
        if key.lower() == name.strip().lower():
            return iset
    raise NotFoundError(f"unknown instruction set {name!r}; known: {', '.join(REGISTRY)}")


# --------------------------------------------------------------------------
# Calibration cost
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationCostModel:
    """Per-pair, per-gate-type calibration budget.

    The step counts cover conditional-phase tune-up at two angles, iSWAP-like
    tune-up at two angles, the exchange-angle scan, unitary tomography, and
    XEB characterization. ``total_per_pair_per_type`` defaults to their sum.
    """

    circuits_cphase: int = 3000
    circuits_iswap: int = 3000
    circuits_theta_tune: int = 1500
    circuits_tomography: int = 1500
    circuits_xeb: int = 1000
    total_per_pair_per_type: int | None = None
    hours_per_type_per_pair: float = 2.0
    parallelism: int = 1

    _STEPS = (
        "circuits_cphase",
        "circuits_iswap",
        "circuits_theta_tune",
        "circuits_tomography",
        "circuits_xeb",
    )

    def __post_init__(self) -> None:
        for name in self._STEPS:
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f"{name} must be >= 0")
        steps = self.step_total
        if self.total_per_pair_per_type is None:
            object.__setattr__(self, "total_per_pair_per_type", steps)
        elif self.total_per_pair_per_type != steps:
            raise InvalidArgumentError(
                f"total_per_pair_per_type={self.total_per_pair_per_type} does not equal "
                f"the sum of step counts ({steps})"
            )
        if self.parallelism < 1:
            raise InvalidArgumentError("parallelism must be >= 1")
        if self.hours_per_type_per_pair < 0:
            raise InvalidArgumentError("hours_per_type_per_pair must be >= 0")

    @property
    def step_total(self) -> int:
        return sum(getattr(self, name) for name in self._STEPS)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> CalibrationCostModel:
        """Build from a config mapping.

        If only ``total_per_pair_per_type`` is given, the step counts are
        scaled proportionally so they still sum to it.
        """
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ParseError(f"calibration config: unknown fields {sorted(unknown)}")
        kwargs = dict(data)
        total = kwargs.get("total_per_pair_per_type")
        if total is not None and not any(s in kwargs for s in cls._STEPS):
            kwargs.update(_scaled_steps(int(total)))
        try:
            return cls(**kwargs)
        except (TypeError, InvalidArgumentError) as exc:
            raise ParseError(f"calibration config: {exc}") from exc

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


def _scaled_steps(total: int) -> dict[str, int]:
    default = CalibrationCostModel()
    base = default.step_total
    out = {}
    acc = 0
    for name in CalibrationCostModel._STEPS[:-1]:
        v = getattr(default, name) * total // base
        out[name] = v
        acc += v
    out[CalibrationCostModel._STEPS[-1]] = total - acc
    return out


@dataclass(frozen=True)
class CalibrationCost:
    circuits: int
    hours: float


def calibration_cost(
    model: CalibrationCostModel, device: DeviceModel, num_gate_types: int
) -> CalibrationCost:
    """Circuits and hours to calibrate ``num_gate_types`` types on every edge.

    Both grow linearly with the number of edges and of gate types.
    """
    if isinstance(num_gate_types, bool) or not isinstance(num_gate_types, int) or num_gate_types < 1:
        raise InvalidArgumentError(f"num_gate_types must be an integer >= 1, got {num_gate_types!r}")
    units = len(device.edges) * num_gate_types
    return CalibrationCost(
        circuits=units * model.total_per_pair_per_type,
        hours=units * model.hours_per_type_per_pair / model.parallelism,
    )


UNBOUNDED = "unbounded"

REPORT_COLUMNS = ("set", "types", "circuits", "hours", "metric")


def tradeoff_report(
    device: DeviceModel,
    sets: Sequence[InstructionSet],
    per_set_metric: Mapping[str, float],
    model: CalibrationCostModel | None = None,
) -> list[dict[str, Any]]:
    """One row per instruction set, sorted by number of gate types.

    Continuous families report ``"unbounded"`` for types, circuits and hours
    and sort last.
    """
    model = model or CalibrationCostModel()
    rows = []
    for iset in sets:
        if iset.name not in per_set_metric:
            raise InvalidArgumentError(f"no metric supplied for instruction set {iset.name}")
        metric = per_set_metric[iset.name]
        if iset.is_continuous:
            rows.append(
                {"set": iset.name, "types": UNBOUNDED, "circuits": UNBOUNDED, "hours": UNBOUNDED, "metric": metric}
            )
            continue
        cost = calibration_cost(model, device, iset.num_types)
        rows.append(
            {"set": iset.name, "types": iset.num_types, "circuits": cost.circuits, "hours": cost.hours, "metric": metric}
        )
    rows.sort(key=lambda r: (r["types"] == UNBOUNDED, r["types"] if r["types"] != UNBOUNDED else 0))
    return rows


def rows_to_csv(rows: Sequence[Mapping[str, Any]], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\r\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({c: r[c] for c in columns})
    return buf.getvalue()
