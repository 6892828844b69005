"""Circuit representation, benchmark generators and the compilation pass.

The pass replaces every application two-qubit unitary with its best
decomposition into the hardware gates calibrated on that qubit pair, then
merges neighbouring single-qubit gates. Mapping and routing are the caller's
job: a two-qubit operation on a non-adjacent pair is an error.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence, Union

import numpy as np

from gatesynth.decomp import (
    Decomposition,
    OptimizerConfig,
    decompose_approx,
    decompose_continuous,
    decompose_exact_best,
)
from gatesynth.devicemodel import DeviceModel, InstructionSet
from gatesynth.errors import (
    CapacityExceededError,
    ConnectivityError,
    InvalidArgumentError,
    MissingCalibrationError,
    ParseError,
)
from gatesynth.qgates import (
    GateKind,
    Matrix,
    U3Params,
    check_unitary,
    controlled_phase,
    gate_from_json,
    haar_su4,
    matrix_from_json,
    matrix_to_json,
    u3_from_matrix,
    xxyy_interaction,
    zz_interaction,
)

log = logging.getLogger(__name__)

MAX_VERIFY_QUBITS = 12


@dataclass(frozen=True)
class U3Op:
    q: int
    params: U3Params

    def matrix(self) -> Matrix:
        return self.params.matrix()


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    """An application two-qubit unitary on ``(a, b)``; ``a`` is the first tensor factor."""

    qubits: tuple[int, int]
    matrix: Matrix
    meta: dict[str, Any] | None = None


@dataclass(frozen=True)
class GateOp:
    """A hardware two-qubit gate on ``(a, b)``."""

    qubits: tuple[int, int]
    gate: GateKind

    def matrix(self) -> Matrix:
        return self.gate.matrix()


Op = Union[U3Op, UnitaryOp, GateOp]


@dataclass
class Circuit:
    qubit_count: int
    ops: list[Op] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.qubit_count < 1:
            raise InvalidArgumentError("qubit_count must be >= 1")
        for i, op in enumerate(self.ops):
            self._check_op(op, i)

    def _check_op(self, op: Op, index: int) -> None:
        qubits = (op.q,) if isinstance(op, U3Op) else tuple(op.qubits)
        for q in qubits:
            if not 0 <= q < self.qubit_count:
                raise InvalidArgumentError(f"op {index}: qubit {q} out of range")
        if len(qubits) == 2 and qubits[0] == qubits[1]:
            raise InvalidArgumentError(f"op {index}: two-qubit op on a single qubit {qubits[0]}")

    def append(self, op: Op) -> None:
        self._check_op(op, len(self.ops))
        self.ops.append(op)

    def count(self, kind: type) -> int:
        return sum(isinstance(op, kind) for op in self.ops)

    @property
    def two_qubit_ops(self) -> list[Op]:
        return [op for op in self.ops if not isinstance(op, U3Op)]

    def to_json(self) -> dict[str, Any]:
        ops = []
        for op in self.ops:
            if isinstance(op, U3Op):
                ops.append({"kind": "u3", "q": op.q, "params": op.params.as_list()})
            elif isinstance(op, UnitaryOp):
                entry: dict[str, Any] = {
                    "kind": "unitary2q",
                    "q": list(op.qubits),
                    "matrix": matrix_to_json(op.matrix),
                }
                if op.meta:
                    entry["meta"] = op.meta
                ops.append(entry)
            else:
                ops.append({"kind": "gate2q", "q": list(op.qubits), "gate": op.gate.label})
        return {"qubits": self.qubit_count, "ops": ops}

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")


def circuit_from_json(data: Any) -> Circuit:
    if not isinstance(data, dict) or "qubits" not in data:
        raise ParseError("circuit: expected an object with 'qubits' and 'ops'")
    n = data["qubits"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ParseError(f"circuit.qubits: expected a positive integer, got {n!r}")
    raw = data.get("ops", [])
    if not isinstance(raw, list):
        raise ParseError("circuit.ops: expected a list")
    ops: list[Op] = []
    for i, item in enumerate(raw):
        where = f"circuit.ops[{i}]"
        if not isinstance(item, dict):
            raise ParseError(f"{where}: expected an object")
        kind = item.get("kind")
        try:
            if kind == "u3":
                params = [float(v) for v in item["params"]]
                if len(params) != 3:
                    raise ParseError(f"{where}.params: expected three angles")
                ops.append(U3Op(int(item["q"]), U3Params(*params)))
            elif kind in ("unitary2q", "gate2q"):
                q = item["q"]
                if not isinstance(q, list) or len(q) != 2:
                    raise ParseError(f"{where}.q: expected [a, b]")
                qubits = (int(q[0]), int(q[1]))
                if kind == "unitary2q":
                    m = matrix_from_json(item["matrix"])
                    try:
                        m = check_unitary(m, atol=1e-8, dim=4)
                    except InvalidArgumentError as exc:
                        raise ParseError(f"{where}.matrix: {exc}") from None
                    ops.append(UnitaryOp(qubits, m, item.get("meta")))
                else:
                    ops.append(GateOp(qubits, gate_from_json(item["gate"])))
            else:
                raise ParseError(f"{where}.kind: unknown op kind {kind!r}")
        except KeyError as exc:
            raise ParseError(f"{where}: missing field {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{where}: {exc}") from None
    try:
        return Circuit(n, ops)
    except InvalidArgumentError as exc:
        raise ParseError(f"circuit: {exc}") from None


def load_circuit(path: str | Path) -> Circuit:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return circuit_from_json(data)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from exc


# --------------------------------------------------------------------------
# Benchmark generators
# --------------------------------------------------------------------------

HADAMARD = U3Params(math.pi / 2, 0.0, math.pi)


def rx_params(angle: float) -> U3Params:
    """U3 angles of an X rotation by ``angle``."""
    return U3Params(angle, -math.pi / 2, math.pi / 2)


def _check_size(n: int) -> None:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidArgumentError(f"need at least 2 qubits, got {n!r}")


def gen_qv(n: int, seed: int) -> Circuit:
    """Quantum-volume circuit: ``n`` layers of Haar unitaries on random disjoint pairs."""
    _check_size(n)
    rng = np.random.default_rng(seed)
    c = Circuit(n)
    for _ in range(n):
        perm = rng.permutation(n)
        for k in range(n // 2):
            a, b = int(perm[2 * k]), int(perm[2 * k + 1])
            c.append(UnitaryOp((a, b), haar_su4(rng), {"app": "QV"}))
    return c


def gen_qaoa(n: int, seed: int) -> Circuit:
    """MaxCut-style QAOA layer with ``ceil(n**3 / 4)`` ZZ interactions on random pairs.

    Hadamards open the circuit and a layer of X rotations closes it.
    """
    _check_size(n)
    rng = np.random.default_rng(seed)
    c = Circuit(n)
    for q in range(n):
        c.append(U3Op(q, HADAMARD))
    for _ in range(math.ceil(n**3 / 4)):
        a, b = (int(v) for v in rng.choice(n, size=2, replace=False))
        beta = float(rng.uniform(0.0, math.pi))
        c.append(UnitaryOp((a, b), zz_interaction(beta), {"app": "QAOA_ZZ", "param": beta}))
    mix = float(rng.uniform(0.0, math.pi))
    for q in range(n):
        c.append(U3Op(q, rx_params(2 * mix)))
    return c


def gen_qft(n: int) -> Circuit:
    """QFT without the final qubit reversal: ``n`` Hadamards, ``n(n-1)/2`` controlled phases."""
    _check_size(n)
    c = Circuit(n)
    for j in range(n):
        c.append(U3Op(j, HADAMARD))
        for k in range(j + 1, n):
            t = k - j
            c.append(UnitaryOp((k, j), controlled_phase(math.pi / 2**t), {"app": "QFT_CP", "param": t}))
    return c


def gen_fh(n: int, seed: int) -> Circuit:
    """One Trotter step on a 1-D chain: ``2n`` ZZ and ``4n`` (XX+YY)/2 interactions."""
    _check_size(n)
    rng = np.random.default_rng(seed)
    bonds = [(i, i + 1) for i in range(n - 1)]
    c = Circuit(n)
    for k in range(4 * n):
        beta = float(rng.uniform(0.0, math.pi))
        c.append(UnitaryOp(bonds[k % len(bonds)], xxyy_interaction(beta), {"app": "FH_XXYY", "param": beta}))
    for k in range(2 * n):
        beta = float(rng.uniform(0.0, math.pi))
        c.append(UnitaryOp(bonds[k % len(bonds)], zz_interaction(beta), {"app": "FH_ZZ", "param": beta}))
    return c


# --------------------------------------------------------------------------
# Compilation
# --------------------------------------------------------------------------


class Mode(str, Enum):
    EXACT = "exact"
    APPROX = "approx"
    CONTINUOUS = "continuous"


@dataclass
class GateReport:
    op_index: int
    qubits: tuple[int, int]
    gate: str
    layers: int
    f_d: float
    f_h: float
    f_u: float

    def to_json(self) -> dict[str, Any]:
        return {
            "op_index": self.op_index,
            "qubits": list(self.qubits),
            "gate": self.gate,
            "layers": self.layers,
            "f_d": self.f_d,
            "f_h": self.f_h,
            "f_u": self.f_u,
        }


REPORT_CSV_COLUMNS = ("op_index", "qubits", "gate", "layers", "f_d", "f_h", "f_u")


@dataclass
class CompileReport:
    per_gate: list[GateReport] = field(default_factory=list)
    verification: float | None = None

    @property
    def two_qubit_count(self) -> int:
        return sum(g.layers for g in self.per_gate)

    @property
    def est_fidelity(self) -> float:
        return math.prod(g.f_u for g in self.per_gate)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "per_gate": [g.to_json() for g in self.per_gate],
            "totals": {"two_qubit_count": self.two_qubit_count, "est_fidelity": self.est_fidelity},
        }
        if self.verification is not None:
            out["verification_fidelity"] = self.verification
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(REPORT_CSV_COLUMNS)
        for g in self.per_gate:
            w.writerow([g.op_index, f"{g.qubits[0]}-{g.qubits[1]}", g.gate, g.layers, repr(g.f_d), repr(g.f_h), repr(g.f_u)])
        return buf.getvalue()


@dataclass(frozen=True)
class _Task:
    matrix: Matrix
    candidates: tuple[tuple[GateKind, float], ...]
    f1q: float
    family: str | None = None
    family_fidelity: float = 1.0


def _matrix_key(m: Matrix) -> str:
    return hashlib.sha256(np.ascontiguousarray(m, dtype=complex).tobytes()).hexdigest()


def _task_key(task: _Task) -> tuple:
    return (
        _matrix_key(task.matrix),
        tuple((g.key, f) for g, f in task.candidates),
        task.f1q,
        task.family,
        task.family_fidelity,
    )


def _solve(task: _Task, mode: Mode, cfg: OptimizerConfig) -> Decomposition:
    if mode is Mode.CONTINUOUS:
        d = decompose_continuous(task.matrix, task.family, cfg)  # type: ignore[arg-type]
        return d.with_hardware_fidelity(task.family_fidelity, task.f1q)
    if mode is Mode.APPROX:
        return decompose_approx(task.matrix, list(task.candidates), cfg, f1q=task.f1q)
    return decompose_exact_best(task.matrix, list(task.candidates), cfg, f1q=task.f1q)


def _candidates(
    op: UnitaryOp, index: int, device: DeviceModel, iset: InstructionSet
) -> tuple[tuple[GateKind, float], ...]:
    a, b = op.qubits
    calibrated = device.gates_on(a, b)
    found = tuple((g, calibrated[g]) for g in iset.members if g in calibrated)
    if not found:
        raise MissingCalibrationError(
            f"op {index} on ({a}, {b}): none of {iset.name}'s gate kinds "
            f"({', '.join(g.label for g in iset.members)}) is calibrated on this edge"
        )
    return found


def _decomposition_ops(qubits: tuple[int, int], d: Decomposition) -> list[Op]:
    a, b = qubits
    u3 = d.template.u3_params
    ops: list[Op] = []
    for k in range(d.layers + 1):
        ops.append(U3Op(a, U3Params(*(float(v) for v in u3[k, 0]))))
        ops.append(U3Op(b, U3Params(*(float(v) for v in u3[k, 1]))))
        if k < d.layers:
            ops.append(GateOp((a, b), d.template.layer_gate(k)))
    return ops


def merge_single_qubit(ops: Iterable[Op]) -> list[Op]:
    """Fuse runs of U3 gates on the same qubit that no two-qubit op separates."""
    out: list[Op | None] = []
    pending: dict[int, int] = {}
    for op in ops:
        if isinstance(op, U3Op):
            if op.q in pending:
                idx = pending[op.q]
                prev = out[idx]
                assert isinstance(prev, U3Op)
                out[idx] = U3Op(op.q, u3_from_matrix(op.matrix() @ prev.matrix()))
            else:
                pending[op.q] = len(out)
                out.append(op)
        else:
            for q in op.qubits:
                pending.pop(q, None)
            out.append(op)
    return [op for op in out if op is not None]


def compile_circuit(
    c: Circuit,
    device: DeviceModel,
    iset: InstructionSet,
    cfg: OptimizerConfig = OptimizerConfig(),
    mode: Mode | str = Mode.APPROX,
    parallelism: int = 1,
    family_fidelity: float = 1.0,
) -> tuple[Circuit, CompileReport]:
    """Replace application unitaries with hardware-gate decompositions.

    Exact mode picks, per unitary, the exact decomposition with the highest
    ``f_d * f_h`` among the instruction-set gates calibrated on the edge.
    Approx mode maximizes ``f_d * f_h`` over gates and layer counts. Continuous
    mode requires a continuous instruction set and scores every layer with
    ``family_fidelity``. Identical unitaries are decomposed once per call.

    Raises:
        ConnectivityError: a two-qubit op acts on a non-edge.
        MissingCalibrationError: no instruction-set gate is calibrated on an edge.
        CapacityExceededError: an exact decomposition exceeded ``cfg.max_layers``.
    """
    mode = Mode(mode)
    if c.qubit_count > device.qubit_count:
        raise InvalidArgumentError(
            f"circuit uses {c.qubit_count} qubits but the device has {device.qubit_count}"
        )
    if (mode is Mode.CONTINUOUS) != iset.is_continuous:
        raise InvalidArgumentError(
            f"mode {mode.value} is incompatible with instruction set {iset.name}"
        )
    if not 0.0 < family_fidelity <= 1.0:
        raise InvalidArgumentError("family_fidelity must lie in (0, 1]")

    tasks: dict[tuple, _Task] = {}
    op_keys: dict[int, tuple] = {}
    for i, op in enumerate(c.ops):
        if isinstance(op, U3Op):
            continue
        a, b = op.qubits
        if not device.has_edge(a, b):
            raise ConnectivityError(f"op {i} acts on ({a}, {b}), which is not a device edge")
        if isinstance(op, GateOp):
            if mode is Mode.CONTINUOUS or op.gate not in iset or device.fidelity(a, b, op.gate) is None:
                raise MissingCalibrationError(
                    f"op {i}: hardware gate {op.gate} is not a calibrated {iset.name} gate on ({a}, {b})"
                )
            continue
        f1q = math.sqrt(device.f1q(a) * device.f1q(b))
        if mode is Mode.CONTINUOUS:
            task = _Task(op.matrix, (), f1q, iset.continuous, family_fidelity)
        else:
            task = _Task(op.matrix, _candidates(op, i, device, iset), f1q)
        key = _task_key(task)
        tasks.setdefault(key, task)
        op_keys[i] = key

    keys = list(tasks)
    if parallelism > 1 and len(keys) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            solved = list(pool.map(lambda k: _solve(tasks[k], mode, cfg), keys))
    else:
        solved = [_solve(tasks[k], mode, cfg) for k in keys]
    results = dict(zip(keys, solved))
    log.info("compiled %d two-qubit ops (%d distinct)", len(op_keys), len(keys))

    report = CompileReport()
    new_ops: list[Op] = []
    for i, op in enumerate(c.ops):
        if i not in op_keys:
            new_ops.append(op)
            continue
        d = results[op_keys[i]]
        label = d.template.gate.label if d.template.gate is not None else str(d.template.family)
        report.per_gate.append(GateReport(i, tuple(op.qubits), label, d.layers, d.f_d, d.f_h, d.f_u))
        new_ops.extend(_decomposition_ops(op.qubits, d))
    return Circuit(c.qubit_count, merge_single_qubit(new_ops)), report


# --------------------------------------------------------------------------
# Verification
# --------------------------------------------------------------------------


def _apply(state: np.ndarray, m: Matrix, qubits: Sequence[int]) -> np.ndarray:
    k = len(qubits)
    gate = np.asarray(m).reshape((2,) * (2 * k))
    moved = np.tensordot(gate, state, axes=(list(range(k, 2 * k)), list(qubits)))
    return np.moveaxis(moved, list(range(k)), list(qubits))


def circuit_unitary(c: Circuit) -> Matrix:
    """Full ``2**n x 2**n`` unitary; qubit 0 is the most significant bit."""
    n = c.qubit_count
    if n > MAX_VERIFY_QUBITS:
        raise CapacityExceededError(
            f"{n} qubits exceeds the {MAX_VERIFY_QUBITS}-qubit limit for full-unitary composition"
        )
    dim = 2**n
    state = np.eye(dim, dtype=complex).reshape((2,) * n + (dim,))
    for op in c.ops:
        if isinstance(op, U3Op):
            state = _apply(state, op.matrix(), [op.q])
        elif isinstance(op, UnitaryOp):
            state = _apply(state, op.matrix, list(op.qubits))
        else:
            state = _apply(state, op.matrix(), list(op.qubits))
    return state.reshape(dim, dim)


def verify_circuit(original: Circuit, compiled: Circuit) -> float:
    """``|Tr(U_c^dagger U_o)| / 2**n`` between the two circuits' unitaries."""
    if original.qubit_count != compiled.qubit_count:
        raise InvalidArgumentError("circuits have different qubit counts")
    u_o = circuit_unitary(original)
    u_c = circuit_unitary(compiled)
    return float(abs(np.vdot(u_c, u_o)) / u_o.shape[0])


__all__ = [
    "Circuit",
    "CompileReport",
    "GateOp",
    "GateReport",
    "Mode",
    "U3Op",
    "UnitaryOp",
    "circuit_from_json",
    "circuit_unitary",
    "compile_circuit",
    "gen_fh",
    "gen_qaoa",
    "gen_qft",
    "gen_qv",
    "load_circuit",
    "merge_single_qubit",
    "verify_circuit",
]
