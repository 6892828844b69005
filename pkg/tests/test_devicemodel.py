import io
import json
import math

import pytest

from gatesynth.devicemodel import (
    REGISTRY,
    REPORT_COLUMNS,
    UNBOUNDED,
    CalibrationCost,
    CalibrationCostModel,
    DeviceModel,
    calibration_cost,
    device_from_json,
    grid_device,
    instruction_set,
    load_device,
    ring_device,
    rows_to_csv,
    sycamore_device,
    tradeoff_report,
)
from gatesynth.errors import InvalidArgumentError, NotFoundError, ParseError
from gatesynth.qgates import ALIASES, fsim, xy_gate

CZ = ALIASES["cz"]


def ring_doc(n: int = 8) -> dict:
    edges = [
        {"a": i, "b": (i + 1) % n, "gates": {"cz": 0.95 - 0.01 * i, "xy:3.141592653589793": 0.97}}
        for i in range(n)
    ]
    return {"qubits": n, "edges": edges, "single_qubit_fidelity": {"0": 0.999}}


# --------------------------------------------------------------------------
# Loading
# --------------------------------------------------------------------------


def test_load_ring_device(tmp_path):
    path = tmp_path / "ring.json"
    path.write_text(json.dumps(ring_doc()))
    d = load_device(path)
    assert d.qubit_count == 8 and len(d.edges) == 8
    assert all(a < b for a, b in d.edges)
    assert d.fidelity(7, 0, CZ) == pytest.approx(0.88)
    assert d.fidelity(0, 1, xy_gate(math.pi)) == pytest.approx(0.97)
    assert d.f1q(0) == 0.999 and d.f1q(3) == 1.0


def test_load_from_stream():
    d = load_device(io.StringIO(json.dumps(ring_doc(4))))
    assert len(d.edges) == 4


def test_empty_edge_list_is_valid():
    d = device_from_json({"qubits": 3, "edges": []})
    assert d.edges == [] and d.qubit_count == 3


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda d: d["edges"][2]["gates"].update(cz=1.2), "edges[2].gates['cz']"),
        (lambda d: d["edges"][1]["gates"].update(cz=0.0), "edges[1]"),
        (lambda d: d["edges"][0].update(b=99), "edges[0].b"),
        (lambda d: d["edges"][3].update(b=3), "self-loop"),
        (lambda d: d["edges"][0]["gates"].update({"bogus": 0.9}), "bogus"),
        (lambda d: d["edges"][0].pop("a"), "missing field 'a'"),
        (lambda d: d.update(qubits="8"), "device.qubits"),
        (lambda d: d.update(extra=1), "unknown fields"),
        (lambda d: d["single_qubit_fidelity"].update({"9": 0.9}), "single_qubit_fidelity"),
        (lambda d: d["edges"].append({"a": 1, "b": 0}), "duplicate edge"),
    ],
)
def test_schema_violations_report_context(mutate, fragment):
    doc = ring_doc()
    mutate(doc)
    with pytest.raises(ParseError) as info:
        device_from_json(doc)
    assert fragment in str(info.value)


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"qubits": 2,\n "edges": [}')
    with pytest.raises(ParseError, match=r"line 2 column"):
        load_device(path)


def test_roundtrip(tmp_path):
    d = load_device(io.StringIO(json.dumps(ring_doc())))
    path = tmp_path / "out.json"
    d.dump(path)
    again = load_device(path)
    assert again == d
    assert load_device(io.StringIO(json.dumps(again.to_json()))).to_json() == d.to_json()


def test_model_validation():
    with pytest.raises(InvalidArgumentError):
        DeviceModel(2, [(0, 2)])
    with pytest.raises(InvalidArgumentError):
        DeviceModel(2, [(0, 1)], {((0, 1), CZ): 1.5})
    with pytest.raises(InvalidArgumentError):
        DeviceModel(3, [(0, 1)], {((1, 2), CZ): 0.9})


def test_gates_on_and_has_edge():
    d = DeviceModel(3, [(1, 0), (1, 2)], {((0, 1), CZ): 0.9, ((2, 1), ALIASES["syc"]): 0.8})
    assert d.edges == [(0, 1), (1, 2)]
    assert d.has_edge(1, 0) and not d.has_edge(0, 2)
    assert d.gates_on(1, 0) == {CZ: 0.9}
    assert d.fidelity(0, 1, ALIASES["syc"]) is None


# --------------------------------------------------------------------------
# Topology fixtures
# --------------------------------------------------------------------------


def test_sycamore_has_54_qubits_88_edges():
    d = sycamore_device()
    assert d.qubit_count == 54 and len(d.edges) == 88
    degree = [0] * 54
    for a, b in d.edges:
        degree[a] += 1
        degree[b] += 1
    assert max(degree) == 4 and min(degree) >= 1


@pytest.mark.parametrize("rows, cols, edges", [(1, 1, 0), (2, 2, 4), (3, 4, 17), (6, 9, 93)])
def test_grid_edge_count(rows, cols, edges):
    assert len(grid_device(rows, cols).edges) == edges == rows * (cols - 1) + cols * (rows - 1)


def test_ring_fixture():
    d = ring_device(8, {CZ: 0.9})
    assert len(d.edges) == 8 and d.fidelity(0, 7, CZ) == 0.9


# --------------------------------------------------------------------------
# Instruction sets
# --------------------------------------------------------------------------


def test_single_sets():
    assert instruction_set("S3").members == (ALIASES["cz"],)
    assert instruction_set("S7").members == (fsim(math.pi / 6, math.pi),)
    assert instruction_set("s5").members == (fsim(math.pi / 3, 0),)


def test_g1_and_r5():
    assert instruction_set("G1").members == (ALIASES["syc"], ALIASES["sqiswap"])
    r5 = instruction_set("R5").members
    assert r5 == (
        ALIASES["sqiswap"],
        ALIASES["cz"],
        ALIASES["iswap"],
        fsim(math.pi / 3, 0),
        fsim(3 * math.pi / 8, 0),
        ALIASES["swap"],
    )


def test_swap_only_in_g7_and_r5():
    with_swap = {name for name, s in REGISTRY.items() if ALIASES["swap"] in s.members}
    assert with_swap == {"G7", "R5"}


@pytest.mark.parametrize("family", ["G", "R"])
def test_registry_nesting(family):
    top = 7 if family == "G" else 5
    sets = [set(instruction_set(f"{family}{k}").members) for k in range(1, top + 1)]
    for small, big in zip(sets, sets[1:]):
        assert small < big


def test_registry_complete_and_continuous():
    for name in [f"S{k}" for k in range(1, 8)] + [f"G{k}" for k in range(1, 8)] + [f"R{k}" for k in range(1, 6)]:
        assert instruction_set(name).num_types >= 1
    assert instruction_set("FullFSim").is_continuous and instruction_set("fullxy").num_types is None


def test_unknown_set():
    with pytest.raises(NotFoundError, match="unknown instruction set"):
        instruction_set("G8")


# --------------------------------------------------------------------------
# Calibration cost
# --------------------------------------------------------------------------


def test_cost_unit_case():
    d = DeviceModel(2, [(0, 1)])
    assert calibration_cost(CalibrationCostModel(), d, 1) == CalibrationCost(10000, 2.0)


def test_cost_sycamore_order_1e7():
    cost = calibration_cost(CalibrationCostModel(), sycamore_device(), 10)
    assert cost.circuits == 8_800_000 and cost.hours == pytest.approx(1760.0)


@pytest.mark.parametrize("a, b", [(1, 1), (2, 3), (4, 6)])
def test_cost_linear_in_types(a, b):
    m, d = CalibrationCostModel(parallelism=3), grid_device(3, 3)
    ca, cb, cab = (calibration_cost(m, d, k) for k in (a, b, a + b))
    assert cab.circuits == ca.circuits + cb.circuits
    assert cab.hours == pytest.approx(ca.hours + cb.hours)


def test_cost_linear_in_edges():
    m = CalibrationCostModel()
    c1 = calibration_cost(m, grid_device(1, 2), 3)
    c2 = calibration_cost(m, grid_device(2, 2), 3)
    assert c2.circuits == 4 * c1.circuits


@pytest.mark.parametrize("types", [0, -1, 1.5, True])
def test_cost_rejects_bad_types(types):
    with pytest.raises(InvalidArgumentError):
        calibration_cost(CalibrationCostModel(), grid_device(2, 2), types)


def test_cost_model_steps_and_total():
    m = CalibrationCostModel()
    assert m.total_per_pair_per_type == 10000 == m.step_total
    assert m.circuits_xeb == 1000
    with pytest.raises(InvalidArgumentError):
        CalibrationCostModel(total_per_pair_per_type=5)
    with pytest.raises(InvalidArgumentError):
        CalibrationCostModel(parallelism=0)


def test_cost_model_from_dict_scales_total():
    m = CalibrationCostModel.from_dict({"total_per_pair_per_type": 20000, "parallelism": 2})
    assert m.step_total == 20000 and m.circuits_xeb == 2000
    with pytest.raises(ParseError):
        CalibrationCostModel.from_dict({"mystery": 1})
    with pytest.raises(ParseError):
        CalibrationCostModel.from_dict({"circuits_xeb": 10, "total_per_pair_per_type": 10})


def test_parallelism_divides_hours():
    d = grid_device(2, 2)
    assert calibration_cost(CalibrationCostModel(parallelism=4), d, 2).hours == pytest.approx(
        calibration_cost(CalibrationCostModel(), d, 2).hours / 4
    )


# --------------------------------------------------------------------------
# Trade-off report
# --------------------------------------------------------------------------


def test_tradeoff_rows_sorted_and_monotone():
    sets = [instruction_set(n) for n in ("G7", "S2", "FullFSim", "G1")]
    rows = tradeoff_report(sycamore_device(), sets, {"G7": 0.9, "S2": 0.5, "G1": 0.6, "FullFSim": 0.95})
    assert [r["set"] for r in rows] == ["S2", "G1", "G7", "FullFSim"]
    circuits = [r["circuits"] for r in rows[:3]]
    assert circuits == sorted(circuits)
    assert rows[-1]["circuits"] == UNBOUNDED and rows[-1]["types"] == UNBOUNDED


def test_tradeoff_missing_metric_and_empty():
    with pytest.raises(InvalidArgumentError):
        tradeoff_report(grid_device(2, 2), [instruction_set("S1")], {})
    assert tradeoff_report(grid_device(2, 2), [], {}) == []


def test_tradeoff_csv_rfc4180():
    rows = tradeoff_report(grid_device(2, 2), [instruction_set("S1"), instruction_set("G2")], {"S1": 0.1, "G2": 0.2})
    text = rows_to_csv(rows, REPORT_COLUMNS)
    lines = text.split("\r\n")
    assert lines[0] == "set,types,circuits,hours,metric"
    assert lines[1] == "S1,1,40000,8.0,0.1"
    assert text.endswith("\r\n")
