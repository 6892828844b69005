"""Command-line front end.

Every subcommand writes a JSON report (``--out``) and exits with

* 0 on success,
* 2 on unusable input (bad flags, malformed or missing input files, bad gate syntax),
* 3 when a layer or size budget is exceeded,
* 4 when calibration data is missing,
* 5 when an output file cannot be written,
* 1 for any other library error.

``GATESYNTH_PARALLELISM`` and ``GATESYNTH_LOG_LEVEL`` set the defaults of
``--parallelism`` and ``--log-level``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from gatesynth import __version__
from gatesynth.circuitpass import (
    MAX_VERIFY_QUBITS,
    Mode,
    compile_circuit,
    load_circuit,
    verify_circuit,
)
from gatesynth.decomp import (
    FAMILIES,
    Decomposition,
    OptimizerConfig,
    child_seed,
    decompose_approx,
    decompose_continuous,
    decompose_exact,
    decompose_exact_best,
)
from gatesynth.devicemodel import (
    CalibrationCostModel,
    DeviceModel,
    calibration_cost,
    grid_device,
    instruction_set,
    load_device,
    ring_device,
    sycamore_device,
)
from gatesynth.errors import (
    CapacityExceededError,
    GateSynthError,
    InvalidArgumentError,
    MissingCalibrationError,
    NotFoundError,
    ParseError,
)
from gatesynth.qgates import (
    ALIASES,
    SWAP,
    GateKind,
    Matrix,
    controlled_phase,
    haar_su4,
    matrix_from_json,
    parse_gate,
    xxyy_interaction,
    zz_interaction,
)
from gatesynth.sweep import (
    Ensemble,
    SweepSpec,
    default_size,
    dump_result,
    export_heatmap_csv,
    run_sweep,
)

log = logging.getLogger("gatesynth")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_CAPACITY = 3
EXIT_CALIBRATION = 4
EXIT_IO = 5

ENV_PARALLELISM = "GATESYNTH_PARALLELISM"
ENV_LOG_LEVEL = "GATESYNTH_LOG_LEVEL"


class InputError(GateSynthError):
    """An input file could not be read."""


class OutputError(GateSynthError):
    """A report file could not be written."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# Input helpers
# --------------------------------------------------------------------------


def _read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _load_input(loader: Callable[[Any], Any], path: str) -> Any:
    try:
        return loader(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _named_target(name: str, seed: int) -> Matrix:
    """Resolve ``--target`` names: identity, swap, a gate alias, qv, or ``kind:param``."""
    text = name.strip().lower()
    if text == "identity":
        return np.eye(4, dtype=complex)
    if text == "swap":
        return SWAP.copy()
    if text in ("qv", "haar"):
        return haar_su4(seed)
    head, sep, rest = text.partition(":")
    if sep and head in ("zz", "qaoa", "xxyy", "qft", "cp"):
        try:
            value = float(rest)
        except ValueError as exc:
            raise ParseError(f"target {name!r}: {exc}") from exc
        if head in ("zz", "qaoa"):
            return zz_interaction(value)
        if head == "xxyy":
            return xxyy_interaction(value)
        if head == "qft":
            if not value.is_integer() or value < 1:
                raise ParseError(f"target {name!r}: qft takes an integer t >= 1")
            return controlled_phase(math.pi / 2 ** int(value))
        return controlled_phase(value)
    if text in ALIASES:
        return ALIASES[text].matrix()
    if sep and head in ("fsim", "xy", "cphase", "cz"):
        return parse_gate(text).matrix()
    raise ParseError(
        f"unknown target {name!r}; expected a matrix file, identity, swap, qv, "
        "zz:<beta>, xxyy:<beta>, qft:<t>, cp:<phi> or a gate"
    )


def resolve_target(spec: str, seed: int) -> Matrix:
    """Matrix JSON file (nested ``[re, im]`` pairs, or ``{"matrix": ...}``) or a named target."""
    if Path(spec).is_file():
        try:
            data = json.loads(_read_text(spec))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{spec}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        if isinstance(data, dict):
            if "matrix" not in data:
                raise ParseError(f"{spec}: expected a 'matrix' field")
            data = data["matrix"]
        return matrix_from_json(data)
    return _named_target(spec, seed)


def resolve_gates(spec: str) -> tuple[list[GateKind], str | None, str]:
    """Gate syntax or instruction-set name -> (gates, continuous family, label)."""
    try:
        return [parse_gate(spec)], None, spec
    except ParseError:
        pass
    try:
        iset = instruction_set(spec)
    except NotFoundError:
        raise ParseError(f"{spec!r} is neither a gate nor an instruction-set name") from None
    return list(iset.members), iset.continuous, iset.name


def resolve_device(spec: str) -> DeviceModel:
    """Device JSON file, or a built-in topology: sycamore54, ring<N>, grid:<R>x<C>."""
    path = Path(spec)
    if path.suffix == ".json" or path.exists():
        return _load_input(load_device, spec)
    text = spec.lower()
    if text in ("sycamore", "sycamore54"):
        return sycamore_device()
    if text.startswith("ring"):
        try:
            return ring_device(int(text[4:] or 8))
        except ValueError as exc:
            raise ParseError(f"device {spec!r}: {exc}") from exc
    if text.startswith("grid:"):
        rows, _, cols = text[5:].partition("x")
        try:
            return grid_device(int(rows), int(cols))
        except ValueError as exc:
            raise ParseError(f"device {spec!r}: {exc}") from exc
    raise ParseError(f"unknown device {spec!r}")


def parse_grid(text: str) -> tuple[int, int]:
    rows, sep, cols = text.lower().partition("x")
    try:
        if not sep:
            raise ValueError("expected <theta_points>x<phi_points>")
        return int(rows), int(cols)
    except ValueError as exc:
        raise ParseError(f"grid {text!r}: {exc}") from exc


# --------------------------------------------------------------------------
# Output helpers
# --------------------------------------------------------------------------


def _write(path: str | Path, text: str) -> None:
    try:
        p = Path(path)
        if p.parent and not p.parent.exists():
            p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _write_report(args: argparse.Namespace, payload: dict[str, Any]) -> None:
    report = {"command": args.command, "seed": args.seed, **payload}
    _write(args.out, json.dumps(report, indent=2, sort_keys=True) + "\n")
    log.info("wrote %s", args.out)


def _config(args: argparse.Namespace) -> OptimizerConfig:
    overrides = {
        "max_layers": args.max_layers,
        "restarts": args.restarts,
        "grad_step": args.grad_step,
        "conv_tol": args.conv_tol,
        "max_iters": args.max_iters,
        "exact_infidelity": args.exact_infidelity,
    }
    data = {k: v for k, v in overrides.items() if v is not None}
    data["rng_seed"] = args.seed
    return OptimizerConfig(**data)


def _fidelity_line(d: Decomposition) -> str:
    return f"layers={d.layers} f_d={d.f_d:.10f} f_h={d.f_h:.10f} f_u={d.f_u:.10f}"


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_decompose(args: argparse.Namespace) -> int:
    cfg = _config(args)
    target = resolve_target(args.target, args.seed)
    gates, family, label = resolve_gates(args.gate)
    mode = Mode(args.mode)
    if family is not None and mode is not Mode.CONTINUOUS:
        mode = Mode.CONTINUOUS
    if mode is Mode.CONTINUOUS:
        if family is None:
            raise InvalidArgumentError(f"continuous mode needs a family ({', '.join(FAMILIES)})")
        d = decompose_continuous(target, family, cfg).with_hardware_fidelity(args.fidelity, args.f1q)
    else:
        candidates = [(g, args.fidelity) for g in gates]
        if mode is Mode.APPROX:
            d = decompose_approx(target, candidates, cfg, f1q=args.f1q, parallelism=args.parallelism)
        elif len(candidates) == 1:
            d = decompose_exact(target, gates[0], cfg).with_hardware_fidelity(args.fidelity, args.f1q)
        else:
            d = decompose_exact_best(target, candidates, cfg, f1q=args.f1q)
    print(_fidelity_line(d))
    _write_report(
        args,
        {
            "gate": label,
            "mode": mode.value,
            "optimizer": cfg.__dict__,
            "decomposition": d.to_json(),
        },
    )
    return EXIT_OK


def cmd_compile(args: argparse.Namespace) -> int:
    cfg = _config(args)
    circuit = _load_input(load_circuit, args.circuit)
    device = resolve_device(args.device)
    iset = instruction_set(args.iset)
    mode = Mode(args.mode)
    compiled, report = compile_circuit(
        circuit,
        device,
        iset,
        cfg,
        mode=mode,
        parallelism=args.parallelism,
        family_fidelity=args.family_fidelity,
    )
    if circuit.qubit_count <= MAX_VERIFY_QUBITS:
        report.verification = verify_circuit(circuit, compiled)
    for g in report.per_gate:
        print(
            f"op {g.op_index} {g.qubits}: gate={g.gate} layers={g.layers} "
            f"f_d={g.f_d:.10f} f_h={g.f_h:.10f} f_u={g.f_u:.10f}"
        )
    print(f"total two_qubit_count={report.two_qubit_count} est_fidelity={report.est_fidelity:.10f}")
    if report.verification is not None:
        print(f"verification_fidelity={report.verification:.12f}")
    if args.compiled_out:
        _write(args.compiled_out, json.dumps(compiled.to_json(), indent=2) + "\n")
    if args.csv:
        _write(args.csv, report.to_csv())
    _write_report(
        args,
        {"iset": iset.name, "mode": mode.value, "optimizer": cfg.__dict__, "report": report.to_json()},
    )
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _config(args)
    theta_points, phi_points = parse_grid(args.grid)
    ensemble = Ensemble(args.ensemble.upper())
    size = args.size if args.size is not None else default_size(ensemble, full=args.full_size)
    spec = SweepSpec(
        ensemble,
        size,
        theta_points,
        phi_points,
        seed=args.seed,
        exact_infidelity=cfg.exact_infidelity,
    )
    result = run_sweep(spec, cfg, parallelism=args.parallelism)
    fails = int(result.failures.sum())
    print(
        f"sweep {ensemble.value} size={size} grid={theta_points}x{phi_points} "
        f"failures={fails} wall={result.wall_time:.1f}s"
    )
    if args.csv:
        try:
            export_heatmap_csv(result, args.csv)
        except OSError as exc:
            raise OutputError(f"cannot write {args.csv}: {exc.strerror or exc}") from exc
    if args.result_json:
        try:
            dump_result(result, args.result_json)
        except OSError as exc:
            raise OutputError(f"cannot write {args.result_json}: {exc.strerror or exc}") from exc
    payload = result.to_json()
    payload.pop("wall_time_s")
    _write_report(args, {"sweep": payload, "optimizer": cfg.__dict__})
    return EXIT_OK


def cmd_calibrate_cost(args: argparse.Namespace) -> int:
    device = resolve_device(args.device)
    if args.config:
        try:
            data = json.loads(_read_text(args.config))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{args.config}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ParseError(f"{args.config}: expected a JSON object")
        model = CalibrationCostModel.from_dict(data)
    else:
        model = CalibrationCostModel()
    cost = calibration_cost(model, device, args.types)
    print(f"edges={len(device.edges)} types={args.types} circuits={cost.circuits:.3e} hours={cost.hours:g}")
    _write_report(
        args,
        {
            "edges": len(device.edges),
            "types": args.types,
            "model": model.to_json(),
            "circuits": cost.circuits,
            "hours": cost.hours,
        },
    )
    return EXIT_OK


def _bench_run(gates: int, threads: int, cfg: OptimizerConfig, gate: GateKind) -> float:
    targets = [haar_su4(np.random.default_rng(child_seed(cfg.rng_seed, k))) for k in range(gates)]
    start = time.perf_counter()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda t: decompose_exact(t, gate, cfg), targets))
    else:
        for t in targets:
            decompose_exact(t, gate, cfg)
    return time.perf_counter() - start


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _config(args)
    gate = parse_gate(args.gate)
    # Warm the compiled kernels so the first timing is not inflated.
    decompose_exact(haar_su4(0), gate, cfg)
    serial = _bench_run(args.gates, 1, cfg, gate)
    parallel = _bench_run(args.gates, args.threads, cfg, gate)
    speedup = serial / parallel if parallel > 0 else float("inf")
    cores = os.cpu_count() or 1
    expected = 0.75 * min(args.threads, cores)
    print(
        f"bench gates={args.gates} gate={gate.label} serial={serial:.3f}s "
        f"threads={args.threads} parallel={parallel:.3f}s speedup={speedup:.2f} cores={cores}"
    )
    warning = None
    if speedup < expected:
        warning = (
            f"speedup {speedup:.2f} below {expected:.2f} "
            f"(0.75 x min(threads, cores) with {cores} core(s))"
        )
        print(f"warning: {warning}", file=sys.stderr)
    _write_report(
        args,
        {
            "gates": args.gates,
            "gate": gate.label,
            "threads": args.threads,
            "cores": cores,
            "serial_s": serial,
            "parallel_s": parallel,
            "decompositions_per_s": {"1": args.gates / serial, str(args.threads): args.gates / parallel},
            "speedup": speedup,
            "warning": warning,
        },
    )
    return EXIT_OK


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ParseError(f"{name}={raw!r} is not an integer") from None
    if value < 1:
        raise ParseError(f"{name} must be >= 1")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must be >= 1")
    return value


def _fidelity(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text!r} must lie in (0, 1]")
    return value


def _common(p: argparse.ArgumentParser, out_default: str) -> None:
    g = p.add_argument_group("run options")
    g.add_argument("--out", default=out_default, help=f"JSON report path (default {out_default})")
    g.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    g.add_argument(
        "--parallelism",
        type=_positive_int,
        default=None,
        help=f"worker threads (default ${ENV_PARALLELISM} or 1)",
    )
    g.add_argument(
        "--log-level",
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        type=str.upper,
        help=f"logging level (default ${ENV_LOG_LEVEL} or WARNING)",
    )


def _optimizer(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("optimizer overrides")
    g.add_argument("--max-layers", type=int, help="largest template tried (default 10)")
    g.add_argument("--restarts", type=_positive_int, help="random starts per layer count (default 10)")
    g.add_argument("--grad-step", type=float, help="finite-difference step for gradient checks (default 1e-7)")
    g.add_argument("--conv-tol", type=float, help="gradient-norm convergence tolerance (default 1e-10)")
    g.add_argument("--max-iters", type=_positive_int, help="BFGS iterations per start (default 1000)")
    g.add_argument("--exact-infidelity", type=float, help="exactness threshold on 1 - f_d (default 1e-6)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="gatesynth",
        description="Noise-adaptive two-qubit gate decomposition and instruction-set analysis.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("decompose", help="decompose one two-qubit unitary")
    p.add_argument(
        "--target",
        required=True,
        help="matrix JSON file, or identity | swap | qv (Haar, from --seed) | zz:<beta> | "
        "xxyy:<beta> | qft:<t> | cp:<phi> | a gate name",
    )
    p.add_argument(
        "--gate",
        required=True,
        help="cz | syc | sqiswap | iswap | swap | fsim:<theta>,<phi> | xy:<theta> | "
        "cphase:<phi>, or an instruction-set name (S1..S7, G1..G7, R1..R5, FullFSim, FullXY)",
    )
    p.add_argument("--mode", choices=[m.value for m in Mode], default="exact", help="default exact")
    p.add_argument("--fidelity", type=_fidelity, default=1.0, help="per-application two-qubit gate fidelity")
    p.add_argument("--f1q", type=_fidelity, default=1.0, help="single-qubit gate fidelity")
    _common(p, "decompose_report.json")
    _optimizer(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("compile", help="compile a circuit onto a device")
    p.add_argument("--circuit", required=True, help="circuit JSON file")
    p.add_argument("--device", required=True, help="device JSON file, or sycamore54 | ring<N> | grid:<R>x<C>")
    p.add_argument("--iset", required=True, help="instruction-set name")
    p.add_argument("--mode", choices=[m.value for m in Mode], default="approx", help="default approx")
    p.add_argument("--family-fidelity", type=_fidelity, default=1.0, help="per-layer fidelity in continuous mode")
    p.add_argument("--compiled-out", help="write the compiled circuit JSON here")
    p.add_argument("--csv", help="write the per-gate report CSV here")
    _common(p, "compile_report.json")
    _optimizer(p)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("sweep", help="average gate counts over the fSim grid")
    p.add_argument(
        "--ensemble",
        required=True,
        choices=[e.value.lower() for e in Ensemble],
        type=str.lower,
        help="application ensemble",
    )
    p.add_argument("--grid", default="19x19", help="<theta_points>x<phi_points> (default 19x19)")
    p.add_argument("--size", type=_positive_int, help="ensemble size (default: desk-scale size)")
    p.add_argument("--full-size", action="store_true", help="use the full published ensemble sizes")
    p.add_argument("--csv", help="heatmap CSV path")
    p.add_argument("--result-json", help="full sweep result JSON, including wall time")
    _common(p, "sweep_report.json")
    _optimizer(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate-cost", help="calibration budget for a device")
    p.add_argument("--device", required=True, help="device JSON file, or sycamore54 | ring<N> | grid:<R>x<C>")
    p.add_argument("--types", type=_positive_int, required=True, help="number of gate types")
    p.add_argument("--config", help="JSON object overriding the cost-model constants")
    _common(p, "calibrate_cost_report.json")
    p.set_defaults(func=cmd_calibrate_cost)

    p = sub.add_parser("bench", help="decomposition throughput versus thread count")
    p.add_argument("--gates", type=_positive_int, default=100, help="Haar targets to decompose (default 100)")
    p.add_argument("--threads", type=_positive_int, default=4, help="threads for the parallel run (default 4)")
    p.add_argument("--gate", default="cz", help="hardware gate (default cz)")
    _common(p, "bench_report.json")
    _optimizer(p)
    p.set_defaults(func=cmd_bench)
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, OutputError):
        return EXIT_IO
    if isinstance(exc, (InputError, ParseError, InvalidArgumentError, NotFoundError)):
        return EXIT_PARSE
    if isinstance(exc, CapacityExceededError):
        return EXIT_CAPACITY
    if isinstance(exc, MissingCalibrationError):
        return EXIT_CALIBRATION
    return EXIT_ERROR


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.parallelism is None:
            args.parallelism = _env_int(ENV_PARALLELISM, 1)
        level = args.log_level or os.environ.get(ENV_LOG_LEVEL, "WARNING").upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            raise ParseError(f"{ENV_LOG_LEVEL}={level!r} is not a log level")
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except GateSynthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
