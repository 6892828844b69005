"""Numerical two-qubit gate synthesis over layered templates.

A template with ``i`` layers is ``L_i G L_{i-1} ... G L_0`` where each ``L_k``
is a pair of U3 rotations and ``G`` the hardware two-qubit gate. The U3 angles
(and in continuous mode the per-layer gate angles) are fitted with BFGS from
several random starts, minimizing ``1 - |Tr(U^dagger T)| / 4``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from gatesynth import _kernels as kern
from gatesynth.errors import CapacityExceededError, InvalidArgumentError
from gatesynth.qgates import (
    GateKind,
    Matrix,
    check_unitary,
    hs_fidelity,
    matrix_to_json,
    u3_matrix,
)

log = logging.getLogger(__name__)

FULL_FSIM = "FullFSim"
FULL_XY = "FullXY"
FAMILIES = (FULL_FSIM, FULL_XY)

# Objective value below which a single BFGS run stops early.
_F_FLOOR = 1e-14
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class OptimizerConfig:
    max_layers: int = 10
    restarts: int = 10
    grad_step: float = 1e-7
    conv_tol: float = 1e-10
    max_iters: int = 1000
    exact_infidelity: float = 1e-6
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.max_layers < 0:
            raise InvalidArgumentError("max_layers must be >= 0")
        if self.restarts < 1:
            raise InvalidArgumentError("restarts must be >= 1")
        if not 0.0 < self.exact_infidelity < 1.0:
            raise InvalidArgumentError("exact_infidelity must lie in (0, 1)")
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")
        if not self.grad_step > 0:
            raise InvalidArgumentError("grad_step must be positive")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> OptimizerConfig:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidArgumentError(f"unknown optimizer options: {sorted(unknown)}")
        return cls(**data)


@dataclass
class Template:
    """A layered template and its parameter vector.

    ``gate`` is set for a fixed hardware gate; ``family`` (``FullFSim`` or
    ``FullXY``) marks continuous mode, where ``params`` carries ``2 * layers``
    trailing ``(theta, phi)`` entries after the ``6 * (layers + 1)`` U3 angles.
    """

    layers: int
    params: np.ndarray
    gate: GateKind | None = None
    family: str | None = None

    def __post_init__(self) -> None:
        self.params = np.asarray(self.params, dtype=float)
        if (self.gate is None) == (self.family is None):
            raise InvalidArgumentError("template needs exactly one of gate or family")
        if self.family is not None and self.family not in FAMILIES:
            raise InvalidArgumentError(f"unknown family {self.family!r}")
        if self.layers < 0:
            raise InvalidArgumentError("layers must be >= 0")
        expected = template_param_count(self.layers, continuous=self.family is not None)
        if self.params.shape != (expected,):
            raise InvalidArgumentError(
                f"{self.layers}-layer template needs {expected} parameters, "
                f"got {self.params.shape}"
            )

    @property
    def u3_params(self) -> np.ndarray:
        """U3 angles with shape ``(layers + 1, 2, 3)``."""
        return self.params[: 6 * (self.layers + 1)].reshape(self.layers + 1, 2, 3)

    def layer_gate(self, k: int) -> GateKind:
        """Hardware gate of two-qubit layer ``k`` (``0 <= k < layers``)."""
        if self.gate is not None:
            return self.gate
        base = 6 * (self.layers + 1)
        theta, phi = self.params[base + 2 * k], self.params[base + 2 * k + 1]
        return GateKind(float(theta), float(phi))


def template_param_count(layers: int, continuous: bool = False) -> int:
    return 6 * (layers + 1) + (2 * layers if continuous else 0)


def build_template_unitary(t: Template) -> Matrix:
    """Multiply out a template; the rightmost (first applied) layer is ``L_0``."""
    u3 = t.u3_params
    u = np.kron(u3_matrix(*u3[0, 0]), u3_matrix(*u3[0, 1]))
    for k in range(t.layers):
        g = t.layer_gate(k).matrix()
        local = np.kron(u3_matrix(*u3[k + 1, 0]), u3_matrix(*u3[k + 1, 1]))
        u = local @ g @ u
    return u


@dataclass
class Decomposition:
    """Optimized template plus its fidelity figures.

    ``f_d`` is the decomposition fidelity against ``target``, ``f_h`` the
    hardware fidelity estimate, and ``f_u = f_d * f_h``.
    """

    template: Template
    target: Matrix
    f_d: float
    f_h: float = 1.0
    f_u: float = field(init=False)

    def __post_init__(self) -> None:
        self.f_u = self.f_d * self.f_h

    @property
    def layers(self) -> int:
        return self.template.layers

    @property
    def two_qubit_count(self) -> int:
        return self.template.layers

    @property
    def infidelity(self) -> float:
        return 1.0 - self.f_d

    def unitary(self) -> Matrix:
        return build_template_unitary(self.template)

    def with_hardware_fidelity(self, per_gate: float, f1q: float = 1.0) -> Decomposition:
        return replace(self, f_h=hardware_fidelity(per_gate, self.layers, f1q))

    def to_json(self) -> dict[str, Any]:
        t = self.template
        out: dict[str, Any] = {"target": matrix_to_json(self.target)}
        if t.gate is not None:
            out["gate"] = t.gate.to_json()
        else:
            out["family"] = t.family
            out["gates"] = [t.layer_gate(k).to_json() for k in range(t.layers)]
        out.update(
            layers=t.layers,
            u3_params=[[float(a) for a in p] for p in t.u3_params.reshape(-1, 3)],
            f_d=self.f_d,
            f_h=self.f_h,
            f_u=self.f_u,
        )
        return out


def hardware_fidelity(per_gate: float, layers: int, f1q: float = 1.0) -> float:
    """Product of gate fidelities: ``layers`` two-qubit and ``2 (layers + 1)`` U3 gates."""
    return per_gate**layers * f1q ** (2 * (layers + 1))


def child_seed(seed: int, *key: int) -> np.random.SeedSequence:
    """Derive an independent stream for task ``key`` of a run seeded by ``seed``.

    The stream is ``SeedSequence(entropy=seed, spawn_key=key)``; it does not
    depend on scheduling, so serial and parallel runs draw identical numbers.
    """
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))


def _gate_mode(gate: GateKind | None, family: str | None) -> tuple[int, np.ndarray]:
    if gate is not None:
        return kern.GATE_FIXED, np.ascontiguousarray(gate.matrix())
    mode = kern.GATE_FSIM if family == FULL_FSIM else kern.GATE_XY
    return mode, np.eye(4, dtype=complex)


def _expand_continuous(x: np.ndarray, layers: int, family: str) -> np.ndarray:
    """Map the optimizer vector to the template layout (theta, phi per layer)."""
    if family == FULL_FSIM:
        return x
    n_u3 = 6 * (layers + 1)
    gate_params = np.zeros((layers, 2))
    gate_params[:, 0] = x[n_u3:]
    return np.concatenate([x[:n_u3], gate_params.ravel()])


def _optimize(
    target: Matrix,
    layers: int,
    cfg: OptimizerConfig,
    gate: GateKind | None = None,
    family: str | None = None,
    stop_at: float | None = None,
) -> Decomposition:
    mode, gate_mat = _gate_mode(gate, family)
    n = kern.n_params(layers, mode)
    rng = np.random.default_rng(child_seed(cfg.rng_seed, layers))
    x0s = rng.uniform(0.0, 2 * math.pi, size=(cfg.restarts, n))
    target_dag = np.ascontiguousarray(target.conj().T)
    best_x, _, ran = kern.multistart(
        x0s,
        layers,
        mode,
        gate_mat,
        target_dag,
        cfg.max_iters,
        cfg.conv_tol,
        _F_FLOOR,
        -1.0 if stop_at is None else stop_at,
    )
    params = best_x if family is None else _expand_continuous(best_x, layers, family)
    template = Template(layers, params, gate=gate, family=family)
    # Re-evaluate through the plain matrix product so f_d is reproducible.
    f_d = hs_fidelity(build_template_unitary(template), target)
    log.debug("layers=%d gate=%s family=%s f_d=%.12f starts=%d", layers, gate, family, f_d, ran)
    return Decomposition(template, target, f_d)


def _validate_target(target: Any) -> Matrix:
    return check_unitary(target, atol=1e-8, dim=4)


def optimize_fixed(
    target: Matrix,
    gate: GateKind,
    layers: int,
    cfg: OptimizerConfig = OptimizerConfig(),
    stop_at: float | None = None,
) -> Decomposition:
    """Best decomposition of ``target`` with exactly ``layers`` applications of ``gate``.

    Runs ``cfg.restarts`` BFGS optimizations from uniform random angles in
    ``[0, 2 pi)`` and keeps the best. When ``stop_at`` is given, the remaining
    restarts are skipped once one reaches infidelity ``<= stop_at``. The
    result carries ``f_h = 1``.
    """
    target = _validate_target(target)
    if layers < 0:
        raise InvalidArgumentError("layers must be >= 0")
    return _optimize(target, layers, cfg, gate=gate, stop_at=stop_at)


def _grow_until_exact(target: Matrix, cfg: OptimizerConfig, **kind: Any) -> Decomposition:
    best: Decomposition | None = None
    for layers in range(cfg.max_layers + 1):
        d = _optimize(target, layers, cfg, stop_at=cfg.exact_infidelity, **kind)
        if d.infidelity <= cfg.exact_infidelity:
            return d
        if best is None or d.f_d > best.f_d:
            best = d
    raise CapacityExceededError(
        f"no decomposition within {cfg.max_layers} layers reached infidelity "
        f"{cfg.exact_infidelity:g} (best {best.infidelity:.3e})",
        best=best,
    )


def decompose_exact(
    target: Matrix, gate: GateKind, cfg: OptimizerConfig = OptimizerConfig()
) -> Decomposition:
    """Smallest layer count (from 0) whose infidelity meets ``cfg.exact_infidelity``.

    Raises:
        CapacityExceededError: nothing within ``cfg.max_layers``; ``.best``
            holds the highest-fidelity attempt.
    """
    target = _validate_target(target)
    return _grow_until_exact(target, cfg, gate=gate)


def decompose_continuous(
    target: Matrix, family: str, cfg: OptimizerConfig = OptimizerConfig()
) -> Decomposition:
    """Like :func:`decompose_exact` but every layer's gate angles are free.

    ``FullFSim`` frees (theta, phi) per layer; ``FullXY`` frees theta with phi
    pinned at 0.
    """
    if family not in FAMILIES:
        raise InvalidArgumentError(f"unknown family {family!r}; expected one of {FAMILIES}")
    target = _validate_target(target)
    return _grow_until_exact(target, cfg, family=family)


def _better(a: tuple[Decomposition, int], b: tuple[Decomposition, int] | None) -> bool:
    """True if candidate ``a`` beats ``b``; ties prefer fewer layers, then earlier gate."""
    if b is None:
        return True
    da, ia = a
    db, ib = b
    if da.f_u > db.f_u + _TIE_TOL:
        return True
    if da.f_u < db.f_u - _TIE_TOL:
        return False
    return (da.layers, ia) < (db.layers, ib)


def _approx_for_gate(
    target: Matrix,
    gate: GateKind,
    fidelity: float,
    index: int,
    cfg: OptimizerConfig,
    f1q: float,
    incumbent: tuple[Decomposition, int] | None,
) -> tuple[Decomposition, int] | None:
    best = incumbent
    for layers in range(cfg.max_layers + 1):
        f_h = hardware_fidelity(fidelity, layers, f1q)
        # f_u <= f_h and f_h only shrinks with more layers.
        if best is not None and f_h < best[0].f_u - _TIE_TOL:
            break
        d = _optimize(target, layers, cfg, gate=gate, stop_at=cfg.exact_infidelity)
        d = replace(d, f_h=f_h)
        if _better((d, index), best):
            best = (d, index)
        # Already exact: extra layers cannot raise f_d meaningfully but lower f_h.
        if d.infidelity <= cfg.exact_infidelity:
            break
    return best


def decompose_approx(
    target: Matrix,
    gates: Sequence[tuple[GateKind, float]],
    cfg: OptimizerConfig = OptimizerConfig(),
    f1q: float = 1.0,
    parallelism: int = 1,
) -> Decomposition:
    """Maximize ``f_d * f_h`` over gate kinds and layer counts.

    ``gates`` pairs each candidate hardware gate with its per-application
    fidelity. ``f_h`` multiplies the two-qubit gate fidelities of the
    template and, if ``f1q < 1``, the fidelities of its ``2 (i + 1)`` U3 gates.
    Ties within 1e-12 prefer fewer layers, then the earlier gate in ``gates``.
    """
    if not gates:
        raise InvalidArgumentError("need at least one gate kind")
    for g, fid in gates:
        if not isinstance(g, GateKind):
            raise InvalidArgumentError(f"expected GateKind, got {g!r}")
        if not 0.0 < fid <= 1.0:
            raise InvalidArgumentError(f"fidelity of {g} must lie in (0, 1], got {fid}")
    if not 0.0 < f1q <= 1.0:
        raise InvalidArgumentError("f1q must lie in (0, 1]")
    target = _validate_target(target)

    if parallelism > 1 and len(gates) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = [
                pool.submit(_approx_for_gate, target, g, fid, j, cfg, f1q, None)
                for j, (g, fid) in enumerate(gates)
            ]
            results = [f.result() for f in futures]
        best = None
        for r in results:
            if r is not None and _better(r, best):
                best = r
    else:
        best = None
        for j, (g, fid) in enumerate(gates):
            best = _approx_for_gate(target, g, fid, j, cfg, f1q, best)
    assert best is not None
    return best[0]


def decompose_exact_best(
    target: Matrix,
    gates: Sequence[tuple[GateKind, float]],
    cfg: OptimizerConfig = OptimizerConfig(),
    f1q: float = 1.0,
) -> Decomposition:
    """Exact decomposition per gate kind, keeping the highest ``f_d * f_h``.

    Gate kinds that exceed ``cfg.max_layers`` are skipped; ties follow the
    same rule as :func:`decompose_approx`.

    Raises:
        CapacityExceededError: no gate kind decomposes ``target`` exactly.
    """
    if not gates:
        raise InvalidArgumentError("need at least one gate kind")
    target = _validate_target(target)
    best: tuple[Decomposition, int] | None = None
    failure: CapacityExceededError | None = None
    for j, (gate, fid) in enumerate(gates):
        try:
            d = decompose_exact(target, gate, cfg).with_hardware_fidelity(fid, f1q)
        except CapacityExceededError as exc:
            failure = exc
            continue
        if _better((d, j), best):
            best = (d, j)
    if best is None:
        assert failure is not None
        raise failure
    return best[0]


def template_objective(t: Template, target: Matrix) -> float:
    """``1 - hs_fidelity`` of the template against ``target``."""
    return 1.0 - hs_fidelity(build_template_unitary(t), target)


def optimizer_gradient(t: Template, target: Matrix) -> np.ndarray:
    """Gradient of the objective as the optimizer sees it (free parameters only).

    For ``FullXY`` templates the pinned phi entries are dropped.
    """
    mode, gate_mat = _gate_mode(t.gate, t.family)
    x = t.params
    if t.family == FULL_XY:
        n_u3 = 6 * (t.layers + 1)
        x = np.concatenate([x[:n_u3], x[n_u3::2]])
    grad = np.empty(x.shape[0])
    kern.objective_and_grad(
        np.ascontiguousarray(x), t.layers, mode, gate_mat, np.ascontiguousarray(target.conj().T), grad
    )
    return grad


def finite_difference_gradient(
    t: Template, target: Matrix, step: float | None = None, cfg: OptimizerConfig = OptimizerConfig()
) -> np.ndarray:
    """Central-difference gradient of :func:`template_objective` (all parameters)."""
    h = cfg.grad_step if step is None else step
    grad = np.empty(t.params.shape[0])
    for p in range(grad.shape[0]):
        plus = t.params.copy()
        minus = t.params.copy()
        plus[p] += h
        minus[p] -= h
        grad[p] = (
            template_objective(replace(t, params=plus), target)
            - template_objective(replace(t, params=minus), target)
        ) / (2 * h)
    return grad


__all__ = [
    "FAMILIES",
    "FULL_FSIM",
    "FULL_XY",
    "Decomposition",
    "OptimizerConfig",
    "Template",
    "build_template_unitary",
    "child_seed",
    "decompose_approx",
    "decompose_continuous",
    "decompose_exact",
    "decompose_exact_best",
    "finite_difference_gradient",
    "hardware_fidelity",
    "optimize_fixed",
    "optimizer_gradient",
    "template_objective",
    "template_param_count",
]
