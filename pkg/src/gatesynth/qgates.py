"""Gate matrices, fidelity metrics and unitary ensembles.

Conventions used throughout the package:

* Two-qubit matrices act on ``|q_a q_b>`` with ``q_a`` the first (most
  significant) tensor factor, so ``kron(A, B)`` applies ``A`` to ``q_a``.
* Matrices are ``complex128`` numpy arrays.
* The JSON form of a matrix is a row-major nested list of ``[re, im]`` pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from numpy.typing import NDArray

from gatesynth.errors import InvalidArgumentError, ParseError

Matrix = NDArray[np.complex128]

UNITARY_ATOL = 1e-12

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

CZ = np.diag([1, 1, 1, -1]).astype(complex)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise InvalidArgumentError(f"angle must be finite, got {v!r}")


def fsim_matrix(theta: float, phi: float) -> Matrix:
    """Return the fSim(theta, phi) matrix.

    The inner ``{|01>, |10>}`` block is ``[[cos, -i sin], [-i sin, cos]]`` and
    ``|11>`` picks up ``exp(-i phi)``. Angles outside the canonical ranges are
    used as given.
    """
    _check_finite(theta, phi)
    c, s = math.cos(theta), math.sin(theta)
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = 1.0
    m[1, 1] = c
    m[1, 2] = -1j * s
    m[2, 1] = -1j * s
    m[2, 2] = c
    m[3, 3] = np.exp(-1j * phi)
    return m


@dataclass(frozen=True)
class U3Params:
    """Angles of an arbitrary single-qubit rotation."""

    alpha: float
    beta: float
    lam: float

    def matrix(self) -> Matrix:
        return u3_matrix(self.alpha, self.beta, self.lam)

    def as_list(self) -> list[float]:
        return [self.alpha, self.beta, self.lam]


def u3_matrix(alpha: float, beta: float, lam: float) -> Matrix:
    _check_finite(alpha, beta, lam)
    c, s = math.cos(alpha / 2), math.sin(alpha / 2)
    return np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * beta) * s, np.exp(1j * (beta + lam)) * c],
        ],
        dtype=complex,
    )


def u3_from_matrix(m: Matrix, atol: float = 1e-12) -> U3Params:
    """Extract U3 angles reproducing a 2x2 unitary up to global phase."""
    m = np.asarray(m, dtype=complex)
    if m.shape != (2, 2):
        raise InvalidArgumentError(f"expected a 2x2 matrix, got shape {m.shape}")
    a00, a10 = abs(m[0, 0]), abs(m[1, 0])
    alpha = 2.0 * math.atan2(a10, a00)
    if a10 <= atol:
        gamma = np.angle(m[0, 0])
        beta = 0.0
        lam = float(np.angle(m[1, 1]) - gamma)
    elif a00 <= atol:
        gamma = np.angle(-m[0, 1])
        lam = 0.0
        beta = float(np.angle(m[1, 0]) - gamma)
    else:
        gamma = np.angle(m[0, 0])
        beta = float(np.angle(m[1, 0]) - gamma)
        lam = float(np.angle(-m[0, 1]) - gamma)
    return U3Params(float(alpha), _wrap(beta), _wrap(lam))


def _wrap(angle: float) -> float:
    """Map an angle into (-pi, pi]."""
    wrapped = math.remainder(angle, 2 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


def unitarity_deviation(u: Matrix) -> float:
    """Max absolute entry of ``U^dagger U - I``."""
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def check_unitary(u: Any, atol: float = 1e-8, dim: int | None = None) -> Matrix:
    """Validate and return ``u`` as a complex square unitary matrix."""
    try:
        m = np.asarray(u, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"not a numeric matrix: {exc}") from exc
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if n < 2 or n & (n - 1):
        raise InvalidArgumentError(f"dimension {n} is not a power of two")
    if dim is not None and n != dim:
        raise InvalidArgumentError(f"expected dimension {dim}, got {n}")
    if not np.all(np.isfinite(m)):
        raise InvalidArgumentError("matrix has non-finite entries")
    dev = unitarity_deviation(m)
    if dev > atol:
        raise InvalidArgumentError(f"matrix is not unitary (deviation {dev:.3e})")
    return m


def hs_fidelity(u_d: Matrix, u_t: Matrix) -> float:
    """Phase-insensitive Hilbert-Schmidt overlap ``|Tr(U_d^dagger U_t)| / dim``."""
    u_d = np.asarray(u_d)
    u_t = np.asarray(u_t)
    if u_d.shape != u_t.shape or u_d.ndim != 2:
        raise InvalidArgumentError(
            f"dimension mismatch: {u_d.shape} vs {u_t.shape}"
        )
    # Tr(A^dagger B) is the elementwise sum of conj(A) * B.
    return float(abs(np.vdot(u_d, u_t)) / u_t.shape[0])


def haar_unitary(dim: int, rng: np.random.Generator) -> Matrix:
    """Haar-random ``dim x dim`` unitary (QR of a complex Ginibre matrix)."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def haar_su4(seed: int | np.random.Generator) -> Matrix:
    """Haar-random two-qubit unitary, deterministic per integer seed."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return haar_unitary(4, rng)


def expm_hermitian(h: Matrix, t: float) -> Matrix:
    """``exp(-i t H)`` for Hermitian ``H`` via eigendecomposition."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


ZZ = np.kron(Z, Z)
XXYY_HALF = (np.kron(X, X) + np.kron(Y, Y)) / 2

APP_KINDS = ("QV", "QAOA_ZZ", "QFT_CP", "FH_ZZ", "FH_XXYY", "SWAP")


def zz_interaction(beta: float) -> Matrix:
    _check_finite(beta)
    return expm_hermitian(ZZ, beta)


def xxyy_interaction(beta: float) -> Matrix:
    _check_finite(beta)
    return expm_hermitian(XXYY_HALF, beta)


def controlled_phase(phi: float) -> Matrix:
    """``diag(1, 1, 1, exp(i phi))``; locally equivalent to fSim(0, phi)."""
    _check_finite(phi)
    return np.diag([1, 1, 1, np.exp(1j * phi)]).astype(complex)


def app_unitary(kind: str, param: Any = None) -> Matrix:
    """Two-qubit unitary drawn from one of the benchmark application families.

    ``QV`` takes an integer seed, ``QFT_CP`` an integer ``t >= 1`` (phase
    ``pi / 2**t``), ``SWAP`` no parameter, and the interaction kinds an angle.
    """
    kind = kind.upper()
    if kind == "QV":
        if isinstance(param, bool) or not isinstance(param, (int, np.integer)):
            raise InvalidArgumentError("QV takes an integer seed")
        return haar_su4(int(param))
    if kind == "SWAP":
        if param is not None:
            raise InvalidArgumentError("SWAP takes no parameter")
        return SWAP.copy()
    if kind == "QFT_CP":
        if isinstance(param, bool) or not isinstance(param, (int, np.integer)) or param < 1:
            raise InvalidArgumentError("QFT_CP takes an integer t >= 1")
        return controlled_phase(math.pi / 2 ** int(param))
    if kind in ("QAOA_ZZ", "FH_ZZ", "FH_XXYY"):
        if isinstance(param, bool) or not isinstance(param, (int, float, np.integer, np.floating)):
            raise InvalidArgumentError(f"{kind} takes a real angle")
        if kind == "FH_XXYY":
            return xxyy_interaction(float(param))
        return zz_interaction(float(param))
    raise InvalidArgumentError(f"unknown application kind {kind!r}; expected one of {APP_KINDS}")



# --------------------------------------------------------------------------
# Gate kinds
# --------------------------------------------------------------------------

_KEY_DECIMALS = 6


@dataclass(frozen=True, eq=False)
class GateKind:
    """A hardware two-qubit gate type: a point of the fSim family or SWAP.

    ``swap`` marks the SWAP permutation, which is locally equivalent to
    fSim(pi/2, pi) but is realised as a distinct hardware gate. Equality and
    hashing use the parameters rounded to 1e-6, so decimal literals such as
    ``fsim:1.5707963,3.1415927`` match their exact counterparts.
    """

    theta: float
    phi: float
    name: str | None = None
    swap: bool = False

    def __post_init__(self) -> None:
        _check_finite(self.theta, self.phi)

    def matrix(self) -> Matrix:
        if self.swap:
            return SWAP.copy()
        return fsim_matrix(self.theta, self.phi)

    @property
    def key(self) -> tuple:
        if self.swap:
            return ("swap",)
        return (round(self.theta, _KEY_DECIMALS) + 0.0, round(self.phi, _KEY_DECIMALS) + 0.0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GateKind):
            return NotImplemented
        return self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return f"fsim:{self.theta!r},{self.phi!r}"

    def __str__(self) -> str:
        return self.label

    def canonical(self) -> GateKind:
        """Return the representative with theta in [0, pi/2], phi in [0, pi]."""
        theta, phi = canonicalize(self.theta, self.phi)
        if self.swap:
            return GateKind(theta, phi)
        same = math.isclose(theta, self.theta, abs_tol=1e-12) and math.isclose(
            phi, self.phi, abs_tol=1e-12
        )
        return GateKind(theta, phi, self.name if same else None)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"theta": self.theta, "phi": self.phi}
        if self.name:
            out["name"] = self.name
        if self.swap:
            out["swap"] = True
        return out


def fsim(theta: float, phi: float) -> GateKind:
    return GateKind(float(theta), float(phi))


ALIASES: dict[str, GateKind] = {
    "cz": GateKind(0.0, math.pi, "cz"),
    "syc": GateKind(math.pi / 2, math.pi / 6, "syc"),
    "sqiswap": GateKind(math.pi / 4, 0.0, "sqiswap"),
    "iswap": GateKind(math.pi / 2, 0.0, "iswap"),
    "swap": GateKind(math.pi / 2, math.pi, "swap", swap=True),
}


def xy_gate(theta: float) -> GateKind:
    """XY(theta) resolved to fSim(theta/2, 0)."""
    return GateKind(theta / 2, 0.0)


def cphase_gate(phi: float) -> GateKind:
    """CZ(phi) resolved to fSim(0, phi)."""
    return GateKind(0.0, phi)


def _parse_floats(text: str, count: int, spec: str) -> list[float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != count:
        raise ParseError(f"gate {spec!r}: expected {count} comma-separated angle(s)")
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise ParseError(f"gate {spec!r}: {exc}") from exc
    if not all(math.isfinite(v) for v in values):
        raise ParseError(f"gate {spec!r}: angles must be finite")
    return values


def parse_gate(spec: str) -> GateKind:
    """Parse ``cz``, ``syc``, ``sqiswap``, ``iswap``, ``swap``,
    ``fsim:<theta>,<phi>``, ``xy:<theta>`` or ``cphase:<phi>`` (radians)."""
    text = spec.strip().lower()
    if text in ALIASES:
        return ALIASES[text]
    head, sep, rest = text.partition(":")
    if sep:
        if head == "fsim":
            theta, phi = _parse_floats(rest, 2, spec)
            return GateKind(theta, phi)
        if head == "xy":
            (theta,) = _parse_floats(rest, 1, spec)
            return xy_gate(theta)
        if head in ("cphase", "cz"):
            (phi,) = _parse_floats(rest, 1, spec)
            return cphase_gate(phi)
    raise ParseError(f"unknown gate {spec!r}")


def gate_from_json(obj: Any) -> GateKind:
    if isinstance(obj, str):
        return parse_gate(obj)
    if isinstance(obj, dict) and "theta" in obj and "phi" in obj:
        return GateKind(
            float(obj["theta"]), float(obj["phi"]), obj.get("name"), bool(obj.get("swap", False))
        )
    raise ParseError(f"cannot interpret {obj!r} as a gate")


def canonicalize(theta: float, phi: float) -> tuple[float, float]:
    """Reduce fSim parameters to theta in [0, pi/2] and phi in [0, pi].

    theta -> theta + pi and theta -> -theta are exact local equivalences
    (conjugation by Z x Z and Z x I). phi -> 2*pi - phi maps the gate to its
    complex conjugate up to local gates; decomposition counts coincide for
    targets closed under conjugation.
    """
    _check_finite(theta, phi)
    t = math.fmod(theta, math.pi)
    if t < 0:
        t += math.pi
    if t > math.pi / 2:
        t = math.pi - t
    p = math.fmod(phi, 2 * math.pi)
    if p < 0:
        p += 2 * math.pi
    if p > math.pi:
        p = 2 * math.pi - p
    return t + 0.0, p + 0.0


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------


def matrix_to_json(m: Matrix) -> list[list[list[float]]]:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(obj: Sequence) -> Matrix:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"matrix is not a nested list of [re, im] pairs: {exc}") from exc
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ParseError(f"matrix must have shape (n, n, 2), got {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]
