import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gatesynth.errors import InvalidArgumentError, ParseError
from gatesynth.qgates import (
    ALIASES,
    CZ,
    SWAP,
    GateKind,
    U3Params,
    app_unitary,
    canonicalize,
    check_unitary,
    controlled_phase,
    fsim,
    fsim_matrix,
    gate_from_json,
    haar_su4,
    haar_unitary,
    hs_fidelity,
    matrix_from_json,
    matrix_to_json,
    parse_gate,
    u3_from_matrix,
    u3_matrix,
    unitarity_deviation,
    xxyy_interaction,
    xy_gate,
    zz_interaction,
)

angles = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.diag([1.0, -1.0]).astype(complex)


def taylor_expm(a: np.ndarray, terms: int = 50) -> np.ndarray:
    """exp(a) by its power series; independent of any eigensolver."""
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    return out


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = 1e-12) -> bool:
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    phase = a[idx] / b[idx]
    return abs(abs(phase) - 1) < atol and np.allclose(a, phase * b, atol=atol)


# --------------------------------------------------------------------------
# fSim and U3
# --------------------------------------------------------------------------


def test_fsim_cz_point_is_cz():
    np.testing.assert_array_equal(fsim_matrix(0, math.pi).round(15), np.diag([1, 1, 1, -1]))
    assert np.allclose(fsim_matrix(0, math.pi), CZ, atol=1e-15)


def test_fsim_zero_is_identity():
    np.testing.assert_array_equal(fsim_matrix(0, 0), np.eye(4))


def test_fsim_iswap_point_hand_derived():
    # cos(pi/2) = 0, sin(pi/2) = 1, exp(-i 0) = 1
    expected = np.array(
        [[1, 0, 0, 0], [0, 0, -1j, 0], [0, -1j, 0, 0], [0, 0, 0, 1]], dtype=complex
    )
    assert np.allclose(fsim_matrix(math.pi / 2, 0), expected, atol=1e-15)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_fsim_rejects_non_finite(bad):
    with pytest.raises(InvalidArgumentError):
        fsim_matrix(bad, 0.0)
    with pytest.raises(InvalidArgumentError):
        fsim_matrix(0.0, bad)


def test_u3_identity():
    np.testing.assert_array_equal(u3_matrix(0, 0, 0), np.eye(2))


@pytest.mark.parametrize(
    "params, expected",
    [
        ((math.pi, 0, math.pi), PAULI_X),
        ((math.pi / 2, 0, math.pi), np.array([[1, 1], [1, -1]]) / math.sqrt(2)),
    ],
    ids=["X", "H"],
)
def test_u3_named_gates_up_to_phase(params, expected):
    assert equal_up_to_phase(u3_matrix(*params), expected.astype(complex))


def test_u3_rejects_non_finite():
    with pytest.raises(InvalidArgumentError):
        u3_matrix(0.0, math.nan, 0.0)


@settings(max_examples=200, deadline=None)
@given(angles, angles, angles)
def test_u3_unitary_and_roundtrip(a, b, lam):
    m = u3_matrix(a, b, lam)
    assert unitarity_deviation(m) < 1e-12
    p = u3_from_matrix(m)
    assert hs_fidelity(p.matrix(), m) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize(
    "m", [np.eye(2), PAULI_X, PAULI_Y, PAULI_Z, np.diag([1, 1j])], ids=["I", "X", "Y", "Z", "S"]
)
def test_u3_from_matrix_degenerate_cases(m):
    p = u3_from_matrix(m.astype(complex))
    assert hs_fidelity(p.matrix(), m) == pytest.approx(1.0, abs=1e-12)


def test_u3_params_helpers():
    p = U3Params(0.1, 0.2, 0.3)
    assert p.as_list() == [0.1, 0.2, 0.3]
    np.testing.assert_array_equal(p.matrix(), u3_matrix(0.1, 0.2, 0.3))


@settings(max_examples=100, deadline=None)
@given(angles, angles)
def test_fsim_unitary(theta, phi):
    assert unitarity_deviation(fsim_matrix(theta, phi)) < 1e-12


# --------------------------------------------------------------------------
# Fidelity
# --------------------------------------------------------------------------


def test_hs_fidelity_identity_vs_cz():
    assert hs_fidelity(np.eye(4), CZ) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("gamma", [0.0, 0.3, math.pi / 2, math.pi, -2.1])
def test_hs_fidelity_global_phase_invariant(gamma):
    u = haar_su4(5)
    assert hs_fidelity(u, np.exp(1j * gamma) * u) == pytest.approx(1.0, abs=1e-12)


def test_hs_fidelity_self_overlap_many():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        u = haar_unitary(4, rng)
        assert hs_fidelity(u, u) == pytest.approx(1.0, abs=1e-12)


def test_hs_fidelity_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        hs_fidelity(np.eye(2), np.eye(4))


def test_hs_fidelity_range():
    rng = np.random.default_rng(2)
    for _ in range(50):
        f = hs_fidelity(haar_unitary(4, rng), haar_unitary(4, rng))
        assert 0.0 <= f <= 1.0


# --------------------------------------------------------------------------
# Haar sampling
# --------------------------------------------------------------------------


def test_haar_deterministic_per_seed():
    np.testing.assert_array_equal(haar_su4(42), haar_su4(42))
    assert not np.array_equal(haar_su4(42), haar_su4(43))


def test_haar_unitarity():
    for seed in range(100):
        assert unitarity_deviation(haar_su4(seed)) < 1e-12


def test_haar_trace_second_moment():
    # For Haar U(4), E|Tr U|^2 = 1, so |Tr U|^2 / 16 has mean 1/16.
    samples = np.array([abs(np.trace(haar_su4(s))) ** 2 / 16 for s in range(1000)])
    se = samples.std(ddof=1) / math.sqrt(len(samples))
    assert abs(samples.mean() - 1 / 16) < 3 * se


def test_haar_fourth_moment():
    # E|Tr U|^4 = 2 for Haar U(d), d >= 2.
    samples = np.array([abs(np.trace(haar_su4(s))) ** 4 for s in range(2000)])
    se = samples.std(ddof=1) / math.sqrt(len(samples))
    assert abs(samples.mean() - 2.0) < 4 * se


# --------------------------------------------------------------------------
# Application unitaries
# --------------------------------------------------------------------------

ZZ_OP = np.kron(PAULI_Z, PAULI_Z)
XXYY_OP = (np.kron(PAULI_X, PAULI_X) + np.kron(PAULI_Y, PAULI_Y)) / 2


@pytest.mark.parametrize("beta", np.linspace(-math.pi, math.pi, 9))
def test_interactions_match_taylor_series(beta):
    assert np.max(np.abs(zz_interaction(beta) - taylor_expm(-1j * beta * ZZ_OP))) < 1e-10
    assert np.max(np.abs(xxyy_interaction(beta) - taylor_expm(-1j * beta * XXYY_OP))) < 1e-10


def test_qaoa_zero_is_identity():
    assert np.allclose(app_unitary("QAOA_ZZ", 0.0), np.eye(4), atol=1e-15)


def test_qft_cp_t1_hand_derived():
    assert np.allclose(app_unitary("QFT_CP", 1), np.diag([1, 1, 1, 1j]), atol=1e-15)


def test_qft_cp_locally_equivalent_to_fsim():
    # diag(1,1,1,e^{i phi}) is literally fSim(0, -phi), whose canonical image is (0, phi).
    phi = math.pi / 4
    assert np.allclose(controlled_phase(phi), fsim_matrix(0, -phi), atol=1e-15)
    assert canonicalize(0.0, -phi) == pytest.approx((0.0, phi))


def test_fh_xxyy_half_pi_is_iswap_point():
    assert equal_up_to_phase(app_unitary("FH_XXYY", math.pi / 2), fsim_matrix(math.pi / 2, 0))


def test_app_swap():
    np.testing.assert_array_equal(app_unitary("SWAP"), SWAP)


def test_app_qv_matches_haar():
    np.testing.assert_array_equal(app_unitary("QV", 9), haar_su4(9))


@pytest.mark.parametrize(
    "kind, param",
    [("QV", 0.5), ("QV", True), ("QFT_CP", 0), ("QFT_CP", 1.5), ("SWAP", 1), ("QAOA_ZZ", "x"), ("NOPE", 1)],
)
def test_app_unitary_bad_params(kind, param):
    with pytest.raises(InvalidArgumentError):
        app_unitary(kind, param)


def test_constructors_unitary():
    rng = np.random.default_rng(3)
    mats = [fsim_matrix(*rng.uniform(-7, 7, 2)) for _ in range(20)]
    mats += [u3_matrix(*rng.uniform(-7, 7, 3)) for _ in range(20)]
    mats += [zz_interaction(b) for b in rng.uniform(-4, 4, 10)]
    mats += [xxyy_interaction(b) for b in rng.uniform(-4, 4, 10)]
    mats += [app_unitary("QFT_CP", t) for t in range(1, 11)]
    mats += [g.matrix() for g in ALIASES.values()]
    for m in mats:
        assert unitarity_deviation(m) < 1e-12


# --------------------------------------------------------------------------
# Gate kinds and parsing
# --------------------------------------------------------------------------


@pytest.mark.parametrize(
    "name, theta, phi",
    [
        ("syc", math.pi / 2, math.pi / 6),
        ("sqiswap", math.pi / 4, 0.0),
        ("cz", 0.0, math.pi),
        ("iswap", math.pi / 2, 0.0),
        ("swap", math.pi / 2, math.pi),
    ],
)
def test_alias_resolution_and_roundtrip(name, theta, phi):
    g = parse_gate(name)
    assert (g.theta, g.phi) == pytest.approx((theta, phi))
    assert (g.canonical().theta, g.canonical().phi) == pytest.approx((theta, phi))


def test_swap_alias_is_swap_matrix():
    np.testing.assert_array_equal(parse_gate("swap").matrix(), SWAP)
    assert parse_gate("swap") != fsim(math.pi / 2, math.pi)


def test_parse_fsim_decimal_literal_matches_alias_point():
    assert parse_gate("fsim:1.5707963,3.1415927") == fsim(math.pi / 2, math.pi)
    assert parse_gate("fsim:0,3.14159265") == ALIASES["cz"]


def test_parse_xy_and_cphase():
    assert parse_gate("xy:3.141592653589793") == fsim(math.pi / 2, 0)
    assert parse_gate("cphase:1.0") == fsim(0, 1.0)
    assert xy_gate(math.pi / 2) == parse_gate("sqiswap")


@pytest.mark.parametrize("bad", ["", "foo", "fsim:1", "fsim:a,b", "fsim:1,2,3", "xy:", "fsim:nan,0"])
def test_parse_gate_errors(bad):
    with pytest.raises(ParseError):
        parse_gate(bad)


def test_gate_json_roundtrip():
    for g in [*ALIASES.values(), fsim(0.3, 1.2)]:
        back = gate_from_json(g.to_json())
        assert back == g and back.swap == g.swap
    assert gate_from_json("cz") == ALIASES["cz"]
    with pytest.raises(ParseError):
        gate_from_json(3)


def test_gatekind_label():
    assert ALIASES["syc"].label == "syc"
    assert fsim(0.5, 0.25).label == "fsim:0.5,0.25"


@settings(max_examples=300, deadline=None)
@given(angles, angles)
def test_canonicalize_range_and_idempotent(theta, phi):
    t, p = canonicalize(theta, phi)
    assert 0.0 <= t <= math.pi / 2 + 1e-15
    assert 0.0 <= p <= math.pi + 1e-15
    assert canonicalize(t, p) == pytest.approx((t, p), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(angles, angles)
def test_theta_images_are_locally_equivalent(theta, phi):
    # theta -> theta + pi and theta -> -theta are exact single-qubit Z conjugations.
    zz = np.kron(PAULI_Z, PAULI_Z)
    zi = np.kron(PAULI_Z, np.eye(2))
    assert np.allclose(fsim_matrix(theta + math.pi, phi), zz @ fsim_matrix(theta, phi), atol=1e-12)
    assert np.allclose(zi @ fsim_matrix(theta, phi) @ zi, fsim_matrix(-theta, phi), atol=1e-12)


def test_phi_reflection_is_conjugation():
    theta, phi = 0.7, 1.1
    assert np.allclose(fsim_matrix(theta, 2 * math.pi - phi), _conj_swap_sign(fsim_matrix(theta, phi)), atol=1e-12)


def _conj_swap_sign(m: np.ndarray) -> np.ndarray:
    # (Z x I) conj(fSim(theta, phi)) (Z x I) = fSim(theta, 2 pi - phi)
    zi = np.kron(PAULI_Z, np.eye(2))
    return zi @ m.conj() @ zi


def test_gatekind_equality_tolerance():
    assert GateKind(0.1, 0.2) == GateKind(0.1 + 1e-9, 0.2)
    assert hash(GateKind(0.1, 0.2)) == hash(GateKind(0.1 + 1e-9, 0.2))
    assert GateKind(0.1, 0.2) != GateKind(0.1 + 1e-4, 0.2)


# --------------------------------------------------------------------------
# Validation and serialization
# --------------------------------------------------------------------------


def test_check_unitary_rejects():
    with pytest.raises(InvalidArgumentError):
        check_unitary(np.ones((4, 4)))
    with pytest.raises(InvalidArgumentError):
        check_unitary(np.eye(3))
    with pytest.raises(InvalidArgumentError):
        check_unitary(np.eye(2), dim=4)
    with pytest.raises(InvalidArgumentError):
        check_unitary([[1, 0], [0, math.nan]])
    check_unitary(np.eye(4) * (1 + 5e-9))


def test_matrix_json_roundtrip():
    u = haar_su4(11)
    back = matrix_from_json(matrix_to_json(u))
    np.testing.assert_array_equal(back, u)
    with pytest.raises(ParseError):
        matrix_from_json([[1, 2], [3, 4]])
