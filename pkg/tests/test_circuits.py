import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from msreshape.circuits import (
    ARITY, CNOT, CZ, HADAMARD, N_PARAMS, XX, Backend, Circuit, CompileError, Gate,
    circuit_unitary, compile_circuit, decompose_cnot_cz, decompose_cnot_xx,
    equivalent_up_to_phase, format_circuit, gate_matrix, insert_redundant_pairs, ms,
    parse_circuit, phase_deviation, prx, rx, ry, rz, u3, verify_compiled, xx_from_ms,
)
from msreshape.qcore import I2, X, Y, Z, dag, is_unitary, ket, kron

ONE_Q = ["RX", "RY", "RZ", "X", "Y", "Z", "H", "U3", "PRX"]
TWO_Q = ["CNOT", "XX", "MS", "CZ"]


def random_circuit(rng, n_qubits, n_gates, kinds=ONE_Q + TWO_Q):
    ops = []
    for _ in range(n_gates):
        name = kinds[rng.integers(len(kinds))]
        if ARITY[name] == 1:
            q = (int(rng.integers(n_qubits)),)
        else:
            q = tuple(int(x) for x in rng.choice(n_qubits, 2, replace=False))
        ops.append(Gate(name, q, tuple(rng.uniform(0, 2 * math.pi, N_PARAMS.get(name, 0)))))
    return Circuit(n_qubits, tuple(ops))


@st.composite
def circuits(draw, max_qubits=5, max_gates=30):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(2, max_qubits))
    k = draw(st.integers(0, max_gates))
    return random_circuit(np.random.default_rng(seed), n, k)


# -- gates


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("CNOT", (0,))
    with pytest.raises(ValueError):
        Gate("RX", (0,), ())
    with pytest.raises(ValueError):
        Gate("FOO", (0,))
    with pytest.raises(ValueError):
        Gate("CZ", (1, 1))
    with pytest.raises(ValueError):
        Circuit(2, (Gate("X", (2,)),))


def test_gate_matrix_examples():
    phi = 0.37
    assert np.allclose(gate_matrix(Gate("RZ", (0,), (phi,))),
                       np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)]))
    assert np.allclose(gate_matrix(Gate("PRX", (0,), (math.pi, 0))), -1j * X)
    want = np.array([[1, 0, 0, -1j], [0, 1, -1j, 0], [0, -1j, 1, 0], [-1j, 0, 0, 1]]) / math.sqrt(2)
    assert np.allclose(gate_matrix(Gate("MS", (0, 1), (0, 0))), want)
    assert np.allclose(gate_matrix(Gate("XX", (0, 1))), want)


def test_rotation_conventions():
    t = 0.81
    assert np.allclose(rx(t), np.cos(t / 2) * I2 - 1j * np.sin(t / 2) * X)
    assert np.allclose(ry(t), np.cos(t / 2) * I2 - 1j * np.sin(t / 2) * Y)
    assert np.allclose(u3(t / 2, 0, 0), ry(t))
    assert np.allclose(prx(t, 0), rx(t)) and np.allclose(prx(t, math.pi / 2), ry(t))


def test_ms_phase_definition():
    # MS(p1, p2) = exp(-i pi/4 s(p1) s(p2)) with s(p) = cos p X + sin p Y
    p1, p2 = 0.4, 2.2
    s1 = math.cos(p1) * X + math.sin(p1) * Y
    s2 = math.cos(p2) * X + math.sin(p2) * Y
    assert np.allclose(ms(p1, p2), (np.eye(4) - 1j * kron(s1, s2)) / math.sqrt(2))


def test_gate_matrices_unitary():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        name = (ONE_Q + TWO_Q)[rng.integers(13)]
        qs = tuple(range(ARITY[name]))
        g = Gate(name, qs, tuple(rng.uniform(-10, 10, N_PARAMS.get(name, 0))))
        assert is_unitary(gate_matrix(g), 1e-12)


# -- circuits


def test_circuit_unitary_examples():
    assert np.allclose(circuit_unitary(Circuit(3)), np.eye(8))
    c = Circuit(2, (Gate("CNOT", (0, 1)), Gate("CNOT", (0, 1))))
    assert np.allclose(circuit_unitary(c), np.eye(4))
    enc = Circuit(3, (Gate("RX", (0,), (math.pi / 9,)), Gate("CNOT", (0, 1)), Gate("CNOT", (0, 2))))
    psi = circuit_unitary(enc) @ ket("000")
    want = math.cos(math.pi / 18) * ket("000") - 1j * math.sin(math.pi / 18) * ket("111")
    assert np.allclose(psi, want)


def test_pending_rz_is_terminal_diagonal():
    c = Circuit(2, (Gate("H", (0,)),), (0.3, -1.1))
    d = kron(rz(0.3), rz(-1.1))
    assert np.allclose(circuit_unitary(c), d @ kron(HADAMARD, I2))
    assert np.allclose(circuit_unitary(c.flush_pending(), include_pending=False), circuit_unitary(c))


# -- decompositions


def test_cnot_from_xx():
    frag = decompose_cnot_xx()
    assert frag.count("XX") == 1 and len(frag.two_qubit_indices()) == 1
    u = circuit_unitary(frag)
    assert phase_deviation(u, CNOT)[0] < 1e-10
    out = u @ ket("10")
    assert abs(abs(out[int("11", 2)]) - 1) < 1e-12


def test_xx_is_ms_sandwiched_by_rz():
    rng = np.random.default_rng(3)
    for p1, p2 in rng.uniform(0, 2 * math.pi, (20, 2)):
        assert equivalent_up_to_phase(circuit_unitary(xx_from_ms(p1, p2)), XX)


def test_cnot_from_cz():
    frag = decompose_cnot_cz()
    assert frag.count("CZ") == 1
    u = circuit_unitary(frag)
    assert equivalent_up_to_phase(u, CNOT)
    assert abs(abs((u @ ket("11"))[int("10", 2)]) - 1) < 1e-12
    # time order PRx(pi/2, pi/2) then PRx(pi, 0) is a Hadamard up to phase
    assert equivalent_up_to_phase(prx(math.pi, 0) @ prx(math.pi / 2, math.pi / 2), HADAMARD)
    assert not equivalent_up_to_phase(prx(math.pi / 2, math.pi / 2) @ prx(math.pi, 0), HADAMARD)


def test_equivalence_check():
    rng = np.random.default_rng(4)
    u = circuit_unitary(random_circuit(rng, 2, 10))
    assert equivalent_up_to_phase(u, np.exp(1j * math.pi / 7) * u)
    assert not equivalent_up_to_phase(CNOT, CZ)
    with pytest.raises(ValueError):
        phase_deviation(np.ones((2, 3)), np.ones((2, 3)))


def test_z_conjugation_inverts_ms():
    z1 = kron(Z, I2)
    assert equivalent_up_to_phase(z1 @ ms(0, 0) @ z1, dag(ms(0, 0)))


def test_compiled_encoding_gates():
    # single-qubit gates of the hand-compiled encoding section
    def g1(phi):
        c, s = math.cos(phi / 2), math.sin(phi / 2)
        return (-c * I2 + 1j * s * X + 1j * c * Y - 1j * s * Z) / math.sqrt(2)

    g3 = (I2 + 1j * X - 1j * Y - 1j * Z) / 2
    assert decompose_cnot_xx().ops[0] == Gate("RY", (0,), (math.pi / 2,))
    for phi in np.linspace(0, 2 * math.pi, 7):
        # G1 is the input rotation followed by the first gate of the CNOT -> XX fragment
        assert np.allclose(g1(phi), -ry(math.pi / 2) @ rx(phi))
        c, s = math.cos(phi / 2), math.sin(phi / 2)
        g5d = (c * I2 + 1j * c * X - 1j * s * Y - 1j * s * Z) / math.sqrt(2)
        assert is_unitary(g5d)
    assert is_unitary(g3)


# -- compilation


@pytest.mark.parametrize("backend", ["ion", "cz"])
def test_compile_random_circuits(backend):
    rng = np.random.default_rng(2024)
    for _ in range(100):
        c = random_circuit(rng, int(rng.integers(1, 6)) + 1, int(rng.integers(0, 31)))
        out = compile_circuit(c, backend)
        assert Backend(backend).accepts(out)
        assert verify_compiled(c, out)[0] < 1e-9


@settings(max_examples=40, deadline=None)
@given(circuits(max_qubits=4, max_gates=15), st.sampled_from(["ion", "cz"]))
def test_compile_property(c, backend):
    out = compile_circuit(c, backend)
    assert verify_compiled(c, out)[0] < 1e-9


def test_compile_one_native_gate_per_cnot():
    c = Circuit(3, (Gate("RX", (0,), (0.3,)), Gate("CNOT", (0, 1)), Gate("CNOT", (0, 2)),
                    Gate("RY", (0,), (1.0,))))
    ion = compile_circuit(c, "ion")
    assert ion.count("MS") == 2 and len(ion.two_qubit_indices()) == 2
    assert [ion.ops[i].qubits for i in ion.two_qubit_indices()] == [(0, 1), (0, 2)]
    cz = compile_circuit(c, Backend("cz"))
    assert cz.count("CZ") == 2
    assert verify_compiled(c, ion)[0] < 1e-10 and verify_compiled(c, cz)[0] < 1e-10


def test_compile_single_qubit_only():
    c = Circuit(2, (Gate("H", (0,)), Gate("RZ", (1,), (0.4,)), Gate("Y", (1,))))
    out = compile_circuit(c, "ion")
    assert not out.two_qubit_indices()


def test_compile_rz_is_virtual():
    c = Circuit(1, (Gate("RZ", (0,), (0.7,)), Gate("Z", (0,))))
    out = compile_circuit(c, "ion")
    assert out.ops == () and out.pending_rz[0] == pytest.approx(0.7 + math.pi)


def test_compile_rejects_generic_backend():
    with pytest.raises(CompileError):
        compile_circuit(Circuit(1), "generic")
    with pytest.raises(ValueError):
        Backend("superconducting")


# -- redundant pairs


def test_redundant_pairs_basic():
    base = compile_circuit(
        Circuit(3, (Gate("CNOT", (0, 1)), Gate("CNOT", (0, 2)), Gate("CNOT", (1, 2)))), "ion")
    assert insert_redundant_pairs(base, 0) == base
    padded = insert_redundant_pairs(base, 3)
    assert padded.count("MS") == 3 + 2 * 2 * 3
    assert equivalent_up_to_phase(circuit_unitary(padded), circuit_unitary(base))
    with pytest.raises(ValueError):
        insert_redundant_pairs(base, -1)


def test_one_pair_is_identity():
    m = ms(0, 0)
    z1 = kron(Z, I2)
    assert equivalent_up_to_phase(z1 @ m @ z1 @ m, np.eye(4))


def test_cz_pairs_count():
    base = compile_circuit(Circuit(3, (Gate("CNOT", (0, 1)), Gate("CNOT", (0, 2)))), "cz")
    padded = insert_redundant_pairs(base, 15, "cz")
    assert padded.count("CZ") == 2 + 2 * 30
    assert equivalent_up_to_phase(circuit_unitary(padded), circuit_unitary(base))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 10), st.sampled_from(["ion", "cz"]))
def test_redundant_pairs_preserve_unitary(seed, n, backend):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, 3, 8)
    c = Circuit(3, (Gate("CNOT", (0, 1)), Gate("CNOT", (0, 2))) + c.ops)
    out = compile_circuit(c, backend)
    padded = insert_redundant_pairs(out, n, backend)
    assert phase_deviation(circuit_unitary(padded), circuit_unitary(out))[0] < 1e-9


def test_pairs_require_entangling_gate():
    with pytest.raises(ValueError):
        insert_redundant_pairs(Circuit(2, (Gate("H", (0,)),)), 1)
    with pytest.raises(CompileError):
        insert_redundant_pairs(Circuit(2, (Gate("CNOT", (0, 1)),)), 1, "ion")


# -- text format


def test_text_round_trip():
    rng = np.random.default_rng(9)
    c = compile_circuit(random_circuit(rng, 4, 20), "ion")
    assert parse_circuit(format_circuit(c)) == c


def test_parse_expressions_and_comments():
    text = """
    # encoding
    QUBITS 3
    RX(pi/9) 0   # input angle
    CNOT 0 1
    MS(-pi/2, 2*pi - 0.5) 0 2
    VRZ(pi/4) 1
    """
    c = parse_circuit(text)
    assert c.n_qubits == 3 and len(c.ops) == 3
    assert c.ops[0].params[0] == pytest.approx(math.pi / 9)
    assert c.ops[2].params == pytest.approx((-math.pi / 2, 2 * math.pi - 0.5))
    assert c.pending_rz == pytest.approx((0, math.pi / 4, 0))


def test_parse_rejects_bad_lines():
    with pytest.raises(ValueError, match="line 1"):
        parse_circuit("CNOT 0")
    with pytest.raises(ValueError):
        parse_circuit("RX(__import__('os')) 0")
    with pytest.raises(ValueError):
        parse_circuit("RX(0.1 0")
