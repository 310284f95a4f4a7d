import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from msreshape.circuits import ry
from msreshape.qcore import I2, X, Z, DensityMatrix, choi_distance, compose, dag, embed, ket, kron, trace_distance
from msreshape.repcode import (
    CODE, LOGICAL_PAULIS, InsertedUnitary, LeakageError, LogicalState, agnostic_channel,
    brute_force_output, circuit_agnostic_output, encode, lift, logical_elements, model_curves,
    recovery_channel, ry_logical_channel, syndrome_projector,
)

PHI = math.pi / 9


def rand_state(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = a @ dag(a)
    return r / np.trace(r)


def test_encode():
    assert np.allclose(encode(0), ket("000"))
    assert np.allclose(encode(math.pi), -1j * ket("111"))
    psi = encode(PHI)
    assert psi[0] == pytest.approx(0.984808, abs=1e-6)
    assert psi[7] == pytest.approx(-0.173648j, abs=1e-6)


def test_inserted_unitary():
    u = InsertedUnitary(0.3, 1.0, 2.0)
    assert np.allclose(u.matrix @ dag(u.matrix), np.eye(2), atol=1e-12)
    assert np.allclose(InsertedUnitary.ry(0.7).matrix, ry(0.7))
    with pytest.raises(ValueError):
        InsertedUnitary(2.0)


def test_recovery_corrects_single_flip():
    rec = recovery_channel()
    psi = encode(0.8)
    rho = np.outer(psi, psi.conj())
    for q in range(3):
        x = embed(X, [q], 3)
        assert np.allclose(rec(x @ rho @ x), rho)


def test_recovery_double_flip_becomes_logical_x():
    rec = recovery_channel()
    psi = encode(0.8)
    rho = np.outer(psi, psi.conj())
    xx = kron(X, X, I2)
    xl = kron(X, X, X)
    assert np.allclose(rec(xx @ rho @ xx), xl @ rho @ xl)


def test_recovery_output_in_code_space():
    rng = np.random.default_rng(0)
    rec = recovery_channel()
    z01, z12 = kron(Z, Z, I2), kron(I2, Z, Z)
    for _ in range(50):
        out = rec(rand_state(rng, 8))
        assert np.allclose(z01 @ out, out) and np.allclose(z12 @ out, out)
        assert np.allclose(z01 @ out, out @ z01)
        assert np.trace(out).real == pytest.approx(1)


def test_recovery_idempotent():
    rec = recovery_channel()
    assert choi_distance(compose(rec, rec), rec) < 1e-10


def test_syndrome_projectors_resolve_identity():
    total = sum(syndrome_projector(i, j) for i in (0, 1) for j in (0, 1))
    assert np.allclose(total, np.eye(8))


def test_agnostic_trivial_case():
    out = circuit_agnostic_output(0.0, InsertedUnitary(0.0), PHI)
    psi = encode(PHI)
    assert np.allclose(out.matrix, np.outer(psi, psi.conj()))


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.floats(0, math.pi / 2), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_agnostic_weights_complete(p, theta, phi, delta):
    ch = agnostic_channel(p, InsertedUnitary(theta, phi, delta))
    assert abs(sum(ch.weights) - 1) < 1e-12


def test_agnostic_matches_brute_force_grid():
    worst = 0.0
    for p in np.linspace(0, 1, 5):
        for theta in np.linspace(0, math.pi / 2, 5):
            for phi_u in np.linspace(0, 2 * math.pi, 5):
                u = InsertedUnitary(theta, phi_u, 0.7)
                a = circuit_agnostic_output(p, u, PHI).matrix
                b = brute_force_output(p, u.matrix, encode(PHI))
                worst = max(worst, trace_distance(a, b))
    assert worst < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, math.pi / 2), st.floats(0, 2 * math.pi),
       st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_agnostic_matches_brute_force_property(p, theta, phi_u, delta, phi):
    u = InsertedUnitary(theta, phi_u, delta)
    a = circuit_agnostic_output(p, u, phi).matrix
    b = brute_force_output(p, u.matrix, encode(phi))
    assert trace_distance(a, b) < 1e-10


@pytest.mark.parametrize("p", [0.0, 0.014, 0.1, 0.3])
def test_ry_channel_limits(p):
    w = ry_logical_channel(p, 0.0).as_dict()
    success = (1 - p) ** 3 + 3 * (1 - p) ** 2 * p
    assert w["I"] == pytest.approx(success, abs=1e-15)
    assert w["X"] == pytest.approx(3 * p**2 - 2 * p**3, abs=1e-15)
    assert w["Y"] == 0 and w["Z"] == 0
    w = ry_logical_channel(p, math.pi).as_dict()
    assert abs(w["I"]) < 1e-15 and abs(w["X"]) < 1e-15
    assert w["Y"] + w["Z"] == pytest.approx(1, abs=1e-12)


def test_ry_channel_noiseless_is_logical_dephasing():
    for t in np.linspace(0, math.pi, 7):
        w = ry_logical_channel(0.0, t).as_dict()
        assert w["I"] == pytest.approx(math.cos(t / 2) ** 2)
        assert w["Z"] == pytest.approx(math.sin(t / 2) ** 2)
        assert w["X"] == 0 and w["Y"] == 0


def test_ry_completeness_grid():
    for p in np.linspace(0, 1, 50):
        for t in np.linspace(0, math.pi, 50):
            assert abs(sum(ry_logical_channel(p, t).weights) - 1) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1), st.floats(0, math.pi), st.floats(0, 2 * math.pi))
def test_ry_channel_agrees_with_general_model(p, t, phi):
    a = ry_logical_channel(p, t).apply_encoded(encode(phi))
    b = circuit_agnostic_output(p, InsertedUnitary.ry(t), phi).matrix
    assert trace_distance(a, b) < 1e-10


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1), st.floats(0, math.pi))
def test_ry_model_has_no_real_coherence(p, t):
    st_ = logical_elements(ry_logical_channel(p, t).apply_encoded(encode(PHI)))
    assert abs(st_.rho01.real) < 1e-14


def test_logical_pauli_conventions():
    # Y_L = -i Z_L X_L with Z_L = Z on qubit 0 and X_L = XXX
    zl, xl = kron(Z, I2, I2), kron(X, X, X)
    assert np.allclose(lift(LOGICAL_PAULIS["Y"]), (CODE @ dag(CODE)) @ (-1j * zl @ xl) @ (CODE @ dag(CODE)))
    assert np.allclose(lift(LOGICAL_PAULIS["X"]), CODE @ dag(CODE) @ xl @ CODE @ dag(CODE))


def test_logical_elements():
    st_ = logical_elements(np.outer(ket("000"), ket("000")))
    assert (st_.rho00, st_.rho01) == (1.0, 0)
    plus = (ket("000") + ket("111")) / math.sqrt(2)
    st_ = logical_elements(DensityMatrix.from_ket(plus))
    assert st_.rho00 == pytest.approx(0.5) and st_.rho01 == pytest.approx(0.5)


def test_rho01_sign_convention():
    # pinned: rho01 = <000|rho|111> = alpha * conj(beta) = +i cos sin for the encoded input
    st_ = logical_elements(DensityMatrix.from_ket(encode(PHI)))
    assert st_.rho00 == pytest.approx(math.cos(PHI / 2) ** 2)
    assert st_.rho01 == pytest.approx(1j * math.cos(PHI / 2) * math.sin(PHI / 2))


def test_logical_elements_rejects_leakage():
    with pytest.raises(LeakageError):
        logical_elements(np.outer(ket("010"), ket("010")))


def test_logical_state_invariants():
    LogicalState(0.5, 0.5)
    with pytest.raises(ValueError):
        LogicalState(0.9, 0.5)
    with pytest.raises(ValueError):
        LogicalState(1.2, 0)


def test_model_curves_formula():
    p, t = 0.014, 0.01 * math.pi
    row = model_curves([p], [t], PHI)[0]
    c2, s2 = math.cos(PHI / 2) ** 2, math.sin(PHI / 2) ** 2
    ct, st2 = math.cos(t / 2) ** 2, math.sin(t / 2) ** 2
    w = ry_logical_channel(p, t).as_dict()
    want = ct * ((1 - p) ** 2 * (1 + 2 * p) * c2 + (3 * p**2 - 2 * p**3) * s2) + \
        w["Y"] * s2 + w["Z"] * c2
    assert row[2] == pytest.approx(want, abs=1e-14)
    assert st2 > 0


def test_model_curves_noiseless_row():
    for row in model_curves([0.0], np.linspace(0, math.pi, 9), PHI):
        assert row[2] == pytest.approx(math.cos(PHI / 2) ** 2)


def test_model_curves_monotone_in_theta():
    thetas = np.linspace(0, math.pi, 60)
    for p in [0.014, 0.05, 0.2, 0.45]:
        rho00 = [r[2] for r in model_curves([p], thetas, PHI)]
        assert all(b < a for a, b in zip(rho00, rho00[1:]))


def test_model_curves_needs_grid():
    with pytest.raises(ValueError):
        model_curves([], [0.1])
