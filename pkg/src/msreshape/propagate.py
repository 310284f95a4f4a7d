"""First-order propagation of MS-gate errors through the encoding section.

A noisy MS gate is approximated as the ideal gate followed by one error term
``(r1/2) E rho E`` with ``E = X_i + X_j``.  These maps are not trace
preserving; ``normalize`` is a separate, explicit step.

Exact references are built as lists of Kraus "steps"; the first Kraus
operator of every step is its no-jump branch, which lets the jump part of an
exact composition be isolated (``jump_part``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuits import Circuit, Gate, circuit_unitary, decompose_cnot_xx, gate_matrix, ms
from .msgate import analytic_channel, collective_spin, solve_coefficients
from .qcore import I2, X, Z, dag, embed, trace_distance
from .repcode import encode


@dataclass(frozen=True)
class FirstOrderMap:
    """``rho -> U rho U^dag + sum_k c_k O_k U rho U^dag O_k^dag``."""

    base: np.ndarray
    terms: tuple[tuple[float, np.ndarray], ...] = ()

    def __post_init__(self):
        for c, _ in self.terms:
            if c < 0:
                raise ValueError("error-term weights must be non-negative")

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = self.base @ rho @ dag(self.base)
        return out + sum((c * o @ out @ dag(o) for c, o in self.terms), np.zeros_like(out))

    def error_part(self, rho: np.ndarray) -> np.ndarray:
        out = self.base @ rho @ dag(self.base)
        return sum((c * o @ out @ dag(o) for c, o in self.terms), np.zeros_like(out))

    def superop(self) -> np.ndarray:
        """Error terms as the matrix ``sum_k c_k O_k (x) conj(O_k)``."""
        d = self.base.shape[0]
        return sum((c * np.kron(o, o.conj()) for c, o in self.terms), np.zeros((d * d,) * 2, complex))

    def then(self, other: "FirstOrderMap") -> "FirstOrderMap":
        """``other`` after ``self``, keeping first order: earlier errors are conjugated by ``other.base``."""
        u = other.base
        moved = tuple((c, u @ o @ dag(u)) for c, o in self.terms)
        return FirstOrderMap(u @ self.base, moved + other.terms)


def unitary_map(u: np.ndarray) -> FirstOrderMap:
    return FirstOrderMap(np.asarray(u, dtype=complex))


def normalize(rho: np.ndarray) -> np.ndarray:
    return rho / np.trace(rho)


def _pair_ms(pair, n_qubits):
    return embed(ms(0.0, 0.0), list(pair), n_qubits)


def _bit_flip_sum(pair, n_qubits, sign=1):
    i, j = pair
    return sign * embed(X, [i], n_qubits) + embed(X, [j], n_qubits)


def first_order_ms(r1: float, pair=(0, 1), n_qubits: int = 2) -> FirstOrderMap:
    if r1 < 0:
        raise ValueError("r1 must be non-negative")
    if pair[0] == pair[1]:
        raise ValueError("pair needs two distinct qubits")
    terms = ((r1 / 2, _bit_flip_sum(pair, n_qubits)),) if r1 > 0 else ()
    return FirstOrderMap(_pair_ms(pair, n_qubits), terms)


def redundant_unit(r1: float, n: int, pair=(0, 1), n_qubits: int = 2) -> FirstOrderMap:
    """An MS gate followed by ``n`` (MS, Z, MS, Z) pairs, to first order in ``r1``.

    The Z acts on the first qubit of ``pair``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if r1 < 0:
        raise ValueError("r1 must be non-negative")
    terms = []
    if r1 > 0:
        terms.append((r1 * (n + 1) / 2, _bit_flip_sum(pair, n_qubits)))
        if n > 0:
            terms.append((r1 * n / 2, _bit_flip_sum(pair, n_qubits, sign=-1)))
    return FirstOrderMap(_pair_ms(pair, n_qubits), tuple(terms))


def composed_redundant_unit(r1: float, n: int, pair=(0, 1), n_qubits: int = 2) -> FirstOrderMap:
    """The same unit built by chaining 2n+1 first-order gates with interleaved Z."""
    z = unitary_map(embed(Z, [pair[0]], n_qubits))
    gate = first_order_ms(r1, pair, n_qubits)
    out = gate
    for _ in range(n):
        out = out.then(gate).then(z).then(gate).then(z)
    return out


ENCODED_TERMS = (("+", 1), ("+", 2), ("-", 1), ("-", 2))


def encoded_terms(r1: float, n: int) -> list[tuple[float, np.ndarray]]:
    """Weights and operators ``(Z0 + X1), (Z0 + X2), (-Z0 + X1), (-Z0 + X2)``."""
    out = []
    for sign, q in ENCODED_TERMS:
        w = r1 * (n + 1) / 2 if sign == "+" else r1 * n / 2
        op = (1 if sign == "+" else -1) * embed(Z, [0], 3) + embed(X, [q], 3)
        out.append((w, op))
    return out


def encoded_state_first_order(r1: float, n: int, phi: float) -> np.ndarray:
    """Unnormalized first-order state after the noisy encoding section."""
    if r1 < 0 or n < 0:
        raise ValueError("r1 and n must be non-negative")
    psi = encode(phi)
    rho = np.outer(psi, psi.conj())
    return rho + sum(w * o @ rho @ dag(o) for w, o in encoded_terms(r1, n))


# ---------------------------------------------------------------- exact references

Step = tuple  # tuple of full-register Kraus matrices; element 0 is the no-jump branch


def ms_noise_kraus(r1: float, r2: float = 0.0, pair=(0, 1), n_qubits: int = 2,
                   axis=(0.0, 0.0)) -> tuple[np.ndarray, ...]:
    ch = analytic_channel(solve_coefficients(r1, r2), axis)
    return tuple(embed(k, list(pair), n_qubits) for k in ch.kraus)


def noisy_ms_step(r1, pair, n_qubits, r2=0.0) -> Step:
    u = _pair_ms(pair, n_qubits)
    return tuple(k @ u for k in ms_noise_kraus(r1, r2, pair, n_qubits))


def exact_redundant_steps(r1: float, n: int, pair=(0, 1), n_qubits: int = 2,
                          r2: float = 0.0) -> list[Step]:
    z = (embed(Z, [pair[0]], n_qubits),)
    gate = noisy_ms_step(r1, pair, n_qubits, r2)
    return [gate] + [gate, z, gate, z] * n


def encoding_circuit(phi: float, n: int = 0) -> Circuit:
    """Input rotation and the two CNOTs written with XX gates, plus ``n`` pairs after each XX."""
    ops = [Gate("RX", (0,), (phi,))]
    for t in (1, 2):
        for g in decompose_cnot_xx(0, t, 3).ops:
            ops.append(g)
            if g.name == "XX":
                ops.extend([g, Gate("Z", (0,)), g, Gate("Z", (0,))] * n)
    return Circuit(3, tuple(ops))


def circuit_steps(c: Circuit, noise: dict[str, tuple] | None = None) -> list[Step]:
    """Gate-by-gate steps; every XX/MS gate is followed by its noise Kraus set."""
    steps = []
    for g in c.ops:
        u = embed(gate_matrix(g), list(g.qubits), c.n_qubits)
        if noise is not None and g.name in ("XX", "MS"):
            axis = g.params if g.name == "MS" else (0.0, 0.0)
            ks = ms_noise_kraus(noise["r1"], noise.get("r2", 0.0), g.qubits, c.n_qubits, axis)
            steps.append(tuple(k @ u for k in ks))
        else:
            steps.append((u,))
    return steps


def apply_steps(steps: list[Step], rho: np.ndarray) -> np.ndarray:
    for ks in steps:
        rho = sum(k @ rho @ dag(k) for k in ks)
    return rho


def no_jump_part(steps: list[Step], rho: np.ndarray) -> np.ndarray:
    for ks in steps:
        rho = ks[0] @ rho @ dag(ks[0])
    return rho


def jump_part(steps: list[Step], rho: np.ndarray) -> np.ndarray:
    """Exact output minus the branch where every gate took its no-jump Kraus operator."""
    return apply_steps(steps, rho) - no_jump_part(steps, rho)


def exact_encoded_state(r1: float, n: int, phi: float, r2: float = 0.0) -> np.ndarray:
    steps = circuit_steps(encoding_circuit(phi, n), {"r1": r1, "r2": r2})
    rho0 = np.zeros((8, 8), complex)
    rho0[0, 0] = 1
    return apply_steps(steps, rho0)


# ---------------------------------------------------------------- distances


def state_distance(first_order: np.ndarray, exact: np.ndarray) -> float:
    """Trace distance after normalizing the first-order output."""
    return trace_distance(normalize(first_order), exact)


def jump_distance(fo_jump: np.ndarray, exact_jump: np.ndarray) -> float:
    """Trace norm of the difference between first-order and exact error branches."""
    d = fo_jump - exact_jump
    return float(np.abs(np.linalg.eigvalsh((d + dag(d)) / 2)).sum())


def scaling_ratio(dist, r1: float = 1e-3) -> float:
    """``dist(2 r1) / dist(r1)``; about 4 for a second-order remainder."""
    return dist(2 * r1) / dist(r1)


def z_weight_on_first_qubit(terms) -> float:
    """Coefficient of ``Z0 rho Z0`` in the Pauli expansion of the error terms."""
    z0 = embed(Z, [0], 3)
    total = 0.0
    for w, o in terms:
        # Hilbert-Schmidt overlap of O with Z0 gives its Z0 amplitude
        amp = np.trace(dag(z0) @ o) / o.shape[0]
        total += w * abs(amp) ** 2
    return total
