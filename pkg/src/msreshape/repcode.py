"""Three-qubit bit-flip repetition code with a unitary inserted on qubit 0.

The logical basis is ``|0_L> = |000>``, ``|1_L> = |111>``.  Logical operators
are handled as 2x2 matrices on that basis and lifted with ``lift``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .qcore import (
    I2, X, Z, DensityMatrix, QuantumChannel, dag, embed, ket, kron,
)

N_DATA = 3
# isometry from the logical qubit into the code space
CODE = np.stack([ket("000"), ket("111")], axis=1)

# syndrome (i, j) of (Z0 Z1, Z1 Z2) -> correction; 0 means +1 outcome
SYNDROME_CORRECTION = {(0, 0): None, (0, 1): 2, (1, 0): 0, (1, 1): 1}

LOGICAL_PAULIS = {"I": I2, "X": X, "Y": -1j * Z @ X, "Z": Z}


class LeakageError(ValueError):
    pass


def lift(m: np.ndarray) -> np.ndarray:
    """2x2 logical operator -> 8x8 operator supported on the code space."""
    return CODE @ np.asarray(m) @ dag(CODE)


@dataclass(frozen=True)
class LogicalState:
    rho00: float
    rho01: complex

    def __post_init__(self):
        if not -1e-9 <= self.rho00 <= 1 + 1e-9:
            raise ValueError(f"rho00={self.rho00} outside [0, 1]")
        bound = math.sqrt(max(0.0, self.rho00 * (1 - self.rho00)))
        if abs(self.rho01) > bound + 1e-9:
            raise ValueError(f"|rho01|={abs(self.rho01):.3g} exceeds {bound:.3g}")

    def matrix(self) -> np.ndarray:
        return np.array([[self.rho00, self.rho01], [np.conj(self.rho01), 1 - self.rho00]])


@dataclass(frozen=True)
class InsertedUnitary:
    """``U = [[e^{i phi} cos t, -e^{-i delta} sin t], [e^{i delta} sin t, e^{-i phi} cos t]]``."""

    theta: float
    phi: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not -1e-12 <= self.theta <= math.pi / 2 + 1e-12:
            raise ValueError("theta must lie in [0, pi/2]")
        for name in ("phi", "delta"):
            if not -1e-12 <= getattr(self, name) <= 2 * math.pi + 1e-12:
                raise ValueError(f"{name} must lie in [0, 2 pi]")

    @property
    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        e = np.exp
        return np.array([[e(1j * self.phi) * c, -e(-1j * self.delta) * s],
                         [e(1j * self.delta) * s, e(-1j * self.phi) * c]])

    @classmethod
    def ry(cls, theta0: float) -> "InsertedUnitary":
        """The y rotation by ``theta0`` written in this parameterization."""
        return cls(theta0 / 2)


@dataclass(frozen=True)
class LogicalChannel:
    """Stochastic mixture of logical unitaries, ``rho -> sum_k w_k R_k rho R_k^dag``."""

    labels: tuple[str, ...]
    weights: tuple[float, ...]
    operators: tuple[np.ndarray, ...]

    def __post_init__(self):
        if abs(sum(self.weights) - 1) > 1e-12:
            raise ValueError(f"weights sum to {sum(self.weights)!r}")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, self.weights))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Act on a 2x2 logical density matrix."""
        return sum(w * r @ rho @ dag(r) for w, r in zip(self.weights, self.operators))

    def apply_encoded(self, psi_bar: np.ndarray) -> np.ndarray:
        """Act on an encoded three-qubit ket; returns the 8x8 output."""
        rho = dag(CODE) @ np.outer(psi_bar, np.conj(psi_bar)) @ CODE
        return lift(self.apply(rho))

    def to_channel(self) -> QuantumChannel:
        return QuantumChannel(tuple(math.sqrt(w) * r for w, r in zip(self.weights, self.operators)
                                    if w > 0))


def encode(phi: float) -> np.ndarray:
    """``Rx(phi)|0>`` copied onto three qubits: ``cos(phi/2)|000> - i sin(phi/2)|111>``."""
    return math.cos(phi / 2) * ket("000") - 1j * math.sin(phi / 2) * ket("111")


def syndrome_projector(i: int, j: int) -> np.ndarray:
    zz01 = kron(Z, Z, I2)
    zz12 = kron(I2, Z, Z)
    zz02 = kron(Z, I2, Z)
    return (np.eye(8) + (-1) ** i * zz01 + (-1) ** j * zz12 + (-1) ** (i + j) * zz02) / 4


def recovery_operators() -> tuple[np.ndarray, ...]:
    ops = []
    for (i, j), q in SYNDROME_CORRECTION.items():
        corr = np.eye(8) if q is None else embed(X, [q], N_DATA)
        ops.append(corr @ syndrome_projector(i, j))
    return tuple(ops)


def recovery_channel() -> QuantumChannel:
    """Projective syndrome measurement of (Z0 Z1, Z1 Z2) followed by the lookup correction."""
    return QuantumChannel(recovery_operators())


_R_WEIGHTS = (
    # (bit-flip polynomial, uses cos^2 (True) or sin^2 (False))
    (lambda p: (1 + p) * (1 - p) ** 2, True),
    (lambda p: (2 - p) * (1 - p) * p, False),
    (lambda p: (2 - p) * p**2, True),
    (lambda p: p * (1 + p) * (1 - p), False),
    (lambda p: (1 - p) ** 3, False),
    (lambda p: p**2 * (1 - p), True),
    (lambda p: p**3, False),
    (lambda p: p * (1 - p) ** 2, True),
)


def _r_operators(phi: float, delta: float) -> tuple[np.ndarray, ...]:
    e = np.exp
    return (
        np.diag([e(1j * phi), e(-1j * phi)]),
        np.array([[0, -e(-1j * delta)], [e(1j * delta), 0]]),
        np.array([[0, e(1j * phi)], [e(-1j * phi), 0]]),
        np.diag([-e(-1j * delta), e(1j * delta)]),
        np.diag([e(1j * delta), -e(-1j * delta)]),
        np.array([[0, e(-1j * phi)], [e(1j * phi), 0]]),
        np.array([[0, e(1j * delta)], [-e(-1j * delta), 0]]),
        np.diag([e(-1j * phi), e(1j * phi)]),
    )


def agnostic_channel(p: float, u: InsertedUnitary) -> LogicalChannel:
    """Logical channel for i.i.d. bit flips with rate ``p``, then ``u`` on qubit 0, then recovery."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    c2, s2 = math.cos(u.theta) ** 2, math.sin(u.theta) ** 2
    weights = tuple(f(p) * (c2 if cos else s2) for f, cos in _R_WEIGHTS)
    labels = tuple(f"R{k}" for k in range(1, 9))
    return LogicalChannel(labels, weights, _r_operators(u.phi, u.delta))


def circuit_agnostic_output(p: float, u: InsertedUnitary, phi: float) -> DensityMatrix:
    out = agnostic_channel(p, u).apply_encoded(encode(phi))
    return DensityMatrix((2,) * N_DATA, out)


def brute_force_output(p: float, u: np.ndarray, psi_bar: np.ndarray) -> np.ndarray:
    """Enumerate the 8 flip patterns, apply ``u`` on qubit 0, then recover."""
    rec = recovery_channel()
    u0 = embed(u, [0], N_DATA)
    rho = np.outer(psi_bar, np.conj(psi_bar))
    out = np.zeros((8, 8), complex)
    for flips in product((0, 1), repeat=N_DATA):
        k = sum(flips)
        prob = p**k * (1 - p) ** (N_DATA - k)
        f = kron(*[X if b else I2 for b in flips])
        v = u0 @ f
        out += prob * rec(v @ rho @ dag(v))
    return out


def ry_logical_channel(p: float, theta0: float) -> LogicalChannel:
    """Pauli form of the logical channel when the inserted gate is ``Ry(theta0)``."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    c2, s2 = math.cos(theta0 / 2) ** 2, math.sin(theta0 / 2) ** 2
    w = {
        "I": (1 - p) ** 2 * (1 + 2 * p) * c2,
        "X": (3 * p**2 - 2 * p**3) * c2,
        "Y": (2 * p - 3 * p**2 + 2 * p**3) * s2,
        "Z": (1 - 2 * p + 3 * p**2 - 2 * p**3) * s2,
    }
    return LogicalChannel(tuple(w), tuple(w.values()), tuple(LOGICAL_PAULIS[k] for k in w))


def logical_elements(rho_bar: DensityMatrix | np.ndarray, tol: float = 1e-8) -> LogicalState:
    """``(<000|rho|000>, <000|rho|111>)`` of a state in the code space."""
    m = rho_bar.matrix if isinstance(rho_bar, DensityMatrix) else np.asarray(rho_bar)
    inside = np.real(m[0, 0] + m[7, 7])
    if abs(np.trace(m).real - inside) > tol:
        raise LeakageError(f"population {np.trace(m).real - inside:.3g} outside the code space")
    return LogicalState(float(np.real(m[0, 0])), complex(m[0, 7]))


def model_curves(p_grid, theta0_grid, phi: float = math.pi / 9) -> list[tuple]:
    """Rows ``(p, theta0, rho00, Re rho01, Im rho01)`` of the Ry-inserted model."""
    if len(p_grid) == 0 or len(theta0_grid) == 0:
        raise ValueError("grids must be non-empty")
    rows = []
    psi = encode(phi)
    for p in p_grid:
        for t in theta0_grid:
            st = logical_elements(ry_logical_channel(p, t).apply_encoded(psi))
            rows.append((float(p), float(t), st.rho00, st.rho01.real, st.rho01.imag))
    return rows
