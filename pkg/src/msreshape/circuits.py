"""Circuit IR, gate matrices and compilation to ion (MS) or CZ native gate sets.

Qubits are 0-indexed; qubit 0 is the leftmost tensor factor.  Compilation
tracks a per-qubit virtual Rz frame: the output circuit satisfies
``D @ U_out == U_in`` up to a global phase, with ``D = Rz(pending_rz[0]) (x) ...``.
"""
from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass, field

import numpy as np

from .qcore import I2, X, Y, Z, dag, embed, kron

SQ2 = math.sqrt(2)

ARITY = {
    "RX": 1, "RY": 1, "RZ": 1, "X": 1, "Y": 1, "Z": 1, "H": 1, "U3": 1, "PRX": 1,
    "CNOT": 2, "XX": 2, "MS": 2, "CZ": 2,
}
N_PARAMS = {"RX": 1, "RY": 1, "RZ": 1, "U3": 3, "PRX": 2, "MS": 2}



@dataclass(frozen=True)
class Backend:
    """Target gate set. ``ion`` models single-qubit gates as PRx plus virtual Rz."""
    kind: str

    def __post_init__(self):
        if self.kind not in _ALLOWED:
            raise ValueError(f"unknown backend {self.kind!r}")

    @property
    def allowed(self) -> frozenset[str]:
        return _ALLOWED[self.kind]

    def accepts(self, c: "Circuit") -> bool:
        return all(g.name in self.allowed for g in c.ops)


_ALLOWED = {
    "generic": frozenset(ARITY),
    "ion": frozenset({"MS", "PRX"}),
    "cz": frozenset({"CZ", "PRX"}),
}


class CompileError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        name = self.name.upper()
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) + 0.0 for p in self.params))  # no -0.0
        if name not in ARITY:
            raise ValueError(f"unknown gate kind {self.name!r}")
        if len(self.qubits) != ARITY[name]:
            raise ValueError(f"{name} acts on {ARITY[name]} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"{name} has repeated qubits {self.qubits}")
        if len(self.params) != N_PARAMS.get(name, 0):
            raise ValueError(f"{name} takes {N_PARAMS.get(name, 0)} parameter(s)")

    def __str__(self):
        ps = f"({', '.join(repr(p) for p in self.params)})" if self.params else ""
        return f"{self.name}{ps} {' '.join(str(q) for q in self.qubits)}"


def rx(t):
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(t):
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(t):
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


def prx(theta, phi):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * np.exp(-1j * phi) * s], [-1j * np.exp(1j * phi) * s, c]])


def u3(theta, phi, delta):
    """General single-qubit unitary in the three-angle form."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[np.exp(1j * phi) * c, -np.exp(-1j * delta) * s],
                     [np.exp(1j * delta) * s, np.exp(-1j * phi) * c]])


def ms(phi1, phi2):
    e = np.exp
    return np.array([
        [1, 0, 0, -1j * e(-1j * (phi1 + phi2))],
        [0, 1, -1j * e(-1j * (phi1 - phi2)), 0],
        [0, -1j * e(1j * (phi1 - phi2)), 1, 0],
        [-1j * e(1j * (phi1 + phi2)), 0, 0, 1],
    ]) / SQ2


CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / SQ2
XX = (np.eye(4) - 1j * kron(X, X)) / SQ2


def gate_matrix(g: Gate) -> np.ndarray:
    p = g.params
    return {
        "RX": lambda: rx(*p), "RY": lambda: ry(*p), "RZ": lambda: rz(*p),
        "X": lambda: X, "Y": lambda: Y, "Z": lambda: Z, "H": lambda: HADAMARD,
        "U3": lambda: u3(*p), "PRX": lambda: prx(*p), "MS": lambda: ms(*p),
        "CNOT": lambda: CNOT, "XX": lambda: XX, "CZ": lambda: CZ,
    }[g.name]().astype(complex)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    ops: tuple[Gate, ...] = ()
    pending_rz: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        pend = self.pending_rz or (0.0,) * self.n_qubits
        if len(pend) != self.n_qubits:
            raise ValueError("pending_rz needs one angle per qubit")
        object.__setattr__(self, "pending_rz", tuple(float(a) for a in pend))
        for g in self.ops:
            if max(g.qubits) >= self.n_qubits:
                raise ValueError(f"gate {g} outside a {self.n_qubits}-qubit register")

    def __add__(self, other: "Circuit") -> "Circuit":
        if any(self.pending_rz):
            raise ValueError("flush pending Rz before appending")
        n = max(self.n_qubits, other.n_qubits)
        pend = list(other.pending_rz) + [0.0] * (n - other.n_qubits)
        return Circuit(n, self.ops + other.ops, tuple(pend))

    def append(self, *gates: Gate) -> "Circuit":
        return Circuit(self.n_qubits, self.ops + gates, self.pending_rz)

    def flush_pending(self) -> "Circuit":
        """Materialize the virtual Rz frame as explicit RZ gates."""
        extra = tuple(Gate("RZ", (q,), (a,)) for q, a in enumerate(self.pending_rz) if a != 0)
        return Circuit(self.n_qubits, self.ops + extra)

    def two_qubit_indices(self) -> list[int]:
        return [i for i, g in enumerate(self.ops) if len(g.qubits) == 2]

    def count(self, name: str) -> int:
        return sum(g.name == name.upper() for g in self.ops)


def pending_diagonal(c: Circuit) -> np.ndarray:
    return kron(*[rz(a) for a in c.pending_rz]) if c.n_qubits else np.eye(1)


def circuit_unitary(c: Circuit, include_pending: bool = True) -> np.ndarray:
    u = np.eye(2**c.n_qubits, dtype=complex)
    for g in c.ops:
        u = embed(gate_matrix(g), g.qubits, c.n_qubits) @ u
    if include_pending:
        u = pending_diagonal(c) @ u
    return u


def equivalent_up_to_phase(u: np.ndarray, v: np.ndarray, tol: float = 1e-10) -> bool:
    return phase_deviation(u, v)[0] < tol


def phase_deviation(u: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    """``(max|u - e^{ia} v|, a)`` with ``a`` taken from the largest entry of ``v``."""
    u, v = np.asarray(u), np.asarray(v)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape != v.shape:
        raise ValueError("expected two square matrices of equal shape")
    k = np.unravel_index(np.argmax(np.abs(v)), v.shape)
    if abs(u[k]) == 0:
        return float(np.max(np.abs(u - v))), 0.0
    alpha = float(np.angle(u[k] / v[k]))
    return float(np.max(np.abs(u - np.exp(1j * alpha) * v))), alpha


# ---------------------------------------------------------------- decompositions


def decompose_cnot_xx(control: int = 0, target: int = 1, n_qubits: int = 2) -> Circuit:
    """CNOT from one XX gate; the control's X error after the XX leaves as +Z."""
    c, t = control, target
    return Circuit(n_qubits, (
        Gate("RY", (c,), (math.pi / 2,)),
        Gate("XX", (c, t)),
        Gate("RX", (c,), (-math.pi / 2,)),
        Gate("RX", (t,), (-math.pi / 2,)),
        Gate("RY", (c,), (-math.pi / 2,)),
    ))


def decompose_cnot_cz(control: int = 0, target: int = 1, n_qubits: int = 2) -> Circuit:
    """CNOT as H-like PRx pairs on the target around a CZ.

    Gates listed in time order: PRx(pi/2, pi/2) then PRx(pi, 0).  As a matrix
    product this is PRx(pi, 0) @ PRx(pi/2, pi/2) = -i H.
    """
    t = target
    had = (Gate("PRX", (t,), (math.pi / 2, math.pi / 2)), Gate("PRX", (t,), (math.pi, 0.0)))
    return Circuit(n_qubits, had + (Gate("CZ", (control, target)),) + had)


def xx_from_ms(phi1: float, phi2: float, q1: int = 0, q2: int = 1, n_qubits: int = 2) -> Circuit:
    """XX written as MS(phi1, phi2) sandwiched by Rz rotations."""
    return Circuit(n_qubits, (
        Gate("RZ", (q1,), (phi1,)), Gate("RZ", (q2,), (phi2,)),
        Gate("MS", (q1, q2), (phi1, phi2)),
        Gate("RZ", (q1,), (-phi1,)), Gate("RZ", (q2,), (-phi2,)),
    ))


def _to_cnot_form(g: Gate) -> list[Gate]:
    """Rewrite a two-qubit gate using CNOT and single-qubit gates."""
    a, b = g.qubits
    if g.name == "CNOT":
        return [g]
    if g.name == "CZ":
        return [Gate("H", (b,)), Gate("CNOT", (a, b)), Gate("H", (b,))]
    if g.name == "XX":
        hh = [Gate("H", (a,)), Gate("H", (b,))]
        return hh + [Gate("CNOT", (a, b)), Gate("RZ", (b,), (math.pi / 2,)),
                     Gate("CNOT", (a, b))] + hh
    if g.name == "MS":
        p1, p2 = g.params
        return ([Gate("RZ", (a,), (-p1,)), Gate("RZ", (b,), (-p2,))]
                + _to_cnot_form(Gate("XX", (a, b)))
                + [Gate("RZ", (a,), (p1,)), Gate("RZ", (b,), (p2,))])
    raise CompileError(f"no CNOT form for {g.name}")


def _zxz(m: np.ndarray) -> tuple[float, float, float]:
    """Angles with ``m ~ Rz(alpha) Rx(theta) Rz(gamma)``, theta in [0, pi]."""
    m = m / np.sqrt(np.linalg.det(m))
    c = min(1.0, abs(m[0, 0]))
    theta = 2 * math.acos(c)
    if abs(m[1, 0]) < 1e-12:
        return -2 * float(np.angle(m[0, 0])), 0.0, 0.0
    diff = 2 * (float(np.angle(m[1, 0])) + math.pi / 2)
    total = -2 * float(np.angle(m[0, 0])) if c > 1e-12 else 0.0
    return (total + diff) / 2, theta, (total - diff) / 2


def _wrap(a: float) -> float:
    return math.remainder(a, 4 * math.pi)


class _FrameTracker:
    """Emits native gates while carrying each qubit's virtual Rz angle."""

    def __init__(self, n: int, backend: str):
        self.n = n
        self.backend = backend
        self.lam = [0.0] * n
        self.out: list[Gate] = []

    def single(self, m: np.ndarray, q: int):
        # m Rz(lam) = Rz(lam') PRx(theta, phi)
        alpha, theta, gamma = _zxz(m @ rz(self.lam[q]))
        if theta > 1e-12:
            self.out.append(Gate("PRX", (q,), (theta, _wrap(-gamma))))
            self.lam[q] = _wrap(alpha + gamma)
        else:
            self.lam[q] = _wrap(alpha)

    def feed(self, g: Gate):
        if len(g.qubits) == 1:
            if g.name == "RZ":
                self.lam[g.qubits[0]] = _wrap(self.lam[g.qubits[0]] + g.params[0])
            else:
                self.single(gate_matrix(g), g.qubits[0])
            return
        a, b = g.qubits
        if self.backend == "cz":
            if g.name == "CZ":
                self.out.append(g)
                return
            for sub in _to_cnot_form(g):
                if sub.name == "CNOT":
                    for s2 in decompose_cnot_cz(*sub.qubits, n_qubits=self.n).ops:
                        self.feed(s2)
                else:
                    self.feed(sub)
            return
        # ion backend: every entangling gate becomes one MS with frame-shifted phases
        if g.name == "MS":
            p1, p2 = g.params
        elif g.name == "XX":
            p1 = p2 = 0.0
        elif g.name == "CNOT":
            for sub in decompose_cnot_xx(a, b, self.n).ops:
                self.feed(sub)
            return
        elif g.name == "CZ":
            for sub in (Gate("H", (b,)), Gate("CNOT", (a, b)), Gate("H", (b,))):
                self.feed(sub)
            return
        else:
            raise CompileError(f"unsupported gate {g.name} for the ion backend")
        self.out.append(Gate("MS", (a, b), (_wrap(p1 - self.lam[a]), _wrap(p2 - self.lam[b]))))


def compile_circuit(c: Circuit, backend: str | Backend) -> Circuit:
    """Rewrite ``c`` into ``backend``'s native gates with a virtual Rz frame.

    Gate order is preserved: each entangling gate of the input maps to one MS
    (ion) or, for CNOT/CZ, one CZ (cz), emitted at the same position.
    Z gates on the ion backend are absorbed into the frame.
    """
    backend = backend.kind if isinstance(backend, Backend) else backend
    if backend not in ("ion", "cz"):
        raise CompileError(f"backend must be 'ion' or 'cz', got {backend!r}")
    tr = _FrameTracker(c.n_qubits, backend)
    for g in c.ops:
        tr.feed(g)
    # the input's own pending frame is terminal, so it simply adds on
    lam = tuple(_wrap(a + b) for a, b in zip(tr.lam, c.pending_rz))
    return Circuit(c.n_qubits, tuple(tr.out), lam)


def verify_compiled(original: Circuit, compiled: Circuit) -> tuple[float, float]:
    """Max deviation and optimal phase for ``D U_out`` against ``U_in``."""
    return phase_deviation(circuit_unitary(compiled), circuit_unitary(original))


def insert_redundant_pairs(c: Circuit, n: int, backend: str | Backend = "ion",
                           encoding: tuple[int, ...] | None = None) -> Circuit:
    """Append ``n`` identity-equivalent gate pairs after each encoding entangling gate.

    The encoding gates are the first two two-qubit gates unless ``encoding``
    gives their op indices.  Ion pairs are ``MS, Z_first, MS, Z_first`` reusing
    the encoding gate (an XX or MS); CZ pairs are ``CZ, CZ``.
    """
    backend = backend.kind if isinstance(backend, Backend) else backend
    if n < 0:
        raise ValueError("number of pairs must be non-negative")
    if encoding is None:
        encoding = tuple(c.two_qubit_indices()[:2])
    if not encoding:
        raise ValueError("circuit has no entangling gate to pad")
    ops = []
    for i, g in enumerate(c.ops):
        ops.append(g)
        if i not in encoding or n == 0:
            continue
        if backend == "ion":
            if g.name not in ("MS", "XX"):
                raise CompileError(f"ion pairs follow MS/XX gates, found {g.name}")
            z = Gate("Z", (g.qubits[0],))
            ops.extend([g, z, g, z] * n)
        elif backend == "cz":
            if g.name != "CZ":
                raise CompileError(f"cz pairs follow CZ gates, found {g.name}")
            ops.extend([g, g] * n)
        else:
            raise CompileError(f"unknown backend {backend!r}")
    return Circuit(c.n_qubits, tuple(ops), c.pending_rz)


# ---------------------------------------------------------------- text format

_LINE = re.compile(r"^\s*([A-Za-z][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*((?:\d+\s*)*)$")
_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow, ast.USub: operator.neg,
        ast.UAdd: operator.pos}


def _eval_param(text: str) -> float:
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(f"bad parameter expression {text!r}")
    return ev(ast.parse(text.strip(), mode="eval"))


def parse_circuit(text: str, n_qubits: int | None = None) -> Circuit:
    """Parse ``NAME(params) q...`` lines; ``#`` starts a comment.

    ``QUBITS n`` sets the register size and ``VRZ(angle) q`` sets a pending
    virtual Rz.  Parameters accept arithmetic with ``pi``.
    """
    ops, pending = [], {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise ValueError(f"line {lineno}: cannot parse {raw!r}")
        name, params, qubits = m.group(1).upper(), m.group(2), m.group(3).split()
        vals = [_eval_param(p) for p in params.split(",")] if params and params.strip() else []
        if name == "QUBITS":
            n_qubits = int(qubits[0])
        elif name == "VRZ":
            pending[int(qubits[0])] = vals[0]
        else:
            try:
                ops.append(Gate(name, tuple(int(q) for q in qubits), tuple(vals)))
            except ValueError as e:
                raise ValueError(f"line {lineno}: {e}") from None
    n = n_qubits if n_qubits is not None else 1 + max(
        [q for g in ops for q in g.qubits] + list(pending) + [0])
    pend = tuple(pending.get(q, 0.0) for q in range(n))
    return Circuit(n, tuple(ops), pend)


def format_circuit(c: Circuit) -> str:
    lines = [f"QUBITS {c.n_qubits}"] + [str(g) for g in c.ops]
    lines += [f"VRZ({a!r}) {q}" for q, a in enumerate(c.pending_rz) if a != 0]
    return "\n".join(lines) + "\n"
