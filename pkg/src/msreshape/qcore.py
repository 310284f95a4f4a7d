"""Dense quantum states, channels, Choi matrices and canonical Kraus extraction.

Conventions used throughout the package:

* ``|0> = (1, 0)^T`` and qubit 0 is the leftmost tensor factor.
* Choi matrices are unnormalized, ``C = sum_ij E(|i><j|) (x) |i><j|`` (output
  factor first).  With this ordering a Kraus operator ``K`` corresponds to the
  vector ``vec(K) = K.reshape(-1)`` and ``C = sum_k vec(K_k) vec(K_k)^dag``.
  Tracing out the output factor gives the identity on the input space for
  trace-preserving maps.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Sequence

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}

CPTP_TOL = 1e-8


class ChannelError(ValueError):
    """Raised when a map fails a CPTP / positivity / dimension check."""


def kron(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of any number of matrices (leftmost = first factor)."""
    return reduce(np.kron, [np.asarray(o) for o in ops])


def dag(a: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(a)).T


def is_hermitian(a: np.ndarray, tol: float = 1e-10) -> bool:
    a = np.asarray(a)
    return a.shape[0] == a.shape[1] and np.max(np.abs(a - dag(a)), initial=0.0) < tol


def is_unitary(a: np.ndarray, tol: float = 1e-10) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return np.max(np.abs(a @ dag(a) - np.eye(a.shape[0]))) < tol


def ket(bits: str) -> np.ndarray:
    """Computational basis vector, e.g. ``ket("010")``."""
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


def embed(op: np.ndarray, targets: Sequence[int], n_qubits: int) -> np.ndarray:
    """Lift a k-qubit operator acting on ``targets`` (in that order) to n qubits."""
    targets = list(targets)
    k = len(targets)
    op = np.asarray(op, dtype=complex)
    if op.shape != (2**k, 2**k):
        raise ValueError(f"operator shape {op.shape} does not match {k} target qubits")
    if len(set(targets)) != k or any(t < 0 or t >= n_qubits for t in targets):
        raise ValueError(f"invalid targets {targets} for {n_qubits} qubits")
    rest = [q for q in range(n_qubits) if q not in targets]
    full = np.kron(op, np.eye(2 ** len(rest), dtype=complex))
    # full acts on ordering targets + rest; permute axes back to 0..n-1
    order = targets + rest
    perm = np.argsort(order)
    t = full.reshape([2] * (2 * n_qubits))
    t = t.transpose(list(perm) + [n_qubits + p for p in perm])
    return t.reshape(2**n_qubits, 2**n_qubits)


@dataclass(frozen=True)
class DensityMatrix:
    """Density operator on a tensor product with explicit subsystem dims."""

    dims: tuple[int, ...]
    matrix: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        n = int(np.prod(self.dims))
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} inconsistent with dims {self.dims}")
        if self.validate:
            if not is_hermitian(m, 1e-10):
                raise ValueError("density matrix is not Hermitian")
            if abs(np.trace(m) - 1) > 1e-10:
                raise ValueError(f"density matrix trace {np.trace(m).real:.3g} != 1")
            ev = np.linalg.eigvalsh((m + dag(m)) / 2)
            if ev[0] < -1e-10:
                raise ValueError(f"density matrix has negative eigenvalue {ev[0]:.3g}")

    @classmethod
    def from_ket(cls, psi: np.ndarray, dims: Sequence[int] | None = None) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        if dims is None:
            dims = (2,) * int(round(np.log2(psi.size)))
        return cls(tuple(dims), np.outer(psi, psi.conj()))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(self.matrix @ op))


def thermal_state(n_th: float, fock_dim: int) -> np.ndarray:
    """Truncated thermal state of an oscillator, renormalized on the kept levels."""
    n = np.arange(fock_dim)
    if n_th == 0:
        p = (n == 0).astype(float)
    else:
        p = (n_th / (1 + n_th)) ** n
    return np.diag(p / p.sum()).astype(complex)


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Reduce ``rho`` to the subsystems listed in ``keep`` (kept in ascending order)."""
    keep = sorted(set(int(k) for k in keep))
    nsys = len(rho.dims)
    if any(k < 0 or k >= nsys for k in keep):
        raise IndexError(f"subsystem index out of range in {keep} for {nsys} subsystems")
    t = rho.matrix.reshape(rho.dims + rho.dims)
    traced = [i for i in range(nsys) if i not in keep]
    # trace the highest index first so remaining axis numbers stay valid
    for n_left, i in enumerate(sorted(traced, reverse=True)):
        cur = nsys - n_left
        t = np.trace(t, axis1=i, axis2=i + cur)
    kdims = tuple(rho.dims[k] for k in keep)
    d = int(np.prod(kdims)) if kdims else 1
    return DensityMatrix(kdims, t.reshape(d, d), validate=False)


@dataclass(frozen=True)
class ChoiMatrix:
    """Unnormalized Choi matrix ``sum_ij E(|i><j|) (x) |i><j|``."""

    dim_in: int
    dim_out: int
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.dim_in * self.dim_out

    def partial_trace_output(self) -> np.ndarray:
        t = self.matrix.reshape(self.dim_out, self.dim_in, self.dim_out, self.dim_in)
        return np.einsum("aiaj->ij", t)


@dataclass(frozen=True)
class QuantumChannel:
    """A channel in Kraus form.  ``canonical`` marks trace-orthogonal Kraus lists."""

    kraus: tuple[np.ndarray, ...]
    canonical: bool = False
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        ks = tuple(np.array(k, dtype=complex) for k in self.kraus)
        if not ks:
            raise ChannelError("a channel needs at least one Kraus operator")
        shape = ks[0].shape
        if any(k.shape != shape for k in ks):
            raise ChannelError("Kraus operators have inconsistent shapes")
        for k in ks:
            k.setflags(write=False)
        object.__setattr__(self, "kraus", ks)
        if self.check:
            dev = self.cptp_deviation()
            if dev > CPTP_TOL:
                raise ChannelError(f"Kraus completeness violated by {dev:.3g}")

    @property
    def dim_out(self) -> int:
        return self.kraus[0].shape[0]

    @property
    def dim_in(self) -> int:
        return self.kraus[0].shape[1]

    def cptp_deviation(self) -> float:
        s = sum(dag(k) @ k for k in self.kraus)
        return float(np.max(np.abs(s - np.eye(self.dim_in))))

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ dag(k) for k in self.kraus)

    def choi(self) -> ChoiMatrix:
        vecs = np.array([k.reshape(-1) for k in self.kraus])
        return ChoiMatrix(self.dim_in, self.dim_out, vecs.T @ vecs.conj())


def apply_channel(ch: QuantumChannel, rho: DensityMatrix,
                  targets: Sequence[int] | None = None) -> DensityMatrix:
    """Apply ``ch`` to ``rho``; with ``targets`` the channel acts on those qubits only."""
    if targets is None:
        if ch.dim_in != rho.dim:
            raise ChannelError(f"channel input dim {ch.dim_in} != state dim {rho.dim}")
        return DensityMatrix(rho.dims if ch.dim_out == rho.dim else (ch.dim_out,),
                             ch(rho.matrix), validate=False)
    n = len(rho.dims)
    if any(d != 2 for d in rho.dims):
        raise ChannelError("targeted application requires an all-qubit state")
    if ch.dim_in != 2 ** len(targets):
        raise ChannelError(f"channel acts on {ch.dim_in} dims, got {len(targets)} targets")
    out = sum(embed(k, targets, n) @ rho.matrix @ dag(embed(k, targets, n)) for k in ch.kraus)
    return DensityMatrix(rho.dims, out, validate=False)


def choi_of(fn: Callable[[np.ndarray], np.ndarray], dim: int) -> ChoiMatrix:
    """Choi matrix of a linear map given as a function on ``dim x dim`` matrices."""
    blocks = []
    dim_out = None
    for i in range(dim):
        for j in range(dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = 1.0
            out = np.asarray(fn(e), dtype=complex)
            dim_out = out.shape[0]
            blocks.append(np.kron(out, e))
    return ChoiMatrix(dim, dim_out, sum(blocks))


def _phase_fix(k: np.ndarray) -> np.ndarray:
    flat = k.reshape(-1)
    mags = np.abs(flat)
    # first entry (row-major) within 1e-12 of the maximum magnitude
    idx = int(np.flatnonzero(mags >= mags.max() - 1e-12)[0])
    return k * (mags[idx] / flat[idx])


def canonical_kraus(choi: ChoiMatrix, cutoff: float = 1e-10, psd_tol: float = 1e-10,
                    check: bool = True) -> QuantumChannel:
    """Trace-orthogonal Kraus operators from the eigendecomposition of a Choi matrix.

    Eigenvalues above ``cutoff`` are kept in descending order, each Kraus
    operator is ``sqrt(lambda) * unvec(v)``, and its phase is fixed so that the
    first largest-magnitude entry is real and positive.
    """
    m = choi.matrix
    if not is_hermitian(m, max(psd_tol, 1e-10) * max(1.0, np.abs(m).max())):
        raise ChannelError("Choi matrix is not Hermitian")
    w, v = np.linalg.eigh((m + dag(m)) / 2)
    if w[0] < -psd_tol:
        raise ChannelError(f"Choi matrix not PSD: most negative eigenvalue {w[0]:.3e}")
    order = np.argsort(w)[::-1]
    kraus = [
        _phase_fix(np.sqrt(w[i]) * v[:, i].reshape(choi.dim_out, choi.dim_in))
        for i in order if w[i] > cutoff
    ]
    return QuantumChannel(tuple(kraus), canonical=True, check=check)


def compose(a: QuantumChannel, b: QuantumChannel) -> QuantumChannel:
    """The channel ``a o b`` (``b`` acts first)."""
    if a.dim_in != b.dim_out:
        raise ChannelError(f"cannot compose: {a.dim_in} != {b.dim_out}")
    return QuantumChannel(tuple(ka @ kb for ka in a.kraus for kb in b.kraus))


def tensor(a: QuantumChannel, b: QuantumChannel) -> QuantumChannel:
    return QuantumChannel(tuple(np.kron(ka, kb) for ka in a.kraus for kb in b.kraus))


def unitary_channel(u: np.ndarray) -> QuantumChannel:
    return QuantumChannel((np.asarray(u, dtype=complex),))


def identity_channel(dim: int) -> QuantumChannel:
    return unitary_channel(np.eye(dim))


def pauli_channel(weights: dict[str, float]) -> QuantumChannel:
    """Single-qubit stochastic Pauli channel from weights keyed by 'I','X','Y','Z'."""
    total = sum(weights.values())
    if abs(total - 1) > 1e-12 or min(weights.values()) < 0:
        raise ChannelError(f"Pauli weights must be a probability vector, got {weights}")
    return QuantumChannel(tuple(np.sqrt(p) * PAULIS[k] for k, p in weights.items() if p > 0))


def bit_flip(p: float) -> QuantumChannel:
    return pauli_channel({"I": 1 - p, "X": p})


def phase_flip(p: float) -> QuantumChannel:
    return pauli_channel({"I": 1 - p, "Z": p})


def depolarizing(p: float) -> QuantumChannel:
    """``rho -> (1-p) rho + p/3 (X rho X + Y rho Y + Z rho Z)``."""
    return pauli_channel({"I": 1 - p, "X": p / 3, "Y": p / 3, "Z": p / 3})


def choi_distance(a: QuantumChannel | ChoiMatrix, b: QuantumChannel | ChoiMatrix) -> float:
    """Max-norm distance between two Choi matrices."""
    ca = a.choi() if isinstance(a, QuantumChannel) else a
    cb = b.choi() if isinstance(b, QuantumChannel) else b
    return float(np.max(np.abs(ca.matrix - cb.matrix)))


def trace_distance(a: np.ndarray | DensityMatrix, b: np.ndarray | DensityMatrix) -> float:
    a = a.matrix if isinstance(a, DensityMatrix) else np.asarray(a)
    b = b.matrix if isinstance(b, DensityMatrix) else np.asarray(b)
    d = a - b
    return 0.5 * float(np.abs(np.linalg.eigvalsh((d + dag(d)) / 2)).sum())
