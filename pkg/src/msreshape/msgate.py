"""Noise channel of a Molmer-Sorensen gate under motional dephasing or heating.

Units: the mode frequency ``nu`` is 1, rates and detunings are in units of
``nu`` and times in units of ``1/nu``.

Two routes produce the channel:

* the analytic route (``r_params`` -> ``solve_coefficients`` ->
  ``analytic_channel``), valid when the qubits stay separable from a thermal
  oscillator;
* ``simulate_exact``, which integrates the full qubit-oscillator Lindblad
  equation.  The Hamiltonian ``J (f x + g p)`` and oscillator-only dissipators
  are block diagonal in the eigenbasis of the collective spin ``J``, so the
  joint state splits into oscillator blocks labelled by pairs of ``J``
  eigenvalues ``(m, m')``.  Each block is integrated on its own and the qubit
  channel is the Schur multiplier ``rho_ab -> Tr[block(m_a, m_b)] rho_ab``.
  ``simulate_joint`` integrates the unreduced 4F-dimensional problem and is
  kept as a cross-check.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .qcore import (
    I2, X, Y, ChannelError, ChoiMatrix, QuantumChannel, canonical_kraus, choi_of,
    compose, dag, kron, thermal_state, unitary_channel,
)

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    pass


class StructureMismatch(ValueError):
    pass


@dataclass(frozen=True)
class MSParams:
    """Physical parameters of the gate; defaults are the weak-coupling example."""

    eta: float = 0.1
    omega: float = 0.1
    nu: float = 1.0
    delta: float = 0.9
    K: int = 25
    gamma_p: float = 0.02
    n_th: float = 0.05

    @property
    def detuning(self) -> float:
        return self.nu - self.delta

    @property
    def tau(self) -> float:
        if self.detuning == 0:
            raise ValueError("delta == nu: gate time undefined")
        return 2 * math.pi * self.K / self.detuning


def closure_constraints(params: MSParams, tol: float = 1e-9) -> tuple[float, bool]:
    """Gate time and whether the loop-closure / full-entanglement condition holds."""
    tau = params.tau
    ok = abs(params.eta * params.omega / params.detuning - 1 / (2 * math.sqrt(params.K))) < tol
    return tau, ok


def r_params(params: MSParams) -> tuple[float, float]:
    tau = params.tau
    r1 = 0.25 * (2 * params.n_th + 1) * params.gamma_p * tau / params.K
    r2 = params.gamma_p * 3 * tau / (16 * params.K**2)
    return r1, r2


@dataclass(frozen=True)
class MSCoefficients:
    r1: float
    r2: float
    a1: complex
    a2: complex
    a3: complex
    a4: complex
    k2: complex
    residual: float = 0.0

    def as_dict(self) -> dict:
        out = {"r1": self.r1, "r2": self.r2, "residual": self.residual}
        for name in ("a1", "a2", "a3", "a4", "k2"):
            v = complex(getattr(self, name))
            out[name] = [v.real, v.imag]
        return out


def closed_form_a1(r1: float, r2: float) -> float:
    s = math.sqrt(16 * math.exp(6 * r1) + math.exp(2 * r2) * (math.exp(4 * r1) - 1) ** 2)
    num = math.exp(-r2) * (4 * math.exp(2 * r1) - math.exp(2 * r2)
                           + math.exp(4 * r1 + 2 * r2) + math.exp(r2) * s)
    return math.sqrt(num / (2 * s))


def coupled_residuals(a1, a2, a3, a4, r1, r2) -> np.ndarray:
    """Residuals of the four equations fixing the Kraus coefficients."""
    return np.array([
        a1**2 + a2**2 - 1,
        a1 * a3 + a2 * a4 - (math.exp(-r1 - r2) - 1),
        2 * a1 * a3 + a3**2 + 2 * a2 * a4 + a4**2 - 0.5 * (math.exp(-4 * r1) - 1),
        2 * a1 * a2 + a3 * a4 + a1 * a4 + a2 * a3,
    ])


def solve_coefficients(r1: float, r2: float, tol: float = 1e-12,
                       max_iter: int = 100) -> MSCoefficients:
    """Analytic-branch coefficients (a1 ~ 1) for decay parameters ``r1, r2``.

    ``a1`` comes from its closed form and ``a2 = sqrt(1 - a1^2)``.  ``(a3, a4)``
    are refined by damped Gauss-Newton on the remaining three equations,
    seeded by the linear system formed by the second equation and the fourth
    with its ``a3*a4`` term dropped.
    """
    if r1 < 0 or r2 < 0:
        raise ValueError("r1 and r2 must be non-negative")
    a1 = closed_form_a1(r1, r2)
    a2 = math.sqrt(max(0.0, 1 - a1 * a1))
    seed_mat = np.array([[a1, a2], [a2, a1]])
    x = np.linalg.solve(seed_mat, [math.exp(-r1 - r2) - 1, -2 * a1 * a2])

    def res(v):
        return coupled_residuals(a1, a2, v[0], v[1], r1, r2)[1:]

    norm = np.linalg.norm(res(x))
    for _ in range(max_iter):
        if norm < tol:
            break
        a3, a4 = x
        jac = np.array([[a1, a2],
                        [2 * a1 + 2 * a3, 2 * a2 + 2 * a4],
                        [a2 + a4, a1 + a3]])
        step = np.linalg.lstsq(jac, -res(x), rcond=None)[0]
        lam = 1.0
        while lam > 1e-6:
            trial = x + lam * step
            tnorm = np.linalg.norm(res(trial))
            if tnorm < norm:
                break
            lam *= 0.5
        x, norm = trial, tnorm
    full = coupled_residuals(a1, a2, x[0], x[1], r1, r2)
    worst = float(np.max(np.abs(full)))
    if worst > 1e-9:
        raise ConvergenceError(
            f"coefficient solve did not converge for r1={r1}, r2={r2}: residuals {full}")
    k2 = math.sqrt((1 - math.exp(-4 * r1)) / 2)
    return MSCoefficients(r1, r2, a1, a2, float(x[0]), float(x[1]), k2, residual=worst)


def collective_spin(axis="y") -> np.ndarray:
    """``(s1 + s2)/2`` with ``s = Y``, ``X`` or the XY-plane Pauli at angles ``(phi1, phi2)``.

    ``sigma(phi) = cos(phi) X + sin(phi) Y`` so ``axis=(0, 0)`` equals ``"x"``.
    """
    if axis == "y":
        s1 = s2 = Y
    elif axis == "x":
        s1 = s2 = X
    else:
        p1, p2 = axis
        s1 = math.cos(p1) * X + math.sin(p1) * Y
        s2 = math.cos(p2) * X + math.sin(p2) * Y
    return (kron(s1, I2) + kron(I2, s2)) / 2


def analytic_channel(coeffs: MSCoefficients, axis="y") -> QuantumChannel:
    """Three-Kraus channel ``{a1 I + a3 J^2, k2 J, a2 I + a4 J^2}``."""
    J = collective_spin(axis)
    J2 = J @ J
    I4 = np.eye(4)
    kraus = (coeffs.a1 * I4 + coeffs.a3 * J2, coeffs.k2 * J, coeffs.a2 * I4 + coeffs.a4 * J2)
    return QuantumChannel(kraus)


# ---------------------------------------------------------------- exact dynamics


def _ladder(fock_dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, fock_dim)), 1).astype(complex)


@dataclass(frozen=True)
class Dissipation:
    """Oscillator Lindblad operators; ``kind`` is 'dephasing' or 'heating'."""

    kind: str = "dephasing"
    rate: float = 0.0
    n_bath: float = 0.0

    def operators(self, fock_dim: int) -> list[np.ndarray]:
        a = _ladder(fock_dim)
        if self.rate == 0:
            return []
        if self.kind == "dephasing":
            return [math.sqrt(self.rate) * (dag(a) @ a)]
        if self.kind == "heating":
            ops = [math.sqrt(self.rate * (self.n_bath + 1)) * a]
            if self.n_bath > 0:
                ops.append(math.sqrt(self.rate * self.n_bath) * dag(a))
            return ops
        raise ValueError(f"unknown dissipation kind {self.kind!r}")


def _drive(params: MSParams, fock_dim: int):
    a = _ladder(fock_dim)
    x = (a + dag(a)) / math.sqrt(2)
    p = 1j * (dag(a) - a) / math.sqrt(2)
    amp = -math.sqrt(2) * params.eta * params.omega
    eps = params.detuning

    def h(t: float) -> np.ndarray:
        return amp * (math.cos(eps * t) * x + math.sin(eps * t) * p)

    return h


def rk4(rhs, y0: np.ndarray, t0: float, t1: float, n_steps: int,
        decay: np.ndarray | None = None) -> np.ndarray:
    """Fixed-step fourth-order Runge-Kutta.

    With ``decay`` the equation is ``dy/dt = decay * y + rhs(t, y)`` (elementwise
    product) and the linear part is integrated exactly (Lawson / integrating
    factor RK4), which keeps stiff diagonal damping from limiting the step.
    """
    y = y0
    dt = (t1 - t0) / n_steps
    if decay is None:
        for i in range(n_steps):
            t = t0 + i * dt
            k1 = rhs(t, y)
            k2 = rhs(t + dt / 2, y + dt / 2 * k1)
            k3 = rhs(t + dt / 2, y + dt / 2 * k2)
            k4 = rhs(t + dt, y + dt * k3)
            y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        return y
    eh = np.exp(decay * dt / 2)
    e = eh * eh
    for i in range(n_steps):
        t = t0 + i * dt
        k1 = rhs(t, y)
        k2 = rhs(t + dt / 2, eh * (y + dt / 2 * k1))
        k3 = rhs(t + dt / 2, eh * y + dt / 2 * k2)
        k4 = rhs(t + dt, e * y + dt * eh * k3)
        y = e * y + dt / 6 * (e * k1 + 2 * eh * (k2 + k3) + k4)
    return y


def _spin_basis(axis):
    J = collective_spin(axis)
    w, v = np.linalg.eigh(J)
    m = np.rint(w).astype(int)
    return m, v


def _evolve_blocks(params: MSParams, diss: Dissipation, fock_dim: int, steps_per_loop: int,
                   rho_osc: np.ndarray):
    """Integrate the oscillator blocks for every pair of J eigenvalues in {-1, 0, 1}.

    Returns ``(traces, diag_trace_error, tail)`` where ``traces[(m, m')]`` is the
    trace of the evolved block.
    """
    ms = (-1, 0, 1)
    # block(m', m) = block(m, m')^dag, so only m <= m' is integrated
    pairs = [(m, mp) for m in ms for mp in ms if m <= mp]
    left = np.array([m for m, _ in pairs], dtype=float)[:, None, None]
    right = np.array([mp for _, mp in pairs], dtype=float)[:, None, None]
    h = _drive(params, fock_dim)
    decay = None
    if diss.kind == "dephasing" and diss.rate > 0:
        # Gamma D[a^dag a] is the Schur multiplier -Gamma/2 (j - k)^2 in the Fock basis
        n = np.arange(fock_dim)
        decay = -0.5 * diss.rate * (n[:, None] - n[None, :]) ** 2
        ops = []
    else:
        ops = diss.operators(fock_dim)
    lsum = sum((dag(L) @ L for L in ops), np.zeros((fock_dim, fock_dim), complex))

    def rhs(t, r):
        ht = h(t)
        out = -1j * (left * (ht @ r) - right * (r @ ht))
        for L in ops:
            out = out + L @ r @ dag(L)
        if ops:
            out = out - 0.5 * (lsum @ r + r @ lsum)
        return out

    y0 = np.broadcast_to(rho_osc, (len(pairs), fock_dim, fock_dim)).astype(complex)
    n_steps = steps_per_loop * params.K
    y = rk4(rhs, y0, 0.0, params.tau, n_steps, decay)
    traces = {pr: complex(np.trace(y[i])) for i, pr in enumerate(pairs)}
    traces.update({(mp, m): tr.conjugate() for (m, mp), tr in list(traces.items())})
    diag_err = max(abs(traces[(m, m)] - 1) for m in ms)
    tail = max(float(np.abs(np.diag(y[i])[-2:]).sum()) for i, (m, mp) in enumerate(pairs) if m == mp)
    return traces, diag_err, tail


def _schur_map(traces: dict, axis):
    m, v = _spin_basis(axis)
    coeff = np.array([[traces[(ma, mb)] for mb in m] for ma in m])

    def fn(rho):
        return v @ (coeff * (dag(v) @ rho @ v)) @ dag(v)

    return fn, m, v


@dataclass(frozen=True)
class ExactResult:
    channel: QuantumChannel
    target_unitary: np.ndarray
    choi: ChoiMatrix
    steps_per_loop: int
    choi_change: float
    trace_error: float
    tail_population: float
    history: tuple = field(default=(), repr=False)


def _thermal_checked(n_th: float, fock_dim: int) -> np.ndarray:
    if fock_dim < 10:
        raise ValueError("fock_dim must be at least 10")
    n = np.arange(fock_dim)
    p = (1 - n_th / (1 + n_th)) * (n_th / (1 + n_th)) ** n if n_th > 0 else (n == 0) * 1.0
    tail = float(np.sum(p[fock_dim - 2:]))
    if tail > 1e-8:
        raise ValueError(f"thermal population {tail:.2e} in the top Fock levels; raise fock_dim")
    return thermal_state(n_th, fock_dim)


def _target_unitary(traces0: dict, axis) -> np.ndarray:
    m, v = _spin_basis(axis)
    # noiseless block traces are u_m conj(u_m'); fix u_0 = 1
    u = np.array([traces0[(mm, 0)] for mm in m])
    u = u / np.abs(u)
    return v @ np.diag(u) @ dag(v)


def exact_dynamics(params: MSParams, fock_dim: int = 30, dt_control: float = 1e-7,
                   axis="y", dissipation: Dissipation | None = None, n_init: float | None = None,
                   start_steps: int = 32, max_steps: int = 4096) -> ExactResult:
    """Integrate with step halving until the extracted Choi matrix settles.

    The noisy map is composed with the inverse of the noiseless gate, itself
    produced by the same integrator with the dissipation switched off.
    """
    if dissipation is None:
        dissipation = Dissipation("dephasing", params.gamma_p)
    rho_osc = _thermal_checked(params.n_th if n_init is None else n_init, fock_dim)
    prev = None
    steps = start_steps
    history = []
    while True:
        tr0, _, _ = _evolve_blocks(params, Dissipation(rate=0.0), fock_dim, steps, rho_osc)
        tr, terr, tail = _evolve_blocks(params, dissipation, fock_dim, steps, rho_osc)
        target = _target_unitary(tr0, axis)
        fn, _, _ = _schur_map(tr, axis)
        noise = choi_of(lambda r: dag(target) @ fn(r) @ target, 4)
        change = math.inf if prev is None else float(np.max(np.abs(noise.matrix - prev.matrix)))
        history.append((steps, change))
        log.debug("steps/loop=%d choi change=%.3e", steps, change)
        if change < dt_control:
            break
        if steps >= max_steps:
            raise ConvergenceError(f"RK4 step halving did not converge: history {history}")
        prev = noise
        steps *= 2
    if terr > 1e-8:
        raise ConvergenceError(f"trace not preserved: deviation {terr:.2e}")
    if tail > 1e-8:
        raise ChannelError(f"population {tail:.2e} reached the Fock cutoff; raise fock_dim")
    ch = canonical_kraus(noise, psd_tol=1e-8)
    return ExactResult(ch, target, noise, steps, change, terr, tail, tuple(history))


def simulate_exact(params: MSParams, fock_dim: int = 30, dt_control: float = 1e-7,
                   axis="y") -> QuantumChannel:
    return exact_dynamics(params, fock_dim, dt_control, axis).channel


def simulate_joint(params: MSParams, fock_dim: int, steps_per_loop: int,
                   dissipation: Dissipation | None = None, axis="y") -> QuantumChannel:
    """Brute-force reference: evolve all 16 qubit matrix units on the full space.

    Costly (dimension 4F); intended for small ``K`` and ``fock_dim`` only.
    """
    if dissipation is None:
        dissipation = Dissipation("dephasing", params.gamma_p)
    J = collective_spin(axis)
    h = _drive(params, fock_dim)
    I4 = np.eye(4)
    ops = [np.kron(I4, L) for L in dissipation.operators(fock_dim)]
    lsum = sum((dag(L) @ L for L in ops), np.zeros((4 * fock_dim,) * 2, complex))
    rho_osc = _thermal_checked(params.n_th, fock_dim)

    def make_rhs(ops, lsum):
        def rhs(t, r):
            H = np.kron(J, h(t))
            out = -1j * (H @ r - r @ H)
            for L in ops:
                out = out + L @ r @ dag(L)
            if ops:
                out = out - 0.5 * (lsum @ r + r @ lsum)
            return out
        return rhs

    def evolve(unit, rhs):
        y = rk4(rhs, np.kron(unit, rho_osc), 0.0, params.tau, steps_per_loop * params.K)
        return np.einsum("iaja->ij", y.reshape(4, fock_dim, 4, fock_dim))

    noisy = make_rhs(ops, lsum)
    clean = make_rhs([], None)
    lab = choi_of(lambda u: evolve(u, noisy), 4)
    ideal = choi_of(lambda u: evolve(u, clean), 4)
    target = canonical_kraus(ideal, psd_tol=1e-8, check=False).kraus[0]
    target = target / np.sqrt(np.trace(dag(target) @ target).real / 4)
    lab_ch = canonical_kraus(lab, psd_tol=1e-8, check=False)
    return canonical_kraus(compose(unitary_channel(dag(target)), lab_ch).choi(), psd_tol=1e-8)


def fit_structure(ch: QuantumChannel, axis="y", threshold: float = 0.05,
                  strict: bool = True) -> MSCoefficients:
    """Project canonical Kraus operators onto ``span{I, J, J^2}``.

    The operator with the largest ``J`` component is reported as ``k2 J``; of
    the rest, the one with the larger identity component is ``a1 I + a3 J^2``.
    Phases are fixed so ``a1``, ``k2`` and ``a2`` are real and positive.
    ``residual`` is the norm of the part outside the span, relative to the
    total Kraus norm ``sqrt(sum ||K||_F^2)``.
    """
    canon = canonical_kraus(ch.choi(), psd_tol=1e-8, check=False)
    J = collective_spin(axis)
    basis = np.array([np.eye(4).reshape(-1), J.reshape(-1), (J @ J).reshape(-1)]).T
    fits, res2, total2 = [], 0.0, 0.0
    for k in canon.kraus:
        c, *_ = np.linalg.lstsq(basis, k.reshape(-1), rcond=None)
        res2 += float(np.linalg.norm(basis @ c - k.reshape(-1)) ** 2)
        total2 += float(np.linalg.norm(k) ** 2)
        fits.append(c)
    residual = math.sqrt(res2 / total2)
    if len(fits) > 3:
        residual = max(residual, math.sqrt(sum(np.linalg.norm(k) ** 2 for k in canon.kraus[3:]) / total2))
    if strict and residual > threshold:
        raise StructureMismatch(f"Kraus operators leave span{{I,J,J^2}}: residual {residual:.3g}")

    def unphase(c, idx):
        return c * (abs(c[idx]) / c[idx]) if abs(c[idx]) > 0 else c

    zero = np.zeros(3, complex)
    k2i = max(range(len(fits)), key=lambda i: abs(fits[i][1]))
    if abs(fits[k2i][1]) < 1e-14:
        k2i = None
    rest = [fits[i] for i in range(len(fits)) if i != k2i][:2]
    rest.sort(key=lambda c: -abs(c[0]))
    rest += [zero] * (2 - len(rest))
    c1 = unphase(rest[0], 0)
    c3 = unphase(rest[1], 0)
    k2 = unphase(fits[k2i], 1)[1] if k2i is not None else 0.0
    return MSCoefficients(math.nan, math.nan, complex(c1[0]), complex(c3[0]), complex(c1[2]),
                          complex(c3[2]), complex(k2), residual=residual)


def heating_channel(r: float, n_bath: float = 0.0, mode: str = "analytic",
                    params: MSParams | None = None, fock_dim: int = 30,
                    axis="y") -> QuantumChannel:
    """Channel for oscillator heating with decay parameter ``r``.

    In ``exact`` mode the rate is chosen so that ``r = (2 n_bath + 1) Gamma tau / (4K)``
    and relaxation operators ``sqrt(Gamma (n+1)) a`` and ``sqrt(Gamma n) a^dag``
    replace the dephasing; the oscillator starts thermal at ``n_bath``.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    if mode == "analytic":
        return analytic_channel(solve_coefficients(r, 0.0), axis)
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")
    params = replace(params or MSParams(), n_th=n_bath)
    rate = 4 * r * params.K / ((2 * n_bath + 1) * params.tau)
    return exact_dynamics(params, fock_dim, axis=axis,
                          dissipation=Dissipation("heating", rate, n_bath)).channel


def xx_gate() -> np.ndarray:
    """``exp(-i pi/4 X X)``."""
    return (np.eye(4) - 1j * kron(X, X)) / math.sqrt(2)
