"""End-to-end runner: build the repetition-code circuits, simulate, sample, estimate.

Bitstrings list qubit 0 first.  The data qubits are 0, 1, 2 and the
five-qubit circuit uses qubits 3 and 4 as syndrome ancillae.

Only the encoding section (input rotation plus the two encoding CNOTs) is
compiled to native gates and padded with redundant pairs; everything after
it is simulated as ideal gates.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .circuits import Circuit, Gate, compile_circuit, gate_matrix, insert_redundant_pairs, pending_diagonal
from .msgate import MSCoefficients, analytic_channel, solve_coefficients
from .qcore import (
    DensityMatrix, QuantumChannel, bit_flip, dag, depolarizing, embed, partial_trace, phase_flip,
)
from .repcode import SYNDROME_CORRECTION, encode, logical_elements, recovery_channel, ry_logical_channel

VARIANTS = ("five_qubit", "three_qubit_case1", "three_qubit_case2", "three_qubit_case3")
NOISE_KINDS = ("bit_flip", "phase_flip", "depolarizing", "ms_full")
STOCHASTIC = {"bit_flip": bit_flip, "phase_flip": phase_flip, "depolarizing": depolarizing}
THETA0_DEFAULT = tuple(f * math.pi for f in (0.01, 0.328, 0.647, 0.965))
N_ENCODING_OPS = 3  # Rx(phi) and the two encoding CNOTs
COLUMNS = ("variant", "theta0", "reps_or_rate", "value", "lo", "hi", "n_valid", "exact")
TRACE_TOL = 1e-10

CASE_TABLES = {
    1: frozenset({"000", "001", "010", "111"}),
    2: frozenset({"000", "001", "010", "011"}),
    3: frozenset({"000", "001", "010", "111"}),
}
CASE_OFFSET = {1: 0.0, 2: 0.5, 3: 0.5}
U_RHO = {
    1: (),
    2: (("RZ", -math.pi), ("RY", math.pi / 2)),
    3: (("RZ", -math.pi / 2), ("RY", math.pi / 2)),
}


class SiteError(ValueError):
    pass


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class NoiseInjection:
    """A noise channel placed in a circuit.

    ``site`` is ``(gate index, qubits)``.  With ``site=None`` the default
    placement is used: stochastic channels go after each encoding entangling
    gate on both of its qubits, ``ms_full`` replaces every MS/XX gate.
    ``rate`` is a probability, or for ``ms_full`` an ``MSCoefficients`` or a
    mapping with ``r1`` and ``r2``.
    """

    kind: str
    rate: float | MSCoefficients | dict = 0.0
    site: tuple[int, tuple[int, ...]] | None = None

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "ms_full":
            if isinstance(self.rate, dict):
                object.__setattr__(self, "rate", solve_coefficients(self.rate["r1"], self.rate.get("r2", 0.0)))
            if not isinstance(self.rate, MSCoefficients):
                raise ValueError("ms_full needs MSCoefficients or {'r1', 'r2'}")
        elif not 0 <= float(self.rate) <= 1:
            raise ValueError(f"{self.kind} rate {self.rate} outside [0, 1]")
        if self.site is not None:
            idx, qs = self.site
            object.__setattr__(self, "site", (int(idx), tuple(int(q) for q in qs)))

    def with_rate(self, rate: float) -> "NoiseInjection":
        return replace(self, rate=rate) if self.kind in STOCHASTIC else self

    def to_json(self) -> dict:
        rate = self.rate.as_dict() if isinstance(self.rate, MSCoefficients) else float(self.rate)
        site = None if self.site is None else [self.site[0], list(self.site[1])]
        return {"kind": self.kind, "rate": rate, "site": site}

    @classmethod
    def from_json(cls, d: dict) -> "NoiseInjection":
        rate = d.get("rate", 0.0)
        site = d.get("site")
        if site is not None:
            site = (site[0], tuple(site[1]))
        return cls(d["kind"], rate, site)


@dataclass(frozen=True)
class ExperimentConfig:
    circuit_variant: str = "five_qubit"
    phi: float = math.pi / 9
    theta0_list: tuple[float, ...] = THETA0_DEFAULT
    repetitions_list: tuple[int, ...] = (0,)
    noise: tuple[NoiseInjection, ...] = ()
    shots: int = 1000
    seed: int = 0
    # sweeps the rate of every stochastic injection; None keeps the given rates
    rates_list: tuple[float, ...] | None = None
    backend: str = "ion"
    five_qubit_rule: str = "correct_then_filter"
    # model-line mapping from noise strength to the code's bit-flip rate
    p_mapping: str = "k2"
    gate_infidelity: float = 0.014
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "theta0_list", tuple(float(t) for t in self.theta0_list))
        object.__setattr__(self, "repetitions_list", tuple(int(n) for n in self.repetitions_list))
        object.__setattr__(self, "noise", tuple(self.noise))
        if self.rates_list is not None:
            object.__setattr__(self, "rates_list", tuple(float(r) for r in self.rates_list))
        if self.circuit_variant not in VARIANTS:
            raise ValueError(f"unknown circuit variant {self.circuit_variant!r}")
        if self.shots <= 0:
            raise ValueError("shots must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not self.theta0_list or not self.repetitions_list:
            raise ValueError("theta0_list and repetitions_list must be non-empty")
        if min(self.repetitions_list) < 0:
            raise ValueError("repetitions must be non-negative")
        if self.backend not in ("ion", "cz"):
            raise ValueError(f"backend must be 'ion' or 'cz', got {self.backend!r}")
        if self.five_qubit_rule not in ("correct_then_filter", "raw_filter"):
            raise ValueError(f"unknown five-qubit rule {self.five_qubit_rule!r}")
        if self.p_mapping not in ("k2", "infidelity"):
            raise ValueError(f"unknown p mapping {self.p_mapping!r}")
        kinds = {n.kind for n in self.noise}
        if "ms_full" in kinds and self.backend != "ion":
            raise ValueError("ms_full noise needs MS gates, i.e. the ion backend")
        if self.rates_list is not None:
            if not kinds & set(STOCHASTIC):
                raise ValueError("rates_list given but no stochastic noise to sweep")
            if len(self.repetitions_list) > 1:
                raise ValueError("sweep either rates or repetitions, not both")
            if any(not 0 <= r <= 1 for r in self.rates_list):
                raise ValueError("rates must lie in [0, 1]")

    def to_json(self) -> dict:
        d = asdict(self)
        d["noise"] = [n.to_json() for n in self.noise]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["noise"] = tuple(NoiseInjection.from_json(n) for n in d.get("noise", ()))
        if "theta0_over_pi" in d:
            d["theta0_list"] = tuple(math.pi * t for t in d.pop("theta0_over_pi"))
        return cls(**d)


@dataclass(frozen=True)
class Counts:
    counts: dict[str, int]
    shots: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to the number of shots")

    @property
    def n_qubits(self) -> int:
        return len(next(iter(self.counts))) if self.counts else 0


@dataclass(frozen=True)
class Estimate:
    value: float
    lo: float
    hi: float
    n_valid: int

    def __post_init__(self):
        if not self.lo - 1e-12 <= self.value <= self.hi + 1e-12:
            raise ValueError(f"value {self.value} outside its interval [{self.lo}, {self.hi}]")

    @property
    def interval(self) -> tuple[float, float]:
        return self.lo, self.hi


# ---------------------------------------------------------------- circuits


def _encoding(phi: float) -> list[Gate]:
    return [Gate("RX", (0,), (phi,)), Gate("CNOT", (0, 1)), Gate("CNOT", (0, 2))]


def build_five_qubit(phi: float, theta0: float) -> Circuit:
    ops = _encoding(phi) + [Gate("RY", (0,), (theta0,))]
    # ancilla 3 reads Z0 Z1, ancilla 4 reads Z1 Z2
    ops += [Gate("CNOT", (0, 3)), Gate("CNOT", (1, 3)), Gate("CNOT", (1, 4)), Gate("CNOT", (2, 4))]
    return Circuit(5, tuple(ops))


def build_three_qubit(phi: float, theta0: float, case: int) -> Circuit:
    if case not in U_RHO:
        raise ValueError(f"case must be 1, 2 or 3, got {case!r}")
    ops = _encoding(phi) + [Gate("RY", (0,), (theta0,)), Gate("CNOT", (0, 1)), Gate("CNOT", (0, 2))]
    ops += [Gate(name, (0,), (a,)) for name, a in U_RHO[case]]
    return Circuit(3, tuple(ops))


def build_variant(variant: str, phi: float, theta0: float) -> Circuit:
    if variant == "five_qubit":
        return build_five_qubit(phi, theta0)
    if variant.startswith("three_qubit_case"):
        return build_three_qubit(phi, theta0, int(variant[-1]))
    raise ValueError(f"unknown circuit variant {variant!r}")


@dataclass(frozen=True)
class Prepared:
    circuit: Circuit
    encoding: tuple[int, ...]  # op indices of the two encoding entangling gates
    readout: int               # ops before this index form encoding plus the inserted Ry


def prepare(c: Circuit, repetitions: int = 0, backend: str = "ion") -> Prepared:
    """Compile the encoding section, pad it with redundant pairs, keep the rest as is."""
    head = Circuit(c.n_qubits, c.ops[:N_ENCODING_OPS])
    if head.count("CNOT") != 2:
        raise ValueError("circuit does not start with the standard encoding section")
    comp = compile_circuit(head, backend)
    enc = tuple(comp.two_qubit_indices())
    padded = insert_redundant_pairs(comp, repetitions, backend, encoding=enc).flush_pending()
    # positions of the original encoding gates after padding
    per_pair = 4 if backend == "ion" else 2
    shift = per_pair * repetitions
    encoding = (enc[0], enc[1] + shift)
    readout = len(padded.ops) + 1
    return Prepared(Circuit(c.n_qubits, padded.ops + c.ops[N_ENCODING_OPS:]), encoding, readout)


# ---------------------------------------------------------------- simulation


def _resolve(c: Circuit, noise, encoding=None) -> list[tuple[int, tuple[int, ...], NoiseInjection]]:
    """Expand default placements into explicit ``(index, qubits, injection)`` sites."""
    if encoding is None:
        encoding = tuple(c.two_qubit_indices()[:2])
    out = []
    for inj in noise:
        if inj.site is not None:
            idx, qs = inj.site
            if not 0 <= idx < len(c.ops):
                raise SiteError(f"site index {idx} outside a {len(c.ops)}-gate circuit")
            if any(not 0 <= q < c.n_qubits for q in qs) or not qs:
                raise SiteError(f"site qubits {qs} invalid for {c.n_qubits} qubits")
            if inj.kind == "ms_full":
                g = c.ops[idx]
                if g.name not in ("MS", "XX") or set(g.qubits) != set(qs):
                    raise SiteError(f"ms_full site {inj.site} is not an MS/XX gate on those qubits")
            out.append((idx, qs, inj))
        elif inj.kind == "ms_full":
            out += [(i, g.qubits, inj) for i, g in enumerate(c.ops) if g.name in ("MS", "XX")]
        else:
            out += [(i, c.ops[i].qubits, inj) for i in encoding]
    seen = set()
    for idx, qs, inj in out:
        key = (idx, frozenset(qs)) if inj.kind == "ms_full" else (idx, tuple(qs))
        kind_key = ("ms", key) if inj.kind == "ms_full" else ("st", key)
        if kind_key in seen:
            raise SiteError(f"two noise injections at the same site {(idx, qs)}")
        seen.add(kind_key)
    return out


def _ms_kraus(g: Gate, coeffs: MSCoefficients) -> tuple[np.ndarray, ...]:
    axis = g.params if g.name == "MS" else (0.0, 0.0)
    u = gate_matrix(g)
    return tuple(k @ u for k in analytic_channel(coeffs, axis).kraus)


def simulate_density(c: Circuit, noise=(), encoding=None, stop: int | None = None,
                     rho0: np.ndarray | None = None) -> DensityMatrix:
    """Gate-by-gate density-matrix simulation from ``|0...0>``.

    ``stop`` truncates the circuit after that many ops (injections beyond it
    are dropped).  A nonzero virtual-Rz frame is applied at the end.
    """
    n = c.n_qubits
    sites = _resolve(c, noise, encoding)
    replace_gate = {idx: inj for idx, _, inj in sites if inj.kind == "ms_full"}
    after: dict[int, list] = {}
    for idx, qs, inj in sites:
        if inj.kind != "ms_full":
            after.setdefault(idx, []).append((qs, inj))
    if rho0 is None:
        rho = np.zeros((2**n, 2**n), complex)
        rho[0, 0] = 1
    else:
        rho = np.asarray(rho0, dtype=complex)
    ops = c.ops if stop is None else c.ops[:stop]
    for i, g in enumerate(ops):
        if i in replace_gate:
            ks = [embed(k, list(g.qubits), n) for k in _ms_kraus(g, replace_gate[i].rate)]
            rho = sum(k @ rho @ dag(k) for k in ks)
        else:
            u = embed(gate_matrix(g), list(g.qubits), n)
            rho = u @ rho @ dag(u)
        for qs, inj in after.get(i, ()):
            ch: QuantumChannel = STOCHASTIC[inj.kind](float(inj.rate))
            for q in qs:
                ks = [embed(k, [q], n) for k in ch.kraus]
                rho = sum(k @ rho @ dag(k) for k in ks)
    if stop is None and any(c.pending_rz):
        d = pending_diagonal(c)
        rho = d @ rho @ dag(d)
    return DensityMatrix((2,) * n, rho, validate=False)


def probabilities(rho: DensityMatrix | np.ndarray) -> dict[str, float]:
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    n = int(round(math.log2(m.shape[0])))
    p = np.clip(np.real(np.diag(m)), 0, None)
    return {format(i, f"0{n}b"): float(v) for i, v in enumerate(p)}


def sample_counts(rho: DensityMatrix | np.ndarray, shots: int,
                  seed: int | np.random.Generator | None = None) -> Counts:
    """Multinomial computational-basis sampling from the diagonal of ``rho``."""
    if shots <= 0:
        raise ValueError("shots must be positive")
    probs = probabilities(rho)
    keys = list(probs)
    p = np.array([probs[k] for k in keys])
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    draws = rng.multinomial(shots, p / p.sum())
    return Counts({k: int(v) for k, v in zip(keys, draws) if v}, int(shots))


# ---------------------------------------------------------------- estimators


def wilson_interval(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("Wilson interval needs n > 0")
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    ph = k / n
    denom = 1 + z * z / n
    centre = (ph + z * z / (2 * n)) / denom
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / denom
    # the exact interval always contains k/n; clamp away rounding at the edges
    return max(0.0, min(ph, centre - half)), min(1.0, max(ph, centre + half))


def _case_fraction(dist: dict[str, float], case: int) -> tuple[float, float]:
    if case not in CASE_TABLES:
        raise ValueError(f"case must be 1, 2 or 3, got {case!r}")
    table = CASE_TABLES[case]
    hit = sum(v for b, v in dist.items() if b[:3] in table)
    return hit, sum(dist.values())


def estimate_case(counts: Counts, case: int) -> Estimate:
    if counts.shots == 0:
        raise ValueError("empty counts")
    k, n = _case_fraction(counts.counts, case)
    lo, hi = wilson_interval(int(k), int(n))
    off = CASE_OFFSET[case]
    return Estimate(k / n - off, lo - off, hi - off, int(n))


def correct_bits(bits: str) -> str:
    """Apply the syndrome lookup from the two ancilla bits to the three data bits."""
    data = [int(b) for b in bits[:3]]
    q = SYNDROME_CORRECTION[(int(bits[3]), int(bits[4]))]
    if q is not None:
        data[q] ^= 1
    return "".join(map(str, data))


def _five_fraction(dist: dict[str, float], rule: str) -> tuple[float, float]:
    good = bad = 0
    for bits, v in dist.items():
        data = correct_bits(bits) if rule == "correct_then_filter" else bits[:3]
        if data == "000":
            good += v
        elif data == "111":
            bad += v
    return good, good + bad


def estimate_five_qubit(counts: Counts, rule: str = "correct_then_filter") -> Estimate:
    if rule not in ("correct_then_filter", "raw_filter"):
        raise ValueError(f"unknown rule {rule!r}")
    k, n = _five_fraction(counts.counts, rule)
    if n == 0:
        raise ValueError("no shot is compatible with the code space")
    lo, hi = wilson_interval(int(k), int(n))
    return Estimate(k / n, lo, hi, int(n))


def estimate(counts: Counts, variant: str, rule: str = "correct_then_filter") -> Estimate:
    if variant == "five_qubit":
        return estimate_five_qubit(counts, rule)
    return estimate_case(counts, int(variant[-1]))


def exact_estimator(rho: DensityMatrix, variant: str, rule: str = "correct_then_filter") -> float:
    """The estimator applied to exact outcome probabilities (infinite shots)."""
    dist = probabilities(rho)
    if variant == "five_qubit":
        k, n = _five_fraction(dist, rule)
        return k / n
    case = int(variant[-1])
    k, n = _case_fraction(dist, case)
    return k / n - CASE_OFFSET[case]


def logical_reference(rho_readout: DensityMatrix, variant: str) -> float:
    """Exact logical quantity from the data qubits just after the inserted Ry, via ideal recovery."""
    data = partial_trace(rho_readout, [0, 1, 2]) if len(rho_readout.dims) > 3 else rho_readout
    st = logical_elements(recovery_channel()(data.matrix))
    if variant in ("five_qubit", "three_qubit_case1"):
        return st.rho00
    return st.rho01.real if variant == "three_qubit_case2" else st.rho01.imag


# ---------------------------------------------------------------- model lines


def model_p(noise: NoiseInjection, repetitions: int, mapping: str = "k2",
            gate_infidelity: float = 0.014) -> float:
    """Bit-flip rate fed to the circuit-agnostic model for one sweep point.

    ``k2``: ``(2n+1) |k2|^2 / 2`` for ms_full noise with n pairs, the injected
    rate for stochastic noise.  ``infidelity``: ``(2n+1)`` times the gate
    infidelity.
    """
    m = 2 * repetitions + 1
    if mapping == "infidelity":
        return min(1.0, m * gate_infidelity)
    if noise.kind == "ms_full":
        return min(1.0, m * abs(noise.rate.k2) ** 2 / 2)
    return float(noise.rate)


def model_value(variant: str, p: float, theta0: float, phi: float) -> float:
    st = logical_elements(ry_logical_channel(p, theta0).apply_encoded(encode(phi)))
    if variant in ("five_qubit", "three_qubit_case1"):
        return st.rho00
    return st.rho01.real if variant == "three_qubit_case2" else st.rho01.imag


# ---------------------------------------------------------------- sweeps


@dataclass
class SweepTable:
    config: ExperimentConfig
    rows: list[dict] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"version": __version__, "seed": self.config.seed, "config": self.config.to_json(),
               "columns": list(COLUMNS), "rows": self.rows, "violations": self.violations}
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def sweep_points(config: ExperimentConfig) -> list[tuple[float, int, float | None]]:
    """``(theta0, repetitions, rate)`` in emission order."""
    rates = config.rates_list if config.rates_list is not None else (None,)
    return [(t, n, r) for r in rates for n in config.repetitions_list for t in config.theta0_list]


def run_point(config: ExperimentConfig, theta0: float, repetitions: int, rate: float | None,
              seed: np.random.SeedSequence | int) -> tuple[dict, list[str]]:
    variant = config.circuit_variant
    noise = tuple(n.with_rate(rate) for n in config.noise) if rate is not None else config.noise
    prep = prepare(build_variant(variant, config.phi, theta0), repetitions, config.backend)
    rho = simulate_density(prep.circuit, noise, prep.encoding)
    counts = sample_counts(rho, config.shots, np.random.default_rng(seed))
    est = estimate(counts, variant, config.five_qubit_rule)
    exact = exact_estimator(rho, variant, config.five_qubit_rule)
    ref = logical_reference(simulate_density(prep.circuit, noise, prep.encoding, stop=prep.readout), variant)

    problems = []
    tr = abs(np.trace(rho.matrix) - 1)
    if tr > TRACE_TOL:
        problems.append(f"trace deviates by {tr:.2e} at theta0={theta0}, reps={repetitions}")
    if est.n_valid > config.shots:
        problems.append("n_valid exceeds shots")
    row = {
        "variant": variant, "theta0": float(theta0),
        "reps_or_rate": float(rate) if rate is not None else int(repetitions),
        "value": est.value, "lo": est.lo, "hi": est.hi, "n_valid": est.n_valid, "exact": float(exact),
        "logical_reference": float(ref), "discrepancy": float(exact - ref),
    }
    if noise:
        p = model_p(noise[0], repetitions, config.p_mapping, config.gate_infidelity)
        row["model_p"] = p
        row["model"] = model_value(variant, p, theta0, config.phi)
    return row, problems


def run_sweep(config: ExperimentConfig) -> SweepTable:
    """Run every sweep point; rows come back in config order whatever ``workers`` is."""
    points = sweep_points(config)
    seeds = np.random.SeedSequence(config.seed).spawn(len(points))
    jobs = [(config, t, n, r, s) for (t, n, r), s in zip(points, seeds)]
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as ex:
            results = list(ex.map(lambda a: run_point(*a), jobs))
    else:
        results = [run_point(*a) for a in jobs]
    table = SweepTable(config)
    for row, problems in results:
        table.rows.append(row)
        table.violations.extend(problems)
    return table
