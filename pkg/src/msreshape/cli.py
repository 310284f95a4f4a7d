"""Command line entry point: ``msreshape <subcommand>``."""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict

import numpy as np

from . import harness, msgate
from .circuits import CompileError, compile_circuit, format_circuit, insert_redundant_pairs, parse_circuit, verify_compiled
from .qcore import ChannelError
from .repcode import model_curves

EXIT_VIOLATION = 2


def _floats(text: str) -> list[float]:
    """Comma list; ``a:b:n`` is a linspace; a trailing ``pi`` multiplies by pi."""
    scale = 1.0
    if text.endswith("pi"):
        scale, text = math.pi, text[:-2].rstrip("*")
    if ":" in text:
        a, b, n = text.split(":")
        return [scale * v for v in np.linspace(float(a), float(b), int(n))]
    return [scale * float(v) for v in text.split(",") if v]


def _write(text: str, out: str | None):
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def cmd_ms_channel(a) -> int:
    p = msgate.MSParams(a.eta, a.omega, 1.0, a.delta, a.K, a.gamma, a.n_th)
    _, closed = msgate.closure_constraints(p, tol=a.closure_tol)
    r1, r2 = msgate.r_params(p)
    doc = {"params": asdict(p), "closure_ok": closed,
           "analytic": msgate.solve_coefficients(r1, r2).as_dict()}
    status = 0
    if a.exact:
        try:
            res = msgate.exact_dynamics(p, fock_dim=a.fock_dim, dt_control=a.dt_control)
        except (msgate.ConvergenceError, ChannelError) as e:
            print(f"exact dynamics failed: {e}", file=sys.stderr)
            return EXIT_VIOLATION
        fit = msgate.fit_structure(res.channel, strict=False)
        eig = np.sort(np.linalg.eigvalsh(res.choi.matrix))[::-1]
        doc["exact"] = {**fit.as_dict(), "steps_per_loop": res.steps_per_loop,
                        "choi_eigenvalues": [float(v) for v in eig[:4]],
                        "trace_error": res.trace_error, "tail_population": res.tail_population}
        if fit.residual > 0.05:
            status = EXIT_VIOLATION
    _write(json.dumps(doc, indent=2) + "\n", a.out)
    return status


def cmd_compile(a) -> int:
    with open(a.circuit) as f:
        c = parse_circuit(f.read())
    try:
        out = compile_circuit(c, a.backend)
        if a.pairs:
            out = insert_redundant_pairs(out, a.pairs, a.backend)
    except CompileError as e:
        print(f"compile error: {e}", file=sys.stderr)
        return EXIT_VIOLATION
    dev, _ = verify_compiled(c, out)
    _write(format_circuit(out), a.out)
    if dev > a.tol:
        print(f"compiled circuit deviates from the input by {dev:.3g}", file=sys.stderr)
        return EXIT_VIOLATION
    return 0


def cmd_repcode_model(a) -> int:
    rows = model_curves(_floats(a.p), _floats(a.theta0), a.phi)
    lines = ["p,theta0,rho00,re_rho01,im_rho01"] + [",".join(repr(float(v)) for v in r) for r in rows]
    _write("\n".join(lines) + "\n", a.out)
    return 0


def _emit(table: harness.SweepTable, fmt: str, out: str | None) -> int:
    _write(table.to_csv() if fmt == "csv" else table.to_json(), out)
    for v in table.violations:
        print(f"invariant violation: {v}", file=sys.stderr)
    return EXIT_VIOLATION if table.violations else 0


def cmd_sweep(a) -> int:
    with open(a.config) as f:
        cfg = harness.ExperimentConfig.from_json(json.load(f))
    return _emit(harness.run_sweep(cfg), a.emit, a.out)


def _noise(spec: str) -> harness.NoiseInjection:
    kind, _, rate = spec.partition(":")
    if kind == "ms_full":
        r1, _, r2 = rate.partition(",")
        return harness.NoiseInjection(kind, {"r1": float(r1), "r2": float(r2 or 0)})
    return harness.NoiseInjection(kind, float(rate))


def cmd_simulate(a) -> int:
    noise = tuple(_noise(s) for s in a.noise)
    if a.circuit:
        with open(a.circuit) as f:
            c = parse_circuit(f.read())
        rho = harness.simulate_density(c, noise)
        counts = harness.sample_counts(rho, a.shots, a.seed)
        tr = abs(np.trace(rho.matrix) - 1)
        doc = {"counts": dict(sorted(counts.counts.items())), "shots": counts.shots, "trace_error": float(tr)}
        _write(json.dumps(doc, indent=2) + "\n", a.out)
        return EXIT_VIOLATION if tr > harness.TRACE_TOL else 0
    cfg = harness.ExperimentConfig(circuit_variant=a.variant, phi=a.phi, theta0_list=(a.theta0,),
                                   repetitions_list=(a.reps,), noise=noise, shots=a.shots, seed=a.seed,
                                   five_qubit_rule=a.rule)
    return _emit(harness.run_sweep(cfg), a.emit, a.out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="msreshape", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("ms-channel", help="MS gate noise coefficients (analytic, optionally exact)")
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--omega", type=float, default=0.1, help="Rabi frequency in units of nu")
    p.add_argument("--delta", type=float, default=0.9, help="laser detuning in units of nu")
    p.add_argument("--K", type=int, default=25, help="number of phase-space loops")
    p.add_argument("--gamma", type=float, default=0.02, help="motional dephasing rate in units of nu")
    p.add_argument("--n-th", type=float, default=0.05)
    p.add_argument("--closure-tol", type=float, default=1e-3)
    p.add_argument("--exact", action="store_true", help="also integrate the master equation")
    p.add_argument("--fock-dim", type=int, default=30)
    p.add_argument("--dt-control", type=float, default=1e-7)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_ms_channel)

    p = sub.add_parser("compile", help="compile a circuit file to ion or cz native gates")
    p.add_argument("circuit")
    p.add_argument("--backend", choices=("ion", "cz"), default="ion")
    p.add_argument("--pairs", type=int, default=0, help="redundant pairs after each encoding gate")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_compile)

    p = sub.add_parser("repcode-model", help="model curves of the Ry-inserted repetition code")
    p.add_argument("--p", default="0:0.14:11", help="bit-flip rates, list or a:b:n")
    p.add_argument("--theta0", default="0:1:21pi", help="angles, list or a:b:n, optional pi suffix")
    p.add_argument("--phi", type=float, default=math.pi / 9)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_repcode_model)

    p = sub.add_parser("sweep", help="run a sweep from a JSON ExperimentConfig")
    p.add_argument("--config", required=True)
    p.add_argument("--emit", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("simulate", help="simulate one point, or a circuit file")
    p.add_argument("--variant", choices=harness.VARIANTS, default="five_qubit")
    p.add_argument("--circuit", help="circuit file; prints raw counts instead of an estimate")
    p.add_argument("--theta0", type=float, default=0.01 * math.pi)
    p.add_argument("--phi", type=float, default=math.pi / 9)
    p.add_argument("--reps", type=int, default=0)
    p.add_argument("--noise", action="append", default=[],
                   help="kind:rate, e.g. bit_flip:0.05 or ms_full:r1,r2 (repeatable)")
    p.add_argument("--rule", choices=("correct_then_filter", "raw_filter"), default="correct_then_filter")
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--emit", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_simulate)
    return ap


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    try:
        return a.fn(a)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
