"""Command-line interface: bounds, scan, simulate, verify.

Exit codes: 0 success, 1 verification failure, 2 invalid input, 3 degenerate
point, 4 I/O error.  Single-point reports are JSON; scans are CSV (with
optional rendered figures next to them).
"""

import argparse
import json
import math
import sys

import numpy as np

from . import __version__, fockoracle, qfisher, receivers
from .errors import InvalidStokes, PolarimetryError
from .polcore import (ModalParams, Scenario, StokesVector, modal_from_stokes,
                      stokes_from_modal)
from .receivers import ReceiverSpec
from .report import (BOUND_COLUMNS, dumps_report, evaluate_bounds,
                     mse_report_dict, render_scan_figure, run_scan)
from .simkit import mse_benchmark

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_INVALID_INPUT = 2
EXIT_DEGENERATE = 3
EXIT_IO = 4


def _parse_state(args):
    if args.stokes is not None:
        vals = [float(v) for v in args.stokes.split(",")]
        if len(vals) == 3:  # direction only; bounds scale linearly in S0
            s0 = math.sqrt(sum(v * v for v in vals))
            vals = [s0] + vals
        if len(vals) != 4:
            raise InvalidStokes("--stokes needs s0,s1,s2,s3 (or s1,s2,s3)")
        return StokesVector(*vals).validate()
    vals = [float(v) for v in args.modal.split(",")]
    if len(vals) not in (3, 4):
        raise InvalidStokes("--modal needs ah,av,phi[,phiplus]")
    return stokes_from_modal(ModalParams(*vals))


def _scenario(args):
    return Scenario(power_known=args.power_known, phase_known=args.phase_known)


def _write_text(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise _IoFailure(str(exc)) from exc


class _IoFailure(Exception):
    pass


def cmd_bounds(args):
    state = _parse_state(args)
    report = evaluate_bounds(state, _scenario(args))
    d = report.to_dict()
    d["args"] = args.echo
    _write_text(args.out, dumps_report(d))
    return EXIT_DEGENERATE if "degenerate-pole" in report.flags else EXIT_OK


def cmd_scan(args):
    try:
        n_theta, n_phi = (int(v) for v in args.grid.lower().split("x"))
    except ValueError:
        raise InvalidStokes(f"bad --grid {args.grid!r}, expected NxM")
    bounds = tuple(args.bounds.split(",")) if args.bounds else BOUND_COLUMNS
    unknown = set(bounds) - set(BOUND_COLUMNS)
    if unknown:
        raise InvalidStokes(f"unknown bound columns: {sorted(unknown)}")
    table = run_scan(n_theta, n_phi, args.s0, _scenario(args),
                     bounds=bounds, args=args.echo)
    try:
        table.write_csv(args.out)
        if args.fig:
            render_scan_figure(table, args.fig)
    except OSError as exc:
        raise _IoFailure(str(exc)) from exc
    return EXIT_OK


def cmd_simulate(args):
    state = _parse_state(args)
    scenario = _scenario(args)
    p = modal_from_stokes(state)
    if args.receiver == "stokes":
        spec = ReceiverSpec("stokes")
    else:
        spec = ReceiverSpec("tetrahedron", ppbs_x=args.ppbs_x)
    mse = mse_benchmark(p, spec, scenario, args.trials, args.shots,
                        args.estimator, args.seed)
    bound = evaluate_bounds(state, scenario)
    d = mse_report_dict(mse, bound, args=args.echo)
    _write_text(args.out, dumps_report(d))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify: truncated-Fock cross-checks of the closed-form modules


def _random_states(rng, n, s0_max):
    out = []
    for _ in range(n):
        s0 = rng.uniform(0.3, s0_max)
        frac = rng.uniform(0.08, 0.92)
        ah = math.sqrt(frac * s0)
        av = math.sqrt(s0 - ah * ah)
        out.append(ModalParams(ah, av, rng.uniform(-math.pi, math.pi)))
    return out


def _check_stokes_expectation(states, trials):
    worst = 0.0
    for p in states:
        st = fockoracle.coherent_two_mode(p)
        ops = fockoracle.stokes_operators(st.cutoff)
        want = stokes_from_modal(p).as_array()
        got = np.array([fockoracle.expectation(m, st).real
                        for m in ops.matrices])
        worst = max(worst, np.abs(got - want).max())
    return worst < 1e-8, f"max |<S_j> - closed form| = {worst:.2e}"


def _check_stokes_variance(states, trials):
    worst = 0.0
    for p in states:
        st = fockoracle.coherent_two_mode(p)
        ops = fockoracle.stokes_operators(st.cutoff)
        s0 = p.s0
        for m in ops.matrices[1:]:
            mean = fockoracle.expectation(m, st).real
            sq = fockoracle.expectation(m @ m, st).real
            worst = max(worst, abs((sq - mean * mean) - s0) / max(s0, 1e-12))
    return worst < 1e-6, f"max relative |Var(S_j) - S0| = {worst:.2e}"


def _check_stokes_commutators(states, trials):
    # the displayed operator definitions orient the algebra as
    # [S_j, S_k] = -2i eps_jkl S_l (S3 sign convention)
    cutoff = 12
    ops = fockoracle.stokes_operators(cutoff)
    s1, s2, s3 = ops.matrices[1], ops.matrices[2], ops.matrices[3]
    worst = 0.0
    for a, b, c in ((s1, s2, s3), (s2, s3, s1), (s3, s1, s2)):
        worst = max(worst, np.abs(a @ b - b @ a + 2j * c).max())
    return worst < 1e-10, f"max |[S_j,S_k] + 2i eps S_l| entry = {worst:.2e}"


def _check_phase_average_blocks(states, trials):
    p = states[0]
    st = fockoracle.coherent_two_mode(p)
    rho = fockoracle.phase_average(st).matrix
    worst_offblock = 0.0
    worst_eig = 0.0
    for n in range(st.cutoff + 1):
        sl = fockoracle.block_slice(n)
        block = rho[sl, sl].copy()
        rho[sl, sl] = 0.0
        evals = np.linalg.eigvalsh(block)
        p_n = math.exp(-p.s0) * p.s0 ** n / math.factorial(n)
        worst_eig = max(worst_eig, abs(evals[-1] - p_n),
                        abs(evals[:-1]).max() if n else 0.0)
    worst_offblock = np.abs(rho).max()
    ok = worst_offblock < 1e-12 and worst_eig < 1e-10
    return ok, (f"off-block max {worst_offblock:.2e}, "
                f"eigenvalue mismatch {worst_eig:.2e}")


def _check_qfi(power_known, phase_known):
    def check(states, trials):
        scen = Scenario(power_known=power_known, phase_known=phase_known)
        worst = 0.0
        for p in states[:trials]:
            closed = qfisher.qfi_matrix(p, scen).entries
            num = fockoracle.numerical_qfi(p, scen).entries
            worst = max(worst, np.abs(num - closed).max()
                        / max(np.abs(closed).max(), 1e-12))
        return worst < 1e-6, f"max relative QFI deviation = {worst:.2e}"
    return check


def _check_fisher_closed_forms(power_known):
    def check(states, trials):
        scen = Scenario(power_known=power_known)
        worst = 0.0
        for p in states[:trials]:
            pipeline = receivers.poisson_fisher(
                receivers.arm_means(p, ReceiverSpec("stokes"), scen)).entries
            closed = receivers.closed_form_stokes_fisher(p, scen).entries
            worst = max(worst, np.abs(pipeline - closed).max()
                        / max(np.abs(closed).max(), 1e-12))
        return worst < 1e-9, f"max relative Fisher deviation = {worst:.2e}"
    return check


def _check_sld_commutators(states, trials):
    worst = 0.0
    for p in states[:3]:
        for phase_known in (True, False):
            scen = Scenario(phase_known=phase_known)
            want = qfisher.sld_commutator_expectations(p, scen)
            got = fockoracle.sld_commutators_numeric(p, phase_known=phase_known)
            worst = max(worst, max(abs(g - w) for g, w in zip(got, want)))
    return worst < 1e-6, f"max commutator deviation = {worst:.2e}"


VERIFY_CHECKS = (
    ("stokes_expectation", _check_stokes_expectation),
    ("stokes_variance", _check_stokes_variance),
    ("stokes_commutators", _check_stokes_commutators),
    ("phase_average_blocks", _check_phase_average_blocks),
    ("qfi_general_phase_known", _check_qfi(False, True)),
    ("qfi_general_phase_averaged", _check_qfi(False, False)),
    ("qfi_constrained_phase_known", _check_qfi(True, True)),
    ("qfi_constrained_phase_averaged", _check_qfi(True, False)),
    ("fisher_closed_form_general", _check_fisher_closed_forms(False)),
    ("fisher_closed_form_constrained", _check_fisher_closed_forms(True)),
    ("sld_commutators", _check_sld_commutators),
)


def cmd_verify(args):
    rng = np.random.default_rng(args.seed)
    n_states = max(args.trials, 1)
    s0_max = max(args.s0_max, 1e-6)
    states = _random_states(rng, n_states, s0_max) if args.s0_max > 0 else \
        [ModalParams(0.0, 0.0, 0.0)]
    results = []
    failed = []
    for name, check in VERIFY_CHECKS:
        if args.s0_max <= 0 and name != "stokes_expectation":
            continue  # vacuum-only run: only the trivial expectation check
        try:
            ok, detail = check(states, args.trials)
        except PolarimetryError as exc:
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append({"check": name, "ok": bool(ok), "detail": detail})
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        print(line)
        if not ok:
            failed.append(name)
    summary = {
        "version": __version__,
        "args": args.echo,
        "seed": args.seed,
        "s0_max": args.s0_max,
        "trials": args.trials,
        "checks": results,
        "failed": failed,
    }
    if args.out:
        _write_text(args.out, dumps_report(summary))
    if failed:
        print(f"verification FAILED: {', '.join(failed)}")
        return EXIT_VERIFY_FAIL
    print("verification passed")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _add_state_args(sub):
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--stokes", help="s0,s1,s2,s3 (or s1,s2,s3 direction)")
    group.add_argument("--modal", help="ah,av,phi[,phiplus]")


def _add_scenario_args(sub):
    sub.add_argument("--power-known", action="store_true",
                     help="total power S0 is prior knowledge")
    sub.add_argument("--phase-known", action="store_true",
                     help="global phase is prior knowledge")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="polarimetry-bounds",
        description="Precision bounds and receiver simulation for "
                    "polarization estimation of coherent light.")
    ap.add_argument("--version", action="version",
                    version=f"polarimetry-bounds {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", help="evaluate all bounds at one state")
    _add_state_args(b)
    _add_scenario_args(b)
    b.add_argument("--out", default=None, help="output JSON path (default stdout)")
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("scan", help="scan bounds over the Poincare sphere")
    s.add_argument("--grid", required=True, help="NxM inclination x azimuth")
    s.add_argument("--s0", type=float, default=1.0,
                   help="sphere radius (bounds scale linearly; default 1)")
    _add_scenario_args(s)
    s.add_argument("--bounds", default=None,
                   help=f"comma list from {','.join(BOUND_COLUMNS)}")
    s.add_argument("--out", required=True, help="output CSV path")
    s.add_argument("--fig", default=None,
                   help="also render heat maps to this image path")
    s.set_defaults(func=cmd_scan)

    m = sub.add_parser("simulate", help="Monte-Carlo estimator benchmark")
    _add_state_args(m)
    _add_scenario_args(m)
    m.add_argument("--receiver", choices=("stokes", "tetrahedron"),
                   default="stokes")
    m.add_argument("--ppbs-x", type=float, default=0.5,
                   help="tetrahedron transmissivity")
    m.add_argument("--estimator", choices=("naive", "mle"), default="mle")
    m.add_argument("--trials", type=int, default=1000)
    m.add_argument("--shots", type=int, default=1)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", default=None)
    m.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="run the truncated-Fock cross-checks")
    v.add_argument("--s0-max", type=float, default=4.0, dest="s0_max")
    v.add_argument("--trials", type=int, default=20)
    v.add_argument("--seed", type=int, default=20240917)
    v.add_argument("--out", default=None, help="also write a JSON summary")
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    ap = build_parser()
    args = ap.parse_args(argv)
    args.echo = " ".join([args.command] + argv[1:]) if argv else args.command
    try:
        return args.func(args)
    except InvalidStokes as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    except _IoFailure as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PolarimetryError as exc:
        print(f"degenerate point: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    raise SystemExit(main())
