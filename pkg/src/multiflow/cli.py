"""Command-line interface: ``multiflow {run,check,convergence,bracket-test,metric}``.

Exit codes: 0 success, 1 validation failure (bad input or a failed
invariant), 2 numerical failure (positivity loss, CFL, non-convergence).
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .algebroid import anchor, energy_of, project_exact
from .config import ScenarioConfig, build_scenario, default_config, load_config
from .dynamics import mdens_metric
from .errors import MultiflowError, NumericalError, PositivityError
from .runner import invariant_suite, run_simulation
from .scenarios import SCENARIOS
from .storage import format_float, read_snapshot
from .suites import bracket_suite, dt_convergence, energy_drift, run_to

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", help="TOML scenario file")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    p.add_argument("--scenario", metavar="NAME", choices=sorted(SCENARIOS), help="built-in scenario")
    p.add_argument("--seed", metavar="U64", type=int, default=None, help="seed for randomized suites")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="multiflow", description="Multiphase and generalized Euler flows on periodic domains.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("run", parents=[common], help="time-march a scenario, emit snapshots and diagnostics")
    chk = sub.add_parser("check", parents=[common], help="invariant suite on a snapshot or scenario")
    chk.add_argument("--snapshot", metavar="PATH", help="check a snapshot file instead of a scenario")
    conv = sub.add_parser("convergence", parents=[common], help="dt or N refinement study")
    conv.add_argument("--kind", choices=("dt", "N"), default="dt")
    conv.add_argument("--levels", type=int, default=3)
    bt = sub.add_parser("bracket-test", parents=[common], help="randomized algebroid suite")
    bt.add_argument("--cases", type=int, default=50)
    bt.add_argument("-N", type=int, default=32)
    sub.add_parser("metric", parents=[common], help="induced metric of the anchor of a scenario's velocity")
    return parser


def _config(args) -> ScenarioConfig:
    if args.config:
        cfg = load_config(args.config)
        if args.scenario and args.scenario != cfg.scenario:
            raise MultiflowError(f"--scenario {args.scenario} conflicts with the config's {cfg.scenario}")
    elif args.scenario:
        cfg = default_config(args.scenario)
    else:
        raise _UsageError("one of --config or --scenario is required")
    return cfg


class _UsageError(MultiflowError):
    pass


def _out_dir(args, cfg: ScenarioConfig | None) -> Path:
    if args.out:
        return Path(args.out)
    return Path(cfg.out if cfg is not None else "out")


def _say(args, *lines):
    if not args.quiet:
        for line in lines:
            print(line)


def cmd_run(args) -> int:
    cfg = _config(args)
    log = (lambda s: None) if args.quiet else print
    summary = run_simulation(cfg, _out_dir(args, cfg), log=log)
    _say(
        args,
        f"{cfg.scenario}: {summary.steps} steps to t={summary.t_final:.6g}",
        f"  relative energy drift {summary.energy_rel_drift:.3e}",
        f"  max sum drift/step    {summary.max_sum_drift:.3e}",
        f"  max div after proj    {summary.max_div:.3e}",
        f"  mass drift            {summary.mass_drift:.3e}",
    )
    for name, c in summary.checks.items():
        tol = "" if c["tol"] is None else f" (tol {c['tol']:.1e})"
        _say(args, f"  check {name:<22} {c['value']:.3e}{tol} {'ok' if c['passed'] else 'FAIL'}")
    return EXIT_OK if summary.passed else EXIT_VALIDATION


def cmd_check(args) -> int:
    if args.snapshot:
        state = read_snapshot(args.snapshot)
        dt = 1e-3
    else:
        cfg = _config(args)
        state = build_scenario(cfg)
        dt = cfg.dt
    checks = invariant_suite(state, dt)
    ok = all(c["passed"] for c in checks.values())
    for name, c in checks.items():
        _say(args, f"{name:<32} {c['value']:.3e}  tol {c['tol']:.1e}  {'ok' if c['passed'] else 'FAIL'}")
    _say(args, "all invariants pass" if ok else "invariant check FAILED")
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_convergence(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    if args.kind == "dt":
        state = build_scenario(cfg)
        res = dt_convergence(state, cfg.T, cfg.dt, levels=args.levels)
        drifts = [energy_drift(state, cfg.T, d) for d in res["dt"]]
        for i, d in enumerate(res["dt"]):
            order = res["orders"][i - 1] if i > 0 else float("nan")
            rows.append([d, res["errors"][i], order, drifts[i]])
        header = ["dt", "error_vs_reference", "observed_order", "energy_rel_drift"]
    else:
        Ns = [cfg.N * 2**k for k in range(args.levels)]
        finals = []
        for N in Ns:
            c = ScenarioConfig(**{**cfg.__dict__, "N": N})
            finals.append(run_to(build_scenario(c), cfg.T, cfg.dt).state.u.u)
        ref = finals[-1]
        errs = []
        for N, u in zip(Ns[:-1], finals[:-1]):
            sl = (slice(None), slice(None)) + (slice(None, None, Ns[-1] // N),) * cfg.dim
            errs.append(float(np.max(np.abs(u - ref[sl]))))
        for i, N in enumerate(Ns[:-1]):
            ratio = errs[i - 1] / errs[i] if i > 0 and errs[i] > 0 else float("nan")
            rows.append([N, errs[i], ratio, float("nan")])
        header = ["N", "error_vs_finest", "error_ratio", "unused"]
    with (out / f"convergence_{args.kind}.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([format_float(float(v)) for v in r])
    for r in rows:
        _say(args, "  ".join(f"{h}={v:.4g}" for h, v in zip(header, r)))
    return EXIT_OK


def cmd_bracket_test(args) -> int:
    seed = 0 if args.seed is None else args.seed
    res = bracket_suite(seed=seed, cases=args.cases, N=args.N)
    _say(args, *res.lines())
    return EXIT_OK if res.passed else EXIT_VALIDATION


def cmd_metric(args) -> int:
    cfg = _config(args)
    state = build_scenario(cfg)
    xi = anchor(state.u, state.rho)
    value, pots = mdens_metric(xi, state.rho)
    kinetic = 2.0 * energy_of(state.u, state.rho)
    kernel, _ = project_exact(state.u, state.rho)
    kernel_part = 2.0 * energy_of(kernel, state.rho)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    np.save(out / "metric_potentials.npy", pots)
    with (out / "metric.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "velocity_norm_sq", "kernel_norm_sq"])
        w.writerow([format_float(value), format_float(kinetic), format_float(kernel_part)])
    _say(
        args,
        f"metric value        {value:.17g}",
        f"||u||^2 in L2(rho)  {kinetic:.17g}",
        f"kernel part         {kernel_part:.17g}",
        f"potentials written to {out / 'metric_potentials.npy'}",
    )
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "check": cmd_check,
    "convergence": cmd_convergence,
    "bracket-test": cmd_bracket_test,
    "metric": cmd_metric,
}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except PositivityError as exc:
        t = f" at t={exc.t:.6g}" if exc.t is not None else ""
        print(f"numerical failure{t}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except MultiflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
