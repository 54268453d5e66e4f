"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 runtime failure.  The resolved
plan of every run is written to stderr as one JSON line before any work
starts, so stdout stays machine-readable.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .harness import (
    ExperimentPlan,
    curve_rows,
    export_results,
    find_critical_sparsity,
    run_rate_curve,
)
from .problems import RngStream, build_instance, load_instance, save_instance
from .pursuit import AlgorithmSpec, StoppingCriteria, parse_algorithm_list, run_algorithm, write_trace
from .theory import (
    ConvergenceConstants,
    delta_max,
    delta_max_curve,
    exact_ric,
    mu_admissible_range,
)

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _FullHelp(argparse.Action):
    """``--help`` on the top level also prints every subcommand's flags."""

    def __init__(self, option_strings, dest=argparse.SUPPRESS, default=argparse.SUPPRESS, help=None):
        super().__init__(option_strings, dest=dest, default=default, nargs=0, help=help)

    def __call__(self, parser, namespace, values, option_string=None):
        parts = [parser.format_help()]
        for action in parser._actions:
            if isinstance(action, argparse._SubParsersAction):
                for name, sub in action.choices.items():
                    parts.append(f"\n== {name} ==\n" + sub.format_help())
        sys.stdout.write("".join(parts))
        parser.exit(0)


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _add_stop(p):
    p.add_argument("--max-iter", type=int, default=200, help="iteration cap (default 200)")
    p.add_argument("--tol", type=float, default=1e-10,
                   help="relative residual tolerance (default 1e-10)")
    p.add_argument("--native", action="store_true",
                   help="also apply the algorithm's own stopping rule")


def _add_sweep(p):
    p.add_argument("--plan", type=Path, help="JSON plan file; replaces the sweep flags below")
    p.add_argument("--m", type=int, help="measurements")
    p.add_argument("--n", type=int, help="signal length")
    p.add_argument("--signal", choices=("gaussian", "cars"), default="gaussian")
    p.add_argument("--algos", help='algorithm list, e.g. "sp,htp,stp:mu=2.5,stp:mu=3,l1"')
    p.add_argument("--smin", type=int, default=1)
    p.add_argument("--smax", type=int)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=_seed, help="master seed (required)")
    p.add_argument("--noise", type=float, default=0.0, help="noise level |e|/|phi x|")
    p.add_argument("--success-tol", type=float, default=1e-6,
                   help="relative l2 error counted as exact recovery")
    p.add_argument("--workers", type=int, help="worker processes (default: $PURSUITLAB_WORKERS or all CPUs)")
    p.add_argument("--out", type=Path, help="results file")
    p.add_argument("--format", choices=("csv", "json"), help="results format (default from --out suffix)")
    _add_stop(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pursuitlab", add_help=False,
                     description="Greedy sparse recovery experiments and theory.")
    parser.add_argument("-h", "--help", action=_FullHelp, help="show help for every subcommand and exit")
    parser.add_argument("--version", action="version", version=f"pursuitlab {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("recover", help="run one algorithm on an instance file")
    p.add_argument("--instance", type=Path, required=True, help="instance container file")
    p.add_argument("--algo", required=True, help="algorithm, e.g. stp or stp:mu=2.5")
    p.add_argument("--mu", type=float, help="override mu")
    p.add_argument("--s", type=int, help="sparsity (default: that of the stored signal)")
    p.add_argument("--trace", type=Path, help="write a JSON-lines iteration trace")
    _add_stop(p)

    p = sub.add_parser("rate", help="exact-reconstruction rate over a sparsity sweep")
    _add_sweep(p)

    p = sub.add_parser("critical", help="critical sparsity of each algorithm")
    _add_sweep(p)

    p = sub.add_parser("theory", help="convergence constants for given mu and delta_3s")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--delta", type=float, required=True, help="delta_3s")
    p.add_argument("--grid-out", type=Path, help="write the delta_max(mu) curve as CSV")
    p.add_argument("--grid", default="0.1:4.0:0.05", help="mu grid start:stop:step (default 0.1:4.0:0.05)")

    p = sub.add_parser("ric", help="restricted isometry constant of an instance matrix")
    p.add_argument("--instance", type=Path, required=True)
    p.add_argument("--order", type=int, required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exhaustive", action="store_true", help="enumerate every support (default)")
    mode.add_argument("--sampled", type=int, metavar="N", help="examine N random supports instead")
    p.add_argument("--seed", type=_seed, default=0, help="seed for --sampled")

    p = sub.add_parser("generate", help="write a random instance container")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--signal", choices=("gaussian", "cars"), default="gaussian")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--stream", type=_seed, default=0)
    p.add_argument("--out", type=Path, required=True)
    return parser


def _announce(plan: dict) -> None:
    sys.stderr.write("plan " + json.dumps(plan, sort_keys=True) + "\n")
    sys.stderr.flush()


def _stop(args) -> StoppingCriteria:
    return StoppingCriteria(args.max_iter, args.tol, args.native)


def _plan(args) -> ExperimentPlan:
    if args.plan is not None:
        try:
            data = json.loads(args.plan.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read plan {args.plan}: {exc}") from exc
        if "master_seed" not in data:
            raise UsageError("plan file must set master_seed")
        return ExperimentPlan.from_dict(data)
    missing = [f"--{k}" for k in ("m", "n", "algos", "smax", "seed") if getattr(args, k) is None]
    if missing:
        raise UsageError(f"missing required flags: {', '.join(missing)}")
    if args.smax >= args.m:
        raise UsageError(f"--smax ({args.smax}) must be smaller than --m ({args.m})")
    return ExperimentPlan.from_range(
        args.smin, args.smax, args.step, m=args.m, n=args.n, signal_kind=args.signal,
        trials=args.trials, algorithms=tuple(parse_algorithm_list(args.algos)), stop=_stop(args),
        master_seed=args.seed, success_tolerance=args.success_tol, noise_level=args.noise)


def _format(args) -> str:
    if args.format:
        return args.format
    if args.out is not None and args.out.suffix.lower() == ".json":
        return "json"
    return "csv"


def _cmd_sweep(args, critical: bool) -> int:
    try:
        plan = _plan(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.workers is not None and args.workers < 1:
        raise UsageError("--workers must be >= 1")
    _announce({"command": args.command, **plan.to_dict(), "workers": args.workers})
    curves = run_rate_curve(plan, workers=args.workers)
    reports = [find_critical_sparsity(c) for c in curves]
    if args.out is not None:
        export_results(curves, reports, args.out, _format(args), plan)
    if critical:
        for r in reports:
            print(f"{r.algorithm.label}\tcritical_s={r.critical_s}\ttrials={r.trials}")
    elif args.out is None:
        rows = curve_rows(curves)
        print("algorithm\tparams\ts\tsuccesses\ttrials\trate\tmean_iterations")
        for c, row in zip([c for c in curves for _ in c.points], rows):
            print(f"{c.algorithm.label}\t{row['params']}\t{row['s']}\t{row['successes']}\t"
                  f"{row['trials']}\t{float(row['rate']):.3f}\t{float(row['mean_iterations']):.2f}")
    else:
        print(f"wrote {args.out}")
    return 0


def _cmd_recover(args) -> int:
    try:
        spec = AlgorithmSpec.parse(args.algo)
        if args.mu is not None:
            spec = replace(spec, mu=args.mu)
        stop = _stop(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    inst = load_instance(args.instance)
    s = args.s if args.s is not None else (inst.truth.sparsity if inst.truth is not None else None)
    if s is None:
        raise UsageError("--s is required when the instance stores no signal")
    _announce({"command": "recover", "instance": str(args.instance), "algorithm": spec.label,
               "m": inst.m, "n": inst.n, "s": s, "seed": inst.seed, "stream_id": inst.stream_id,
               "max_iterations": stop.max_iterations, "residual_tolerance": stop.residual_tolerance,
               "native_rule_enabled": stop.native_rule_enabled})
    res = run_algorithm(spec, inst, s, stop)
    out = {"algorithm": spec.label, "iterations": res.iterations, "stop_reason": res.stop_reason,
           "converged": res.converged,
           "relative_residual": float(np.linalg.norm(inst.y - inst.phi @ res.estimate)
                                      / max(np.linalg.norm(inst.y), 1e-300)),
           "support_size": int(res.support.shape[0])}
    if inst.truth is not None:
        xn = float(np.linalg.norm(inst.truth.values))
        out["relative_error"] = float(np.linalg.norm(res.estimate - inst.truth.values)) / xn if xn else 0.0
    print(json.dumps(out))
    if args.trace is not None:
        write_trace(res, args.trace)
    return 0


def _parse_grid(text: str) -> np.ndarray:
    try:
        a, b, c = (float(t) for t in text.split(":"))
    except ValueError as exc:
        raise UsageError(f"--grid expects start:stop:step, got {text!r}") from exc
    if c <= 0 or b < a or a <= 0:
        raise UsageError("--grid needs 0 < start <= stop and step > 0")
    return np.round(np.arange(a, b + c / 2, c), 12)


def _cmd_theory(args) -> int:
    if args.mu < 0:
        raise UsageError("--mu must be nonnegative")
    if not 0 <= args.delta < 1:
        raise UsageError("--delta must lie in [0, 1)")
    grid = _parse_grid(args.grid) if args.grid_out is not None else None
    _announce({"command": "theory", "mu": args.mu, "delta3s": args.delta})
    c = ConvergenceConstants.evaluate(args.mu, args.delta)
    rng = mu_admissible_range(args.delta) if args.delta > 0 else ((0.0, 1.0), (1.0, math.inf))
    out = {"mu": c.mu, "delta3s": c.delta3s, "rho": c.rho, "tau": c.tau,
           "mu_range": [list(r) if r else None for r in rng],
           "delta_max": delta_max(args.mu) if args.mu > 0 else 0.0}
    print(json.dumps(out))
    if grid is not None:
        with open(args.grid_out, "w", encoding="utf-8") as fh:
            fh.write("mu,delta_max\n")
            for mu, d in delta_max_curve(grid):
                fh.write(f"{mu!r},{d!r}\n")
    return 0


def _cmd_ric(args) -> int:
    inst = load_instance(args.instance)
    method = "sampled" if args.sampled is not None else "exhaustive"
    _announce({"command": "ric", "instance": str(args.instance), "order": args.order,
               "method": method, "samples": args.sampled, "seed": args.seed})
    try:
        rep = exact_ric(inst.phi, args.order, method, samples=args.sampled or 0,
                        rng=RngStream(args.seed))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(json.dumps(rep.to_dict()))
    return 0


def _cmd_generate(args) -> int:
    _announce({"command": "generate", "m": args.m, "n": args.n, "s": args.s,
               "signal": args.signal, "noise": args.noise, "seed": args.seed,
               "stream_id": args.stream})
    try:
        inst = build_instance(args.m, args.n, args.s, args.signal, args.noise,
                              RngStream(args.seed, args.stream))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    save_instance(inst, args.out)
    print(f"wrote {args.out} ({inst.digest()[:16]})")
    return 0


COMMANDS = {
    "recover": _cmd_recover,
    "rate": lambda a: _cmd_sweep(a, critical=False),
    "critical": lambda a: _cmd_sweep(a, critical=True),
    "theory": _cmd_theory,
    "ric": _cmd_ric,
    "generate": _cmd_generate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"pursuitlab {args.command}: error: {exc}\n")
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - every runtime failure maps to exit 2
        sys.stderr.write(f"pursuitlab {args.command}: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
