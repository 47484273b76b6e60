"""Command-line front end: simulate, design gains, self-verify."""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config, with_overrides
from .engine import BACKENDS, compute_gain, run_scenario
from .errors import SimulationDivergedError
from .trace import write_trace
from .verification import run_all


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbfsim",
        description=(
            "Closed-loop simulation of a control-barrier safety filter driven "
            "by a state observer, with stealthy measurement attacks and "
            "residual-based detection."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate a scenario and write its CSV trace")
    run_p.add_argument(
        "--config",
        required=True,
        help="builtin scenario name (fig2, fig3-posonly, fig3-random, "
        "fig4-random, fig4-gradient) or path to a JSON file",
    )
    run_p.add_argument("--out", required=True, help="output CSV path")
    run_p.add_argument("--dt", type=float, help="override the integration step [s]")
    run_p.add_argument("--duration", type=float, help="override the duration [s]")
    run_p.add_argument(
        "--backend", choices=BACKENDS, help="loop implementation (default: auto)"
    )

    gain_p = sub.add_parser("gain", help="print the observer gain for a scenario")
    gain_p.add_argument("--config", required=True, help="builtin name or JSON path")

    ver_p = sub.add_parser("verify", help="run the acceptance battery")
    ver_p.add_argument(
        "--backend", choices=BACKENDS, help="loop implementation (default: auto)"
    )
    return parser


def _cmd_run(args) -> int:
    cfg = with_overrides(load_config(args.config), dt=args.dt, duration=args.duration)
    try:
        trace = run_scenario(cfg, backend=args.backend)
    except SimulationDivergedError as exc:
        if exc.trace is not None:
            write_trace(exc.trace, args.out)
            print(f"diverged; partial trace written to {args.out}", file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_trace(trace, args.out)
    print(f"{trace.n_rows} rows -> {args.out}")
    return 0


def _cmd_gain(args) -> int:
    cfg = load_config(args.config)
    result = compute_gain(cfg)
    n_x, n_y = result.K.shape
    print(f"K ({n_x}x{n_y}, row-major):")
    for i in range(n_x):
        print("  " + "  ".join(repr(float(v)) for v in result.K[i]))
    if result.computed:
        print(f"CARE residual: {result.residual:.6e}")
    else:
        print("CARE residual: n/a (gain given explicitly by the configuration)")
    return 0


def _cmd_verify(args) -> int:
    results = run_all(backend=args.backend)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "gain":
            return _cmd_gain(args)
        return _cmd_verify(args)
    except (ConfigError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
