"""``csma`` command-line interface.

Exit codes: 0 success, 1 usage or input error, 2 computational limit
(state-space cap, solver non-convergence, periodic chain).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import exact, experiments, optimizer, simulator
from .graph import GraphFormatError, NetworkConfig, gen_named, load_graph

EXIT_USAGE = 1
EXIT_LIMIT = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _pins(text: str) -> dict:
    out = {}
    for item in str(text).split(","):
        if not item.strip():
            continue
        node, _, val = item.partition("=")
        try:
            out[int(node)] = float(val) if val else 0.0
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected node=value pins, got {text!r}") from None
    return out


def _load_graph(args):
    if args.graph and args.topology:
        raise UsageError("give either --graph or --topology, not both")
    if args.graph:
        return load_graph(args.graph)
    if args.topology:
        kind, _, n = args.topology.partition(":")
        try:
            return gen_named(kind, int(n))
        except ValueError as exc:
            raise UsageError(f"bad --topology {args.topology!r}: {exc}") from None
    raise UsageError("a graph is required (--graph FILE or --topology KIND:N)")


def _coerce(value, conv):
    if value is None or not isinstance(value, str):
        return value
    return conv(value)


def _p_vector(p, n):
    p = _coerce(p, _floats)
    if p is None:
        raise UsageError("--p is required")
    p = list(np.atleast_1d(p))
    if len(p) == 1:
        p = p * n
    if len(p) != n:
        raise UsageError(f"--p has {len(p)} entries but the graph has {n} nodes")
    return p


def _emit(report, args, plot=None):
    print(report.format_table())
    if args.out:
        Path(args.out).write_text(report.to_csv())
        if args.gnuplot and plot is not None:
            x, ys, title = plot
            Path(args.gnuplot).write_text(
                experiments.gnuplot_script(args.out, x, ys, report.columns, title)
            )
    if args.json:
        Path(args.json).write_text(report.to_json())


# ---------------------------------------------------------------------------
# subcommands


def cmd_throughput(args):
    g = _load_graph(args)
    cfg = NetworkConfig(g, _p_vector(args.p, g.n), args.T, args.sigma)
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    report = experiments.run_throughput(cfg, methods, args.slots, args.seed, args.cap)
    _emit(report, args)


def cmd_table1(args):
    report = experiments.run_table1(
        args.n, _coerce(args.q, _floats), args.T, args.p_mode, args.p_value, args.seed,
        args.slots, args.aggregate, args.cap, args.workers,
    )
    _emit(report, args, ("q", ["simulation", "renewal_classic", "renewal_extended", "exact"],
                         "Throughput vs edge probability"))


def cmd_star_sweep(args):
    p = _coerce(args.p, _floats)
    p = p[0] if len(p) == 1 else p
    report = experiments.run_star_sweep(args.n, p, _coerce(args.T, _ints), args.cap, args.workers)
    _emit(report, args, ("T", ["hub_exact", "hub_renewal_ext", "periph_exact", "periph_renewal_ext"],
                         "Star topology: throughput vs T"))


def _opt_config(args, alpha, fixed=None):
    return optimizer.OptimizerConfig(
        alpha=tuple(alpha),
        utility=optimizer.UtilitySpec(args.utility, args.epsilon),
        eta0=args.eta0,
        step_rule=args.step_rule,
        grad_mode=args.grad_mode,
        fd_h=args.fd_h,
        max_iters=args.max_iters,
        tol=args.tol,
        p_bounds=(args.lo, args.hi),
        fixed=dict(fixed if fixed is not None else _coerce(args.pin, _pins) or {}),
    )


def cmd_region(args):
    g = _load_graph(args)
    pins = _coerce(args.pin, _pins)
    pins = {0: 0.0} if pins is None else pins
    grid = None
    if args.weights:
        grid = [tuple(_floats(w)) for w in args.weights.split("/")]
    elif args.sweep:
        i, j = _coerce(args.sweep, _ints)
        grid = experiments.pair_weight_grid(g.n, i, j, args.steps)
    else:
        free = [k for k in range(g.n) if k not in pins]
        if len(free) >= 2:
            grid = experiments.pair_weight_grid(g.n, free[0], free[1], args.steps)
    alpha0 = grid[0] if grid else (1.0,) * g.n
    opt = _opt_config(args, alpha0, pins)
    report, _ = experiments.run_region(g, _coerce(args.T, _ints), pins, grid, opt, args.workers)
    _emit(report, args)


def cmd_optimize(args):
    g = _load_graph(args)
    alpha = _coerce(args.alpha, _floats)
    if alpha is None:
        raise UsageError("--alpha is required")
    opt = _opt_config(args, alpha)
    p0 = _p_vector(args.p0, g.n) if args.p0 is not None else None
    report, tr = experiments.run_optimize(g, args.T, opt, p0)
    _emit(report, args)
    if args.trace_out:
        Path(args.trace_out).write_text(tr.to_csv())


def cmd_chain(args):
    g = _load_graph(args)
    cfg = NetworkConfig(g, _p_vector(args.p, g.n), args.T)
    chain = exact.build_chain(cfg, args.cap)
    text = chain.to_json()
    if args.json:
        Path(args.json).write_text(text)
    else:
        print(text)


def cmd_trace(args):
    g = _load_graph(args)
    cfg = NetworkConfig(g, _p_vector(args.p, g.n), args.T)
    tr = simulator.trace(simulator.SimConfig(cfg, args.slots + 1, args.seed), args.slots)
    text = tr.to_jsonl()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    for i, bits in enumerate(tr.bits()):
        print(f"node {i}: {bits}", file=sys.stderr)


# ---------------------------------------------------------------------------
# parser


def _graph_flags(p):
    p.add_argument("--graph", help="graph file (JSON or edge list)")
    p.add_argument("--topology", help="named topology KIND:N, e.g. path:3, star:5")


def _output_flags(p):
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--json", help="JSON output path")
    p.add_argument("--gnuplot", help="write a gnuplot script for the CSV output here")


def _optimizer_flags(p):
    p.add_argument("--utility", choices=["log", "linear"], default="log")
    p.add_argument("--epsilon", type=float, default=1e-12, help="lower guard for log utility")
    p.add_argument("--eta0", type=float, default=1.0)
    p.add_argument("--step-rule", choices=["backtracking", "fixed"], default="backtracking")
    p.add_argument("--grad-mode", choices=["finite-difference", "analytic-T2-3node"],
                   default="finite-difference")
    p.add_argument("--fd-h", type=float, default=1e-5)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--lo", type=float, default=1e-4)
    p.add_argument("--hi", type=float, default=1 - 1e-4)
    p.add_argument("--pin", type=_pins, help="pinned probabilities node=value[,node=value]")


def build_parser():
    parser = _Parser(prog="csma", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with default flag values (flags override it)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    subs = {}

    p = subs["throughput"] = sub.add_parser("throughput", help="per-node throughput by method")
    _graph_flags(p)
    p.add_argument("--p", type=_floats, help="access probabilities (one value broadcasts)")
    p.add_argument("--T", type=int, default=2)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--method", default="exact", help=f"comma list from {','.join(experiments.METHODS)}")
    p.add_argument("--slots", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=exact.DEFAULT_STATE_CAP)
    _output_flags(p)
    p.set_defaults(func=cmd_throughput)

    p = subs["table1"] = sub.add_parser("table1", help="Erdos-Renyi edge-probability sweep")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--q", type=_floats, default=[round(0.1 * k, 1) for k in range(1, 11)])
    p.add_argument("--T", type=int, default=2)
    p.add_argument("--p-mode", choices=["uniform", "random"], default="uniform")
    p.add_argument("--p-value", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--slots", type=int, default=10**6)
    p.add_argument("--aggregate", choices=["node0", "mean"], default="node0")
    p.add_argument("--cap", type=int, default=exact.DEFAULT_STATE_CAP)
    p.add_argument("--workers", type=int, default=1)
    _output_flags(p)
    p.set_defaults(func=cmd_table1)

    p = subs["star-sweep"] = sub.add_parser("star-sweep", help="star topology, sweep packet length")
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--p", type=_floats, default=[0.3])
    p.add_argument("--T", type=_ints, default=[1, 2, 4, 8, 16])
    p.add_argument("--cap", type=int, default=exact.DEFAULT_STATE_CAP)
    p.add_argument("--workers", type=int, default=1)
    _output_flags(p)
    p.set_defaults(func=cmd_star_sweep)

    p = subs["region"] = sub.add_parser("region", help="throughput-region boundary by weight sweep")
    _graph_flags(p)
    p.add_argument("--T", type=_ints, default=[2, 4])
    p.add_argument("--weights", help="weight vectors separated by '/', e.g. 0,1,0/0,0.5,0.5")
    p.add_argument("--sweep", type=_ints, help="node pair i,j for an alpha=(t,1-t) sweep")
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--workers", type=int, default=1)
    _optimizer_flags(p)
    _output_flags(p)
    p.set_defaults(func=cmd_region)

    p = subs["optimize"] = sub.add_parser("optimize", help="maximise weighted utility of throughput")
    _graph_flags(p)
    p.add_argument("--T", type=int, default=2)
    p.add_argument("--alpha", type=_floats)
    p.add_argument("--p0", type=_floats)
    p.add_argument("--trace-out", help="CSV path for the per-iteration trace")
    _optimizer_flags(p)
    _output_flags(p)
    p.set_defaults(func=cmd_optimize)

    p = subs["chain"] = sub.add_parser("chain", help="dump the Markov chain as JSON")
    _graph_flags(p)
    p.add_argument("--p", type=_floats)
    p.add_argument("--T", type=int, default=2)
    p.add_argument("--cap", type=int, default=exact.DEFAULT_STATE_CAP)
    p.add_argument("--json", help="output path (stdout if omitted)")
    p.set_defaults(func=cmd_chain)

    p = subs["trace"] = sub.add_parser("trace", help="per-slot event log as JSON lines")
    _graph_flags(p)
    p.add_argument("--p", type=_floats)
    p.add_argument("--T", type=int, default=2)
    p.add_argument("--slots", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON lines output path (stdout if omitted)")
    p.set_defaults(func=cmd_trace)
    return parser, subs


def _parse(argv):
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            defaults = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        if not isinstance(defaults, dict):
            parser.error("config file must hold a JSON object")
        defaults = {k.replace("-", "_"): v for k, v in defaults.items()}
        if args.command in subs:
            subs[args.command].set_defaults(**defaults)
        args = parser.parse_args(argv)
    if args.command is None:
        parser.error("a subcommand is required")
    return args


def main(argv=None) -> int:
    args = _parse(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (exact.StateSpaceTooLarge, exact.SolverError, exact.PeriodicChainError) as exc:
        print(f"csma: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except (UsageError, GraphFormatError, ValueError, OSError) as exc:
        print(f"csma: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
