"""Experiment runners shared by the CLI and the scripts in ``scripts/``.

Every runner returns an :class:`~csma.report.ExperimentReport`. Sweep points
are independent and can be spread over a process pool; rows always come back
in sweep order.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import exact, optimizer, product_form, renewal, simulator
from .graph import ConflictGraph, NetworkConfig, gen_erdos_renyi, gen_named
from .report import ERROR_MARKER, ExperimentReport

log = logging.getLogger(__name__)

METHODS = ("exact", "product2", "renewal", "renewal-ext", "sim")


def _pmap(fn, items, workers: int = 1):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# throughput


def run_throughput(
    cfg: NetworkConfig,
    methods=("exact",),
    slots: int = 10**6,
    seed: int = 0,
    cap: int = exact.DEFAULT_STATE_CAP,
) -> ExperimentReport:
    """Per-node throughput under each requested method.

    State-space cap errors from the exact engine propagate; any other
    per-method failure is recorded as an error marker in that column.
    """
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown method(s) {unknown}; choose from {METHODS}")
    columns = ["node"] + list(methods)
    if "sim" in methods:
        columns.append("sim_ci")
    params = {"graph": cfg.graph.to_dict(), "p": list(cfg.p), "T": cfg.T, "sigma": cfg.sigma,
              "methods": list(methods), "slots": slots, "cap": cap}
    report = ExperimentReport("throughput", params, columns, seed=seed)

    results = {}
    for m in methods:
        try:
            if m == "exact":
                results[m] = exact.exact_throughput(cfg, cap=cap)
            elif m == "product2":
                results[m] = product_form.throughput_closed_form(cfg)
            elif m == "renewal":
                results[m] = renewal.renewal_classic(cfg)
            elif m == "renewal-ext":
                results[m] = renewal.renewal_extended(cfg)
            elif m == "sim":
                res = simulator.simulate(simulator.SimConfig(cfg, slots, seed))
                results[m] = res.S_hat
                results["sim_ci"] = res.ci_halfwidth
        except (exact.StateSpaceTooLarge, exact.SolverError, exact.PeriodicChainError):
            raise
        except Exception as exc:
            log.warning("method %s failed: %s", m, exc)
    for i in range(cfg.n):
        row = {"node": i}
        for c in columns[1:]:
            row[c] = float(results[c][i]) if c in results else ERROR_MARKER
        report.add_row(**row)
    return report


# ---------------------------------------------------------------------------
# Erdos-Renyi edge-probability sweep


def _p_vector(n, p_mode, p_value, rng):
    if p_mode == "uniform":
        return np.full(n, p_value)
    if p_mode == "random":
        return rng.uniform(0.05, 0.95, size=n)
    raise ValueError(f"unknown p-mode {p_mode!r}")


def _table1_row(args):
    idx, n, q, T, p_mode, p_value, seed, slots, aggregate, cap = args
    graph_seed = seed + idx
    g = gen_erdos_renyi(n, q, graph_seed)
    rng = np.random.default_rng([seed, idx])
    cfg = NetworkConfig(g, _p_vector(n, p_mode, p_value, rng), T)
    pick = (lambda v: float(np.mean(v))) if aggregate == "mean" else (lambda v: float(v[0]))
    row = {"q": q, "edges": len(g.edges), "graph_seed": graph_seed}
    sim = simulator.simulate(simulator.SimConfig(cfg, slots, graph_seed))
    row["simulation"] = pick(sim.S_hat)
    row["sim_ci"] = pick(sim.ci_halfwidth)
    row["renewal_classic"] = pick(renewal.renewal_classic(cfg))
    row["renewal_extended"] = pick(renewal.renewal_extended(cfg))
    try:
        S = exact.exact_throughput(cfg, cap=cap)
        row["exact"] = pick(S)
        diff = np.abs(S - sim.S_hat)
        row["agree"] = bool(np.all(diff <= 3 * sim.ci_halfwidth))
    except (exact.StateSpaceTooLarge, exact.SolverError, exact.PeriodicChainError) as exc:
        row["exact"] = ERROR_MARKER
        row["agree"] = ERROR_MARKER
        row["error"] = str(exc)
    return row


def run_table1(
    n: int = 10,
    qs=tuple(np.round(np.arange(0.1, 1.01, 0.1), 2)),
    T: int = 2,
    p_mode: str = "uniform",
    p_value: float = 0.5,
    seed: int = 0,
    slots: int = 10**6,
    aggregate: str = "node0",
    cap: int = exact.DEFAULT_STATE_CAP,
    workers: int = 1,
) -> ExperimentReport:
    """Throughput of node 0 (or the node mean) on G(n, q) across edge probabilities.

    Row ``k`` uses graph seed ``seed + k``; with ``p_mode="random"`` the
    access probabilities are drawn uniformly from [0.05, 0.95].
    """
    if aggregate not in ("node0", "mean"):
        raise ValueError("aggregate must be 'node0' or 'mean'")
    qs = [float(q) for q in qs]
    if any(not 0 <= q <= 1 for q in qs):
        raise ValueError("edge probabilities must lie in [0, 1]")
    columns = ["q", "edges", "graph_seed", "simulation", "sim_ci", "renewal_classic",
               "renewal_extended", "exact", "agree", "error"]
    params = dict(n=n, qs=qs, T=T, p_mode=p_mode, p_value=p_value, slots=slots,
                  aggregate=aggregate, cap=cap)
    report = ExperimentReport("table1", params, columns, seed=seed)
    tasks = [(k, n, q, T, p_mode, p_value, seed, slots, aggregate, cap) for k, q in enumerate(qs)]
    for row in _pmap(_table1_row, tasks, workers):
        row.setdefault("error", "")
        report.add_row(**row)
    return report


# ---------------------------------------------------------------------------
# star topology, packet-length sweep


def _star_point(args):
    n, p, T, cap = args
    cfg = NetworkConfig(gen_named("star", n), p, T)
    ext = renewal.renewal_extended(cfg)
    row = {"T": T, "hub_renewal_ext": float(ext[0]), "periph_renewal_ext": float(ext[1]),
           "hub_renewal_classic": float(renewal.renewal_classic(cfg)[0])}
    try:
        S = exact.exact_throughput(cfg, cap=cap)
        row["hub_exact"] = float(S[0])
        row["periph_exact"] = float(S[1])
        row["periph_underestimate"] = float((S[1] - ext[1]) / S[1]) if S[1] > 0 else ERROR_MARKER
        row["error"] = ""
    except (exact.StateSpaceTooLarge, exact.SolverError, exact.PeriodicChainError) as exc:
        row["error"] = str(exc)
    return row


def run_star_sweep(n: int = 5, p=0.3, Ts=(1, 2, 4, 8, 16), cap: int = exact.DEFAULT_STATE_CAP,
                   workers: int = 1) -> ExperimentReport:
    """Hub and peripheral (node 1) throughput on a star with hub 0 as ``T`` varies."""
    p = np.broadcast_to(np.asarray(p, dtype=float), (n,)).tolist()
    columns = ["T", "hub_exact", "hub_renewal_ext", "hub_renewal_classic", "periph_exact",
               "periph_renewal_ext", "periph_underestimate", "error"]
    report = ExperimentReport("star-sweep", dict(n=n, p=p, Ts=list(Ts), cap=cap), columns)
    for row in _pmap(_star_point, [(n, p, int(T), cap) for T in Ts], workers):
        report.add_row(**row)
    return report


# ---------------------------------------------------------------------------
# throughput region and utility optimisation


def pair_weight_grid(n: int, i: int, j: int, steps: int = 11) -> list[tuple]:
    grid = []
    for t in np.linspace(0.0, 1.0, steps):
        a = [0.0] * n
        a[i], a[j] = float(t), float(1.0 - t)
        grid.append(tuple(a))
    return grid


def run_region(
    graph: ConflictGraph,
    Ts=(2, 4),
    pinned: dict | None = None,
    weight_grid=None,
    opt: optimizer.OptimizerConfig | None = None,
    workers: int = 1,
) -> tuple[ExperimentReport, dict]:
    """Weight-sweep approximation of the throughput-region boundary for each ``T``.

    Pinned nodes keep a fixed access probability (0 removes them from
    contention). Returns the report and the raw points keyed by ``T``.
    """
    pinned = dict(pinned or {0: 0.0})
    n = graph.n
    free = [k for k in range(n) if k not in pinned]
    if weight_grid is None:
        if len(free) < 2:
            raise ValueError("need two free nodes for the default weight sweep")
        weight_grid = pair_weight_grid(n, free[0], free[1])
    if opt is None:
        opt = optimizer.OptimizerConfig(weight_grid[0], fixed=pinned)
    else:
        opt = replace(opt, fixed=pinned)
    columns = ["T", "alpha"] + [f"p_{k}" for k in range(n)] + [f"S_{k}" for k in range(n)] + ["converged", "error"]
    params = dict(graph=graph.to_dict(), Ts=list(Ts), pinned={str(k): v for k, v in pinned.items()},
                  weight_grid=[list(a) for a in weight_grid], utility=opt.utility.kind, method="weight-sweep")
    report = ExperimentReport("region", params, columns)
    tasks = [(graph, int(T), weight_grid, opt) for T in Ts]
    all_points = dict(zip([int(T) for T in Ts], _pmap(_region_for_T, tasks, workers)))
    for T, points in all_points.items():
        for pt in points:
            row = {"T": T, "alpha": ";".join(f"{a:g}" for a in pt.alpha),
                   "converged": pt.converged, "error": pt.error or ""}
            if pt.S is not None:
                row.update({f"p_{k}": float(pt.p[k]) for k in range(n)})
                row.update({f"S_{k}": float(pt.S[k]) for k in range(n)})
            report.add_row(**row)
    return report, all_points


def _region_for_T(args):
    graph, T, weight_grid, opt = args
    template = NetworkConfig(graph, np.full(graph.n, 0.5), T)
    return optimizer.region_boundary(template, weight_grid, opt)


def run_optimize(graph: ConflictGraph, T: int, opt: optimizer.OptimizerConfig, p0=None):
    """Single ascent run; returns the summary report and the full trace."""
    template = NetworkConfig(graph, np.full(graph.n, 0.5), T)
    p0 = np.full(graph.n, 0.5) if p0 is None else np.asarray(p0, dtype=float)
    tr = optimizer.optimize(template, opt, p0)
    n = graph.n
    columns = ["iterations", "converged", "reason", "J"] + [f"p_{k}" for k in range(n)] + [f"S_{k}" for k in range(n)]
    params = dict(graph=graph.to_dict(), T=T, alpha=list(opt.alpha), utility=opt.utility.kind,
                  eta0=opt.eta0, step_rule=opt.step_rule, grad_mode=opt.grad_mode, fd_h=opt.fd_h,
                  max_iters=opt.max_iters, tol=opt.tol, p_bounds=list(opt.p_bounds),
                  fixed={str(k): v for k, v in opt.fixed.items()}, p0=list(map(float, p0)))
    report = ExperimentReport("optimize", params, columns)
    f = tr.final
    row = {"iterations": f.k, "converged": tr.converged, "reason": tr.reason, "J": f.J}
    row.update({f"p_{k}": float(f.p[k]) for k in range(n)})
    row.update({f"S_{k}": float(f.S[k]) for k in range(n)})
    report.add_row(**row)
    return report, tr


def gnuplot_script(csv_path: str, x: str, ys: list, columns: list, title: str = "") -> str:
    """A minimal gnuplot script plotting columns ``ys`` against ``x`` from a CSV file."""
    idx = {c: k + 1 for k, c in enumerate(columns)}
    plots = ", \\\n     ".join(
        f"'{csv_path}' using {idx[x]}:{idx[y]} with linespoints title '{y}'" for y in ys
    )
    return (
        "set datafile separator ','\n"
        "set key autotitle columnhead\n"
        f"set title '{title}'\n"
        f"set xlabel '{x}'\n"
        f"plot {plots}\n"
    )
