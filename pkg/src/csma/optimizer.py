"""Weighted-utility maximisation over access probabilities.

``J(p) = sum_i alpha_i U(S_i(p))`` is maximised by projected gradient ascent,
with throughput evaluated by the exact engine. Gradients come from central
finite differences in general; for the three-node path with ``T = 2`` the
rational closed forms can be differentiated directly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .exact import exact_throughput
from .graph import NetworkConfig

log = logging.getLogger(__name__)

PATH3_EDGES = frozenset({(0, 1), (1, 2)})


@dataclass(frozen=True)
class UtilitySpec:
    kind: str = "log"
    epsilon: float = 1e-12

    def __post_init__(self):
        if self.kind not in ("log", "linear"):
            raise ValueError(f"unknown utility {self.kind!r}")
        if self.kind == "log" and not self.epsilon > 0:
            raise ValueError("log utility needs epsilon > 0")

    def value(self, S: np.ndarray) -> np.ndarray:
        S = np.asarray(S, dtype=float)
        if self.kind == "linear":
            return S
        return np.log(np.maximum(S, self.epsilon))

    def derivative(self, S: np.ndarray) -> np.ndarray:
        S = np.asarray(S, dtype=float)
        if self.kind == "linear":
            return np.ones_like(S)
        return np.where(S > self.epsilon, 1.0 / np.maximum(S, self.epsilon), 0.0)


@dataclass(frozen=True)
class OptimizerConfig:
    alpha: tuple
    utility: UtilitySpec = UtilitySpec()
    eta0: float = 1.0
    step_rule: str = "backtracking"  # or "fixed"
    grad_mode: str = "finite-difference"  # or "analytic-T2-3node"
    fd_h: float = 1e-5
    max_iters: int = 1000
    tol: float = 1e-7
    p_bounds: tuple = (1e-4, 1 - 1e-4)
    fixed: dict = field(default_factory=dict)  # node -> pinned probability
    max_halvings: int = 30

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        if any(a < 0 for a in alpha):
            raise ValueError("weights must be non-negative")
        object.__setattr__(self, "alpha", alpha)
        lo, hi = self.p_bounds
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError(f"invalid projection box {self.p_bounds}")
        if self.eta0 < 0:
            raise ValueError("eta0 must be non-negative")
        if not 0 < self.fd_h <= 1e-2:
            raise ValueError("fd_h must lie in (0, 1e-2]")
        if self.step_rule not in ("fixed", "backtracking"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if self.grad_mode not in ("finite-difference", "analytic-T2-3node"):
            raise ValueError(f"unknown gradient mode {self.grad_mode!r}")
        for k, v in self.fixed.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"pinned probability for node {k} outside [0, 1]")

    def free_mask(self, n: int) -> np.ndarray:
        mask = np.ones(n, dtype=bool)
        mask[list(self.fixed)] = False
        return mask

    def project(self, p: np.ndarray) -> np.ndarray:
        lo, hi = self.p_bounds
        out = np.clip(p, lo, hi)
        for k, v in self.fixed.items():
            out[k] = v
        return out


@dataclass
class Iterate:
    k: int
    p: np.ndarray
    S: np.ndarray
    J: float


@dataclass
class OptimizerTrace:
    iterations: list
    converged: bool
    reason: str

    @property
    def final(self) -> Iterate:
        return self.iterations[-1]

    def J_values(self) -> np.ndarray:
        return np.array([it.J for it in self.iterations])

    def to_csv(self) -> str:
        from .report import format_float

        n = len(self.iterations[0].p)
        head = ["iter"] + [f"p_{i}" for i in range(n)] + [f"S_{i}" for i in range(n)] + ["J"]
        rows = [",".join(head)]
        for it in self.iterations:
            vals = [str(it.k)] + [format_float(x) for x in (*it.p, *it.S, it.J)]
            rows.append(",".join(vals))
        return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# three-node path closed forms (T = 2)


def path3_throughput(p) -> np.ndarray:
    """Throughput of the path 0-1-2 with T = 2, vectorised over leading axes."""
    p = np.asarray(p, dtype=float)
    p0, p1, p2 = p[..., 0], p[..., 1], p[..., 2]
    q0, q1, q2 = 1 - p0, 1 - p1, 1 - p2
    Z = 1 + q1 * p2 + q1 * p0 + p1 + q1 * p0 * p2
    S0 = 2 * (p0 * q1 * q2 + p0 * q1 * p2 + q1 * p0 * p2) / Z
    S1 = 2 * (q0 * p1 * q2) / Z
    S2 = 2 * (p0 * q1 * p2 + q0 * q1 * p2 + p0 * q1 * p2) / Z
    return np.stack([S0, S1, S2], axis=-1)


def path3_jacobian(p) -> np.ndarray:
    """``J[i, k] = dS_i / dp_k`` for the path 0-1-2 with T = 2."""
    p0, p1, p2 = (float(x) for x in p)
    q0, q1, q2 = 1 - p0, 1 - p1, 1 - p2
    Z = 1 + q1 * p2 + q1 * p0 + p1 + q1 * p0 * p2
    dZ = np.array([q1 * (1 + p2), 1 - p0 - p2 - p0 * p2, q1 * (1 + p0)])
    N = np.array([p0 * q1 * (1 + p2), q0 * p1 * q2, q1 * p2 * (1 + p0)])
    dN = np.array(
        [
            [q1 * (1 + p2), -p0 * (1 + p2), p0 * q1],
            [-p1 * q2, q0 * q2, -q0 * p1],
            [q1 * p2, -p2 * (1 + p0), q1 * (1 + p0)],
        ]
    )
    return 2 * (dN * Z - N[:, None] * dZ[None, :]) / Z**2


def _is_path3(template: NetworkConfig) -> bool:
    return template.T == 2 and template.n == 3 and template.graph.edges == PATH3_EDGES


# ---------------------------------------------------------------------------


def evaluate(p, template: NetworkConfig, opt: OptimizerConfig) -> tuple[np.ndarray, float]:
    """Throughput vector and objective value at ``p``."""
    S = exact_throughput(template.with_p(p))
    J = float(np.dot(opt.alpha, opt.utility.value(S)))
    return S, J


def objective(p, template: NetworkConfig, opt: OptimizerConfig) -> float:
    return evaluate(p, template, opt)[1]


def gradient(p, template: NetworkConfig, opt: OptimizerConfig) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if opt.grad_mode == "analytic-T2-3node":
        if not _is_path3(template):
            raise ValueError("analytic gradient is only available for the 3-node path with T = 2")
        S = path3_throughput(p)
        w = np.asarray(opt.alpha) * opt.utility.derivative(S)
        g = w @ path3_jacobian(p)
        g[~opt.free_mask(len(p))] = 0.0
        return g

    h = opt.fd_h
    lo, hi = opt.p_bounds
    g = np.zeros_like(p)
    for k in np.flatnonzero(opt.free_mask(len(p))):
        up, dn = p.copy(), p.copy()
        if p[k] - h >= lo and p[k] + h <= hi:
            up[k] += h
            dn[k] -= h
        elif p[k] + h <= hi:
            up[k] += h
        else:
            dn[k] -= h
        g[k] = (objective(up, template, opt) - objective(dn, template, opt)) / (up[k] - dn[k])
    return g


def optimize(template: NetworkConfig, opt: OptimizerConfig, p0) -> OptimizerTrace:
    """Projected gradient ascent from ``p0``.

    With ``step_rule="backtracking"`` the step ``eta0`` is halved until the
    objective strictly improves, so the recorded ``J`` sequence never
    decreases. Iteration stops when an update moves ``p`` by less than
    ``tol`` in the max norm.
    """
    if len(opt.alpha) != template.n:
        raise ValueError(f"expected {template.n} weights, got {len(opt.alpha)}")
    p = opt.project(np.asarray(p0, dtype=float).copy())
    S, J = evaluate(p, template, opt)
    iters = [Iterate(0, p, S, J)]

    for k in range(1, opt.max_iters + 1):
        g = gradient(p, template, opt)
        eta = opt.eta0
        if opt.step_rule == "fixed":
            cand = opt.project(p + eta * g)
            step = np.max(np.abs(cand - p))
            S, J = evaluate(cand, template, opt)
            p = cand
            iters.append(Iterate(k, p, S, J))
            if step < opt.tol:
                return OptimizerTrace(iters, True, "step below tol")
            continue

        for _ in range(opt.max_halvings + 1):
            cand = opt.project(p + eta * g)
            step = np.max(np.abs(cand - p))
            if step < opt.tol:
                S_c, J_c = evaluate(cand, template, opt)
                if J_c >= J:
                    p, S, J = cand, S_c, J_c
                iters.append(Iterate(k, p, S, J))
                return OptimizerTrace(iters, True, "step below tol")
            S_c, J_c = evaluate(cand, template, opt)
            if J_c > J:
                p, S, J = cand, S_c, J_c
                iters.append(Iterate(k, p, S, J))
                break
            eta /= 2
        else:
            log.info("no ascent step after %d halvings at iteration %d", opt.max_halvings, k)
            return OptimizerTrace(iters, False, f"stalled: no ascent step after {opt.max_halvings} halvings")

    return OptimizerTrace(iters, False, f"max_iters={opt.max_iters} reached")


@dataclass
class RegionPoint:
    alpha: tuple
    p: np.ndarray | None
    S: np.ndarray | None
    converged: bool
    error: str | None = None


def region_boundary(template: NetworkConfig, weight_grid, opt: OptimizerConfig, p0=None) -> list[RegionPoint]:
    """Run :func:`optimize` once per weight vector; failures are recorded, not raised."""
    n = template.n
    start = np.full(n, 0.5) if p0 is None else np.asarray(p0, dtype=float)
    points = []
    for alpha in weight_grid:
        alpha = tuple(float(a) for a in alpha)
        try:
            tr = optimize(template, replace(opt, alpha=alpha), start)
            points.append(RegionPoint(alpha, tr.final.p, tr.final.S, tr.converged))
        except Exception as exc:  # keep sweeping
            log.warning("region point %s failed: %s", alpha, exc)
            points.append(RegionPoint(alpha, None, None, False, str(exc)))
    return points


def weak_dominance_violations(inner, outer, coords) -> list:
    """Points of ``inner`` not weakly dominated (on ``coords``) by any point of ``outer``."""
    outer_S = np.array([pt.S[list(coords)] for pt in outer if pt.S is not None])
    bad = []
    for pt in inner:
        if pt.S is None:
            continue
        s = pt.S[list(coords)]
        if not np.any(np.all(outer_S >= s, axis=1)):
            bad.append(pt)
    return bad
