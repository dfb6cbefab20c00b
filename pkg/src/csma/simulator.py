"""Slot-level Monte Carlo simulation of saturated p-persistent CSMA.

The simulator runs the protocol dynamics directly (it never looks at the
Markov chain) and is used as an independent check on the exact engine.
Randomness comes from numba's internal Mersenne Twister seeded with
``SimConfig.seed``, so a given configuration always yields the same result.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import stats

from .graph import NetworkConfig

NUM_BATCHES = 30
MAX_TRACE_SLOTS = 10_000

IDLE, S_START, S_CONT, C_START, C_CONT = range(5)
EVENT_NAMES = ("I", "S-start", "S-cont", "C-start", "C-cont")
_EVENT_LETTER = ("I", "S", "S", "C", "C")


@dataclass(frozen=True)
class SimConfig:
    cfg: NetworkConfig
    slots: int
    seed: int = 0
    warmup: int | None = None  # defaults to 10 * T, clipped for very short runs

    def __post_init__(self):
        if self.warmup is None:
            object.__setattr__(self, "warmup", max(0, min(10 * self.cfg.T, self.slots - 1)))
        if self.slots < 1 or self.warmup < 0:
            raise ValueError("slots must be >= 1 and warmup >= 0")
        if self.slots <= self.warmup:
            raise ValueError(f"slots ({self.slots}) must exceed warmup ({self.warmup})")


@dataclass
class SimResult:
    S_hat: np.ndarray
    attempts: np.ndarray
    successes: np.ndarray
    collisions: np.ndarray
    ci_halfwidth: np.ndarray
    batch_estimates: np.ndarray = field(repr=False)


@numba.njit(cache=True)
def _simulate_kernel(indptr, indices, p, T, slots, warmup, batch_edges, seed, rec_events, rec_phase):
    np.random.seed(seed)
    n = p.shape[0]
    nb = batch_edges.shape[0] - 1
    a = np.zeros(n, dtype=np.int64)
    ok = np.zeros(n, dtype=np.bool_)  # outcome of the node's current packet
    tx = np.zeros(n, dtype=np.bool_)
    elig = np.zeros(n, dtype=np.bool_)
    attempts = np.zeros(n, dtype=np.int64)
    successes = np.zeros(n, dtype=np.int64)
    batch_succ = np.zeros((nb, n), dtype=np.int64)
    n_rec = rec_events.shape[0]
    b = 0
    for t in range(slots):
        for i in range(n):
            e = a[i] == 0
            if e:
                for k in range(indptr[i], indptr[i + 1]):
                    if a[indices[k]] != 0:
                        e = False
                        break
            elig[i] = e
            tx[i] = e and np.random.random() < p[i]
        counted = t >= warmup
        if counted:
            while b < nb - 1 and t - warmup >= batch_edges[b + 1]:
                b += 1
        for i in range(n):
            if t < n_rec:
                rec_phase[t, i] = a[i]
            if tx[i]:
                clean = True
                for k in range(indptr[i], indptr[i + 1]):
                    if tx[indices[k]]:
                        clean = False
                        break
                ok[i] = clean
                if counted:
                    attempts[i] += 1
                    if clean:
                        successes[i] += 1
                        batch_succ[b, i] += 1
                if t < n_rec:
                    rec_events[t, i] = 1 if clean else 3
            elif t < n_rec:
                if a[i] > 0:
                    rec_events[t, i] = 2 if ok[i] else 4
                else:
                    rec_events[t, i] = 0
        for i in range(n):
            if tx[i]:
                a[i] = T - 1
            elif a[i] > 0:
                a[i] -= 1
    return attempts, successes, batch_succ


def _csr(cfg: NetworkConfig):
    adj = cfg.graph.adjacency
    indptr = np.zeros(cfg.n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(adj[i]) for i in range(cfg.n)])
    indices = np.array([j for i in range(cfg.n) for j in sorted(adj[i])], dtype=np.int64)
    return indptr, indices


def _run(sim: SimConfig, record: int):
    cfg = sim.cfg
    indptr, indices = _csr(cfg)
    counted = sim.slots - sim.warmup
    nb = min(NUM_BATCHES, counted)
    edges = np.floor(np.arange(nb + 1) * counted / nb).astype(np.int64)
    rec_events = np.zeros((record, cfg.n), dtype=np.int8)
    rec_phase = np.zeros((record, cfg.n), dtype=np.int64)
    out = _simulate_kernel(
        indptr, indices, cfg.p_array, cfg.T, sim.slots, sim.warmup, edges,
        sim.seed % (2**32), rec_events, rec_phase,
    )
    return out, edges, rec_events, rec_phase


def simulate(sim: SimConfig) -> SimResult:
    (attempts, successes, batch_succ), edges, _, _ = _run(sim, 0)
    T = sim.cfg.T
    counted = sim.slots - sim.warmup
    S_hat = T * successes / counted
    lengths = np.diff(edges)[:, None]
    batch_est = T * batch_succ / lengths
    nb = batch_est.shape[0]
    if nb >= 2:
        se = batch_est.std(axis=0, ddof=1) / np.sqrt(nb)
        half = stats.t.ppf(0.975, nb - 1) * se
    else:
        half = np.full(sim.cfg.n, np.nan)
    return SimResult(S_hat, attempts, successes, attempts - successes, half, batch_est)


@dataclass
class Trace:
    """Per-slot, per-node event codes and the counters at the start of each slot."""

    T: int
    events: np.ndarray  # (slots, n) int codes into EVENT_NAMES
    phase: np.ndarray  # (slots, n)

    def names(self) -> list[list[str]]:
        return [[EVENT_NAMES[c] for c in row] for row in self.events]

    def bits(self) -> list[str]:
        """'1' for slots carrying a successful packet, '0' otherwise, per node."""
        good = (self.events == S_START) | (self.events == S_CONT)
        return ["".join("1" if x else "0" for x in good[:, i]) for i in range(good.shape[1])]

    def to_jsonl(self) -> str:
        lines = []
        for t, (ev, ph) in enumerate(zip(self.events, self.phase)):
            rec = {"t": t, "events": [_EVENT_LETTER[c] for c in ev], "phase": ph.tolist()}
            lines.append(json.dumps(rec))
        return "\n".join(lines) + "\n"


def trace(sim: SimConfig, max_slots: int) -> Trace:
    """Event log of the first ``max_slots`` slots (warm-up is not skipped)."""
    if not 1 <= max_slots <= MAX_TRACE_SLOTS:
        raise ValueError(f"max_slots must lie in [1, {MAX_TRACE_SLOTS}]")
    run = SimConfig(sim.cfg, max_slots + 1, sim.seed, 0)
    _, _, events, phase = _run(run, max_slots)
    return Trace(sim.cfg.T, events.astype(np.int64), phase)


def validate_trace(tr: Trace, cfg: NetworkConfig) -> list[str]:
    """Check a trace against the protocol rules; returns a list of violations."""
    problems = []
    T = tr.T
    ev = tr.events
    starts = (ev == S_START) | (ev == C_START)
    for t in range(ev.shape[0]):
        for i in range(cfg.n):
            if starts[t, i]:
                if tr.phase[t, i] != 0 or any(tr.phase[t, j] != 0 for j in cfg.graph.adjacency[i]):
                    problems.append(f"slot {t}: node {i} started while blocked")
                collided = any(starts[t, j] for j in cfg.graph.adjacency[i])
                if collided != (ev[t, i] == C_START):
                    problems.append(f"slot {t}: node {i} outcome mislabelled")
                cont = S_CONT if ev[t, i] == S_START else C_CONT
                for k in range(1, T):
                    if t + k < ev.shape[0] and ev[t + k, i] != cont:
                        problems.append(f"slot {t + k}: node {i} expected continuation")
    return problems
