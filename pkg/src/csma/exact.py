"""Exact saturation throughput of slotted p-persistent CSMA.

The network state is the vector of per-node residual busy counters
``a_i in {0, ..., T-1}``. A node is eligible in a slot when its own counter
and all of its neighbours' counters are zero; every eligible node transmits
independently with probability ``p_i``. A transmitting node's counter jumps to
``T-1``, every other counter decrements towards zero. A transmission succeeds
when no neighbour starts in the same slot; since neighbours are then blocked
for the remaining ``T-1`` slots, the whole packet is successful.

The chain is built in two stages. :func:`build_structure` enumerates the
states reachable from the all-zeros state together with every
``(state, eligible set, transmit subset)`` triple; it does not depend on the
access probabilities and is cached per ``(graph, T)``. :func:`build_chain`
then weights those triples with a concrete ``p`` vector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .graph import ConflictGraph, NetworkConfig

DEFAULT_STATE_CAP = 2_000_000
DEFAULT_TRANSITION_CAP = 60_000_000
DIRECT_SOLVE_LIMIT = 4096
POWER_TOL = 1e-12
POWER_MAX_ITER = 1_000_000


class StateSpaceTooLarge(RuntimeError):
    """The reachable state space exceeds the configured cap."""

    def __init__(self, required, cap, what="states"):
        self.required = required
        self.cap = cap
        super().__init__(
            f"chain needs at least {required} {what}, cap is {cap}; "
            "raise the cap or estimate throughput with the Monte Carlo simulator"
        )


class PeriodicChainError(RuntimeError):
    """The chain is periodic, so the long-run behaviour is not a limit."""


class SolverError(RuntimeError):
    """The iterative stationary solver did not converge."""


# ---------------------------------------------------------------------------
# single-state semantics


def eligible_nodes(s, g: ConflictGraph) -> frozenset:
    s = tuple(s)
    return frozenset(
        i for i in range(g.n) if s[i] == 0 and all(s[j] == 0 for j in g.adjacency[i])
    )


def next_state(s, tx, T: int, g: ConflictGraph | None = None) -> tuple:
    """Apply one slot of dynamics to state ``s`` under transmit vector ``tx``.

    When a graph is given, ``tx`` is checked against the eligible set of
    ``s`` and a ``ValueError`` is raised for an invalid vector.
    """
    s, tx = tuple(s), tuple(tx)
    if len(s) != len(tx):
        raise ValueError("state and transmit vector lengths differ")
    if g is not None:
        elig = eligible_nodes(s, g)
        bad = [i for i, b in enumerate(tx) if b and i not in elig]
        if bad:
            raise ValueError(f"nodes {bad} are not eligible in state {s}")
    return tuple(T - 1 if b else max(0, a - 1) for a, b in zip(s, tx))


def phase_invariant_holds(states: np.ndarray, g: ConflictGraph) -> bool:
    """Neighbours can only be busy together if they started in the same slot."""
    states = np.atleast_2d(states)
    for i, j in g.edges:
        ai, aj = states[:, i], states[:, j]
        if np.any((ai > 0) & (aj > 0) & (ai != aj)):
            return False
    return True


# ---------------------------------------------------------------------------
# chain structure (independent of p)


@dataclass(frozen=True)
class ChainStructure:
    graph: ConflictGraph
    T: int
    states: np.ndarray  # (N, n) counters; row 0 is the all-zeros state
    src: np.ndarray  # (E,) source state index per enumerated transmit vector
    dst: np.ndarray  # (E,) destination state index
    pair: np.ndarray  # (E,) index into the (eligible, transmit) pair tables
    pair_elig: np.ndarray  # (U, n) bool
    pair_tx: np.ndarray  # (U, n) bool
    pair_succ: np.ndarray  # (U, n) bool, successful starters

    @property
    def num_states(self) -> int:
        return self.states.shape[0]


def _bits(mask: int, n: int) -> np.ndarray:
    return ((mask >> np.arange(n)) & 1).astype(bool)


@lru_cache(maxsize=4096)
def _submasks(mask: int, n: int) -> np.ndarray:
    """All subsets of ``mask`` as an (2^k, n) boolean array, empty set first."""
    idx = np.flatnonzero(_bits(mask, n))
    k = idx.size
    choose = ((np.arange(1 << k)[:, None] >> np.arange(k)) & 1).astype(bool)
    out = np.zeros((1 << k, n), dtype=bool)
    out[:, idx] = choose
    return out


def build_structure(
    graph: ConflictGraph,
    T: int,
    cap: int = DEFAULT_STATE_CAP,
    transition_cap: int = DEFAULT_TRANSITION_CAP,
) -> ChainStructure:
    return _build_structure_cached(graph, int(T), int(cap), int(transition_cap))


@lru_cache(maxsize=32)
def _build_structure_cached(graph, T, cap, transition_cap) -> ChainStructure:
    n = graph.n
    if T < 1:
        raise ValueError("T must be >= 1")
    if n * math.log2(max(T, 2)) >= 62:
        raise StateSpaceTooLarge(T**n, cap, what="encodable states (int64 state codes)")
    A = graph.adjacency_matrix.astype(np.int64)
    radix = T ** np.arange(n, dtype=np.int64)
    weights = np.int64(1) << np.arange(n, dtype=np.int64)

    zero = np.zeros((1, n), dtype=np.int64)
    state_blocks = [zero]
    code_to_idx = {0: 0}
    num_states = 1
    frontier = zero
    frontier_idx = np.array([0])

    src_parts, dst_code_parts, mask_parts, sub_parts = [], [], [], []
    num_entries = 0

    while frontier.shape[0]:
        busy = frontier > 0
        blocked = busy | ((busy.astype(np.int64) @ A) > 0)
        elig_masks = (~blocked).astype(np.int64) @ weights
        new_codes = []
        for mask in np.unique(elig_masks):
            rows = np.flatnonzero(elig_masks == mask)
            subs = _submasks(int(mask), n)  # (K, n)
            K = subs.shape[0]
            num_entries += rows.size * K
            if num_entries > transition_cap:
                raise StateSpaceTooLarge(num_entries, transition_cap, what="transitions")
            decayed = np.maximum(frontier[rows] - 1, 0)  # (m, n)
            nxt = np.where(subs[None, :, :], T - 1, decayed[:, None, :])  # (m, K, n)
            codes = (nxt @ radix).ravel()
            src_parts.append(np.repeat(frontier_idx[rows], K))
            dst_code_parts.append(codes)
            mask_parts.append(np.full(rows.size * K, mask, dtype=np.int64))
            sub_parts.append(np.tile(np.arange(K), rows.size))
            new_codes.append(codes)
        if not new_codes:
            break
        cand = np.unique(np.concatenate(new_codes))
        fresh = [c for c in cand.tolist() if c not in code_to_idx]
        if num_states + len(fresh) > cap:
            raise StateSpaceTooLarge(num_states + len(fresh), cap)
        for k, c in enumerate(fresh):
            code_to_idx[c] = num_states + k
        fresh_arr = np.array(fresh, dtype=np.int64)
        frontier = (fresh_arr[:, None] // radix[None, :]) % T if fresh else np.zeros((0, n), np.int64)
        frontier_idx = np.arange(num_states, num_states + len(fresh))
        num_states += len(fresh)
        if fresh:
            state_blocks.append(frontier)

    states = np.concatenate(state_blocks)
    src = np.concatenate(src_parts)
    dst_codes = np.concatenate(dst_code_parts)
    all_codes = states @ radix
    order = np.argsort(all_codes)
    dst = order[np.searchsorted(all_codes[order], dst_codes)]

    # deduplicate (eligible mask, subset) pairs so probabilities are computed once
    masks = np.concatenate(mask_parts)
    subs_idx = np.concatenate(sub_parts)
    keys = masks * (np.int64(1) << n) + subs_idx
    ukeys, pair = np.unique(keys, return_inverse=True)
    umask = ukeys >> n
    usub = ukeys & ((np.int64(1) << n) - 1)
    pair_elig = ((umask[:, None] >> np.arange(n)) & 1).astype(bool)
    pair_tx = np.stack([_submasks(int(m), n)[int(k)] for m, k in zip(umask, usub)]) if ukeys.size else np.zeros((0, n), bool)
    nbr_tx = (pair_tx.astype(np.int64) @ A) > 0
    pair_succ = pair_tx & ~nbr_tx

    for arr in (states, src, dst, pair, pair_elig, pair_tx, pair_succ):
        arr.flags.writeable = False
    return ChainStructure(graph, T, states, src, dst, pair.ravel(), pair_elig, pair_tx, pair_succ)


# ---------------------------------------------------------------------------
# weighted chain


@dataclass(frozen=True)
class ChainModel:
    """Reachable states, transition matrix ``P`` and success matrix ``R``.

    ``R[s, i]`` is the probability that node ``i`` starts a successful
    packet in a slot that begins in state ``s``.
    """

    structure: ChainStructure
    p: np.ndarray
    transitions: sp.csr_matrix
    success: np.ndarray
    zero_state_index: int = 0

    @property
    def states(self) -> np.ndarray:
        return self.structure.states

    @property
    def num_states(self) -> int:
        return self.structure.num_states

    @property
    def T(self) -> int:
        return self.structure.T

    def index_of(self, state) -> int:
        hits = np.flatnonzero((self.states == np.asarray(state)).all(axis=1))
        if hits.size == 0:
            raise KeyError(f"state {tuple(state)} is not reachable")
        return int(hits[0])

    def to_json(self) -> str:
        P = self.transitions.tocoo()
        return json.dumps(
            {
                "states": self.states.tolist(),
                "transitions": [
                    [int(i), int(j), float(v)] for i, j, v in zip(P.row, P.col, P.data) if v != 0.0
                ],
            }
        )


def _pair_probabilities(structure: ChainStructure, p: np.ndarray) -> np.ndarray:
    q = 1.0 - p
    factors = np.where(structure.pair_tx, p, np.where(structure.pair_elig, q, 1.0))
    return factors.prod(axis=1)


def build_chain(cfg: NetworkConfig, cap: int = DEFAULT_STATE_CAP) -> ChainModel:
    if cfg.sigma != 1.0:
        raise ValueError("the exact engine measures time in idle slots; sigma must be 1")
    st = build_structure(cfg.graph, cfg.T, cap)
    p = cfg.p_array
    prob = _pair_probabilities(st, p)[st.pair]
    N = st.num_states
    P = sp.csr_matrix((prob, (st.src, st.dst)), shape=(N, N))
    P.sum_duplicates()
    M = sp.csr_matrix((prob, (st.src, st.pair)), shape=(N, st.pair_succ.shape[0]))
    R = np.asarray(M @ st.pair_succ.astype(float))
    return ChainModel(st, p, P, R, 0)


# ---------------------------------------------------------------------------
# stationary distribution


def chain_period(chain: ChainModel) -> int:
    """Period of the recurrent class containing the all-zeros state."""
    P = chain.transitions
    P = P.multiply(P > 0).tocsr()
    N = P.shape[0]
    level = np.full(N, -1, dtype=np.int64)
    level[chain.zero_state_index] = 0
    frontier = [chain.zero_state_index]
    g = 0
    indptr, indices = P.indptr, P.indices
    while frontier:
        nxt = []
        for u in frontier:
            for v in indices[indptr[u] : indptr[u + 1]]:
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
                else:
                    g = math.gcd(g, int(level[u] + 1 - level[v]))
        frontier = nxt
    return g if g > 0 else 0


def _check_aperiodic(chain: ChainModel) -> None:
    z = chain.zero_state_index
    if chain.transitions[z, z] > 0:
        return
    d = chain_period(chain)
    if d != 1:
        raise PeriodicChainError(
            f"chain has period {d} (some p_i = 1 forces a deterministic cycle); "
            "perturb the access probabilities below 1"
        )


def stationary(
    chain: ChainModel,
    method: str = "auto",
    tol: float = POWER_TOL,
    max_iter: int = POWER_MAX_ITER,
) -> np.ndarray:
    """Stationary distribution of ``chain``.

    ``method`` is ``"direct"`` (dense solve with one balance equation
    replaced by normalisation), ``"power"`` (sparse power iteration stopped
    when successive iterates differ by less than ``tol`` in the max norm) or
    ``"auto"``, which picks direct up to 4096 states.
    """
    _check_aperiodic(chain)
    N = chain.num_states
    if method == "auto":
        method = "direct" if N <= DIRECT_SOLVE_LIMIT else "power"
    if method == "direct":
        A = chain.transitions.T.toarray() - np.eye(N)
        A[-1, :] = 1.0
        b = np.zeros(N)
        b[-1] = 1.0
        pi = np.linalg.solve(A, b)
    elif method == "power":
        # iterate the lazy chain (I + P) / 2: same fixed point, and the
        # near-unit-modulus eigenvalues of almost periodic chains are damped
        PT = chain.transitions.T.tocsr()
        pi = np.zeros(N)
        pi[chain.zero_state_index] = 1.0
        for _ in range(max_iter):
            nxt = 0.5 * (pi + PT @ pi)
            nxt /= nxt.sum()
            if np.max(np.abs(nxt - pi)) < tol:
                pi = nxt
                break
            pi = nxt
        else:
            raise SolverError(f"power iteration did not reach tol={tol} in {max_iter} iterations")
    else:
        raise ValueError(f"unknown stationary solver {method!r}")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def throughput(chain: ChainModel, pi: np.ndarray, T: int | None = None) -> np.ndarray:
    T = chain.T if T is None else T
    return T * (pi @ chain.success)


def exact_throughput(cfg: NetworkConfig, cap: int = DEFAULT_STATE_CAP, method: str = "auto") -> np.ndarray:
    chain = build_chain(cfg, cap)
    return throughput(chain, stationary(chain, method), cfg.T)
