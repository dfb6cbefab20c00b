"""Closed-form stationary distribution for two-slot packets (T = 2).

With ``T = 2`` every binary vector is a reachable state and the chain is
reversible. The stationary weight of state ``s`` is

    prod_{i busy} p_i * prod_{i idle with a busy neighbour} (1 - p_i)

normalised by the partition function ``Z``. Success probabilities are
evaluated directly from the eligible sets, so this module shares no code
path with the chain enumeration in :mod:`csma.exact`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import NetworkConfig

MAX_NODES = 24
_EXTREME = 1e-12


@dataclass(frozen=True)
class ProductFormWeight:
    state: tuple
    busy: frozenset  # nodes with s_i = 1
    shadowed: frozenset  # idle nodes with at least one busy neighbour
    weight: float


def _require_t2(cfg: NetworkConfig):
    if cfg.T != 2:
        raise ValueError(f"product form holds for T = 2 only, got T = {cfg.T}")


def state_weight(s, cfg: NetworkConfig) -> ProductFormWeight:
    _require_t2(cfg)
    s = tuple(int(x) for x in s)
    if len(s) != cfg.n or any(x not in (0, 1) for x in s):
        raise ValueError(f"expected a binary state of length {cfg.n}, got {s}")
    g = cfg.graph
    busy = frozenset(i for i in range(cfg.n) if s[i] == 1)
    shadowed = frozenset(
        i for i in range(cfg.n) if s[i] == 0 and any(s[j] == 1 for j in g.adjacency[i])
    )
    w = 1.0
    for i in busy:
        w *= cfg.p[i]
    for i in shadowed:
        w *= 1.0 - cfg.p[i]
    return ProductFormWeight(s, busy, shadowed, w)


def _hypercube(n: int) -> np.ndarray:
    if n > MAX_NODES:
        raise ValueError(f"product form enumerates 2^n states; n={n} exceeds cap {MAX_NODES}")
    codes = np.arange(1 << n, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(bool)


def _log_weights(cfg: NetworkConfig, states: np.ndarray) -> np.ndarray:
    p = cfg.p_array
    A = cfg.graph.adjacency_matrix.astype(np.int64)
    busy = states
    shadowed = ~states & ((states.astype(np.int64) @ A) > 0)
    with np.errstate(divide="ignore"):
        logp, logq = np.log(p), np.log1p(-p)
    # 0 * log(0) must contribute 0, not nan
    lp = np.where(busy, logp, 0.0).sum(axis=1)
    lq = np.where(shadowed, logq, 0.0).sum(axis=1)
    return lp + lq


def _weights(cfg: NetworkConfig, states: np.ndarray) -> np.ndarray:
    p = cfg.p_array
    if np.any((p < _EXTREME) | (p > 1 - _EXTREME)):
        return np.exp(_log_weights(cfg, states))
    A = cfg.graph.adjacency_matrix.astype(np.int64)
    shadowed = ~states & ((states.astype(np.int64) @ A) > 0)
    factors = np.where(states, p, np.where(shadowed, 1.0 - p, 1.0))
    return factors.prod(axis=1)


def _pairwise_sum(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    while x.size > 1:
        if x.size % 2:
            x = np.append(x, 0.0)
        x = x[0::2] + x[1::2]
    return float(x[0]) if x.size else 0.0


def stationary_weights(cfg: NetworkConfig) -> tuple[np.ndarray, np.ndarray]:
    """All ``2^n`` binary states (in binary-code order) and their weights."""
    _require_t2(cfg)
    states = _hypercube(cfg.n)
    return states, _weights(cfg, states)


def partition_function(cfg: NetworkConfig) -> float:
    _, w = stationary_weights(cfg)
    return _pairwise_sum(w)


def stationary_distribution(cfg: NetworkConfig) -> tuple[np.ndarray, np.ndarray]:
    states, w = stationary_weights(cfg)
    return states, w / _pairwise_sum(w)


def success_probabilities(cfg: NetworkConfig, states: np.ndarray) -> np.ndarray:
    """``R[s, i] = p_i * prod_{eligible neighbours j} (1 - p_j)`` for eligible ``i``."""
    p = cfg.p_array
    A = cfg.graph.adjacency_matrix.astype(np.int64)
    busy = states.astype(np.int64)
    eligible = ~states & ((busy @ A) == 0)
    R = np.zeros(states.shape, dtype=float)
    for i in range(cfg.n):
        nbrs = np.flatnonzero(A[i])
        contention = np.where(eligible[:, nbrs], 1.0 - p[nbrs], 1.0).prod(axis=1)
        R[:, i] = np.where(eligible[:, i], p[i] * contention, 0.0)
    return R


def throughput_closed_form(cfg: NetworkConfig) -> np.ndarray:
    states, pi = stationary_distribution(cfg)
    R = success_probabilities(cfg, states)
    return np.array([2.0 * _pairwise_sum(pi * R[:, i]) for i in range(cfg.n)])
