"""Renewal-reward throughput approximations.

``renewal_classic`` treats every node as contending with every other node
and is exact on complete conflict graphs. ``renewal_extended`` restricts the
contention products to each node's neighbourhood. Both are returned as raw
formula values, even where the extended form exceeds 1.
"""

import numpy as np

from .graph import NetworkConfig


def renewal_classic(cfg: NetworkConfig) -> np.ndarray:
    p = cfg.p_array
    T, sigma = cfg.T, cfg.sigma
    q = 1.0 - p
    idle_all = np.prod(q)
    S = np.empty(cfg.n)
    for i in range(cfg.n):
        others = np.prod(np.delete(q, i))
        S[i] = p[i] * others * T / (sigma * idle_all + (1.0 - idle_all) * T)
    return S


def renewal_extended(cfg: NetworkConfig) -> np.ndarray:
    p = cfg.p_array
    T, sigma = cfg.T, cfg.sigma
    q = 1.0 - p
    S = np.empty(cfg.n)
    for i in range(cfg.n):
        nbr_idle = np.prod([q[j] for j in cfg.graph.adjacency[i]])
        num = p[i] * nbr_idle * T
        den = sigma * q[i] * nbr_idle + (1.0 - nbr_idle) * T
        S[i] = num / den if den > 0 else (0.0 if num == 0 else np.inf)
    return S
