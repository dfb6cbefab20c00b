"""Exact saturation throughput of heterogeneous p-persistent CSMA on conflict graphs."""

from .exact import (
    StateSpaceTooLarge,
    build_chain,
    eligible_nodes,
    exact_throughput,
    next_state,
    stationary,
    throughput,
)
from .graph import ConflictGraph, NetworkConfig, gen_erdos_renyi, gen_named, parse_graph, serialize_graph
from .product_form import partition_function, state_weight, throughput_closed_form
from .renewal import renewal_classic, renewal_extended

__all__ = [
    "ConflictGraph",
    "NetworkConfig",
    "StateSpaceTooLarge",
    "build_chain",
    "eligible_nodes",
    "exact_throughput",
    "gen_erdos_renyi",
    "gen_named",
    "next_state",
    "parse_graph",
    "partition_function",
    "renewal_classic",
    "renewal_extended",
    "serialize_graph",
    "state_weight",
    "stationary",
    "throughput",
    "throughput_closed_form",
]
