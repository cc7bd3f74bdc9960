"""Folded torus/mesh tile-NoC with an express die-NoC on top."""

from .kernel import EJECT
from .network import Network, NetworkError, TrafficResult, deliver_batch, run_synthetic
from .topology import (Flit, TopologySpec, flits_for, graph_hops, message_bits, next_hop,
                       ring_distance, route_select, spec_from_system, to_flits, walk)

__all__ = [
    "EJECT", "Flit", "Network", "NetworkError", "TopologySpec", "TrafficResult", "deliver_batch",
    "flits_for", "graph_hops", "message_bits", "next_hop", "ring_distance", "route_select",
    "run_synthetic", "spec_from_system", "to_flits", "walk",
]
