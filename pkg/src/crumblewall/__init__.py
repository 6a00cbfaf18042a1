"""Crumbling-wall quorums over a tiered Earth/LEO/Moon/Mars network.

Modules: :mod:`~crumblewall.topology` (nodes, links, blackouts),
:mod:`~crumblewall.quorum` (families, counting, intersection, wall reading),
:mod:`~crumblewall.simcore` (event engine), :mod:`~crumblewall.paxos`
(single-decree Paxos), :mod:`~crumblewall.harness` (scenarios, sweeps, CSV)
and :mod:`~crumblewall.cli`.
"""

from .quorum import (
    QuorumFamily,
    count_members,
    flat_phase1,
    is_member,
    local_families,
    phase2,
    read_wall,
    verify_cross_intersection,
    wall_phase1,
)
from .topology import BlackoutModel, BlackoutWindow, Coverage, NodeId, Tier, Topology, build_topology

__version__ = "0.1.0"
