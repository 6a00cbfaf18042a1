"""Quorum families as per-tier minimum counts.

Every family used here (wall Phase 1 at each tier, strict and relaxed Phase 2,
the flat all-tiers family, the Earth-local and Mars-local scopes) has the form
"at least ``m_j`` members from tier ``j``". That makes membership a count
check, counting a product of binomial tails, and cross-intersection a check
over minimal members only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from math import comb
from typing import Iterable, Iterator

from .topology import NodeId, Tier, Topology, link_active, tier_reachable

EARTH_SIZE = 5
DEFAULT_PROPOSERS = {
    Tier.EARTH: "NA-West",
    Tier.LEO: "LEO",
    Tier.MOON: "Moon",
    Tier.MARS: "Mars-0",
}


def default_universe() -> frozenset[NodeId]:
    """The 5/1/1/3 node set, labelled as in the shipped topology files."""
    labels = {
        Tier.EARTH: ["NA-West", "Europe", "Asia", "SA-East", "Africa"],
        Tier.LEO: ["LEO"],
        Tier.MOON: ["Moon"],
        Tier.MARS: ["Mars-0", "Mars-1", "Mars-2"],
    }
    return frozenset(NodeId(t, i, lab) for t, labs in labels.items() for i, lab in enumerate(labs))


@dataclass(frozen=True)
class QuorumFamily:
    """All subsets of ``universe`` with at least ``min_per_tier[j]`` nodes of tier ``j``."""

    universe: frozenset[NodeId]
    min_per_tier: tuple[int, ...]  # indexed by Tier
    name: str = ""

    def __post_init__(self) -> None:
        mins = tuple(self.min_per_tier) + (0,) * (len(Tier) - len(self.min_per_tier))
        object.__setattr__(self, "min_per_tier", mins)
        object.__setattr__(self, "universe", frozenset(self.universe))
        for tier in Tier:
            have = len(self.tier_members(tier))
            if mins[tier] < 0:
                raise ValueError(f"{self.name or 'family'}: negative minimum for {tier.label}")
            if mins[tier] > have:
                raise ValueError(
                    f"{self.name or 'family'} is empty: needs {mins[tier]} "
                    f"{tier.label} nodes, universe has {have}"
                )

    def tier_members(self, tier: Tier) -> tuple[NodeId, ...]:
        return tuple(sorted(n for n in self.universe if n.tier == tier))

    def minimum(self, tier: Tier) -> int:
        return self.min_per_tier[tier]

    def with_minimum(self, tier: Tier, value: int, name: str | None = None) -> QuorumFamily:
        mins = list(self.min_per_tier)
        mins[tier] = value
        return QuorumFamily(self.universe, tuple(mins), self.name if name is None else name)

    def minimal_members(self) -> Iterator[frozenset[NodeId]]:
        per_tier = [itertools.combinations(self.tier_members(t), self.min_per_tier[t]) for t in Tier]
        for parts in itertools.product(*per_tier):
            yield frozenset(itertools.chain.from_iterable(parts))

    def __str__(self) -> str:
        mins = " ".join(f"{t.label}>={self.min_per_tier[t]}" for t in Tier if self.min_per_tier[t])
        return f"{self.name or 'family'}[{mins or 'any'}]"


def _family(mins: dict[Tier, int], universe: Iterable[NodeId] | None, name: str) -> QuorumFamily:
    u = frozenset(default_universe() if universe is None else universe)
    return QuorumFamily(u, tuple(mins.get(t, 0) for t in Tier), name)


def min_earth_for_intersection(k: int, earth_size: int = EARTH_SIZE) -> int:
    """Earth nodes a Phase-1 quorum needs to meet every k-of-|E| Phase-2 quorum."""
    if not 1 <= k <= earth_size:
        raise ValueError(f"k must be in 1..{earth_size}, got {k}")
    return earth_size - k + 1


def wall_phase1(
    tier: Tier | int, k: int = EARTH_SIZE, universe: Iterable[NodeId] | None = None
) -> QuorumFamily:
    """Phase-1 family for a proposer at ``tier``: one node from each tier at or
    below it, and enough Earth nodes to meet any k-of-|E| Phase-2 quorum."""
    tier = Tier(tier)
    u = frozenset(default_universe() if universe is None else universe)
    earth_size = sum(1 for n in u if n.tier == Tier.EARTH)
    mins = {j: 1 for j in Tier if j <= tier}
    mins[Tier.EARTH] = max(1, min_earth_for_intersection(k, earth_size))
    return _family(mins, u, f"wall-p1[{tier.label},k={k}]")


def phase2(k: int = EARTH_SIZE, universe: Iterable[NodeId] | None = None) -> QuorumFamily:
    """k of the Earth nodes; k = |E| is the strict all-of-Earth family."""
    u = frozenset(default_universe() if universe is None else universe)
    earth_size = sum(1 for n in u if n.tier == Tier.EARTH)
    if not 1 <= k <= earth_size:
        raise ValueError(f"k must be in 1..{earth_size}, got {k}")
    return _family({Tier.EARTH: k}, u, f"p2[k={k}]")


def flat_phase1(k: int = EARTH_SIZE, universe: Iterable[NodeId] | None = None) -> QuorumFamily:
    """One node from every tier regardless of who proposes."""
    u = frozenset(default_universe() if universe is None else universe)
    mins = {t: 1 for t in Tier}
    mins[Tier.EARTH] = max(1, min_earth_for_intersection(k))
    return _family(mins, u, "flat-p1")


class LocalScope(str, Enum):
    EARTH_STD = "std"
    EARTH_MAJ = "maj"
    MARS_LOCAL = "mars"


_LOCAL_SIZES = {
    LocalScope.EARTH_STD: (Tier.EARTH, 4, 2),
    LocalScope.EARTH_MAJ: (Tier.EARTH, 3, 3),
    LocalScope.MARS_LOCAL: (Tier.MARS, 2, 2),
}


def local_families(
    scope: LocalScope | str, universe: Iterable[NodeId] | None = None
) -> tuple[QuorumFamily, QuorumFamily]:
    """(Phase 1, Phase 2) families of a single-tier consensus scope."""
    scope = LocalScope(scope)
    tier, q1, q2 = _LOCAL_SIZES[scope]
    base = default_universe() if universe is None else universe
    u = frozenset(n for n in base if n.tier == tier)
    return (
        _family({tier: q1}, u, f"{scope.value}-p1"),
        _family({tier: q2}, u, f"{scope.value}-p2"),
    )


def is_member(f: QuorumFamily, q: Iterable[NodeId]) -> bool:
    q = frozenset(q)
    if not q <= f.universe:
        raise ValueError(f"{sorted(q - f.universe)} not in the universe of {f}")
    counts = [0] * len(Tier)
    for n in q:
        counts[n.tier] += 1
    return all(c >= m for c, m in zip(counts, f.min_per_tier))


def count_members(f: QuorumFamily) -> int:
    """Closed form: product over tiers of the number of large-enough subsets."""
    total = 1
    for t in Tier:
        n = len(f.tier_members(t))
        total *= sum(comb(n, c) for c in range(f.min_per_tier[t], n + 1))
    return total


def enumerate_members(f: QuorumFamily) -> Iterator[frozenset[NodeId]]:
    """Every member, by walking all 2^|universe| subsets."""
    nodes = sorted(f.universe)
    for mask in range(1 << len(nodes)):
        q = frozenset(n for i, n in enumerate(nodes) if mask >> i & 1)
        if is_member(f, q):
            yield q


def count_members_bruteforce(f: QuorumFamily) -> int:
    return sum(1 for _ in enumerate_members(f))


@dataclass(frozen=True)
class IntersectionVerdict:
    holds: bool
    pairs_checked: int
    counterexample: tuple[frozenset[NodeId], frozenset[NodeId]] | None = None


@lru_cache(maxsize=256)
def verify_cross_intersection(f1: QuorumFamily, f2: QuorumFamily) -> IntersectionVerdict:
    """Check that every member of ``f1`` meets every member of ``f2``.

    Both families are upward closed, so checking minimal members suffices.
    Stops at the first disjoint pair.
    """
    if f1.universe != f2.universe:
        raise ValueError("families must share a universe")
    seconds = list(f2.minimal_members())
    checked = 0
    for q1 in f1.minimal_members():
        for q2 in seconds:
            checked += 1
            if not q1 & q2:
                return IntersectionVerdict(False, checked, (q1, q2))
    return IntersectionVerdict(True, checked)


def verify_cross_intersection_bruteforce(f1: QuorumFamily, f2: QuorumFamily) -> IntersectionVerdict:
    """Same question over all member pairs; slow, used as an oracle."""
    firsts = list(enumerate_members(f1))
    seconds = list(enumerate_members(f2))
    checked = 0
    for q1 in firsts:
        for q2 in seconds:
            checked += 1
            if not q1 & q2:
                return IntersectionVerdict(False, checked, (q1, q2))
    return IntersectionVerdict(True, checked)


# ------------------------------------------------------------------ legibility


@dataclass(frozen=True)
class TierVerdict:
    tier: Tier
    obligations_met: bool
    phase2_achievable: bool

    @property
    def live(self) -> bool:
        return self.obligations_met and self.phase2_achievable

    def describe(self) -> str:
        if self.live:
            return "LIVE"
        if not self.obligations_met:
            return "BLOCKED"
        return "BLOCKED(phase2)"


def _reachable_earth(t: Topology, time: float, proposer: NodeId) -> int:
    """Live Earth nodes the proposer can message directly (itself included)."""
    if t.is_crashed(proposer, time):
        return 0
    count = 0
    for e in t.tier_nodes(Tier.EARTH):
        if e == proposer:
            count += 1
        elif link_active(t, time, proposer, e):
            count += 1
    return count


def read_wall(
    t: Topology, time: float, tier: Tier | int, k: int = EARTH_SIZE, proposer: NodeId | None = None
) -> TierVerdict:
    """Per-tier liveness from wall structure and link state alone.

    Obligations: every tier at or below ``tier`` is reachable from it, and
    enough Earth nodes are reachable for the relaxed pigeonhole bound.
    Phase 2: at least ``k`` live Earth nodes are directly reachable from the
    proposer. No quorum subset is ever enumerated.
    """
    tier = Tier(tier)
    proposer = proposer or t.proposer(tier)
    earth = _reachable_earth(t, time, proposer)
    obligations = all(tier_reachable(t, time, tier, j) for j in Tier if j <= tier)
    obligations = obligations and earth >= min_earth_for_intersection(k, len(t.tier_nodes(Tier.EARTH)))
    return TierVerdict(tier, obligations, earth >= k)


def read_families(
    t: Topology, time: float, proposer: NodeId, q1: QuorumFamily, q2: QuorumFamily
) -> TierVerdict:
    """Generic reader for any min-count family pair seen from one proposer."""

    def satisfiable(f: QuorumFamily) -> bool:
        for tier in Tier:
            need = f.min_per_tier[tier]
            if not need:
                continue
            got = sum(
                1
                for n in f.tier_members(tier)
                if (n == proposer and not t.is_crashed(n, time))
                or (n != proposer and link_active(t, time, proposer, n))
            )
            if got < need:
                return False
        return True

    return TierVerdict(proposer.tier, satisfiable(q1), satisfiable(q2))
