"""Tiered Earth/LEO/Moon/Mars network: nodes, links, blackout windows, crashes.

A :class:`Topology` is an immutable value. Scenario setup derives new
topologies with :meth:`Topology.with_blackout` and :meth:`Topology.with_crashes`;
nothing mutates a topology once a simulation holds it.
"""

from __future__ import annotations

import configparser
import itertools
import os
import random
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from functools import lru_cache
from pathlib import Path
from typing import Mapping

CONFIG_DIR_ENV = "CRUMBLEWALL_CONFIG_DIR"
MARS_DELAY_RANGE = (186.0, 1342.0)


class Tier(IntEnum):
    """Wall row. Lower index means lower latency to Earth."""

    EARTH = 0
    LEO = 1
    MOON = 2
    MARS = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, text: str | int | Tier) -> Tier:
        if isinstance(text, int):
            return cls(text)
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown tier {text!r}") from None


class Coverage(str, Enum):
    SPARSE = "sparse"
    FULL = "full"


class BlackoutModel(str, Enum):
    HARD = "hard"
    REPEATER = "repeater"


@dataclass(frozen=True, order=True)
class NodeId:
    tier: Tier
    ordinal: int
    label: str = field(compare=False)

    def __str__(self) -> str:
        return self.label

    def __repr__(self) -> str:
        return f"NodeId({self.label})"


@dataclass(frozen=True)
class LinkSpec:
    a: NodeId
    b: NodeId
    one_way_delay: float
    jitter_fraction: float = 0.10

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValueError(f"self-link on {self.a}")
        if self.one_way_delay <= 0:
            raise ValueError(f"link {self.a}--{self.b}: delay must be positive")
        if self.jitter_fraction < 0:
            raise ValueError(f"link {self.a}--{self.b}: negative jitter")
        if self.b < self.a:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    @property
    def endpoints(self) -> frozenset[NodeId]:
        return frozenset((self.a, self.b))


@dataclass(frozen=True)
class BlackoutWindow:
    start: float
    duration: float
    model: BlackoutModel = BlackoutModel.HARD
    severed_tier: Tier = Tier.MARS

    def __post_init__(self) -> None:
        if self.duration < 0:
            raise ValueError("blackout duration must be non-negative")

    @property
    def end(self) -> float:
        return self.start + self.duration

    def covers(self, time: float) -> bool:
        return self.start <= time < self.end

    def severs(self, a: NodeId, b: NodeId) -> bool:
        return (a.tier == self.severed_tier) != (b.tier == self.severed_tier)


class Unreachable(Exception):
    """No active link between two nodes at the requested time."""


@dataclass(frozen=True, eq=False)
class Topology:
    nodes: tuple[NodeId, ...]
    links: Mapping[frozenset, LinkSpec]
    coverage: Coverage
    mars_one_way: float
    blackouts: tuple[BlackoutWindow, ...] = ()
    crashed: Mapping[NodeId, float] = field(default_factory=dict)
    proposers: Mapping[Tier, NodeId] = field(default_factory=dict)
    crash_order: tuple[NodeId, ...] = ()
    repeater_stations: frozenset[NodeId] = frozenset()
    repeater_factor: float = 3.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "_by_label", {n.label: n for n in self.nodes})

    def node(self, label: str) -> NodeId:
        try:
            return self._by_label[label]
        except KeyError:
            raise ValueError(f"unknown node {label!r}") from None

    def tier_nodes(self, tier: Tier) -> tuple[NodeId, ...]:
        return tuple(n for n in self.nodes if n.tier == tier)

    def link(self, a: NodeId, b: NodeId) -> LinkSpec | None:
        return self.links.get(frozenset((a, b)))

    def proposer(self, tier: Tier) -> NodeId:
        return self.proposers.get(tier) or self.tier_nodes(tier)[0]

    def is_crashed(self, node: NodeId, time: float) -> bool:
        at = self.crashed.get(node)
        return at is not None and at <= time

    def with_blackout(self, window: BlackoutWindow) -> Topology:
        return replace(self, blackouts=self.blackouts + (window,))

    def with_crashes(self, crashes: Mapping[NodeId, float]) -> Topology:
        for n in crashes:
            self._check(n)
        merged = dict(self.crashed)
        merged.update(crashes)
        return replace(self, crashed=merged)

    def _check(self, node: NodeId) -> None:
        if self._by_label.get(node.label) != node:
            raise ValueError(f"{node!r} is not part of this topology")

    def _repeater_pair(self, a: NodeId, b: NodeId, window: BlackoutWindow) -> bool:
        inner = b if a.tier == window.severed_tier else a
        return inner in self.repeater_stations

    def active_window(self, time: float, a: NodeId, b: NodeId) -> BlackoutWindow | None:
        for w in self.blackouts:
            if w.covers(time) and w.severs(a, b):
                return w
        return None


def link_active(t: Topology, time: float, a: NodeId, b: NodeId) -> bool:
    """Whether a message can travel directly between ``a`` and ``b`` at ``time``."""
    if a == b:
        raise ValueError("link_active needs two distinct nodes")
    t._check(a)
    t._check(b)
    if t.is_crashed(a, time) or t.is_crashed(b, time):
        return False
    window = t.active_window(time, a, b)
    if window is None:
        return frozenset((a, b)) in t.links
    if window.model is BlackoutModel.REPEATER:
        # the relay replaces every severed link, direct link or not
        return t._repeater_pair(a, b, window)
    return False


def sample_delay(
    t: Topology, a: NodeId, b: NodeId, rng: random.Random, time: float = 0.0
) -> float:
    """One jittered one-way delay in seconds. Raises :class:`Unreachable` if inactive."""
    if not link_active(t, time, a, b):
        raise Unreachable(f"{a}--{b} inactive at t={time}")
    window = t.active_window(time, a, b)
    spec = t.link(a, b)
    jitter = spec.jitter_fraction if spec is not None else 0.10
    if window is not None:
        base = t.mars_one_way * t.repeater_factor
    else:
        base = spec.one_way_delay
    if jitter == 0:
        return base
    return base * (1.0 + rng.uniform(-jitter, jitter))


def tier_reachable(t: Topology, time: float, src: Tier, dst: Tier) -> bool:
    """Direct-link reachability between any node of ``src`` and any node of ``dst``."""
    if src == dst:
        return True
    return any(
        link_active(t, time, a, b)
        for a in t.tier_nodes(src)
        for b in t.tier_nodes(dst)
    )


# ---------------------------------------------------------------- config files


def config_dir(override: str | os.PathLike | None = None) -> Path:
    """Directory holding ``topologies/`` and ``sweeps/``.

    Resolution order: explicit argument, ``$CRUMBLEWALL_CONFIG_DIR``, the
    copies shipped inside the package.
    """
    if override is not None:
        return Path(override)
    env = os.environ.get(CONFIG_DIR_ENV)
    if env:
        return Path(env)
    return Path(__file__).resolve().parent


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(delimiters=("=",), inline_comment_prefixes=("#",))
    cp.optionxform = str  # node labels are case-sensitive
    return cp


def load_topology(
    path: str | os.PathLike, mars_one_way: float | None = None
) -> Topology:
    """Parse a topology ``.cfg`` file.

    ``mars_one_way`` overrides ``[topology] mars_one_way_s``. Link delays are
    milliseconds; the literal ``mars`` means the Mars one-way delay. A link
    endpoint may be a node label or a tier name (``earth``, ``mars``...) that
    expands to every node of the tier.
    """
    return _load_topology(str(path), mars_one_way)


@lru_cache(maxsize=64)
def _load_topology(path: str, mars_one_way: float | None) -> Topology:
    # cached: topologies are immutable and sweeps rebuild the same few
    cp = _parser()
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    top = cp["topology"]
    coverage = Coverage(top.get("coverage", "full").strip().lower())
    if mars_one_way is None:
        mars_one_way = top.getfloat("mars_one_way_s", 186.0)
    jitter = top.getfloat("jitter", 0.10)

    nodes: list[NodeId] = []
    for tier in Tier:
        for i, label in enumerate(_split(cp["nodes"].get(tier.label, ""))):
            nodes.append(NodeId(tier, i, label))
    by_label = {n.label: n for n in nodes}

    def expand(token: str) -> list[NodeId]:
        token = token.strip()
        if token in by_label:
            return [by_label[token]]
        tier = Tier.parse(token)
        return [n for n in nodes if n.tier == tier]

    links: dict[frozenset, LinkSpec] = {}
    for key, raw in cp["links"].items():
        left, sep, right = key.partition("--")
        if not sep:
            raise ValueError(f"bad link key {key!r}; expected 'a -- b'")
        raw = raw.strip()
        delay = mars_one_way if raw == "mars" else float(raw) / 1000.0
        for a, b in itertools.product(expand(left), expand(right)):
            if a == b:
                continue
            spec = LinkSpec(a, b, delay, jitter)
            links[spec.endpoints] = spec

    proposers = {}
    if cp.has_section("proposers"):
        for k, v in cp["proposers"].items():
            proposers[Tier.parse(k)] = by_label[v.strip()]
    crash_order: tuple[NodeId, ...] = ()
    if cp.has_section("crash_order"):
        crash_order = tuple(by_label[x] for x in _split(cp["crash_order"].get("earth", "")))

    blackouts: list[BlackoutWindow] = []
    if cp.has_section("blackout"):
        sec = cp["blackout"]
        blackouts.append(
            BlackoutWindow(
                sec.getfloat("start_s"),
                sec.getfloat("duration_s"),
                BlackoutModel(sec.get("model", "hard").strip().lower()),
                Tier.parse(sec.get("severed_tier", "mars")),
            )
        )
    crashed = {}
    if cp.has_section("crashes"):
        crashed = {by_label[k]: float(v) for k, v in cp["crashes"].items()}

    return Topology(
        nodes=tuple(nodes),
        links=links,
        coverage=coverage,
        mars_one_way=mars_one_way,
        blackouts=tuple(blackouts),
        crashed=crashed,
        proposers=proposers,
        crash_order=crash_order,
        repeater_stations=frozenset(by_label[x] for x in _split(top.get("repeater_stations", ""))),
        repeater_factor=top.getfloat("repeater_factor", 3.0),
    )


def build_topology(
    coverage: Coverage | str,
    mars_one_way: float = 186.0,
    config: str | os.PathLike | None = None,
) -> Topology:
    """The shipped 5/1/1/3 topology for ``coverage`` at the given Mars delay."""
    coverage = Coverage(coverage)
    lo, hi = MARS_DELAY_RANGE
    if not lo <= mars_one_way <= hi:
        warnings.warn(
            f"Mars one-way delay {mars_one_way} s is outside the evaluated "
            f"{lo:g}-{hi:g} s range",
            stacklevel=2,
        )
    path = config_dir(config) / "topologies" / f"5113_{coverage.value}.cfg"
    return load_topology(path, mars_one_way)


def earth_degree(t: Topology, node: NodeId) -> int:
    return sum(1 for e in t.tier_nodes(Tier.EARTH) if t.link(node, e) is not None)

