"""Scenario runs, per-seed replication and CSV output.

A scenario is one topology plus one blackout plus optional Earth crashes. Three
consensus scopes run side by side on their own acceptor state: the global
scope from the initiating tier, Earth-local from the Earth proposer site and
Mars-local from the Mars proposer site. Each scope re-attempts
``reconciliation_interval`` seconds after its previous attempt resolves.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence, TextIO

from .paxos import AttemptOutcome, PaxosInstance, Proposer
from .quorum import (
    LocalScope,
    QuorumFamily,
    flat_phase1,
    local_families,
    phase2,
    read_families,
    verify_cross_intersection,
    wall_phase1,
)
from .simcore import Engine, derive_seed
from .topology import (
    BlackoutModel,
    BlackoutWindow,
    Coverage,
    Tier,
    Topology,
    _parser,
    _split,
    build_topology,
    config_dir,
)

DEFAULT_SEEDS = tuple(range(40, 90))
Z95 = 1.96


class Construction(str, Enum):
    WALL = "wall"
    FLAT = "flat"


@dataclass(frozen=True)
class ScenarioConfig:
    construction: Construction = Construction.WALL
    initiating_tier: Tier = Tier.EARTH
    coverage: Coverage = Coverage.FULL
    mars_one_way: float = 186.0
    blackout_start: float = 600.0
    blackout_duration: float = 900.0
    blackout_model: BlackoutModel = BlackoutModel.HARD
    global_k: int = 5
    local_scope: LocalScope = LocalScope.EARTH_STD
    crash_count: int = 0
    crash_time: float = 550.0
    reconciliation_interval: float = 120.0
    sim_end: float = 4000.0
    global_budget: float = 500.0
    local_budget: float = 1.0
    seed: int = 40

    def __post_init__(self) -> None:
        # accept plain strings from config files and the CLI
        coerce = {
            "construction": Construction,
            "initiating_tier": Tier.parse,
            "coverage": Coverage,
            "blackout_model": BlackoutModel,
            "local_scope": LocalScope,
        }
        for name, conv in coerce.items():
            object.__setattr__(self, name, conv(getattr(self, name)))
        for name in ("mars_one_way", "blackout_start", "blackout_duration", "crash_time",
                     "reconciliation_interval", "sim_end", "global_budget", "local_budget"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("global_k", "crash_count", "seed"):
            object.__setattr__(self, name, int(getattr(self, name)))

    @property
    def window(self) -> BlackoutWindow:
        return BlackoutWindow(self.blackout_start, self.blackout_duration, self.blackout_model, Tier.MARS)

    def scenario_id(self) -> str:
        """Stable identifier of every parameter except the seed."""
        parts = []
        for f in fields(self):
            if f.name == "seed":
                continue
            v = getattr(self, f.name)
            parts.append(f"{f.name}={getattr(v, 'value', v)}")
        return ";".join(parts)

    def families(self) -> tuple[QuorumFamily, QuorumFamily]:
        if self.construction is Construction.FLAT:
            q1 = flat_phase1(self.global_k)
        else:
            q1 = wall_phase1(self.initiating_tier, self.global_k)
        return q1, phase2(self.global_k)


@dataclass
class RunRecord:
    config: ScenarioConfig
    attempts: list[AttemptOutcome]
    earth_local: list[AttemptOutcome] = field(default_factory=list)
    mars_local: list[AttemptOutcome] = field(default_factory=list)

    @property
    def window(self) -> BlackoutWindow:
        return self.config.window

    @staticmethod
    def _rate(outcomes: Iterable[AttemptOutcome]) -> float | None:
        outcomes = list(outcomes)
        if not outcomes:
            return None
        return sum(o.committed for o in outcomes) / len(outcomes)

    def _during(self, outcomes):
        return [o for o in outcomes if self.window.covers(o.started_at)]

    @property
    def during_rate(self) -> float | None:
        return self._rate(self._during(self.attempts))

    @property
    def post_rate(self) -> float | None:
        return self._rate(o for o in self.attempts if o.started_at >= self.window.end)

    @property
    def local_rate(self) -> float | None:
        """Earth-local success rate over attempts started during the blackout."""
        return self._rate(self._during(self.earth_local))

    @property
    def mars_local_rate(self) -> float | None:
        return self._rate(self._during(self.mars_local))

    @property
    def mean_latency(self) -> float | None:
        lat = [o.latency for o in self.attempts if o.committed]
        return statistics.fmean(lat) if lat else None

    @property
    def recovery_lag(self) -> float | None:
        end = self.window.end
        for o in self.attempts:
            if o.started_at >= end and o.committed:
                return o.ended_at - end
        return None


def validate(c: ScenarioConfig, topology: Topology) -> None:
    earth = len(topology.tier_nodes(Tier.EARTH))
    if not 1 <= c.global_k <= earth:
        raise ValueError(f"global_k={c.global_k} outside 1..{earth}")
    if c.crash_count < 0 or c.crash_count > len(topology.crash_order):
        raise ValueError(
            f"crash_count={c.crash_count} exceeds the {len(topology.crash_order)} "
            "crashable Earth nodes"
        )
    if c.construction is Construction.FLAT and c.initiating_tier is not Tier.EARTH:
        raise ValueError("the flat construction is defined for the Earth proposer only")
    if c.sim_end <= 0 or c.reconciliation_interval <= 0:
        raise ValueError("sim_end and reconciliation_interval must be positive")


def scenario_topology(c: ScenarioConfig, config: str | os.PathLike | None = None) -> Topology:
    """The topology a scenario runs on, blackout and crashes applied."""
    t = build_topology(c.coverage, c.mars_one_way, config)
    validate(c, t)
    t = t.with_blackout(c.window)
    if c.crash_count:
        t = t.with_crashes({n: c.crash_time for n in t.crash_order[: c.crash_count]})
    return t


def _cadence(engine: Engine, proposer: Proposer, budget: float, interval: float, end: float, tag: str) -> None:
    counter = itertools.count()

    def attempt() -> None:
        proposer.start(f"{tag}-{next(counter)}", budget, done)

    def done(outcome: AttemptOutcome) -> None:
        nxt = engine.now + interval
        if nxt < end:
            engine.schedule(nxt, attempt)

    engine.schedule(0.0, attempt)


def run_scenario(
    c: ScenarioConfig,
    config: str | os.PathLike | None = None,
    *,
    record_trace: bool = False,
) -> RunRecord:
    t = scenario_topology(c, config)
    q1, q2 = c.families()
    verdict = verify_cross_intersection(q1, q2)
    if not verdict.holds:
        raise ValueError(f"{q1} and {q2} do not intersect: {verdict.counterexample}")

    engine = Engine(t, derive_seed(c.seed, c.scenario_id()), record_trace=record_trace)
    interval, end = c.reconciliation_interval, c.sim_end

    universe = frozenset(t.nodes)
    glob = Proposer(PaxosInstance(engine, universe, "global"), t.proposer(c.initiating_tier), q1, q2)
    _cadence(engine, glob, c.global_budget, interval, end, "global")

    e1, e2 = local_families(c.local_scope, universe)
    earth = Proposer(PaxosInstance(engine, e1.universe, "earth-local"), t.proposer(Tier.EARTH), e1, e2)
    _cadence(engine, earth, c.local_budget, interval, end, "earth")

    m1, m2 = local_families(LocalScope.MARS_LOCAL, universe)
    mars = Proposer(PaxosInstance(engine, m1.universe, "mars-local"), t.proposer(Tier.MARS), m1, m2)
    _cadence(engine, mars, c.local_budget, interval, end, "mars")

    engine.run()
    record = RunRecord(c, glob.attempts, earth.attempts, mars.attempts)
    if record_trace:
        record.trace = engine.trace  # type: ignore[attr-defined]
    return record


def predict(c: ScenarioConfig, time: float | None = None, config=None):
    """Wall reading for the scenario's global proposer, by default mid-blackout."""
    t = scenario_topology(c, config)
    if time is None:
        time = c.blackout_start + c.blackout_duration / 2
    q1, q2 = c.families()
    return read_families(t, time, t.proposer(c.initiating_tier), q1, q2)


# ----------------------------------------------------------------- aggregation

METRICS = ("during_rate", "post_rate", "latency", "recovery_lag", "local_rate")
_RECORD_ATTR = {
    "during_rate": "during_rate",
    "post_rate": "post_rate",
    "latency": "mean_latency",
    "recovery_lag": "recovery_lag",
    "local_rate": "local_rate",
}


def mean_ci(values: Sequence[float]) -> tuple[float | None, float | None]:
    """Mean and normal-approximation 95% half-width; half-width 0 for n == 1."""
    if not values:
        return None, None
    mean = statistics.fmean(values)
    if len(values) == 1:
        return mean, 0.0
    return mean, Z95 * statistics.stdev(values) / math.sqrt(len(values))


@dataclass(frozen=True)
class AggregateRow:
    config: ScenarioConfig
    n_seeds: int
    stats: dict  # metric -> (mean, ci half-width)

    def mean(self, metric: str) -> float | None:
        return self.stats[metric][0]

    def ci(self, metric: str) -> float | None:
        return self.stats[metric][1]


def aggregate(records: Sequence[RunRecord]) -> AggregateRow:
    if not records:
        raise ValueError("aggregate needs at least one record")
    stats = {}
    for metric in METRICS:
        vals = [getattr(r, _RECORD_ATTR[metric]) for r in records]
        stats[metric] = mean_ci([v for v in vals if v is not None])
    return AggregateRow(replace(records[0].config, seed=0), len(records), stats)


def _run_one(args) -> RunRecord:
    point, config = args
    return run_scenario(point, config)


def sweep(
    points: Sequence[ScenarioConfig],
    seeds: Iterable[int] = DEFAULT_SEEDS,
    *,
    workers: int = 1,
    config: str | os.PathLike | None = None,
) -> list[AggregateRow]:
    """Run every (point, seed) pair and aggregate per point, in point order."""
    if not points:
        raise ValueError("sweep needs at least one point")
    seeds = list(seeds)
    jobs = [(replace(p, seed=s), config) for p in points for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs, chunksize=8))
    else:
        records = [_run_one(j) for j in jobs]
    n = len(seeds)
    return [aggregate(records[i * n:(i + 1) * n]) for i in range(len(points))]


# ------------------------------------------------------------------------ CSV

CSV_COLUMNS = (
    "construction", "tier", "coverage", "mars_delay_s", "blackout_s", "global_k",
    "local_scope", "crashes", "n_seeds",
    "during_rate_mean", "during_rate_ci", "post_rate_mean", "post_rate_ci",
    "latency_mean_s", "latency_ci_s", "recovery_lag_mean_s", "recovery_lag_ci_s",
    "blackout_model", "local_rate_mean", "local_rate_ci",
)


def _num(v: float | None) -> str:
    if v is None:
        return ""
    return repr(round(v, 6) + 0.0)  # + 0.0 folds -0.0


def csv_row(row: AggregateRow) -> list[str]:
    c = row.config
    s = row.stats
    return [
        c.construction.value, c.initiating_tier.label, c.coverage.value,
        f"{c.mars_one_way:g}", f"{c.blackout_duration:g}", str(c.global_k),
        c.local_scope.value, str(c.crash_count), str(row.n_seeds),
        _num(s["during_rate"][0]), _num(s["during_rate"][1]),
        _num(s["post_rate"][0]), _num(s["post_rate"][1]),
        _num(s["latency"][0]), _num(s["latency"][1]),
        _num(s["recovery_lag"][0]), _num(s["recovery_lag"][1]),
        c.blackout_model.value, _num(s["local_rate"][0]), _num(s["local_rate"][1]),
    ]


def write_csv(rows: Sequence[AggregateRow], destination: str | os.PathLike | TextIO) -> None:
    """Header plus one line per row. ``destination`` is a path or open text stream."""
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            write_csv(rows, fh)
        return
    w = csv.writer(destination, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow(csv_row(row))


def csv_text(rows: Sequence[AggregateRow]) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


# -------------------------------------------------------------- sweep presets

SWEEP_FAMILIES = ("flat_vs_wall", "tier_liveness", "crash_tolerance")
_CONFIG_FIELDS = {f.name for f in fields(ScenarioConfig)}


def load_sweep(name_or_path: str | os.PathLike, config: str | os.PathLike | None = None) -> list[ScenarioConfig]:
    """Expand a sweep definition file into scenario points.

    ``[sweep]`` holds scenario fields. Fields named in ``axes`` take
    comma-separated values and are expanded as a product in the listed order
    (first axis outermost). An optional ``[points]`` section lists explicit
    rows: ``columns`` names the fields, every other key is one row; the rows
    vary fastest.
    """
    path = Path(name_or_path)
    if not path.suffix:
        path = config_dir(config) / "sweeps" / f"{name_or_path}.cfg"
    cp = _parser()
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    sec = dict(cp["sweep"])
    sec.pop("name", None)
    axes = _split(sec.pop("axes", ""))
    unknown = set(sec) - _CONFIG_FIELDS
    if unknown:
        raise ValueError(f"{path}: unknown sweep keys {sorted(unknown)}")
    fixed = {k: v.strip() for k, v in sec.items() if k not in axes}
    axis_values = [_split(sec[a]) for a in axes]

    rows: list[dict] = [{}]
    if cp.has_section("points"):
        pts = dict(cp["points"])
        columns = _split(pts.pop("columns"))
        bad = set(columns) - _CONFIG_FIELDS
        if bad:
            raise ValueError(f"{path}: unknown point columns {sorted(bad)}")
        rows = [dict(zip(columns, _split(v))) for v in pts.values()]

    points = []
    for combo in itertools.product(*axis_values):
        for extra in rows:
            kw = dict(fixed)
            kw.update(zip(axes, combo))
            kw.update(extra)
            points.append(ScenarioConfig(**kw))
    return points


def filter_points(points: Sequence[ScenarioConfig], filters: dict[str, str]) -> list[ScenarioConfig]:
    """Keep points whose fields equal every ``key=value`` filter."""
    unknown = set(filters) - _CONFIG_FIELDS
    if unknown:
        raise ValueError(f"unknown filter keys {sorted(unknown)}")
    out = []
    for p in points:
        probe = ScenarioConfig(**{**_as_kwargs(p), **filters})
        if all(getattr(probe, k) == getattr(p, k) for k in filters):
            out.append(p)
    return out


def _as_kwargs(p: ScenarioConfig) -> dict:
    return {f.name: getattr(p, f.name) for f in fields(p)}


__all__ = [
    "AggregateRow", "Construction", "RunRecord", "ScenarioConfig", "aggregate",
    "csv_text", "load_sweep", "predict", "run_scenario", "sweep", "write_csv",
]
