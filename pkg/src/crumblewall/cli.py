"""Command line: ``crumblewall {verify,count,read-wall,sweep}``.

Exit codes: 0 success, 1 verification failure or I/O error, 2 bad usage.
"""

from __future__ import annotations

import argparse
import sys
import time
from typing import Sequence

from . import harness
from .quorum import (
    LocalScope,
    count_members,
    flat_phase1,
    local_families,
    phase2,
    read_wall,
    verify_cross_intersection,
    wall_phase1,
)
from .topology import BlackoutModel, BlackoutWindow, Coverage, Tier, build_topology


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seeds(text: str) -> list[int]:
    """``40..89`` (inclusive) or ``40,41,45``."""
    if ".." in text:
        lo, _, hi = text.partition("..")
        try:
            lo_i, hi_i = int(lo), int(hi)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad seed range {text!r}") from None
        if hi_i < lo_i:
            raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
        return list(range(lo_i, hi_i + 1))
    return _int_list(text)


def _mutation(text: str) -> Tier:
    kind, _, tier = text.partition(":")
    if kind != "drop-earth" or not tier:
        raise argparse.ArgumentTypeError("mutation must look like drop-earth:<tier>")
    try:
        return Tier.parse(tier)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _filter(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"filter must be key=value, got {text!r}")
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crumblewall", description=__doc__.splitlines()[0])
    p.add_argument("--config-dir", help="directory with topologies/ and sweeps/ "
                   "(default: $CRUMBLEWALL_CONFIG_DIR, else the shipped files)")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="exhaustively check Phase-1/Phase-2 cross-intersection")
    v.add_argument("--k", type=_int_list, default=[3, 4, 5],
                   help="Phase-2 sizes to check, e.g. 3,4,5 (default)")
    v.add_argument("--mutate", type=_mutation, action="append", default=[],
                   metavar="drop-earth:TIER",
                   help="test hook: drop the Earth requirement from TIER's Phase-1 family")

    c = sub.add_parser("count", help="Phase-1 quorum counts per initiating tier")
    c.add_argument("--k", type=int, default=5, help="Phase-2 size (default 5, strict)")
    c.add_argument("--flat", action="store_true", help="count the flat all-tiers family instead")

    r = sub.add_parser("read-wall", help="per-tier liveness from wall structure and link state")
    r.add_argument("--coverage", choices=[x.value for x in Coverage], default="full")
    r.add_argument("--blackout", choices=["mars", "none"], default="none",
                   help="sever the Mars tier (default: no blackout)")
    r.add_argument("--model", choices=[x.value for x in BlackoutModel], default="hard")
    r.add_argument("--start", type=float, default=600.0, help="blackout start, s")
    r.add_argument("--duration", type=float, default=900.0, help="blackout duration, s")
    r.add_argument("--time", type=float, help="instant to read (default: mid-blackout, or 0)")
    r.add_argument("--k", type=int, default=5, help="Phase-2 size")
    r.add_argument("--mars-delay", type=float, default=186.0, help="Mars one-way delay, s")
    r.add_argument("--crash", type=int, default=0, help="number of Earth crashes (default order)")

    s = sub.add_parser("sweep", help="run an experiment family and write CSV")
    s.add_argument("family", help=f"one of {', '.join(harness.SWEEP_FAMILIES)} or a .cfg path")
    s.add_argument("--seeds", type=_seeds, default=list(harness.DEFAULT_SEEDS),
                   help="seed range, e.g. 40..89 (default) or 40,41")
    s.add_argument("-o", "--output", help="CSV path (default: stdout)")
    s.add_argument("--filter", type=_filter, action="append", default=[], metavar="KEY=VALUE",
                   help="keep only points whose field KEY equals VALUE")
    s.add_argument("--workers", type=int, default=1, help="parallel processes")
    return p


def cmd_verify(args, out) -> int:
    ok = True
    global_pairs = local_pairs = 0
    started = time.perf_counter()
    for k in args.k:
        for tier in Tier:
            f1 = wall_phase1(tier, k)
            if tier in args.mutate:
                f1 = f1.with_minimum(Tier.EARTH, 0, name=f1.name + "-mutated")
            f2 = phase2(k)
            verdict = verify_cross_intersection(f1, f2)
            global_pairs += 1
            ok &= _report(out, f1, f2, verdict)
    for scope in (LocalScope.EARTH_STD, LocalScope.EARTH_MAJ, LocalScope.MARS_LOCAL):
        f1, f2 = local_families(scope)
        local_pairs += 1
        ok &= _report(out, f1, f2, verify_cross_intersection(f1, f2))
    elapsed = time.perf_counter() - started
    print(f"{'PASS' if ok else 'FAIL'}: {global_pairs} global family pairs, "
          f"{local_pairs} local family pairs ({elapsed:.3f} s)", file=out)
    return 0 if ok else 1


def _report(out, f1, f2, verdict) -> bool:
    status = "PASS" if verdict.holds else "FAIL"
    line = f"{status} {f1} x {f2} pairs_checked={verdict.pairs_checked}"
    if not verdict.holds:
        a, b = verdict.counterexample
        line += f" counterexample=({_fmt(a)}, {_fmt(b)})"
    print(line, file=out)
    return verdict.holds


def _fmt(nodes) -> str:
    return "{" + ",".join(n.label for n in sorted(nodes)) + "}"


def cmd_count(args, out) -> int:
    if args.flat:
        print(f"flat={count_members(flat_phase1(args.k))}", file=out)
        return 0
    counts = {t: count_members(wall_phase1(t, args.k)) for t in Tier}
    ratio = counts[Tier.EARTH] / counts[Tier.MARS]
    body = " ".join(f"{t.label}={n}" for t, n in counts.items())
    print(f"{body} ratio={ratio:.2f}", file=out)
    return 0


def cmd_read_wall(args, out) -> int:
    t = build_topology(args.coverage, args.mars_delay, args.config_dir)
    when = args.time
    if args.blackout == "mars":
        t = t.with_blackout(BlackoutWindow(args.start, args.duration, BlackoutModel(args.model)))
        if when is None:
            when = args.start + args.duration / 2
    if args.crash:
        if args.crash > len(t.crash_order):
            print(f"error: at most {len(t.crash_order)} crashes", file=sys.stderr)
            return 2
        t = t.with_crashes({n: 0.0 for n in t.crash_order[: args.crash]})
    when = 0.0 if when is None else when
    verdicts = [read_wall(t, when, tier, args.k) for tier in Tier]
    print(" ".join(f"{v.tier.label}:{v.describe()}" for v in verdicts), file=out)
    return 0


def cmd_sweep(args, out) -> int:
    try:
        points = harness.load_sweep(args.family, args.config_dir)
        if args.filter:
            points = harness.filter_points(points, dict(args.filter))
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not points:
        print("error: no sweep points left after filtering", file=sys.stderr)
        return 2
    rows = harness.sweep(points, args.seeds, workers=args.workers, config=args.config_dir)
    try:
        harness.write_csv(rows, args.output if args.output else out)
    except OSError as exc:
        print(f"error: cannot write {args.output}: {exc}", file=sys.stderr)
        return 1
    if args.output:
        print(f"wrote {len(rows)} rows to {args.output}", file=sys.stderr)
    return 0


COMMANDS = {
    "verify": cmd_verify,
    "count": cmd_count,
    "read-wall": cmd_read_wall,
    "sweep": cmd_sweep,
}


def main(argv: Sequence[str] | None = None, out=None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args, out or sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
