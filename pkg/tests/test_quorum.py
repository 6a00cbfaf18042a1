import itertools

import pytest
from hypothesis import given, settings, strategies as st

from crumblewall.quorum import (
    LocalScope,
    QuorumFamily,
    count_members,
    count_members_bruteforce,
    default_universe,
    flat_phase1,
    is_member,
    local_families,
    min_earth_for_intersection,
    phase2,
    read_families,
    read_wall,
    verify_cross_intersection,
    verify_cross_intersection_bruteforce,
    wall_phase1,
)
from crumblewall.topology import BlackoutModel, BlackoutWindow, Tier

U = sorted(default_universe())
E = [n for n in U if n.tier == Tier.EARTH]
L, M1 = next(n for n in U if n.tier == Tier.LEO), next(n for n in U if n.tier == Tier.MOON)
MARS = [n for n in U if n.tier == Tier.MARS]
e1, e2, e3, e4, e5 = E
l1, u1, m1 = L, M1, MARS[0]


# Independent oracle: the set-builder definitions, evaluated over all 2^10 subsets.
def oracle_wall(q, i, k=5):
    return all(any(n.tier == j for n in q) for j in range(i + 1)) and \
        sum(n.tier == 0 for n in q) >= 5 - k + 1


def oracle_phase2(q, k=5):
    return sum(n.tier == 0 for n in q) >= k


def all_subsets():
    for r in range(len(U) + 1):
        for q in itertools.combinations(U, r):
            yield frozenset(q)


SUBSETS = list(all_subsets())


def test_wall_phase1_examples():
    mars = wall_phase1(Tier.MARS, 5)
    assert min(len(q) for q in SUBSETS if is_member(mars, q)) == 4
    earth4 = wall_phase1(Tier.EARTH, 4)
    assert not is_member(earth4, {e1})
    assert is_member(earth4, {e1, e2})
    assert is_member(wall_phase1(Tier.EARTH, 5), {e1})


@pytest.mark.parametrize("tier,size", [(Tier.EARTH, 1), (Tier.LEO, 2), (Tier.MOON, 3), (Tier.MARS, 4)])
def test_strict_minimum_sizes(tier, size):
    f = wall_phase1(tier)
    assert min(len(q) for q in SUBSETS if is_member(f, q)) == size


def test_wall_phase1_rejects_bad_k():
    with pytest.raises(ValueError):
        wall_phase1(Tier.EARTH, 0)
    with pytest.raises(ValueError):
        wall_phase1(Tier.EARTH, 6)


def test_phase2_examples():
    strict = phase2(5)
    assert is_member(strict, E)
    assert not any(is_member(strict, q) for q in itertools.combinations(E, 4))
    assert is_member(phase2(4), {e1, e2, e3, e4})
    assert is_member(phase2(3), {e1, e2, e3, m1})
    with pytest.raises(ValueError):
        phase2(6)


def test_flat_examples():
    f = flat_phase1()
    assert is_member(f, {e1, l1, u1, m1})
    assert not is_member(f, {e1, l1, u1})
    assert count_members(f) == 217


def test_local_families():
    s1, s2 = local_families(LocalScope.EARTH_STD)
    assert s1.universe == frozenset(E)
    assert (s1.minimum(Tier.EARTH), s2.minimum(Tier.EARTH)) == (4, 2)
    assert s1.minimum(Tier.EARTH) + s2.minimum(Tier.EARTH) > len(E)
    survivors = {e1, e2, e3}
    assert not any(is_member(s1, q) for r in range(4) for q in itertools.combinations(survivors, r))
    assert not is_member(s1, survivors)
    j1, j2 = local_families(LocalScope.EARTH_MAJ)
    assert (j1.minimum(Tier.EARTH), j2.minimum(Tier.EARTH)) == (3, 3)
    r1, r2 = local_families(LocalScope.MARS_LOCAL)
    assert r1.universe == frozenset(MARS)
    assert is_member(r1, MARS[:2]) and is_member(r2, MARS[:2])


def test_is_member_examples():
    moon = wall_phase1(Tier.MOON, 5)
    assert is_member(moon, {u1, l1, e3})
    assert not is_member(moon, {u1, e3})
    assert is_member(phase2(5), E)


def test_is_member_outside_universe():
    s1, _ = local_families(LocalScope.EARTH_STD)
    with pytest.raises(ValueError):
        is_member(s1, {m1})


def test_empty_family_rejected():
    with pytest.raises(ValueError, match="empty"):
        QuorumFamily(default_universe(), (0, 2, 0, 0))


@pytest.mark.parametrize("tier,expected", [(Tier.EARTH, 992), (Tier.LEO, 496), (Tier.MOON, 248), (Tier.MARS, 217)])
def test_strict_counts(tier, expected):
    f = wall_phase1(tier, 5)
    assert count_members(f) == expected
    assert count_members_bruteforce(f) == expected
    assert sum(oracle_wall(q, tier) for q in SUBSETS) == expected


def test_unconstrained_family_counts_every_subset():
    f = QuorumFamily(default_universe(), (0, 0, 0, 0))
    assert count_members(f) == count_members_bruteforce(f) == 1024


def shipped_families():
    for k in (3, 4, 5):
        for tier in Tier:
            yield wall_phase1(tier, k)
        yield phase2(k)
    yield flat_phase1()
    for scope in LocalScope:
        yield from local_families(scope)


@pytest.mark.parametrize("family", list(shipped_families()), ids=str)
def test_closed_form_matches_bruteforce(family):
    assert count_members(family) == count_members_bruteforce(family)


@pytest.mark.parametrize("k", [3, 4, 5])
@pytest.mark.parametrize("tier", list(Tier))
def test_relaxed_counts_match_oracle(tier, k):
    assert count_members(wall_phase1(tier, k)) == sum(oracle_wall(q, tier, k) for q in SUBSETS)


def test_gradient():
    counts = [count_members(wall_phase1(t)) for t in Tier]
    assert counts == sorted(counts, reverse=True) and len(set(counts)) == 4
    assert round(counts[0] / counts[-1], 2) == 4.57


@pytest.mark.parametrize("k", [3, 4, 5])
@pytest.mark.parametrize("tier", list(Tier))
def test_cross_intersection_holds(tier, k):
    verdict = verify_cross_intersection(wall_phase1(tier, k), phase2(k))
    assert verdict.holds and verdict.counterexample is None and verdict.pairs_checked > 0
    # oracle over all member pairs of the set-builder definitions
    firsts = [q for q in SUBSETS if oracle_wall(q, tier, k)]
    seconds = [q for q in SUBSETS if oracle_phase2(q, k)]
    assert all(a & b for a in firsts for b in seconds)


@pytest.mark.parametrize("scope", list(LocalScope))
def test_local_cross_intersection(scope):
    assert verify_cross_intersection(*local_families(scope)).holds


def test_mutated_family_gives_counterexample():
    mutated = wall_phase1(Tier.LEO, 5).with_minimum(Tier.EARTH, 0)
    verdict = verify_cross_intersection(mutated, phase2(5))
    assert not verdict.holds
    a, b = verdict.counterexample
    assert (a, b) == (frozenset({l1}), frozenset(E))
    assert is_member(mutated, a) and is_member(phase2(5), b) and not a & b
    assert not verify_cross_intersection_bruteforce(mutated, phase2(5)).holds


def test_too_small_earth_minimum_is_caught():
    # k = 3 needs three Earth nodes in Phase 1; two are not enough
    weak = wall_phase1(Tier.MOON, 3).with_minimum(Tier.EARTH, 2)
    verdict = verify_cross_intersection(weak, phase2(3))
    assert not verdict.holds
    assert verify_cross_intersection_bruteforce(weak, phase2(3)).holds is False


def test_minimal_and_bruteforce_verdicts_agree_on_random_families():
    import random

    rng = random.Random(3)
    sizes = [5, 1, 1, 3]
    for _ in range(40):
        f1 = QuorumFamily(default_universe(), tuple(rng.randint(0, s) for s in sizes))
        f2 = QuorumFamily(default_universe(), tuple(rng.randint(0, s) for s in sizes))
        assert verify_cross_intersection(f1, f2).holds == verify_cross_intersection_bruteforce(f1, f2).holds


def test_universe_mismatch():
    s1, _ = local_families(LocalScope.EARTH_STD)
    with pytest.raises(ValueError):
        verify_cross_intersection(s1, phase2(5))


@pytest.mark.parametrize("k,expected", [(4, 2), (3, 3), (5, 1)])
def test_pigeonhole(k, expected):
    assert min_earth_for_intersection(k) == expected


@settings(max_examples=300, deadline=None)
@given(
    family=st.sampled_from(list(shipped_families())),
    bits=st.integers(0, 1023),
    extra=st.integers(0, 1023),
)
def test_upward_closure(family, bits, extra):
    nodes = sorted(family.universe)
    q = {n for i, n in enumerate(nodes) if bits >> i & 1}
    bigger = q | {n for i, n in enumerate(nodes) if extra >> i & 1}
    if is_member(family, q):
        assert is_member(family, bigger)


# --------------------------------------------------------------- wall reading


def test_read_wall_hard_blackout(full):
    t = full.with_blackout(BlackoutWindow(600, 900, BlackoutModel.HARD))
    live = [read_wall(t, 1000, tier, 5).live for tier in Tier]
    assert live == [True, True, True, False]
    mars = read_wall(t, 1000, Tier.MARS, 5)
    assert not mars.obligations_met


def test_read_wall_sparse_leo(sparse):
    v = read_wall(sparse, 0, Tier.LEO, 5)
    assert v.obligations_met and not v.phase2_achievable and not v.live
    assert v.describe() == "BLOCKED(phase2)"


def test_read_wall_all_live_without_faults(full):
    assert all(read_wall(full, 0, tier, 5).live for tier in Tier)


def test_read_wall_counts_crashes(full):
    t = full.with_crashes({full.node("SA-East"): 550})
    assert not read_wall(t, 600, Tier.EARTH, 5).live
    assert read_wall(t, 600, Tier.EARTH, 4).live
    assert read_wall(t, 500, Tier.EARTH, 5).live


def test_read_families_flat(full):
    t = full.with_blackout(BlackoutWindow(600, 900))
    na = t.node("NA-West")
    assert not read_families(t, 1000, na, flat_phase1(), phase2()).live
    assert read_families(t, 1000, na, wall_phase1(Tier.EARTH), phase2()).live
    assert read_families(t, 100, na, flat_phase1(), phase2()).live
