from __future__ import annotations

import itertools
from fractions import Fraction

import pytest

from rpmlab.config import LinkConfig, ParitySpec, enumerate_configs, in_F
from rpmlab.graph import build_graph
from rpmlab.measure import ModelParams, config_weight, correlation
from rpmlab.pairing import count_maximal_pairings, count_pairings_AB
from rpmlab.switching import (
    F_links,
    F_one,
    SwitchingContext,
    build_tuples,
    derivative_check,
    griffiths_gap,
    inject,
    switching_sides,
    verify_injectivity,
    weight_identity_even,
    weight_identity_odd,
)


# ---------------------------------------------------------------- weights


@pytest.mark.parametrize(
    "fn, N, k, r, lhs",
    [
        (weight_identity_even, 2, 0, 0, Fraction(1)),
        (weight_identity_even, 2, 2, 1, Fraction(1, 4)),
        (weight_identity_even, 4, 3, 2, Fraction(1, 96)),
        (weight_identity_odd, 3, 0, 0, Fraction(1)),
        (weight_identity_odd, 3, 2, 1, Fraction(1, 9)),
        (weight_identity_odd, 5, 3, 1, Fraction(1, 175)),
    ],
)
def test_identity_examples(fn, N, k, r, lhs):
    assert fn(N, k, r) == (lhs, lhs)


def test_identities_exhaustive():
    for N in (2, 4, 6):
        assert all(l == r for k in range(9) for j in range(k + 1) for l, r in [weight_identity_even(N, k, j)])
    for N in (3, 5):
        assert all(l == r for k in range(9) for j in range(k + 1) for l, r in [weight_identity_odd(N, k, j)])


def test_identity_parity_guard():
    with pytest.raises(ValueError):
        weight_identity_even(3, 1, 0)
    with pytest.raises(ValueError):
        weight_identity_odd(2, 1, 0)


# ------------------------------------------------------- sides vs brute force


def _weight_AB(p, m, A, B):
    spec = ParitySpec(A, B)
    full = count_maximal_pairings(m, spec.overlap)
    if not full:
        return Fraction(0)
    return config_weight(p, m, spec.overlap) / full * count_pairings_AB(m, A, B)


def brute_sides(p, A, B, F, cap):
    """Both sides summed over explicit pairs of configurations."""
    A, B = frozenset(A), frozenset(B)
    g, N = p.rpm_graph, p.N
    slots = set(p.support)
    lhs = rhs = Fraction(0)

    def fits(m, mb):
        return all(a + b <= cap for a, b in zip(m.counts, mb.counts))

    SA = list(enumerate_configs(g, N, cap, ParitySpec(A), slots))
    SB = list(enumerate_configs(g, N, cap, ParitySpec(B), slots))
    for m, mb in itertools.product(SA, SB):
        if fits(m, mb):
            lhs += F(m + mb) * config_weight(p, m) * config_weight(p, mb)
    SAB = list(enumerate_configs(g, N, cap, ParitySpec(A, B), slots))
    S0 = list(enumerate_configs(g, N, cap, ParitySpec(), slots))
    for m, mb in itertools.product(SAB, S0):
        if fits(m, mb) and in_F(m + mb, B, p.eta == "plus"):
            rhs += F(m + mb) * _weight_AB(p, m, A, B) * config_weight(p, mb)
    return lhs, rhs


CASES = [
    ("edge", 2, "free", {}, {"x"}, {"y"}, 2),
    ("edge", 3, "free", {}, set(), {"x", "y"}, 2),
    ("edge", 2, "free", {}, {"x", "y"}, {"x", "y"}, 2),
    ("path", 2, "free", {}, {"x"}, {"z"}, 2),
    ("path", 2, "free", {}, {"x", "y"}, {"y", "z"}, 1),
    ("edge+", 2, "plus", {}, {"x"}, {"y"}, 2),
    ("edge", 2, "free", {("x", 1): Fraction(1, 5)}, {"x"}, {"y"}, 1),
]


def _graph(name):
    if name == "edge":
        return build_graph(["x", "y"], [("x", "y")])
    if name == "edge+":
        return build_graph(["x", "y"], [("x", "y")], [("x", "EXT")])
    return build_graph(["x", "y", "z"], [("x", "y"), ("y", "z")])


@pytest.mark.parametrize("name, N, eta, h, A, B, cap", CASES)
@pytest.mark.parametrize("F", [F_one, F_links])
def test_sides_match_bruteforce(name, N, eta, h, A, B, cap, F):
    p = ModelParams.homogeneous(_graph(name), N, Fraction(3, 10), eta, h)
    rep = switching_sides(p, A, B, F, cap)
    assert (rep.lhs, rep.rhs) == brute_sides(p, A, B, F, cap)


def test_trivial_sides(edge):
    p = ModelParams.homogeneous(edge, 2, Fraction(1, 3))
    for A, B in [(set(), set()), ({"x", "y"}, set())]:
        rep = switching_sides(p, A, B, F_one, 3)
        assert rep.lhs == rep.rhs and rep.holds and rep.violating_totals == 0


def test_disjoint_free_holds(triangle):
    p = ModelParams(triangle, 3, {(0, 1): Fraction(1, 2), (1, 1): Fraction(1, 3), (2, 2): Fraction(1, 4)})
    rep = switching_sides(p, {"a"}, {"b"}, F_links, 2)
    assert rep.holds and rep.violating_totals == 0
    assert rep.to_json()["holds"] is True


def test_overlap_edge_reports_witness(edge):
    # overlapping A and B at cap 3: both sides are computed and the witness is
    # the first total whose inner inequality fails
    p = ModelParams.homogeneous(edge, 2, Fraction(3, 10))
    rep = switching_sides(p, {"x", "y"}, {"x", "y"}, F_one, 3)
    assert rep.lhs == brute_sides(p, {"x", "y"}, {"x", "y"}, F_one, 3)[0]
    assert (rep.witness is None) == rep.holds


# ------------------------------------------------------------------ tuples


def _cfg(g, N, entries):
    return LinkConfig.from_dict(g, N, entries)


@pytest.mark.parametrize(
    "name, N, entries, A, B",
    [
        ("edge", 2, {}, set(), set()),
        ("edge", 2, {(0, 1): 2}, set(), set()),
        ("edge", 2, {(0, 1): 2}, set(), {"x", "y"}),
        ("edge", 2, {(0, 1): 3, (0, 2): 2}, set(), {"x", "y"}),
        ("edge", 3, {(0, 1): 2}, set(), {"x", "y"}),
        ("edge", 3, {(0, 1): 2, (0, 3): 2}, set(), {"x", "y"}),
        ("path", 2, {(0, 1): 1, (1, 1): 1}, set(), {"x", "z"}),
        ("path", 2, {(0, 1): 2, (1, 1): 1}, {"x", "y"}, {"x", "z"}),
        ("edge", 2, {(0, 1): 2}, {"x", "y"}, {"x", "y"}),
    ],
)
def test_tuple_count_and_round_trip(name, N, entries, A, B):
    M = _cfg(_graph(name), N, entries)
    ctx = SwitchingContext(M, A, B)
    tuples = list(ctx.build_tuples())
    assert len(tuples) == ctx.inner_count()
    assert len(set(tuples)) == len(tuples)
    for t in tuples:
        assert ctx.reverse(ctx.inject(t)) == t


def test_empty_total_has_one_tuple(edge):
    (t,) = build_tuples(LinkConfig.zeros(edge, 2), set(), set())
    assert not t.first


def test_no_B_is_identity(edge):
    M = _cfg(edge, 2, {(0, 1): 2, (0, 2): 2})
    for t in build_tuples(M, set(), set()):
        img = inject(t, M, set(), set())
        assert img.target() == (t.first, t.first_pairing, t.second_pairing, t.chosen, (), ())


def test_single_walk_is_moved(edge):
    # with A empty the remainder must be even, so one link in total
    M = _cfg(edge, 2, {(0, 1): 1})
    hits = [t for t in build_tuples(M, set(), {"x", "y"}) if len(t.first) == 1]
    assert hits
    for t in hits:
        img = inject(t, M, set(), {"x", "y"})
        assert not img.first
        (link,) = t.first
        assert any(link in b for b in img.second_pairing.at("x"))


def test_path_walk_moved_loops_kept(path3):
    M = _cfg(path3, 2, {(0, 1): 3, (1, 1): 1})
    for t in build_tuples(M, set(), {"x", "z"}):
        img = inject(t, M, set(), {"x", "z"})
        assert all(l.edge == 0 for l in img.first)
        assert len(img.first) % 2 == 0


# ------------------------------------------------------------- injectivity


def test_injectivity_trivial(edge):
    p = ModelParams.homogeneous(edge, 2, Fraction(1, 3))
    rep = verify_injectivity(p, set(), set(), 3)
    assert rep.injective and rep.collisions == 0
    assert rep.count_mismatches == 0 and rep.side_condition_failures == 0


@pytest.mark.parametrize("N, cap", [(2, 3), (3, 1)])
def test_injectivity_report_is_consistent(edge, N, cap):
    p = ModelParams.homogeneous(edge, N, Fraction(1, 3))
    rep = verify_injectivity(p, set(), {"x", "y"}, cap, explicit_limit=5000)
    assert rep.count_mismatches == 0
    assert rep.reverse_failures == 0
    assert rep.side_condition_failures == 0
    assert rep.extended_collisions == 0
    assert rep.distinct_images + rep.collisions == rep.total_preimages
    assert rep.image_side_count >= rep.distinct_images


# --------------------------------------------------------------- Griffiths


def test_gap_trivial(triangle, edge):
    zero = ModelParams.homogeneous(triangle, 2, 0)
    assert griffiths_gap(zero, set(), set()).gap == 0
    p = ModelParams.homogeneous(edge, 2, Fraction(3, 10))
    assert griffiths_gap(p, set(), {"x", "y"}).gap == 0


def test_gap_disjoint_triangle(triangle):
    J = {(0, 1): Fraction(2, 5), (1, 1): Fraction(1, 4), (2, 2): Fraction(1, 3), (1, 3): Fraction(1, 5)}
    p = ModelParams(triangle, 3, J)
    rep = griffiths_gap(p, {"a", "b"}, {"c"}, exact=False)
    assert rep.to_json()["holds"]
    rep = griffiths_gap(p, {"a", "b"}, {"a", "c"}, Fraction(1, 10**6))
    assert rep.G_AB == correlation(p, {"a", "b"}, {"a", "c"}, rep.caps[0])


def test_derivative_examples(edge, triangle):
    zero = ModelParams.homogeneous(edge, 2, 0)
    assert derivative_check(zero, set(), 0, 1) == 0
    p = ModelParams.homogeneous(edge, 2, Fraction(3, 10))
    assert derivative_check(p, {"x", "y"}, 0, 1, exact=False) > 0
    with pytest.raises(ValueError):
        derivative_check(p, {"x", "y"}, 0, 1, step=0)
