from __future__ import annotations

from hypothesis import given, strategies as st

from rpmlab.config import (
    LinkConfig,
    ParitySpec,
    components,
    enumerate_configs,
    in_F,
    in_parity_class,
    local_time,
)
from rpmlab.graph import build_graph


def test_local_time(edge):
    for k, want in [(0, 0), (3, 2), (4, 2)]:
        m = LinkConfig.from_dict(edge, 1, {(0, 1): k})
        assert local_time(m, "x", 1) == want


def test_parity_class(edge):
    one = LinkConfig.from_dict(edge, 2, {(0, 1): 1})
    two = LinkConfig.from_dict(edge, 2, {(0, 2): 1})
    assert in_parity_class(LinkConfig.zeros(edge, 2), ParitySpec())
    assert in_parity_class(one, ParitySpec({"x", "y"}))
    assert not in_parity_class(two, ParitySpec())


def test_enumerate_counts(edge):
    assert len(list(enumerate_configs(edge, 1, 4, ParitySpec()))) == 3
    assert len(list(enumerate_configs(edge, 2, 2, ParitySpec()))) == 4
    odd = [m.get(0, 1) for m in enumerate_configs(edge, 1, 3, ParitySpec({"x", "y"}))]
    assert odd == [1, 3]


def test_components(path3):
    assert components(LinkConfig.zeros(path3, 1)) == []
    m = LinkConfig.from_dict(path3, 1, {(0, 1): 2})
    assert [c.vertices for c in components(m)] == [frozenset("xy")]
    g = build_graph(["a", "b", "c", "d"], [("a", "b"), ("c", "d")])
    m = LinkConfig.from_dict(g, 1, {(0, 1): 1, (1, 1): 1})
    assert len(components(m)) == 2


def test_in_F(edge):
    m = LinkConfig.from_dict(edge, 1, {(0, 1): 1})
    assert in_F(m, {"x", "y"})
    assert not in_F(m, {"x"})
    g = build_graph(["x", "y"], [("x", "y")], [("x", "EXT")])
    mb = LinkConfig.from_dict(g, 1, {(0, 1): 1, (1, 1): 1})
    assert not in_F(mb, {"x"})
    assert in_F(mb, {"x"}, plus=True)


def test_arithmetic(edge):
    a = LinkConfig.from_dict(edge, 2, {(0, 1): 2, (0, 2): 1})
    b = LinkConfig.from_dict(edge, 2, {(0, 1): 1})
    assert (a - b) + b == a
    assert b <= a and not a <= b


@given(st.integers(0, 3), st.integers(0, 3))
def test_enumeration_matches_parity_filter(cap, n):
    g = build_graph(["x", "y", "z"], [("x", "y"), ("y", "z")])
    spec = ParitySpec(frozenset(["x", "y", "z"][: n % 3 and 2]))
    got = list(enumerate_configs(g, 2, cap, spec))
    assert all(in_parity_class(m, spec) for m in got)
    assert len(set(got)) == len(got)
