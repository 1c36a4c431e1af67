from __future__ import annotations

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from rpmlab.config import LinkConfig, ParitySpec
from rpmlab.graph import build_graph
from rpmlab.measure import (
    CapLimitExceeded,
    InstanceTooLarge,
    ModelParams,
    config_weight,
    converge,
    correlation,
    first_description_sum,
    partition_sum,
    partition_sum_bruteforce,
    vertex_weight,
)


def gamma_weight(N: int, r: int) -> float:
    return math.exp(math.lgamma(N / 2) - r * math.log(2) - math.lgamma(r + N / 2))


def test_vertex_weight_examples():
    assert vertex_weight(5, 0) == 1
    assert vertex_weight(1, 3) == Fraction(1, 15)
    assert vertex_weight(2, 2) == Fraction(1, 8)
    with pytest.raises(ValueError):
        vertex_weight(0, 1)


@given(st.integers(1, 8), st.integers(0, 12))
def test_vertex_weight_gamma(N, r):
    assert float(vertex_weight(N, r)) == pytest.approx(gamma_weight(N, r), rel=1e-12)


def test_config_weight(edge):
    beta = Fraction(3, 10)
    for N in (1, 2, 3):
        p = ModelParams.homogeneous(edge, N, beta)
        assert config_weight(p, LinkConfig.zeros(edge, N)) == 1
        m = LinkConfig.from_dict(edge, N, {(0, 1): 1})
        assert config_weight(p, m) == beta / N**2


def test_partition_sum_examples(edge):
    beta = Fraction(2, 7)
    p1 = ModelParams.homogeneous(edge, 1, beta)
    assert partition_sum(p1, ParitySpec(), 0) == 1
    assert partition_sum(p1, ParitySpec(), 2) == 1 + beta**2 / 2
    p2 = ModelParams.homogeneous(edge, 2, beta)
    assert partition_sum(p2, ParitySpec({"x", "y"}), 1) == beta / 4
    assert first_description_sum(p1, ParitySpec(), 2) == 1 + beta**2 / 2
    assert first_description_sum(p2, ParitySpec({"x", "y"}), 1) == beta / 4


def test_correlation_examples(edge):
    p = ModelParams.homogeneous(edge, 2, Fraction(3, 10))
    assert correlation(p, set()) == 1
    assert correlation(p, {"x"}) == 0
    assert correlation(p, {"x", "y"}, cap=1) == Fraction(3, 10) / 4


def test_converge(edge):
    zero = ModelParams.homogeneous(edge, 2, 0)
    assert converge(zero, set()) == (1, 0)
    assert converge(zero, {"x", "y"}) == (0, 0)
    p = ModelParams.homogeneous(edge, 2, Fraction(3, 10))
    value, cap = converge(p, {"x", "y"}, tol=Fraction(1, 10**9))
    assert cap <= 10
    assert float(value) == pytest.approx(0.0741687134704, abs=1e-9)
    with pytest.raises(CapLimitExceeded):
        converge(p, {"x", "y"}, tol=Fraction(1, 10**30), max_cap=3)
    with pytest.raises(ValueError):
        converge(p, {"x"}, tol=0)


def test_float_mode_agrees(triangle):
    p = ModelParams(triangle, 2, {(0, 1): Fraction(1, 3), (1, 2): Fraction(1, 5), (2, 1): Fraction(1, 4)})
    exact = partition_sum(p, ParitySpec({"a", "b"}), 3)
    assert partition_sum(p, ParitySpec({"a", "b"}), 3, exact=False) == pytest.approx(float(exact), rel=1e-13)


@settings(max_examples=25, deadline=None)
@given(
    st.integers(1, 3),
    st.integers(0, 2),
    st.lists(st.fractions(0, Fraction(1, 2), max_denominator=9), min_size=9, max_size=9),
    st.sampled_from([(), ("a", "b"), ("a", "c")]),
)
def test_factorised_sum_equals_bruteforce(N, cap, Js, A):
    triangle = build_graph(["a", "b", "c"], [("a", "b"), ("b", "c"), ("a", "c")])
    J = {(e, i): Js[3 * e + i - 1] for e in range(3) for i in range(1, N + 1)}
    p = ModelParams(triangle, N, J)
    spec = ParitySpec(A)
    assert partition_sum(p, spec, cap) == partition_sum_bruteforce(p, spec, cap)


def test_field_uses_ghosts(edge):
    p = ModelParams.homogeneous(edge, 2, Fraction(1, 3), h={("x", 1): Fraction(1, 2)})
    assert p.rpm_graph.ghost_vertices
    assert correlation(p, {"x"}, cap=3) > 0
    assert partition_sum(p, ParitySpec({"x"}), 2) == partition_sum_bruteforce(p, ParitySpec({"x"}), 2)


def test_plus_boundary(edge, edge_plus):
    p = ModelParams.homogeneous(edge_plus, 2, Fraction(3, 10), eta="plus")
    assert correlation(p, {"x"}, cap=4) > 0
    with pytest.raises(ValueError):
        ModelParams.homogeneous(edge, 2, 1, eta="plus")


def test_bad_params(edge):
    with pytest.raises(ValueError):
        ModelParams(edge, 2, {(0, 1): -1})
    with pytest.raises(ValueError):
        ModelParams(edge, 2, {(5, 1): 1})


def test_first_description_budget(triangle):
    p = ModelParams.homogeneous(triangle, 3, Fraction(1, 4))
    with pytest.raises(InstanceTooLarge):
        first_description_sum(p, ParitySpec(), 2, max_states=10)
