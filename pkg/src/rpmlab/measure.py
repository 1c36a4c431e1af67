"""Vertex weights, configuration measures and truncated partition sums.

All sums are over configurations whose every entry ``m_e^i`` is at most
``cap``.  Exact mode works in :class:`fractions.Fraction`; float mode exists
for sweeps where only a few significant digits matter.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from math import factorial, prod
from pathlib import Path
from typing import Iterable

from .config import LinkConfig, ParitySpec, colour_vectors, enumerate_configs
from .graph import BOUNDARY, GHOST, AnyGraph, Graph, attach_ghosts
from .pairing import _matchings, count_maximal_pairings, np_count, overlap_count

FREE = "free"
PLUS = "plus"

ExactRational = Fraction


class InstanceTooLarge(RuntimeError):
    pass


class CapLimitExceeded(RuntimeError):
    pass


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Couplings ``J[(edge, colour)]`` (edge ids of ``graph.all_edges``) and
    fields ``h[(vertex, colour)]``; missing entries are 0."""

    graph: Graph
    N: int
    J: dict[tuple[int, int], Fraction] = field(default_factory=dict)
    h: dict[tuple[str, int], Fraction] = field(default_factory=dict)
    eta: str = FREE

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.eta not in (FREE, PLUS):
            raise ValueError(f"unknown boundary condition {self.eta!r}")
        J = {k: as_fraction(v) for k, v in self.J.items()}
        h = {k: as_fraction(v) for k, v in self.h.items()}
        for (e, i), v in J.items():
            if v < 0:
                raise ValueError("couplings must be non-negative")
            if not (0 <= e < self.graph.n_edges and 1 <= i <= self.N):
                raise ValueError(f"coupling slot {(e, i)} out of range")
            if self.graph.kinds[e] == BOUNDARY and i != 1 and v:
                raise ValueError("boundary edges carry colour-1 couplings only")
        for (x, i), v in h.items():
            if v < 0:
                raise ValueError("fields must be non-negative")
            self.graph.check_vertex(x)
        if self.eta == PLUS and not self.graph.boundary_edges:
            raise ValueError("+ boundary condition needs boundary edges")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "h", h)

    @classmethod
    def homogeneous(cls, graph: Graph, N: int, beta, eta: str = FREE, h=None) -> ModelParams:
        beta = as_fraction(beta)
        J = {}
        for e, kind in enumerate(graph.kinds):
            for i in range(1, N + 1):
                if kind == BOUNDARY and i != 1:
                    continue
                J[(e, i)] = beta
        return cls(graph, N, J, dict(h or {}), eta)

    def replace(self, **changes) -> ModelParams:
        kw = dict(graph=self.graph, N=self.N, J=self.J, h=self.h, eta=self.eta)
        kw.update(changes)
        return ModelParams(**kw)

    @property
    def has_field(self) -> bool:
        return any(v for v in self.h.values())

    @cached_property
    def rpm_graph(self) -> AnyGraph:
        return attach_ghosts(self.graph, self.N) if self.has_field else self.graph

    def coupling(self, e: int, i: int) -> Fraction:
        g = self.rpm_graph
        kind = g.kinds[e]
        if kind == GHOST:
            if g.ghost_colour[e] != i:
                return Fraction(0)
            x = g.all_edges[e][0]
            return self.h.get((x, i), Fraction(0))
        if kind == BOUNDARY and (self.eta != PLUS or i != 1):
            return Fraction(0)
        return self.J.get((e, i), Fraction(0))

    @cached_property
    def support(self) -> frozenset[tuple[int, int]]:
        g = self.rpm_graph
        return frozenset(
            (e, i)
            for e in range(g.n_edges)
            for i in range(1, self.N + 1)
            if self.coupling(e, i)
        )

    def to_json(self) -> dict:
        J: dict[str, dict[str, str]] = {}
        for (e, i), v in sorted(self.J.items()):
            J.setdefault(str(e), {})[str(i)] = str(v)
        h: dict[str, dict[str, str]] = {}
        for (x, i), v in sorted(self.h.items()):
            h.setdefault(x, {})[str(i)] = str(v)
        return {"N": self.N, "eta": self.eta, "J": J, "h": h}


def model_from_json(graph: Graph, data: dict) -> ModelParams:
    J = {
        (int(e), int(i)): Fraction(v)
        for e, row in data.get("J", {}).items()
        for i, v in row.items()
    }
    h = {
        (x, int(i)): Fraction(v)
        for x, row in data.get("h", {}).items()
        for i, v in row.items()
    }
    return ModelParams(graph, int(data["N"]), J, h, data.get("eta", FREE))


def load_model(graph: Graph, path: str | Path) -> ModelParams:
    with open(path) as fh:
        return model_from_json(graph, json.load(fh))


@lru_cache(maxsize=None)
def vertex_weight(N: int, r: int) -> Fraction:
    """Γ(N/2) / (2^r Γ(r + N/2)), which telescopes to 1 / ∏_{j<r} (N + 2j)."""
    if N < 1 or r < 0:
        raise ValueError("need N >= 1 and r >= 0")
    return Fraction(1, prod(N + 2 * j for j in range(r)))


def config_weight(p: ModelParams, m: LinkConfig, overlap: Iterable[str] = ()) -> Fraction:
    overlap = frozenset(overlap)
    w = Fraction(1)
    for e, i, c in m.nonzero():
        J = p.coupling(e, i)
        if not J or not m.graph.slot_allowed(e, i):
            return Fraction(0)
        w *= J ** c / factorial(c)
    for z, per_colour in m.vertex_counts.items():
        n = sum((c + 1) // 2 for c in per_colour) + (z in overlap)
        w *= vertex_weight(p.N, n)
    return w * count_maximal_pairings(m, overlap)


def partition_sum_bruteforce(p: ModelParams, spec: ParitySpec, cap: int) -> Fraction:
    """Direct sum of :func:`config_weight` over the enumerated class."""
    total = Fraction(0)
    for m in enumerate_configs(p.rpm_graph, p.N, cap, spec, slots=set(p.support)):
        total += config_weight(p, m, spec.overlap)
    return total


def _colour_table(p: ModelParams, colour: int, cap: int, odd, overlap, exact: bool):
    """Single-colour contributions keyed by per-vertex local time.

    Each colour-i edge vector contributes its edge factor times the colour-i
    pairing count at every vertex; the key records ceil(m_z^i / 2) (plus one at
    overlap vertices for colour 1).
    """
    g = p.rpm_graph
    edges = sorted(e for (e, i) in p.support if i == colour)
    coup = {e: p.coupling(e, colour) for e in edges}
    if not exact:
        coup = {e: float(v) for e, v in coup.items()}
    one = Fraction(1) if exact else 1.0
    table: dict[tuple[int, ...], object] = defaultdict(lambda: 0)
    inc = [g.incident[z] for z in g.vertices]
    ov = [colour == 1 and z in overlap for z in g.vertices]
    for vec in colour_vectors(g, colour, cap, odd, edges):
        w = one
        for e in edges:
            n = vec[e]
            if n:
                w = w * coup[e] ** n / factorial(n)
        key = []
        for es, is_ov in zip(inc, ov):
            k = sum(vec[e] for e in es)
            if is_ov:
                w = w * overlap_count(k)
                key.append(k // 2 + 1)
            else:
                w = w * np_count(k)
                key.append((k + 1) // 2)
        if w:
            table[tuple(key)] += w
    return table


def _convolve(a: dict, b: dict) -> dict:
    out: dict = defaultdict(lambda: 0)
    for ka, wa in a.items():
        for kb, wb in b.items():
            out[tuple(x + y for x, y in zip(ka, kb))] += wa * wb
    return out


def partition_sum(p: ModelParams, spec: ParitySpec, cap: int, exact: bool = True):
    """Truncated partition sum of a parity class.

    The sum factorises over colours except through the vertex weight, which
    depends only on the per-vertex total local time; colours are therefore
    tabulated separately and convolved on local-time vectors.
    """
    if cap < 0:
        raise ValueError("cap must be >= 0")
    return _partition_sum(p, spec, cap, exact)


# ModelParams hashes by identity, so repeated calls during cap sweeps hit here
@lru_cache(maxsize=4096)
def _partition_sum(p: ModelParams, spec: ParitySpec, cap: int, exact: bool):
    odd = spec.odd
    overlap = spec.overlap
    acc = None
    for i in range(1, p.N + 1):
        t = _colour_table(p, i, cap, odd if i == 1 else frozenset(), overlap, exact)
        acc = t if acc is None else _convolve(acc, t)
    total = Fraction(0) if exact else 0.0
    N = p.N
    for key, w in acc.items():
        u = prod(vertex_weight(N, n) for n in key)
        total += w * (u if exact else float(u))
    return total


def correlation(
    p: ModelParams,
    A: Iterable[str],
    B: Iterable[str] | None = None,
    cap: int = 4,
    exact: bool = True,
):
    A = frozenset(A)
    B = None if B is None else frozenset(B)
    spec = ParitySpec(A, B)
    zero = Fraction(0) if exact else 0.0
    if not spec.odd and not spec.overlap:
        return Fraction(1) if exact else 1.0
    if p.eta == FREE and not p.has_field and len(spec.odd) % 2:
        return zero
    num = partition_sum(p, spec, cap, exact)
    if not num:
        return zero
    return num / partition_sum(p, ParitySpec(), cap, exact)


def converge(
    p: ModelParams,
    A: Iterable[str],
    B: Iterable[str] | None = None,
    tol=Fraction(1, 10**9),
    max_cap: int = 40,
    exact: bool = True,
):
    """Raise the cap until successive correlations differ by less than tol.

    Returns ``(value, cap)`` where cap is the smallest cap reproducing the
    returned value exactly, or the cap at which the tolerance was met.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    tol = as_fraction(tol) if exact else float(tol)
    prev = correlation(p, A, B, 0, exact)
    for cap in range(1, max_cap + 1):
        cur = correlation(p, A, B, cap, exact)
        if cur == prev:
            return cur, cap - 1
        if abs(cur - prev) < tol:
            return cur, cap
        prev = cur
    raise CapLimitExceeded(f"no convergence to {tol} within cap {max_cap}")


@lru_cache(maxsize=None)
def _colouring_classes(colours: tuple[int, ...], n: int, cap: int) -> tuple[tuple[tuple[int, ...], int], ...]:
    """Colourings of n labelled links, grouped by per-colour counts (each <= cap),
    counted by listing every colour sequence."""
    counts: Counter = Counter()
    for seq in itertools.product(colours, repeat=n):
        c = Counter(seq)
        vec = tuple(c.get(i, 0) for i in colours)
        if max(vec, default=0) <= cap:
            counts[vec] += 1
    return tuple(sorted(counts.items()))


@lru_cache(maxsize=None)
def _pairings_with_singletons(k: int, u: int) -> int:
    return len(_matchings(tuple(range(k)), u))


def first_description_sum(
    p: ModelParams,
    spec: ParitySpec,
    cap: int,
    max_states: int = 2_000_000,
) -> Fraction:
    """Sum of the coloured-link measure over triples (m, c, π).

    Uncoloured counts run to ``N * cap``; colourings are restricted to per-colour
    counts <= cap so the support matches :func:`partition_sum` at the same cap.
    Colourings are counted by listing colour sequences and pairings by listing
    partitions with the required number of unpaired colour-1 links, so no
    closed form for either enters.
    """
    g = p.rpm_graph
    N = p.N
    edges = [e for e in range(g.n_edges) if any((e, i) in p.support for i in range(1, N + 1))]
    per_edge = []
    for e in edges:
        colours = tuple(i for i in range(1, N + 1) if (e, i) in p.support)
        opts = []
        for n in range(len(colours) * cap + 1):
            if len(colours) ** n > max_states:
                raise InstanceTooLarge(f"{len(colours)}^{n} colour sequences on edge {e}")
            for vec, mult in _colouring_classes(colours, n, cap):
                full = dict(zip(colours, vec))
                opts.append((n, tuple(full.get(i, 0) for i in range(1, N + 1)), mult))
        per_edge.append(opts)
    size = prod(len(o) for o in per_edge)
    if size > max_states:
        raise InstanceTooLarge(f"{size} coloured link configurations exceed {max_states}")

    odd, overlap = spec.odd, spec.overlap
    inc = {z: [edges.index(e) for e in g.incident[z] if e in edges] for z in g.vertices}
    total = Fraction(0)
    for combo in itertools.product(*per_edge):
        w = Fraction(1)
        for e, (n, vec, mult) in zip(edges, combo):
            for i, c in enumerate(vec, start=1):
                if c:
                    w *= p.coupling(e, i) ** c
            w = w * mult / factorial(n)
        for z in g.vertices:
            n_z = 0
            for i in range(1, N + 1):
                k = sum(combo[j][1][i - 1] for j in inc[z])
                if i == 1:
                    u = 2 if z in overlap else int(z in odd)
                else:
                    u = 0
                if (k - u) % 2 or k < u:
                    w = 0
                    break
                w *= _pairings_with_singletons(k, u)
                n_z += (k - u) // 2 + u
            if not w:
                break
            w *= vertex_weight(N, n_z)
        total += w
    return total
