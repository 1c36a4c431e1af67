"""Pre-coloured link configurations and their parity classes."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator

from .graph import BOUNDARY, GHOST, AnyGraph, UnknownVertex


class GraphMismatch(ValueError):
    pass


class NotDominated(ValueError):
    pass


@dataclass(frozen=True)
class LinkConfig:
    """Link counts ``m_e^i`` stored flat at index ``e * N + (i - 1)``."""

    graph: AnyGraph
    N: int
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.counts) != self.graph.n_edges * self.N:
            raise ValueError("counts length does not match graph and N")
        if any(c < 0 for c in self.counts):
            raise ValueError("negative link count")

    @classmethod
    def zeros(cls, graph: AnyGraph, N: int) -> LinkConfig:
        return cls(graph, N, (0,) * (graph.n_edges * N))

    @classmethod
    def from_dict(cls, graph: AnyGraph, N: int, entries: dict[tuple[int, int], int]) -> LinkConfig:
        counts = [0] * (graph.n_edges * N)
        for (e, i), n in entries.items():
            counts[e * N + i - 1] = n
        return cls(graph, N, tuple(counts))

    def get(self, e: int, i: int) -> int:
        return self.counts[e * self.N + i - 1]

    def edge_total(self, e: int) -> int:
        return sum(self.counts[e * self.N:(e + 1) * self.N])

    @property
    def total_links(self) -> int:
        return sum(self.counts)

    @cached_property
    def vertex_counts(self) -> dict[str, tuple[int, ...]]:
        """``m_z^i`` for every interior z, as a per-colour tuple."""
        out = {}
        N = self.N
        for z, es in self.graph.incident.items():
            out[z] = tuple(sum(self.counts[e * N + i] for e in es) for i in range(N))
        return out

    def at(self, z: str, i: int) -> int:
        try:
            return self.vertex_counts[z][i - 1]
        except KeyError:
            raise UnknownVertex(z) from None

    def nonzero(self) -> Iterator[tuple[int, int, int]]:
        """Yield ``(edge, colour, count)`` for every occupied slot."""
        for k, c in enumerate(self.counts):
            if c:
                yield k // self.N, k % self.N + 1, c

    def _check(self, other: LinkConfig) -> None:
        if self.graph != other.graph or self.N != other.N:
            raise GraphMismatch("configurations live on different graphs")

    def __add__(self, other: LinkConfig) -> LinkConfig:
        return add(self, other)

    def __sub__(self, other: LinkConfig) -> LinkConfig:
        return sub(self, other)

    def __le__(self, other: LinkConfig) -> bool:
        return leq(self, other)

    def to_json(self) -> dict:
        out: dict[str, dict[str, int]] = {}
        for e, i, c in self.nonzero():
            out.setdefault(str(e), {})[str(i)] = c
        return {"counts": out}

    @classmethod
    def from_json(cls, graph: AnyGraph, N: int, data: dict) -> LinkConfig:
        entries = {
            (int(e), int(i)): int(n)
            for e, row in data["counts"].items()
            for i, n in row.items()
        }
        return cls.from_dict(graph, N, entries)


def add(m: LinkConfig, mbar: LinkConfig) -> LinkConfig:
    m._check(mbar)
    return LinkConfig(m.graph, m.N, tuple(a + b for a, b in zip(m.counts, mbar.counts)))


def leq(mbar: LinkConfig, m: LinkConfig) -> bool:
    m._check(mbar)
    return all(a <= b for a, b in zip(mbar.counts, m.counts))


def sub(m: LinkConfig, mbar: LinkConfig) -> LinkConfig:
    if not leq(mbar, m):
        raise NotDominated("subtrahend is not dominated by the configuration")
    return LinkConfig(m.graph, m.N, tuple(a - b for a, b in zip(m.counts, mbar.counts)))


def local_time(m: LinkConfig, z: str, i: int) -> int:
    return (m.at(z, i) + 1) // 2


def local_time_total(m: LinkConfig, z: str, overlap: bool = False) -> int:
    """Total local time at z; ``overlap`` adds the extra visit at a vertex of A∩B."""
    if z not in m.vertex_counts:
        raise UnknownVertex(z)
    return sum((c + 1) // 2 for c in m.vertex_counts[z]) + int(overlap)


@dataclass(frozen=True)
class ParitySpec:
    A: frozenset[str] = frozenset()
    B: frozenset[str] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "A", frozenset(self.A))
        if self.B is not None:
            object.__setattr__(self, "B", frozenset(self.B))

    @property
    def odd(self) -> frozenset[str]:
        """Vertices where the number of colour-1 links must be odd."""
        return self.A if self.B is None else self.A ^ self.B

    @property
    def overlap(self) -> frozenset[str]:
        return frozenset() if self.B is None else self.A & self.B


def in_parity_class(m: LinkConfig, spec: ParitySpec) -> bool:
    g = m.graph
    for e, i, _ in m.nonzero():
        if not g.slot_allowed(e, i):
            return False
    odd = spec.odd
    for z, per_colour in m.vertex_counts.items():
        if (per_colour[0] % 2 == 1) != (z in odd):
            return False
        if any(c % 2 for c in per_colour[1:]):
            return False
    return True


def colour_vectors(
    graph: AnyGraph,
    colour: int,
    cap: int,
    odd: frozenset[str],
    edges: Iterable[int] | None = None,
) -> list[tuple[int, ...]]:
    """All single-colour edge vectors (length ``n_edges``) with entries <= cap
    whose vertex degrees are odd exactly on ``odd``.

    ``edges`` restricts which edges may be occupied; others stay at 0.
    """
    if edges is None:
        edges = [e for e in range(graph.n_edges) if graph.slot_allowed(e, colour)]
    edges = [e for e in edges if graph.slot_allowed(e, colour)]
    verts = graph.vertices
    out = []
    for values in itertools.product(range(cap + 1), repeat=len(edges)):
        deg = dict.fromkeys(verts, 0)
        for e, n in zip(edges, values):
            if n & 1:
                u, v = graph.all_edges[e]
                if u in deg:
                    deg[u] += 1
                if v in deg:
                    deg[v] += 1
        if all((deg[z] & 1) == (z in odd) for z in verts):
            vec = [0] * graph.n_edges
            for e, n in zip(edges, values):
                vec[e] = n
            out.append(tuple(vec))
    return out


def enumerate_configs(
    graph: AnyGraph,
    N: int,
    cap: int,
    spec: ParitySpec,
    slots: set[tuple[int, int]] | None = None,
) -> Iterator[LinkConfig]:
    """Every configuration of the parity class with all counts <= cap.

    Order is lexicographic in the colour-major vector (colour 1 edges first).
    ``slots`` optionally restricts the occupied (edge, colour) pairs.
    """
    if cap < 0:
        raise ValueError("cap must be >= 0")
    per_colour = []
    for i in range(1, N + 1):
        edges = None if slots is None else [e for (e, c) in sorted(slots) if c == i]
        odd = spec.odd if i == 1 else frozenset()
        per_colour.append(colour_vectors(graph, i, cap, odd, edges))
    n_edges = graph.n_edges
    for combo in itertools.product(*per_colour):
        counts = [0] * (n_edges * N)
        for i, vec in enumerate(combo):
            counts[i::N] = vec
        yield LinkConfig(graph, N, tuple(counts))


@dataclass(frozen=True)
class Component:
    vertices: frozenset[str]
    touches_boundary: bool
    touches_ghost_1: bool


def components(m: LinkConfig) -> list[Component]:
    """Connected components of the union multigraph of all colours.

    Boundary and ghost endpoints are not nodes; they only flag the component.
    Components are listed in order of their first vertex.
    """
    g = m.graph
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    flags_b: set[str] = set()
    flags_g: set[str] = set()
    for e in range(g.n_edges):
        if not m.edge_total(e):
            continue
        u, v = g.all_edges[e]
        inside = [w for w in (u, v) if g.is_interior(w)]
        for w in inside:
            parent.setdefault(w, w)
        if len(inside) == 2:
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[ru] = rv
        elif g.kinds[e] == BOUNDARY:
            flags_b.add(inside[0])
        elif g.kinds[e] == GHOST and g.ghost_colour[e] == 1:
            flags_g.add(inside[0])
    groups: dict[str, set[str]] = {}
    for w in parent:
        groups.setdefault(find(w), set()).add(w)
    order = g.vertex_index
    out = []
    for members in sorted(groups.values(), key=lambda s: min(order[w] for w in s)):
        out.append(
            Component(
                frozenset(members),
                bool(members & flags_b),
                bool(members & flags_g),
            )
        )
    return out


def in_F(
    m: LinkConfig,
    B: Iterable[str],
    plus: bool = False,
    twice: Iterable[str] = (),
) -> bool:
    """Every component holds an even number of B-vertices, unless it reaches
    the boundary (plus mode) or the colour-1 ghost.

    Vertices in ``twice`` count double; B-vertices without links are odd
    singleton components.
    """
    B = frozenset(B)
    twice = frozenset(twice)
    touched: set[str] = set()
    for comp in components(m):
        touched |= comp.vertices
        if (plus and comp.touches_boundary) or comp.touches_ghost_1:
            continue
        weight = sum(2 if v in twice else 1 for v in comp.vertices if v in B or v in twice)
        if weight % 2:
            return False
    return all(v in twice for v in B - touched)
