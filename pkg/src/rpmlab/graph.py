"""Finite simple graphs with boundary edges and ghost vertices.

Every graph exposes one flat list of edges, ``all_edges``, whose position is
the edge id used throughout the package (link labels, JSON edge ids and the
tie-break order on pairs).  Interior edges come first, then boundary edges,
then (for :class:`GhostGraph`) the ghost edges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

EXTERNAL = "EXT"

INTERIOR = "interior"
BOUNDARY = "boundary"
GHOST = "ghost"


class GraphError(ValueError):
    pass


class DuplicateEdge(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class BadBoundaryEdge(GraphError):
    pass


class UnknownVertex(GraphError):
    pass


class _EdgeLayout:
    """Derived lookups shared by :class:`Graph` and :class:`GhostGraph`."""

    vertices: tuple[str, ...]
    all_edges: tuple[tuple[str, str], ...]
    kinds: tuple[str, ...]
    ghost_colour: tuple[int, ...]

    @cached_property
    def vertex_index(self) -> dict[str, int]:
        return {v: k for k, v in enumerate(self.vertices)}

    @cached_property
    def incident(self) -> dict[str, tuple[int, ...]]:
        inc: dict[str, list[int]] = {v: [] for v in self.vertices}
        for e, (u, v) in enumerate(self.all_edges):
            for w in (u, v):
                if w in inc:
                    inc[w].append(e)
        return {v: tuple(es) for v, es in inc.items()}

    @property
    def n_edges(self) -> int:
        return len(self.all_edges)

    def is_interior(self, v: str) -> bool:
        return v in self.vertex_index

    def check_vertex(self, v: str) -> None:
        if v not in self.vertex_index:
            raise UnknownVertex(v)

    def other_end(self, e: int, z: str) -> str:
        u, v = self.all_edges[e]
        return v if u == z else u

    def slot_allowed(self, e: int, colour: int) -> bool:
        """Structural constraint on which colours an edge may carry."""
        kind = self.kinds[e]
        if kind == BOUNDARY:
            return colour == 1
        if kind == GHOST:
            return colour == self.ghost_colour[e]
        return True


def _normalise_boundary(pair: Sequence[str], vertices: set[str]) -> tuple[str, str]:
    u, v = pair
    inside = [w for w in (u, v) if w in vertices]
    if len(inside) != 1:
        raise BadBoundaryEdge(f"boundary edge {pair!r} needs exactly one interior endpoint")
    outside = v if inside[0] == u else u
    if outside != EXTERNAL:
        raise BadBoundaryEdge(f"boundary edge {pair!r} must end at {EXTERNAL!r}")
    return (inside[0], EXTERNAL)


@dataclass(frozen=True)
class Graph(_EdgeLayout):
    vertices: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    boundary_edges: tuple[tuple[str, str], ...] = ()

    @property
    def all_edges(self) -> tuple[tuple[str, str], ...]:
        return self.edges + self.boundary_edges

    @property
    def edge_order(self) -> tuple[tuple[str, str], ...]:
        return self.all_edges

    @property
    def kinds(self) -> tuple[str, ...]:
        return (INTERIOR,) * len(self.edges) + (BOUNDARY,) * len(self.boundary_edges)

    @property
    def ghost_colour(self) -> tuple[int, ...]:
        return (0,) * self.n_edges

    @property
    def ghost_vertices(self) -> tuple[str, ...]:
        return ()

    @property
    def base(self) -> Graph:
        return self

    def to_json(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [list(e) for e in self.edges],
            "boundary_edges": [list(e) for e in self.boundary_edges],
        }


def build_graph(
    vertices: Iterable[str],
    edges: Iterable[Sequence[str]],
    boundary_edges: Iterable[Sequence[str]] = (),
) -> Graph:
    """Validate and freeze a graph; input order becomes the edge order."""
    verts = tuple(str(v) for v in vertices)
    if len(set(verts)) != len(verts):
        raise GraphError("repeated vertex id")
    if EXTERNAL in verts:
        raise GraphError(f"{EXTERNAL!r} is reserved")
    vset = set(verts)
    seen: set[frozenset[str]] = set()
    out: list[tuple[str, str]] = []
    for pair in edges:
        u, v = (str(w) for w in pair)
        if u == v:
            raise SelfLoop(u)
        for w in (u, v):
            if w not in vset:
                raise UnknownVertex(w)
        key = frozenset((u, v))
        if key in seen:
            raise DuplicateEdge(f"{u}-{v}")
        seen.add(key)
        out.append((u, v))
    bnd: list[tuple[str, str]] = []
    for pair in boundary_edges:
        bnd.append(_normalise_boundary([str(w) for w in pair], vset))
    return Graph(verts, tuple(out), tuple(bnd))


@dataclass(frozen=True)
class GhostGraph(_EdgeLayout):
    """A graph plus one ghost vertex per colour joined to every vertex."""

    base: Graph
    N: int
    ghost_vertices: tuple[str, ...] = field(init=False)
    ghost_edges: tuple[tuple[str, str], ...] = field(init=False)

    def __post_init__(self) -> None:
        taken = set(self.base.vertices) | {EXTERNAL}
        prefix = "g"
        while any(f"{prefix}{i}" in taken for i in range(1, self.N + 1)):
            prefix = "_" + prefix
        ghosts = tuple(f"{prefix}{i}" for i in range(1, self.N + 1))
        object.__setattr__(self, "ghost_vertices", ghosts)
        object.__setattr__(
            self,
            "ghost_edges",
            tuple((x, g) for x in self.base.vertices for g in ghosts),
        )

    @property
    def vertices(self) -> tuple[str, ...]:
        return self.base.vertices

    @property
    def edges(self) -> tuple[tuple[str, str], ...]:
        return self.base.edges

    @property
    def boundary_edges(self) -> tuple[tuple[str, str], ...]:
        return self.base.boundary_edges

    @property
    def all_edges(self) -> tuple[tuple[str, str], ...]:
        return self.base.all_edges + self.ghost_edges

    @property
    def edge_order(self) -> tuple[tuple[str, str], ...]:
        return self.all_edges

    @property
    def kinds(self) -> tuple[str, ...]:
        return self.base.kinds + (GHOST,) * len(self.ghost_edges)

    @property
    def ghost_colour(self) -> tuple[int, ...]:
        return self.base.ghost_colour + tuple(
            i for _ in self.base.vertices for i in range(1, self.N + 1)
        )

    def ghost_edge(self, x: str, colour: int) -> int:
        """Edge id of ``{x, g_colour}``."""
        return (
            self.base.n_edges
            + self.base.vertex_index[x] * self.N
            + (colour - 1)
        )


def attach_ghosts(g: Graph, N: int) -> GhostGraph:
    if N < 1:
        raise ValueError("N must be >= 1")
    return GhostGraph(g, N)


AnyGraph = Graph | GhostGraph


def graph_from_json(data: dict) -> Graph:
    return build_graph(
        data["vertices"], data.get("edges", []), data.get("boundary_edges", [])
    )


def load_graph(path: str | Path) -> Graph:
    with open(path) as fh:
        return graph_from_json(json.load(fh))
