"""Pairings of link-ends at vertices and the paths they trace.

Links are labelled ``(edge, colour, index)`` with ``index`` running over
``1..m_e^i``.  A link is incident to each interior endpoint of its edge
exactly once (graphs are simple), so a block at vertex z is simply a tuple of
one or two links.  Ends at EXTERNAL or at ghost vertices are never paired.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Iterable, Iterator, NamedTuple

from .config import LinkConfig, ParitySpec, in_parity_class
from .graph import EXTERNAL, AnyGraph


class OverlapParity(ValueError):
    pass


class ParityMismatch(ValueError):
    pass


class Link(NamedTuple):
    edge: int
    colour: int
    index: int


class LinkEnd(NamedTuple):
    edge: int
    colour: int
    index: int
    endpoint: str


Block = tuple[Link, ...]


def block_key(block: Block) -> tuple[int, int, int]:
    """Colour first, then the lowest (label, edge) pair in the block."""
    lowest = min((l.index, l.edge) for l in block)
    return (block[0].colour, lowest[0], lowest[1])


@dataclass(frozen=True)
class Pairing:
    """Per-vertex blocks, kept sorted by :func:`block_key` so that equal
    pairings compare and hash equal."""

    blocks: tuple[tuple[str, tuple[Block, ...]], ...]

    @classmethod
    def from_dict(cls, per_vertex: dict[str, Iterable[Block]], order: Iterable[str]) -> Pairing:
        rows = []
        for z in order:
            bl = per_vertex.get(z, ())
            rows.append((z, tuple(sorted((tuple(sorted(b)) for b in bl), key=block_key))))
        return cls(tuple(rows))

    def at(self, z: str) -> tuple[Block, ...]:
        for v, bl in self.blocks:
            if v == z:
                return bl
        return ()

    def as_dict(self) -> dict[str, tuple[Block, ...]]:
        return dict(self.blocks)

    def singletons(self, z: str, colour: int) -> int:
        return sum(1 for b in self.at(z) if len(b) == 1 and b[0].colour == colour)

    def to_json(self) -> dict:
        return {
            z: [[[l.edge, l.colour, l.index] for l in b] for b in bl]
            for z, bl in self.blocks
        }


def links_of(m: LinkConfig) -> list[Link]:
    return [Link(e, i, p) for e, i, c in m.nonzero() for p in range(1, c + 1)]


def ends_by_vertex(graph: AnyGraph, links: Iterable[Link]) -> dict[str, dict[int, list[Link]]]:
    out: dict[str, dict[int, list[Link]]] = {z: {} for z in graph.vertices}
    for l in links:
        for w in graph.all_edges[l.edge]:
            if w in out:
                out[w].setdefault(l.colour, []).append(l)
    for per in out.values():
        for ls in per.values():
            ls.sort()
    return out


def double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def np_count(k: int) -> int:
    """Near-perfect matchings of k labelled items: (k-1)!! or k*(k-2)!!."""
    if k % 2 == 0:
        return double_factorial(k - 1)
    return k * double_factorial(k - 2)


def overlap_count(k: int) -> int:
    """Matchings of k items leaving exactly two singletons."""
    if k < 2 or k % 2:
        return 0
    return comb(k, 2) * double_factorial(k - 3)


def count_maximal_pairings(m: LinkConfig, overlap: Iterable[str] = ()) -> int:
    """|P_G(m)| by the per-vertex closed form.

    At overlap vertices colour 1 must leave exactly two links unpaired; an odd
    colour-1 count there admits no pairing and gives 0.
    """
    overlap = frozenset(overlap)
    total = 1
    for z, per_colour in m.vertex_counts.items():
        for i, k in enumerate(per_colour, start=1):
            if i == 1 and z in overlap:
                total *= overlap_count(k)
            else:
                total *= np_count(k)
    return total


def _matchings(items: tuple, singles: int) -> list[tuple[tuple, ...]]:
    """Partitions of ``items`` into pairs plus exactly ``singles`` singletons."""
    return list(_matchings_cached(items, singles))


@lru_cache(maxsize=None)
def _matchings_cached(items: tuple, singles: int) -> tuple[tuple[tuple, ...], ...]:
    if not items:
        return ((),) if singles == 0 else ()
    if len(items) < singles:
        return ()
    head, rest = items[0], items[1:]
    out = []
    if singles:
        for tail in _matchings_cached(rest, singles - 1):
            out.append(((head,),) + tail)
    for j, other in enumerate(rest):
        remaining = rest[:j] + rest[j + 1:]
        for tail in _matchings_cached(remaining, singles):
            out.append(((head, other),) + tail)
    return tuple(out)


def enumerate_pairings_of_links(
    graph: AnyGraph,
    links: Iterable[Link],
    overlap: Iterable[str] = (),
) -> Iterator[Pairing]:
    """Maximal pairings of an explicit link set (a labelled sub-multigraph)."""
    overlap = frozenset(overlap)
    ends = ends_by_vertex(graph, links)
    choices = []
    order = graph.vertices
    for z in order:
        for colour in sorted(ends[z]):
            items = tuple(ends[z][colour])
            if colour == 1 and z in overlap:
                if len(items) % 2:
                    raise OverlapParity(f"odd colour-1 count at overlap vertex {z}")
                singles = 2
            else:
                singles = len(items) % 2
            opts = _matchings(items, singles)
            choices.append((z, opts))
        if z in overlap and 1 not in ends[z]:
            choices.append((z, []))
    for combo in itertools.product(*(opts for _, opts in choices)):
        per_vertex: dict[str, list[Block]] = {}
        for (z, _), blocks in zip(choices, combo):
            per_vertex.setdefault(z, []).extend(blocks)
        yield Pairing.from_dict(per_vertex, order)


def enumerate_maximal_pairings(m: LinkConfig, overlap: Iterable[str] = ()) -> Iterator[Pairing]:
    return enumerate_pairings_of_links(m.graph, links_of(m), overlap)


@dataclass(frozen=True)
class Walk:
    colour: int
    links: tuple[Link, ...]
    ends: tuple[str, str]


@dataclass(frozen=True)
class Loop:
    colour: int
    links: tuple[Link, ...]


@dataclass(frozen=True)
class PathDecomposition:
    loops: tuple[Loop, ...]
    walks: tuple[Walk, ...]

    @property
    def n_links(self) -> int:
        return sum(len(p.links) for p in self.loops) + sum(len(w.links) for w in self.walks)


def _descriptor_key(graph: AnyGraph, d: str) -> tuple[int, int]:
    if d in graph.vertex_index:
        return (0, graph.vertex_index[d])
    if d == EXTERNAL:
        return (1, 0)
    return (2, graph.ghost_vertices.index(d))


def trace_paths(graph: AnyGraph, links: Iterable[Link], pairing: Pairing) -> PathDecomposition:
    links = sorted(links)
    partner: dict[tuple[Link, str], Link | None] = {}
    for z, blocks in pairing.blocks:
        for b in blocks:
            if len(b) == 2:
                partner[(b[0], z)] = b[1]
                partner[(b[1], z)] = b[0]
            else:
                partner[(b[0], z)] = None

    def step(link: Link, z: str) -> tuple[Link | None, str]:
        # cross `link` away from z, then follow the pairing at the far end
        far = graph.other_end(link.edge, z)
        if not graph.is_interior(far):
            return None, far
        return partner[(link, far)], far

    seen: set[Link] = set()
    walks = []
    for l in links:
        if l in seen:
            continue
        for z in graph.all_edges[l.edge]:
            free = not graph.is_interior(z) or partner[(l, z)] is None
            if free:
                break
        else:
            continue
        seq = [l]
        seen.add(l)
        cur, at = l, z
        start = z
        while True:
            nxt, far = step(cur, at)
            if nxt is None:
                end = far
                break
            seq.append(nxt)
            seen.add(nxt)
            cur, at = nxt, far
        ka, kb = _descriptor_key(graph, start), _descriptor_key(graph, end)
        if (kb, seq[-1]) < (ka, seq[0]):
            seq.reverse()
            start, end = end, start
        walks.append(Walk(l.colour, tuple(seq), (start, end)))
    loops = []
    for l in links:
        if l in seen:
            continue
        z = graph.all_edges[l.edge][0]
        seq = [l]
        seen.add(l)
        cur, at = l, z
        while True:
            nxt, far = step(cur, at)
            if nxt == l:
                break
            seq.append(nxt)
            seen.add(nxt)
            cur, at = nxt, far
        k = seq.index(min(seq))
        seq = seq[k:] + seq[:k]
        if len(seq) > 2 and seq[-1] < seq[1]:
            seq = [seq[0]] + seq[1:][::-1]
        loops.append(Loop(l.colour, tuple(seq)))
    walks.sort(key=lambda w: (_descriptor_key(graph, w.ends[0]), w.links))
    loops.sort(key=lambda p: p.links)
    return PathDecomposition(tuple(loops), tuple(walks))


def separates(walks: Iterable[Walk], A: Iterable[str], B: Iterable[str]) -> bool:
    """True when no walk joins an A-end to a B-end.

    At a vertex of A∩B the two walk ends there are one A-end and one B-end;
    the assignment may be chosen freely, so this is a 2-colouring problem.
    Ends outside the graph (EXTERNAL, ghosts) carry no label.
    """
    A, B = frozenset(A), frozenset(B)
    both = A & B
    walks = list(walks)
    forced: dict[int, str] = {}
    differ: dict[int, list[int]] = {k: [] for k in range(len(walks))}
    at_both: dict[str, list[int]] = {}
    for k, w in enumerate(walks):
        for d in w.ends:
            if d in both:
                at_both.setdefault(d, []).append(k)
            elif d in A or d in B:
                label = "A" if d in A else "B"
                if forced.setdefault(k, label) != label:
                    return False
    for ks in at_both.values():
        for a, b in itertools.combinations(ks, 2):
            if a == b:
                return False
            differ[a].append(b)
            differ[b].append(a)
    colour: dict[int, str] = {}
    flip = {"A": "B", "B": "A"}
    for root in range(len(walks)):
        if root in colour:
            continue
        # BFS over a path/cycle of walks joined at A∩B vertices
        comp = [root]
        colour[root] = "A"
        for k in comp:
            for j in differ[k]:
                if j not in colour:
                    colour[j] = flip[colour[k]]
                    comp.append(j)
                elif colour[j] == colour[k]:
                    return False
        fixed = {colour[k] == forced[k] for k in comp if k in forced}
        if len(fixed) > 1:
            return False
    return True


def count_pairings_AB(m: LinkConfig, A: Iterable[str], B: Iterable[str]) -> int:
    """Maximal pairings of m with no walk from A to B (filter and count)."""
    A, B = frozenset(A), frozenset(B)
    spec = ParitySpec(A, B)
    if not in_parity_class(m, spec):
        raise ParityMismatch("configuration is not in the class of A and B")
    links = links_of(m)
    n = 0
    for pi in enumerate_pairings_of_links(m.graph, links, spec.overlap):
        if separates(trace_paths(m.graph, links, pi).walks, A, B):
            n += 1
    return n


def order_pairs(pi: Pairing, z: str) -> tuple[Block, ...]:
    return tuple(sorted(pi.at(z), key=block_key))
