"""Switching-lemma machinery: weight identities, both sides of the capped
inequality, the explicit tuple injection and the Griffiths checks built on it.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial, prod
from typing import Callable, Iterable, Iterator

from .config import LinkConfig, ParitySpec, colour_vectors, enumerate_configs, in_F, in_parity_class
from .graph import AnyGraph
from .measure import (
    PLUS,
    InstanceTooLarge,
    ModelParams,
    as_fraction,
    converge,
    vertex_weight,
)
from .pairing import (
    Block,
    Link,
    Pairing,
    block_key,
    count_maximal_pairings,
    double_factorial,
    enumerate_pairings_of_links,
    links_of,
    np_count,
    overlap_count,
    separates,
    trace_paths,
)

Functional = Callable[[LinkConfig], object]


def F_one(m: LinkConfig) -> int:
    return 1


def F_links(m: LinkConfig) -> int:
    return m.total_links


# ---------------------------------------------------------------- identities


def weight_identity_even(N: int, k: int, r: int) -> tuple[Fraction, Fraction]:
    if N < 2 or N % 2:
        raise ValueError("N must be even and >= 2")
    if not 0 <= r <= k:
        raise ValueError("need 0 <= r <= k")
    lhs = vertex_weight(N, k - r) * vertex_weight(N, r)
    gamma_sq = factorial(N // 2 - 1) ** 2
    rhs = Fraction(gamma_sq, 2**k * factorial(k + N - 2)) * comb(k + N - 2, r + (N - 2) // 2)
    return lhs, rhs


def weight_identity_odd(N: int, k: int, r: int) -> tuple[Fraction, Fraction]:
    """Both sides of the odd-N product identity.

    The prefactor 2^(N-1) Γ(N/2)^2 carries a factor π that cancels against the
    half-integer Γ in the vertex weight; with it removed it is ((N-2)!!)^2.
    """
    if N < 3 or N % 2 == 0:
        raise ValueError("N must be odd and >= 3")
    if not 0 <= r <= k:
        raise ValueError("need 0 <= r <= k")
    lhs = vertex_weight(N, k - r) * vertex_weight(N, r)
    h = (N - 1) // 2
    pref = Fraction(
        double_factorial(N - 2) ** 2,
        double_factorial(2 * k + 2 * N - 3) * factorial(k + N - 1),
    )
    rhs = pref * comb(2 * k + 2 * N - 2, 2 * r + N - 1) * factorial(r + h) * factorial(k - r + h)
    return lhs, rhs


# ----------------------------------------------------------- capped sides


def _colour1_separating(graph: AnyGraph, vec: tuple[int, ...], A, B, overlap) -> int:
    links = [Link(e, 1, p) for e, c in enumerate(vec) for p in range(1, c + 1)]
    n = 0
    for pi in enumerate_pairings_of_links(graph, links, overlap):
        if separates(trace_paths(graph, links, pi).walks, A, B):
            n += 1
    return n


class _SplitSum:
    """Σ over splits M = s + t of μ_X(s) μ_Y(t), factorised over colours."""

    def __init__(self, p: ModelParams, A, B):
        self.p = p
        self.g = p.rpm_graph
        self.A, self.B = frozenset(A), frozenset(B)
        self._sep_cache: dict = {}
        self.coup = {(e, i): p.coupling(e, i) for (e, i) in p.support}

    def separating(self, vec):
        if vec not in self._sep_cache:
            self._sep_cache[vec] = _colour1_separating(
                self.g, vec, self.A, self.B, self.A & self.B
            )
        return self._sep_cache[vec]

    def __call__(self, M: LinkConfig, X: ParitySpec, Y: ParitySpec, restrict_ab: bool) -> Fraction:
        g, N = self.g, self.p.N
        verts = g.vertices
        inc = [g.incident[z] for z in verts]
        acc = None
        for i in range(1, N + 1):
            edges = [e for (e, c) in self.p.support if c == i]
            Mi = tuple(M.get(e, i) for e in range(g.n_edges))
            odd_x = X.odd if i == 1 else frozenset()
            ov_x = X.overlap if i == 1 else frozenset()
            ov_y = Y.overlap if i == 1 else frozenset()
            table: dict = defaultdict(lambda: Fraction(0))
            for s in colour_vectors(g, i, max(Mi, default=0), odd_x, edges):
                if any(a > b for a, b in zip(s, Mi)):
                    continue
                t = tuple(b - a for a, b in zip(s, Mi))
                w = Fraction(1)
                for e in edges:
                    c = self.coup[(e, i)]
                    w *= c ** (s[e] + t[e]) / (factorial(s[e]) * factorial(t[e]))
                kx, ky = [], []
                ok = True
                for z, es in zip(verts, inc):
                    a = sum(s[e] for e in es)
                    b = sum(t[e] for e in es)
                    if z in ov_x:
                        kx.append(a // 2 + 1)
                        if not restrict_ab:
                            w *= overlap_count(a)
                    else:
                        kx.append((a + 1) // 2)
                        if not (restrict_ab and i == 1):
                            w *= np_count(a)
                    if z in ov_y:
                        ky.append(b // 2 + 1)
                        w *= overlap_count(b)
                    else:
                        ky.append((b + 1) // 2)
                        w *= np_count(b)
                    if (b % 2 == 1) != (i == 1 and z in Y.odd):
                        ok = False
                if not ok or not w:
                    continue
                if restrict_ab and i == 1:
                    w *= self.separating(s)
                    if not w:
                        continue
                table[tuple(kx) + tuple(ky)] += w
            if acc is None:
                acc = table
            else:
                merged: dict = defaultdict(lambda: Fraction(0))
                for ka, wa in acc.items():
                    for kb, wb in table.items():
                        merged[tuple(x + y for x, y in zip(ka, kb))] += wa * wb
                acc = merged
        n = len(verts)
        total = Fraction(0)
        for key, w in acc.items():
            total += w * prod(vertex_weight(N, r) for r in key[:n]) * prod(
                vertex_weight(N, r) for r in key[n:]
            )
        return total


@dataclass
class SwitchingReport:
    cap: int
    lhs: Fraction
    rhs: Fraction
    totals: int
    violating_totals: int
    witness: dict | None = None

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs

    @property
    def slack(self) -> Fraction:
        return self.rhs - self.lhs

    def to_json(self) -> dict:
        return {
            "lemma": "switching",
            "cap": self.cap,
            "lhs": str(self.lhs),
            "rhs": str(self.rhs),
            "holds": self.holds,
            "slack": str(self.slack),
            "totals": self.totals,
            "violating_totals": self.violating_totals,
            "witness": self.witness,
        }


def switching_sides(
    p: ModelParams,
    A: Iterable[str],
    B: Iterable[str],
    F: Functional = F_one,
    cap: int = 2,
) -> SwitchingReport:
    """Both sides of the switching inequality restricted to totals ``m + m̄``
    with every entry <= cap.

    The comparison is made total by total, so ``violating_totals`` counts the
    totals at which the inner inequality fails (it should stay 0).
    """
    A, B = frozenset(A), frozenset(B)
    plus = p.eta == PLUS
    split = _SplitSum(p, A, B)
    lhs = rhs = Fraction(0)
    totals = bad = 0
    witness = None
    for M in enumerate_configs(p.rpm_graph, p.N, cap, ParitySpec(A, B), slots=set(p.support)):
        f = as_fraction(F(M))
        if not f:
            continue
        totals += 1
        left = split(M, ParitySpec(A), ParitySpec(B), False)
        right = Fraction(0)
        if in_F(M, B, plus):
            right = split(M, ParitySpec(A, B), ParitySpec(), True)
        if left > right:
            bad += 1
            if witness is None:
                witness = {"total": M.to_json(), "lhs": str(f * left), "rhs": str(f * right)}
        lhs += f * left
        rhs += f * right
    return SwitchingReport(cap, lhs, rhs, totals, bad, witness)


# -------------------------------------------------------------- tuples


def _local_times(graph: AnyGraph, links: Iterable[Link], N: int) -> dict[str, int]:
    per = {z: [0] * N for z in graph.vertices}
    for l in links:
        for w in graph.all_edges[l.edge]:
            if w in per:
                per[w][l.colour - 1] += 1
    return {z: sum((c + 1) // 2 for c in cs) for z, cs in per.items()}


def _link_parity_ok(graph: AnyGraph, links: Iterable[Link], N: int, odd: frozenset[str]) -> bool:
    per = {z: [0] * N for z in graph.vertices}
    for l in links:
        for w in graph.all_edges[l.edge]:
            if w in per:
                per[w][l.colour - 1] += 1
    for z, cs in per.items():
        if (cs[0] % 2 == 1) != (z in odd):
            return False
        if any(c % 2 for c in cs[1:]):
            return False
    return True


@dataclass(frozen=True)
class SwitchingTuple:
    """One choice counted by the inner sum at a fixed total.

    ``chosen[z]`` is the selected subset of ``1..ground[z]`` (sorted).  For odd
    N, ``first_order[z]`` orders the first half of ``chosen[z]`` and
    ``second_order[z]`` the first half of its complement; for even N both are
    empty.
    """

    first: frozenset[Link]
    first_pairing: Pairing
    second_pairing: Pairing
    chosen: tuple[tuple[str, tuple[int, ...]], ...]
    first_order: tuple[tuple[str, tuple[int, ...]], ...] = ()
    second_order: tuple[tuple[str, tuple[int, ...]], ...] = ()


@dataclass(frozen=True)
class ImageTuple:
    """Image of a tuple under the map.

    The first six fields are the image in the format of the target tuple set
    (what the right side counts).  For odd N ``first_order[z]`` is the induced
    ordering of the surviving first half and ``second_order[z]`` is the old
    complement ordering followed by the moved vertices.  ``attachment[z]``
    lists each moved block with the vertex (and, odd N, the partner vertex) it
    carried along; it is not part of the target format.
    """

    first: frozenset[Link]
    first_pairing: Pairing
    second_pairing: Pairing
    chosen: tuple[tuple[str, tuple[int, ...]], ...]
    first_order: tuple[tuple[str, tuple[int, ...]], ...]
    second_order: tuple[tuple[str, tuple[int, ...]], ...]
    attachment: tuple[tuple[str, tuple[tuple[Block, tuple[int, ...]], ...]], ...]

    def target(self) -> tuple:
        return (
            self.first,
            self.first_pairing,
            self.second_pairing,
            self.chosen,
            self.first_order,
            self.second_order,
        )


class NotPreImage(ValueError):
    pass


@dataclass(frozen=True)
class _Skeleton:
    first: frozenset[Link]
    first_pairing: Pairing
    second_pairing: Pairing
    ranks: tuple[tuple[str, tuple[int, ...]], ...]
    moved_blocks: tuple[tuple[str, tuple[Block, ...]], ...]


class SwitchingContext:
    """Fixed data for one total configuration M and sets A, B."""

    def __init__(self, M: LinkConfig, A: Iterable[str], B: Iterable[str]):
        self.M = M
        self.g = M.graph
        self.N = M.N
        self.A, self.B = frozenset(A), frozenset(B)
        self.overlap = self.A & self.B
        self.links = frozenset(links_of(M))
        self.odd = self.N % 2 == 1
        lt = _local_times(self.g, self.links, self.N)
        self.n_total = {z: lt[z] + (z in self.overlap) for z in self.g.vertices}
        if self.odd:
            self.ground = {z: 2 * n + 2 * self.N - 2 for z, n in self.n_total.items()}
        else:
            self.ground = {z: n + self.N - 2 for z, n in self.n_total.items()}

    def chosen_size(self, n_first: int) -> int:
        return 2 * n_first + self.N - 1 if self.odd else n_first + (self.N - 2) // 2

    def local_count(self, ground: int, size: int) -> int:
        n = comb(ground, size)
        if self.odd:
            n *= factorial(size // 2) * factorial((ground - size) // 2)
        return n

    # -- counting

    def inner_count(self, target_empty: bool = False) -> int:
        """Direct evaluation of the inner sum: preimage side (first part in
        S(B)) or, with ``target_empty``, the image side (first part in S(∅),
        second pairings restricted to P_{A,B})."""
        g, N, M = self.g, self.N, self.M
        first_odd = frozenset() if target_empty else self.B
        total = 0
        slots = [(e, i, c) for e, i, c in M.nonzero()]
        for sub in itertools.product(*(range(c + 1) for _, _, c in slots)):
            entries = {(e, i): k for (e, i, _), k in zip(slots, sub)}
            mbar = LinkConfig.from_dict(g, N, entries)
            if not in_parity_class(mbar, ParitySpec(first_odd)):
                continue
            rest = M - mbar
            mult = prod(comb(c, k) for (_, _, c), k in zip(slots, sub))
            for z in g.vertices:
                size = self.chosen_size(sum((c + 1) // 2 for c in mbar.vertex_counts[z]))
                if size > self.ground[z]:
                    mult = 0
                    break
                mult *= self.local_count(self.ground[z], size)
            if not mult:
                continue
            if target_empty:
                rl = links_of(rest)
                sep = sum(
                    1
                    for pi in enumerate_pairings_of_links(g, rl, self.overlap)
                    if separates(trace_paths(g, rl, pi).walks, self.A, self.B)
                )
                mult *= sep * count_maximal_pairings(mbar)
            else:
                if not in_parity_class(rest, ParitySpec(self.A)):
                    continue
                mult *= count_maximal_pairings(rest) * count_maximal_pairings(mbar)
            total += mult
        return total

    # -- enumeration

    def _subsets(self, odd_set: frozenset[str]) -> Iterator[frozenset[Link]]:
        by_slot: dict[tuple[int, int], list[Link]] = defaultdict(list)
        for l in sorted(self.links):
            by_slot[(l.edge, l.colour)].append(l)
        per_slot = [
            [c for k in range(len(ls) + 1) for c in itertools.combinations(ls, k)]
            for ls in by_slot.values()
        ]
        for combo in itertools.product(*per_slot):
            chosen = frozenset(l for part in combo for l in part)
            if _link_parity_ok(self.g, chosen, self.N, odd_set):
                yield chosen

    def skeletons(self) -> Iterator[tuple[frozenset[Link], Pairing, Pairing]]:
        """(first part, its pairing, pairing of the rest) for every admissible split."""
        g, N = self.g, self.N
        for first in self._subsets(self.B):
            rest = self.links - first
            if not _link_parity_ok(g, rest, N, self.A):
                continue
            nbar = _local_times(g, first, N)
            if any(self.chosen_size(nbar[z]) > self.ground[z] for z in g.vertices):
                continue
            seconds = list(enumerate_pairings_of_links(g, rest))
            for pb in enumerate_pairings_of_links(g, first):
                for pi in seconds:
                    yield first, pb, pi

    def local_choices(self, ground: int, size: int) -> Iterator[tuple[tuple[int, ...], tuple, tuple]]:
        for V in itertools.combinations(range(1, ground + 1), size):
            if not self.odd:
                yield V, (), ()
                continue
            comp = [k for k in range(1, ground + 1) if k not in V]
            for a in itertools.permutations(V[: size // 2]):
                for b in itertools.permutations(comp[: len(comp) // 2]):
                    yield V, a, b

    def build_tuples(self) -> Iterator[SwitchingTuple]:
        verts = self.g.vertices
        for first, pb, pi in self.skeletons():
            nbar = _local_times(self.g, first, self.N)
            per_z = [
                list(self.local_choices(self.ground[z], self.chosen_size(nbar[z])))
                for z in verts
            ]
            for combo in itertools.product(*per_z):
                yield SwitchingTuple(
                    first,
                    pb,
                    pi,
                    tuple((z, c[0]) for z, c in zip(verts, combo)),
                    tuple((z, c[1]) for z, c in zip(verts, combo)) if self.odd else (),
                    tuple((z, c[2]) for z, c in zip(verts, combo)) if self.odd else (),
                )

    # -- the map

    def _extended(self, subset: Iterable[int], order: Iterable[int]) -> list[int]:
        """Order a vertex subset: by subscript (even N) or by repeating the
        ordering of its first half (odd N)."""
        s = sorted(subset)
        if not self.odd:
            return s
        h = len(s) // 2
        pos = {v: k for k, v in enumerate(s)}
        head = list(order)
        return head + [s[pos[v] + h] for v in head]

    def skeleton_image(self, first, pb: Pairing, pi: Pairing) -> _Skeleton:
        g, B = self.g, self.B
        if not _link_parity_ok(g, first, self.N, B):
            raise NotPreImage("first part is not in the class of B")
        walks = trace_paths(g, first, pb).walks
        moved = frozenset(
            l for w in walks if w.ends[0] in B or w.ends[1] in B for l in w.links
        )
        fp: dict[str, list[Block]] = {}
        sp: dict[str, list[Block]] = {}
        ranks, mblocks = [], []
        for z in g.vertices:
            blocks = sorted(pb.at(z), key=block_key)
            R = tuple(j for j, b in enumerate(blocks) if b[0] in moved)
            fp[z] = [b for j, b in enumerate(blocks) if j not in R]
            sp[z] = list(pi.at(z)) + [blocks[j] for j in R]
            ranks.append((z, R))
            mblocks.append((z, tuple(blocks[j] for j in R)))
        order = g.vertices
        return _Skeleton(
            first - moved,
            Pairing.from_dict(fp, order),
            Pairing.from_dict(sp, order),
            tuple(ranks),
            tuple(mblocks),
        )

    def local_image(self, V, fo, so, ranks: tuple[int, ...]):
        """(chosen, first order, second order, attached, partners) at one vertex."""
        seq = self._extended(V, fo)
        h = len(seq) // 2
        att = tuple(seq[j] for j in ranks)
        par = tuple(seq[j + h] for j in ranks) if self.odd else ()
        gone = set(att) | set(par)
        chosen = tuple(v for v in sorted(V) if v not in gone)
        if not self.odd:
            return chosen, (), (), att, par
        return chosen, tuple(v for v in seq[:h] if v not in gone), tuple(so) + att, att, par

    def inject(self, t: SwitchingTuple) -> ImageTuple:
        sk = self.skeleton_image(t.first, t.first_pairing, t.second_pairing)
        chosen, fo, so = dict(t.chosen), dict(t.first_order), dict(t.second_order)
        ranks, mblocks = dict(sk.ranks), dict(sk.moved_blocks)
        rows = []
        for z in self.g.vertices:
            c, a, b, att, par = self.local_image(chosen[z], fo.get(z, ()), so.get(z, ()), ranks[z])
            links = tuple(
                (blk, (v,) + ((p,) if self.odd else ()))
                for blk, v, p in itertools.zip_longest(mblocks[z], att, par)
            )
            rows.append((z, c, a, b, links))
        odd = self.odd
        return ImageTuple(
            sk.first,
            sk.first_pairing,
            sk.second_pairing,
            tuple((r[0], r[1]) for r in rows),
            tuple((r[0], r[2]) for r in rows) if odd else (),
            tuple((r[0], r[3]) for r in rows) if odd else (),
            tuple((r[0], r[4]) for r in rows),
        )

    def reverse(self, img: ImageTuple) -> SwitchingTuple:
        """Move the attached blocks (and their vertices) back to the first triple."""
        g = self.g
        attach = dict(img.attachment)
        moved_blocks = {z: [blk for blk, _ in rows] for z, rows in attach.items()}
        moved_links = frozenset(l for bl in moved_blocks.values() for b in bl for l in b)
        fp: dict[str, list[Block]] = {}
        sp: dict[str, list[Block]] = {}
        chosen, fo, so = [], [], []
        first_order, second_order = dict(img.first_order), dict(img.second_order)
        for z, Vp in img.chosen:
            back = moved_blocks.get(z, [])
            fp[z] = list(img.first_pairing.at(z)) + back
            sp[z] = [b for b in img.second_pairing.at(z) if b not in back]
            verts = [v for _, vs in attach.get(z, ()) for v in vs]
            V = tuple(sorted(set(Vp) | set(verts)))
            chosen.append((z, V))
            if self.odd:
                blocks = sorted(fp[z], key=block_key)
                h = len(V) // 2
                head: list[int | None] = [None] * h
                for blk, (v, _) in attach.get(z, ()):
                    head[blocks.index(blk)] = v
                rest = iter(first_order[z])
                fo.append((z, tuple(v if v is not None else next(rest) for v in head)))
                so.append((z, second_order[z][: len(second_order[z]) - len(back)]))
        order = g.vertices
        return SwitchingTuple(
            img.first | moved_links,
            Pairing.from_dict(fp, order),
            Pairing.from_dict(sp, order),
            tuple(chosen),
            tuple(fo),
            tuple(so),
        )

    # -- side conditions

    def skeleton_violations(self, sk: _Skeleton, plus: bool) -> list[str]:
        g, N = self.g, self.N
        bad = []
        if not _link_parity_ok(g, sk.first, N, frozenset()):
            bad.append("first part not in S(empty)")
        if not in_F(self.M, self.B, plus):
            bad.append("total not in F_B")
        for z, blocks in sk.first_pairing.blocks:
            if any(len(b) == 1 for b in blocks):
                bad.append(f"unpaired link in first pairing at {z}")
        for z, blocks in sk.second_pairing.blocks:
            singles: dict[int, int] = defaultdict(int)
            for b in blocks:
                if len(b) == 1:
                    singles[b[0].colour] += 1
            for c, k in singles.items():
                if k > (2 if c == 1 and z in self.overlap else 1):
                    bad.append(f"second pairing not maximal at {z}")
        rest = self.links - sk.first
        if not separates(trace_paths(g, rest, sk.second_pairing).walks, self.A, self.B):
            bad.append("second pairing joins A to B")
        return bad

    def local_format_ok(self, ground: int, local) -> bool:
        """For odd N the second ordering must cover the first half (by
        subscript) of the complement, as in the target tuple set."""
        if not self.odd:
            return True
        chosen, _, second, _, _ = local
        comp = [k for k in range(1, ground + 1) if k not in chosen]
        return sorted(second) == comp[: len(comp) // 2]


def build_tuples(M: LinkConfig, A: Iterable[str], B: Iterable[str]) -> Iterator[SwitchingTuple]:
    return SwitchingContext(M, A, B).build_tuples()


def inject(t: SwitchingTuple, M: LinkConfig, A: Iterable[str], B: Iterable[str]) -> ImageTuple:
    return SwitchingContext(M, A, B).inject(t)


def _union_size(members: list[list[frozenset]], limit: int) -> int:
    """|∪_s ∏_z members[s][z]| for product sets sharing one index set."""
    k = len(members)
    if k == 1:
        return prod(len(s) for s in members[0])
    if k <= 12:
        total = 0
        for r in range(1, k + 1):
            for T in itertools.combinations(range(k), r):
                inter = 1
                for z in range(len(members[0])):
                    common = frozenset.intersection(*(members[s][z] for s in T))
                    inter *= len(common)
                    if not inter:
                        break
                total += inter if r % 2 else -inter
        return total
    seen: set = set()
    for m in members:
        if prod(len(s) for s in m) + len(seen) > limit:
            raise InstanceTooLarge("union of images too large to enumerate")
        seen.update(itertools.product(*m))
    return len(seen)


@dataclass
class InjectivityReport:
    """Counts from an exhaustive run.

    ``collisions`` counts preimages lost when the image is read in the target
    format; ``extended_collisions`` does the same with the attachment kept.
    """

    totals: int = 0
    skeletons: int = 0
    total_preimages: int = 0
    distinct_images: int = 0
    collisions: int = 0
    extended_images: int = 0
    extended_collisions: int = 0
    side_condition_failures: int = 0
    format_failures: int = 0
    count_mismatches: int = 0
    reverse_failures: int = 0
    image_side_count: int = 0
    witnesses: list = field(default_factory=list)

    @property
    def injective(self) -> bool:
        return self.collisions == 0

    def to_json(self) -> dict:
        d = {k: v for k, v in self.__dict__.items()}
        d["injective"] = self.injective
        return d


def verify_injectivity(
    p: ModelParams,
    A: Iterable[str],
    B: Iterable[str],
    cap: int,
    max_states: int = 2_000_000,
    explicit_limit: int = 0,
) -> InjectivityReport:
    """Apply the map to every tuple at every total with entries <= cap.

    The map acts on the vertex choices one vertex at a time once the links and
    pairings are fixed, so images are counted per vertex and combined; totals
    whose tuple count is at most ``explicit_limit`` are additionally pushed
    through :meth:`SwitchingContext.inject` and :meth:`~SwitchingContext.reverse`
    one tuple at a time.
    """
    A, B = frozenset(A), frozenset(B)
    plus = p.eta == PLUS
    rep = InjectivityReport()
    budget = 0
    local_cache: dict = {}
    for M in enumerate_configs(p.rpm_graph, p.N, cap, ParitySpec(A, B), slots=set(p.support)):
        ctx = SwitchingContext(M, A, B)
        expected = ctx.inner_count()
        if not expected:
            continue
        rep.totals += 1
        verts = ctx.g.vertices
        groups: dict = defaultdict(list)
        ext_groups: dict = defaultdict(list)
        n = 0
        for first, pb, pi in ctx.skeletons():
            rep.skeletons += 1
            sk = ctx.skeleton_image(first, pb, pi)
            why = ctx.skeleton_violations(sk, plus)
            if why:
                rep.side_condition_failures += 1
                if len(rep.witnesses) < 5:
                    rep.witnesses.append({"total": M.to_json(), "kind": "side", "why": why})
            nbar = _local_times(ctx.g, first, ctx.N)
            ranks = dict(sk.ranks)
            tsets, esets, count = [], [], 1
            for z in verts:
                key = (ctx.ground[z], ctx.chosen_size(nbar[z]), ranks[z], ctx.odd)
                if key not in local_cache:
                    ground, size = key[0], key[1]
                    if ctx.local_count(ground, size) > max_states:
                        raise InstanceTooLarge(f"vertex {z} has too many local choices")
                    imgs = [ctx.local_image(*c, key[2]) for c in ctx.local_choices(ground, size)]
                    bad = sum(1 for im in imgs if not ctx.local_format_ok(ground, im))
                    local_cache[key] = (
                        len(imgs),
                        frozenset(im[:3] for im in imgs),
                        frozenset(imgs),
                        bad,
                    )
                c, ts, es, bad = local_cache[key]
                if bad:
                    rep.format_failures += 1
                count *= c
                tsets.append(ts)
                esets.append(es)
            n += count
            budget += 1
            if budget > max_states:
                raise InstanceTooLarge(f"more than {max_states} link/pairing skeletons")
            head = (sk.first, sk.first_pairing, sk.second_pairing)
            groups[head].append(tsets)
            ext_groups[head + (sk.moved_blocks,)].append(esets)
        distinct = sum(_union_size(ms, max_states) for ms in groups.values())
        ext_distinct = sum(_union_size(ms, max_states) for ms in ext_groups.values())
        if n != expected:
            rep.count_mismatches += 1
        if distinct < n and len(rep.witnesses) < 5:
            rep.witnesses.append({"total": M.to_json(), "kind": "collision", "lost": n - distinct})
        rep.total_preimages += n
        rep.distinct_images += distinct
        rep.collisions += n - distinct
        rep.extended_images += ext_distinct
        rep.extended_collisions += n - ext_distinct
        rep.image_side_count += ctx.inner_count(target_empty=True) if in_F(M, B, plus) else 0
        if n <= explicit_limit:
            seen = set()
            for t in ctx.build_tuples():
                img = ctx.inject(t)
                seen.add(img.target())
                if ctx.reverse(img) != t:
                    rep.reverse_failures += 1
            if len(seen) != distinct:
                rep.count_mismatches += 1
    return rep


# ------------------------------------------------------------ Griffiths


@dataclass
class GapReport:
    gap: object
    bound: object
    G_AB: object
    G_A: object
    G_B: object
    caps: tuple[int, int, int]

    def to_json(self) -> dict:
        def enc(x):
            return str(x) if isinstance(x, Fraction) else x

        return {
            "gap": enc(self.gap),
            "gap_float": float(self.gap),
            "bound": float(self.bound),
            "G_AB": enc(self.G_AB),
            "G_A": enc(self.G_A),
            "G_B": enc(self.G_B),
            "caps": list(self.caps),
            "holds": self.gap >= -self.bound,
        }


def griffiths_gap(
    p: ModelParams,
    A: Iterable[str],
    B: Iterable[str],
    tol=Fraction(1, 10**9),
    exact: bool = True,
    max_cap: int = 40,
) -> GapReport:
    A, B = frozenset(A), frozenset(B)
    gab, c0 = converge(p, A, B, tol, max_cap, exact)
    ga, c1 = converge(p, A, None, tol, max_cap, exact)
    gb, c2 = converge(p, B, None, tol, max_cap, exact)
    tol = as_fraction(tol) if exact else float(tol)
    bound = tol * (1 + abs(ga) + abs(gb))
    return GapReport(gab - ga * gb, bound, gab, ga, gb, (c0, c1, c2))


def derivative_check(
    p: ModelParams,
    A: Iterable[str],
    edge: int,
    colour: int,
    step=Fraction(1, 1000),
    tol=Fraction(1, 10**9),
    exact: bool = True,
    max_cap: int = 40,
):
    """Central difference of the correlation of A in the coupling J_edge^colour
    (one-sided when the coupling is smaller than the step)."""
    step = as_fraction(step)
    if step <= 0:
        raise ValueError("step must be positive")
    J0 = p.J.get((edge, colour), Fraction(0))
    hi = dict(p.J)
    hi[(edge, colour)] = J0 + step
    lo = dict(p.J)
    lo_val = max(J0 - step, Fraction(0))
    lo[(edge, colour)] = lo_val
    g_hi, _ = converge(p.replace(J=hi), A, None, tol, max_cap, exact)
    g_lo, _ = converge(p.replace(J=lo), A, None, tol, max_cap, exact)
    width = (J0 + step) - lo_val
    return (g_hi - g_lo) / (width if exact else float(width))
