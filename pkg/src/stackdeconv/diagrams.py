"""Partial permutations on multi-circle diagrams.

A diagram is a set of ``k`` circles, circle ``c`` carrying ``2 p_c`` edges.
Edges and vertices are labelled ``1 .. 2p`` globally, consecutively circle by
circle, and edge ``e`` borders vertices ``e`` and ``e + 1`` (wrapping inside
its own circle).  Pair index ``i`` stands for the even edge ``2i`` when it
appears in ``rho1`` and for the odd edge ``2i - 1`` when it appears in
``rho2``.

Every coefficient of the moment and variance formulas is a function of the
:class:`DiagramSummary` of one partial permutation, so the heavy lifting of
the package is :func:`summarize` plus the cached :func:`term_table`.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator


class DiagramError(ValueError):
    """Raised for malformed shapes or identifications."""


@dataclass(frozen=True)
class DiagramShape:
    pair_counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.pair_counts)
        if not counts or any(c < 1 for c in counts):
            raise DiagramError(f"invalid pair counts {self.pair_counts!r}")
        object.__setattr__(self, "pair_counts", counts)

    @property
    def total_pairs(self) -> int:
        return sum(self.pair_counts)

    @property
    def circle_count(self) -> int:
        return len(self.pair_counts)

    @property
    def edge_count(self) -> int:
        return 2 * self.total_pairs

    def circle_bounds(self) -> list[tuple[int, int]]:
        """First and last vertex label of every circle."""
        bounds = []
        start = 1
        for c in self.pair_counts:
            bounds.append((start, start + 2 * c - 1))
            start += 2 * c
        return bounds

    def next_vertex_table(self) -> list[int]:
        """``table[v]`` is the clockwise successor of vertex ``v`` (index 0 unused)."""
        table = [0] * (self.edge_count + 1)
        for first, last in self.circle_bounds():
            for v in range(first, last):
                table[v] = v + 1
            table[last] = first
        return table


@dataclass(frozen=True)
class PartialPermutation:
    """Bijection ``q`` between two equal-size sets of pair indices.

    Stored as the sorted tuple of pairs ``(i, q(i))``.
    """

    pairs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        pairs = tuple(sorted((int(i), int(j)) for i, j in self.pairs))
        sources = [i for i, _ in pairs]
        targets = [j for _, j in pairs]
        if len(set(sources)) != len(sources) or len(set(targets)) != len(targets):
            raise DiagramError(f"not a bijection: {self.pairs!r}")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def from_mapping(cls, mapping: dict[int, int]) -> PartialPermutation:
        return cls(tuple(mapping.items()))

    @property
    def rho1(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.pairs)

    @property
    def rho2(self) -> frozenset[int]:
        return frozenset(j for _, j in self.pairs)

    @property
    def q(self) -> dict[int, int]:
        return dict(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class DiagramSummary:
    rho1_size: int
    sigma_block_halves: tuple[int, ...]  # sorted descending
    even_classes: int
    even_classes_det: int
    odd_classes: int
    odd_classes_det: int

    @property
    def sigma_count(self) -> int:
        return len(self.sigma_block_halves)

    @property
    def free_even(self) -> int:
        """Even vertex classes not bordering a deterministic edge (power of N)."""
        return self.even_classes - self.even_classes_det

    @property
    def free_odd(self) -> int:
        """Odd vertex classes not bordering a deterministic edge (power of n)."""
        return self.odd_classes - self.odd_classes_det


def sp_count(p: int) -> int:
    """``|SP_p| = sum_a C(p, a)^2 a!``."""
    from math import comb, factorial

    return sum(comb(p, a) ** 2 * factorial(a) for a in range(p + 1))


def _bijections(p: int, sources_pool, targets_pool) -> Iterator[tuple[tuple[int, int], ...]]:
    sources_pool = list(sources_pool)
    targets_pool = list(targets_pool)
    for size in range(min(len(sources_pool), len(targets_pool)) + 1):
        for rho1 in itertools.combinations(sources_pool, size):
            for rho2 in itertools.combinations(targets_pool, size):
                for image in itertools.permutations(rho2):
                    yield tuple(zip(rho1, image))


def enumerate_sp(shape: DiagramShape) -> Iterator[PartialPermutation]:
    """All partial permutations of ``{1 .. p}``.

    Order: by ``|rho1|``, then ``rho1`` and ``rho2`` lexicographically, then
    the image sequence of ``q`` lexicographically.
    """
    pool = range(1, shape.total_pairs + 1)
    for pairs in _bijections(shape.total_pairs, pool, pool):
        yield PartialPermutation(pairs)


def enumerate_spr(p: int) -> Iterator[PartialPermutation]:
    """Partial permutations of ``{1 .. 2p}`` whose identifications all cross halves.

    The underlying shape is two circles of ``p`` pairs each.  The empty
    permutation is included, so the count is ``sp_count(p) ** 2``.
    """
    if p < 1:
        raise DiagramError("p must be positive")
    first = range(1, p + 1)
    second = range(p + 1, 2 * p + 1)
    forward = list(_bijections(p, first, second))
    backward = list(_bijections(p, second, first))
    for a in forward:
        for b in backward:
            yield PartialPermutation(a + b)


class _DisjointSet:
    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def summarize(shape: DiagramShape, pp: PartialPermutation) -> DiagramSummary:
    """Glue the diagram along ``pp`` and count what the formulas need.

    Even edge ``2i`` is glued to odd edge ``2j - 1`` with opposite
    orientation, i.e. ``v(2i) ~ v(2j)`` and ``v(2i + 1) ~ v(2j - 1)``.
    """
    p = shape.total_pairs
    for i, j in pp.pairs:
        if not (1 <= i <= p and 1 <= j <= p):
            raise DiagramError(f"pair index out of range in {pp.pairs!r} for p={p}")
    succ = shape.next_vertex_table()
    edges = shape.edge_count

    vertices = _DisjointSet(edges + 1)
    for i, j in pp.pairs:
        vertices.union(2 * i, 2 * j)
        vertices.union(succ[2 * i], 2 * j - 1)

    random_edges = {2 * i for i in pp.rho1} | {2 * j - 1 for j in pp.rho2}
    deterministic = [e for e in range(1, edges + 1) if e not in random_edges]

    roots = [0] + [vertices.find(v) for v in range(1, edges + 1)]
    even_roots = set()
    odd_roots = set()
    for v in range(1, edges + 1):
        (even_roots if v % 2 == 0 else odd_roots).add(roots[v])
    if even_roots & odd_roots:
        raise AssertionError(f"vertex class mixes parities for {pp.pairs!r}")

    # connected components of deterministic edges, joined through vertex classes
    components = _DisjointSet(edges + 1)
    touched = {}
    det_roots = set()
    for e in deterministic:
        for v in (e, succ[e]):
            r = roots[v]
            det_roots.add(r)
            if r in touched:
                components.union(touched[r], e)
            else:
                touched[r] = e
    sizes = Counter(components.find(e) for e in deterministic)
    halves = []
    for size in sizes.values():
        if size % 2:
            raise AssertionError(f"odd deterministic component for {pp.pairs!r}")
        halves.append(size // 2)

    return DiagramSummary(
        rho1_size=len(pp),
        sigma_block_halves=tuple(sorted(halves, reverse=True)),
        even_classes=len(even_roots),
        even_classes_det=len(even_roots & det_roots),
        odd_classes=len(odd_roots),
        odd_classes_det=len(odd_roots & det_roots),
    )


# key: (rho1_size, sigma_block_halves, free_even, free_odd)
TermKey = tuple[int, tuple[int, ...], int, int]


def _tabulate(shape: DiagramShape, diagrams) -> dict[TermKey, int]:
    table: Counter = Counter()
    for pp in diagrams:
        s = summarize(shape, pp)
        table[(s.rho1_size, s.sigma_block_halves, s.free_even, s.free_odd)] += 1
    return dict(table)


@lru_cache(maxsize=None)
def term_table(pair_counts: tuple[int, ...]) -> dict[TermKey, int]:
    """Multiplicities of distinct diagram summaries over ``SP_p`` for a shape.

    Only the summary entering the coefficient is kept, so the forward map and
    the estimators can be built for any ``(n, N)`` without re-enumerating.
    """
    shape = DiagramShape(pair_counts)
    return _tabulate(shape, enumerate_sp(shape))


@lru_cache(maxsize=None)
def spr_term_table(p: int) -> dict[TermKey, int]:
    """Like :func:`term_table` over ``SPR_2p``, excluding the empty permutation.

    The empty permutation is the product of the two expectations and cancels
    in the variance, so it never contributes.
    """
    shape = DiagramShape((p, p))
    return _tabulate(shape, (pp for pp in enumerate_spr(p) if len(pp)))
