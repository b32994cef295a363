"""Boundary divisor combinatorics of M_{0,n}.

Coordinates of the ambient space W_n are the canonical boundary classes
(one subset out of each pair S, S^c), ordered lexicographically on their
sorted member tuples; this is the order used in every listing of the
classes for n = 5, 6, 7.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import combinations, permutations
from math import comb

from . import exactla

MIN_N = 4
MAX_N = 12


class ModuliError(ValueError):
    pass


def check_n(n: int) -> int:
    if not isinstance(n, int) or n < MIN_N:
        raise ModuliError(f"n must be an integer >= {MIN_N}, got {n!r}")
    if n > MAX_N:
        raise ModuliError(f"n = {n} exceeds the supported maximum {MAX_N}")
    return n


@dataclass(frozen=True, order=True)
class BoundaryClass:
    """Canonical representative of the boundary divisor Delta_S = Delta_{S^c}."""

    members: tuple[int, ...]
    n: int = field(compare=False)

    @property
    def label(self) -> str:
        return ",".join(map(str, self.members))

    def __str__(self) -> str:
        return "{" + self.label + "}"

    def __len__(self) -> int:
        return len(self.members)

    def complement(self) -> tuple[int, ...]:
        s = set(self.members)
        return tuple(i for i in range(1, self.n + 1) if i not in s)


def canonical_class(n: int, raw) -> BoundaryClass:
    items = list(raw)
    s = sorted(set(items))
    if len(s) != len(items):
        raise ModuliError(f"repeated labels in {raw!r}")
    if any(not 1 <= i <= n for i in s):
        raise ModuliError(f"labels of {raw!r} not in 1..{n}")
    k = len(s)
    if not 2 <= k <= n - 2:
        raise ModuliError(f"|S| = {k} is not a boundary divisor of M_0,{n}")
    if 2 * k > n or (2 * k == n and s[0] != 1):
        ss = set(s)
        s = [i for i in range(1, n + 1) if i not in ss]
    return BoundaryClass(tuple(s), n)


def parse_class(n: int, label: str) -> BoundaryClass:
    text = label.strip().strip("{}").replace(" ", "")
    return canonical_class(n, [int(x) for x in text.split(",") if x])


@dataclass(frozen=True)
class AmbientIndex:
    n: int
    classes: tuple[BoundaryClass, ...]

    @property
    def N(self) -> int:
        return len(self.classes)

    @cached_property
    def position(self) -> dict[BoundaryClass, int]:
        return {c: i for i, c in enumerate(self.classes)}

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.classes)

    def index(self, raw) -> int:
        if isinstance(raw, BoundaryClass):
            return self.position[raw]
        return self.position[canonical_class(self.n, raw)]

    def vector(self, terms: dict) -> tuple[int, ...]:
        """Integer vector from ``{raw subset: coefficient}`` with merging."""
        v = [0] * self.N
        for raw, c in terms.items():
            v[self.index(raw)] += c
        return tuple(v)

    def __len__(self) -> int:
        return self.N


@lru_cache(maxsize=None)
def enumerate_classes(n: int) -> AmbientIndex:
    check_n(n)
    seen = set()
    for k in range(2, n // 2 + 1):
        for s in combinations(range(1, n + 1), k):
            seen.add(canonical_class(n, s))
    classes = tuple(sorted(seen))
    assert len(classes) == 2 ** (n - 1) - n - 1
    return AmbientIndex(n, classes)


def ambient_dim(n: int) -> int:
    return 2 ** (n - 1) - n - 1


def relation_dim(n: int) -> int:
    return n * (n - 3) // 2


def picard_dim(n: int) -> int:
    return 2 ** (n - 1) - comb(n, 2) - 1


def stirling4(n: int) -> int:
    """Number of partitions of an n-set into 4 nonempty blocks."""
    return (4 ** n - 4 * 3 ** n + 6 * 2 ** n - 4) // 24


def keel_relation(n: int, a: int, b: int, c: int, d: int) -> tuple[int, ...]:
    """Sum of Delta_S over S with a,b in S and c,d not in S, minus the same with b and c swapped."""
    check_n(n)
    quad = (a, b, c, d)
    if len(set(quad)) != 4 or any(not 1 <= x <= n for x in quad):
        raise ModuliError(f"labels {quad} must be distinct elements of 1..{n}")
    amb = enumerate_classes(n)
    rest = [i for i in range(1, n + 1) if i not in quad]
    v = [0] * amb.N
    for k in range(len(rest) + 1):
        for extra in combinations(rest, k):
            for inside, sign in (((a, b), 1), ((a, c), -1)):
                s = set(inside) | set(extra)
                if 2 <= len(s) <= n - 2:
                    v[amb.index(s)] += sign
    return tuple(v)


def _printed_quadruples(n: int) -> list[tuple[int, int, int, int]]:
    """Quadruples that reproduce the listed generators of V_5, V_6 and V_7."""
    quads = []
    for c in range(4, n + 1):
        quads += [(1, 2, 3, c), (1, 2, c, 3)]
    for c, d in combinations(range(4, n + 1), 2):
        quads.append((1, 2, c, d))
    if n == 7:
        return quads[:7]
    if n > 7:
        return []
    return quads


@lru_cache(maxsize=None)
def relation_quadruples(n: int) -> tuple[tuple[int, int, int, int], ...]:
    check_n(n)
    target = relation_dim(n)
    chosen: list[tuple[int, int, int, int]] = []
    rows: list[tuple[int, ...]] = []
    for q in _printed_quadruples(n):
        chosen.append(q)
        rows.append(keel_relation(n, *q))
    current = exactla.rank(rows) if rows else 0
    if current != len(rows):
        raise AssertionError(f"printed relations for n={n} are dependent")
    for q in permutations(range(1, n + 1), 4):
        if current == target:
            break
        v = keel_relation(n, *q)
        if not any(v):
            continue
        r = exactla.rank(rows + [v])
        if r > current:
            chosen.append(q)
            rows.append(v)
            current = r
    if current != target:
        raise AssertionError(f"Keel relations for n={n} reach rank {current}, expected {target}")
    return tuple(chosen)


@lru_cache(maxsize=None)
def relation_basis(n: int) -> tuple[tuple[int, ...], ...]:
    """M = n(n-3)/2 independent Keel relations, in the fixed printed/greedy order."""
    return tuple(keel_relation(n, *q) for q in relation_quadruples(n))


def set_partitions4(n: int):
    """Unordered partitions of {1..n} into 4 nonempty blocks, blocks sorted by minimum."""
    def rec(i, blocks):
        if i > n:
            if len(blocks) == 4:
                yield tuple(tuple(b) for b in blocks)
            return
        if 4 - len(blocks) > n - i + 1:
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks)
            b.pop()
        if len(blocks) < 4:
            blocks.append([i])
            yield from rec(i + 1, blocks)
            blocks.pop()

    yield from rec(1, [])


def fnef_form(n: int, blocks) -> tuple[int, ...]:
    """w_{I+J} + w_{I+K} + w_{I+L} - w_I - w_J - w_K - w_L (trivial classes vanish)."""
    amb = enumerate_classes(n)
    i, j, k, l = (set(b) for b in blocks)
    v = [0] * amb.N
    for s, sign in ((i | j, 1), (i | k, 1), (i | l, 1), (i, -1), (j, -1), (k, -1), (l, -1)):
        if 2 <= len(s) <= n - 2:
            v[amb.index(s)] += sign
    return tuple(v)


@lru_cache(maxsize=None)
def fnef_forms(n: int) -> tuple[tuple[int, ...], ...]:
    check_n(n)
    return tuple(fnef_form(n, p) for p in set_partitions4(n))


@lru_cache(maxsize=None)
def _basis_raw(n: int) -> tuple[frozenset, ...]:
    # Raw subsets of {1..n-1}; canonicalised only when embedded in M_{0,n}.
    if n == 4:
        return (frozenset({2, 3}),)
    prev = _basis_raw(n - 1)
    prev2 = _basis_raw(n - 2) if n > 5 else ()
    out = list(prev)
    core = {n - 2, n - 1}
    others = [i for i in range(1, n - 2)]
    for k in range(len(others) + 1):
        for extra in combinations(others, k):
            b = frozenset(core | set(extra))
            if 2 <= len(b) <= n - 2:
                out.append(b)
    full = frozenset(range(1, n))
    for b in prev:
        if b not in prev2:
            out.append(full - b)
    return tuple(out)


@lru_cache(maxsize=None)
def basis_Bn(n: int) -> tuple[BoundaryClass, ...]:
    """The recursive basis B_n of Pic(M_{0,n}) as canonical classes, in ambient order."""
    check_n(n)
    classes = {canonical_class(n, b) for b in _basis_raw(n)}
    out = tuple(sorted(classes))
    if len(out) != picard_dim(n):
        raise AssertionError(f"|B_{n}| = {len(out)}, expected {picard_dim(n)}")
    return out


class NotAComplement(ValueError):
    pass


def quotient_coordinates(n: int, basis=None) -> dict[BoundaryClass, tuple[Fraction, ...]]:
    """Expansion of every delta_S modulo V_n in the given basis classes."""
    amb = enumerate_classes(n)
    if basis is None:
        basis = basis_Bn(n)
    basis = tuple(b if isinstance(b, BoundaryClass) else canonical_class(n, b) for b in basis)
    if len(set(basis)) != picard_dim(n):
        raise NotAComplement(f"need {picard_dim(n)} distinct classes, got {len(set(basis))}")
    rels = relation_basis(n)
    rows = []
    for b in basis:
        e = [0] * amb.N
        e[amb.index(b)] = 1
        rows.append(e)
    rows += [list(r) for r in rels]
    if exactla.rank(rows) != amb.N:
        raise NotAComplement("the classes do not span a complement of V_n")
    inv = exactla.inverse(rows)
    k = len(basis)
    return {c: tuple(inv[amb.index(c)][:k]) for c in amb.classes}


def is_complement(n: int, classes) -> bool:
    amb = enumerate_classes(n)
    rows = []
    for b in classes:
        e = [0] * amb.N
        e[amb.index(b)] = 1
        rows.append(e)
    rows += [list(r) for r in relation_basis(n)]
    return len(rows) == amb.N and exactla.rank(rows) == amb.N


def relabel(n: int, vec, perm: dict[int, int]) -> tuple[int, ...]:
    """Push a coordinate vector through a permutation of the marked points."""
    amb = enumerate_classes(n)
    out = [0] * amb.N
    for c, x in zip(amb.classes, vec):
        if x:
            out[amb.index({perm[i] for i in c.members})] += x
    return tuple(out)
