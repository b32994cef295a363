"""Polyhedral cones {x : H_j(x) >= 0 for all j} in exact integer arithmetic.

A :class:`ConeH` is an H-representation.  Cones built by this module from a
positive orthant additionally remember a generating set (rays and lines);
for those, the facets are exactly the extreme rays of the dual cone and a
Minkowski step with one more generator is a single double-description
step: the new facets are the surviving old ones plus one combination per
*adjacent* pair (H+, H-), where adjacency is decided by the exact
combinatorial test on zero sets.  Without a generating set the step falls
back to plain elimination of the parameter (all h+ * h- pairs) followed by
LP redundancy removal.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import exactla

log = logging.getLogger(__name__)

_SAFE = 2 ** 62


class ConeError(ValueError):
    pass


def normalize_form(v: Iterable) -> tuple[int, ...]:
    """Coprime integer multiple of ``v`` with the same direction."""
    return exactla.primitive(v)


def _canonical_forms(forms: Iterable[Sequence], dim: int) -> tuple[tuple[int, ...], ...]:
    seen = set()
    for f in forms:
        t = normalize_form(f)
        if len(t) != dim:
            raise ConeError(f"form of length {len(t)} in a {dim}-dimensional ambient")
        if any(t):
            seen.add(t)
    return tuple(sorted(seen, reverse=True))


@dataclass(frozen=True, eq=False)
class ConeH:
    """H-representation in fixed ambient coordinates.

    ``rays``/``lines`` are an optional generating set known to produce the
    same cone; ``minimal`` records that ``forms`` are exactly its facets.
    Both are bookkeeping for the fast Minkowski step and never affect
    equality.
    """

    labels: tuple[str, ...]
    forms: tuple[tuple[int, ...], ...]
    rays: tuple[tuple[int, ...], ...] | None = None
    lines: tuple[tuple[int, ...], ...] = ()
    minimal: bool = False
    _index: dict = field(default=None, repr=False, compare=False)

    @classmethod
    def build(cls, labels, forms, rays=None, lines=(), minimal=False) -> "ConeH":
        labels = tuple(labels)
        return cls(labels, _canonical_forms(forms, len(labels)),
                   None if rays is None else tuple(tuple(int(x) for x in r) for r in rays),
                   tuple(tuple(int(x) for x in l) for l in lines), minimal)

    @property
    def dim(self) -> int:
        return len(self.labels)

    def __len__(self) -> int:
        return len(self.forms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConeH):
            return NotImplemented
        return self.labels == other.labels and set(self.forms) == set(other.forms)

    def __hash__(self) -> int:
        return hash((self.labels, frozenset(self.forms)))

    def index_of(self, form) -> int:
        if self._index is None:
            object.__setattr__(self, "_index", {f: i for i, f in enumerate(self.forms)})
        return self._index[normalize_form(form)]

    def contains_point(self, x) -> bool:
        return all(exactla.dot(f, x) >= 0 for f in self.forms)

    def values(self, x) -> list:
        return [exactla.dot(f, x) for f in self.forms]

    def matrix(self) -> np.ndarray:
        return _int_array(self.forms, self.dim)

    def without_generators(self) -> "ConeH":
        return ConeH(self.labels, self.forms)

    def has_dd_data(self) -> bool:
        if self.rays is None or not self.minimal:
            return False
        gens = list(self.rays) + list(self.lines)
        return exactla.rank(gens) == self.dim if gens else self.dim == 0

    def describe(self, k: int) -> str:
        terms = []
        for c, lab in zip(self.forms[k], self.labels):
            if c:
                coef = "" if abs(c) == 1 else str(abs(c))
                terms.append(("-" if c < 0 else "+") + coef + "w{" + lab + "}")
        s = " ".join(terms).lstrip("+")
        return s + " >= 0"


def _int_array(rows, dim: int) -> np.ndarray:
    if not rows:
        return np.zeros((0, dim), dtype=np.int64)
    big = max((abs(x) for r in rows for x in r), default=0)
    dtype = np.int64 if big < 2 ** 31 else object
    return np.array(rows, dtype=dtype).reshape(len(rows), dim)


def _safe_mul_bound(*bounds) -> bool:
    p = 1
    for b in bounds:
        p *= max(int(b), 1)
    return p < _SAFE


def _absmax(a: np.ndarray) -> int:
    return int(np.max(np.abs(a))) if a.size else 0


def positive_orthant(labels) -> ConeH:
    labels = tuple(labels)
    d = len(labels)
    units = [tuple(int(i == j) for j in range(d)) for i in range(d)]
    return ConeH(labels, tuple(sorted(units, reverse=True)), tuple(units), (), True)


@dataclass
class StepTrace:
    """One Minkowski step: counts from the eliminated system and the provenance of every output form.

    ``origin[k]`` is ``(i,)`` when output form k is input form i unchanged,
    or ``(i_plus, i_minus, c_plus, c_minus, g)`` when it equals
    ``(c_plus * H[i_plus] + c_minus * H[i_minus]) / g``.
    """

    cone: ConeH
    kind: str
    h0: int
    hplus: int
    hminus: int
    origin: list
    method: str

    @property
    def raw(self) -> int:
        kept = self.h0 + (self.hplus if self.kind == "ray" else 0)
        return kept + self.hplus * self.hminus


def minkowski_step(c: ConeH, v: Sequence[int], kind: str, *, method: str = "auto",
                   workers: int = 1) -> StepTrace:
    """``c + Q v`` (kind="line") or ``c + Q>=0 v`` (kind="ray") with full provenance."""
    if kind not in ("line", "ray"):
        raise ConeError(f"unknown step kind {kind!r}")
    v = normalize_form(v)
    if len(v) != c.dim:
        raise ConeError(f"vector of length {len(v)} in a {c.dim}-dimensional ambient")
    if not any(v):
        raise ConeError("cannot add the zero vector")
    if method == "auto":
        method = "dd" if c.has_dd_data() else "lp"
    if method == "dd":
        if not c.has_dd_data():
            raise ConeError("double-description step needs a full-dimensional generating set")
        return _dd_step(c, v, kind)
    if method == "lp":
        return _elimination_step(c, v, kind, workers=workers)
    raise ConeError(f"unknown method {method!r}")


def sum_line(c: ConeH, v, **kw) -> ConeH:
    return minkowski_step(c, v, "line", **kw).cone


def sum_ray(c: ConeH, r, **kw) -> ConeH:
    return minkowski_step(c, r, "ray", **kw).cone


def _split(values: np.ndarray):
    pos = np.nonzero(values > 0)[0]
    neg = np.nonzero(values < 0)[0]
    zer = np.nonzero(values == 0)[0]
    return pos, neg, zer


def _combine(F: np.ndarray, values: np.ndarray, ip: np.ndarray, jn: np.ndarray):
    """Rows ``values[ip]*F[jn] - values[jn]*F[ip]`` divided by their content."""
    a = values[ip][:, None]
    b = -values[jn][:, None]
    if F.dtype != object and not _safe_mul_bound(2, _absmax(F), _absmax(values)):
        F = F.astype(object)
        a = a.astype(object)
        b = b.astype(object)
    rows = a * F[jn] + b * F[ip]
    if rows.dtype == object:
        g = np.array([_content(r) for r in rows], dtype=object)
    else:
        g = np.gcd.reduce(np.abs(rows), axis=1)
    g[g == 0] = 1
    rows = rows // g[:, None]
    return rows, a[:, 0], b[:, 0], g


def _content(row) -> int:
    from math import gcd
    g = 0
    for x in row:
        g = gcd(g, int(x))
    return g


def _assemble(c: ConeH, kind: str, kept_idx, F, new_rows, ip, jn, a, b, g, method,
              h0, hp, hn, rays, lines, minimal) -> StepTrace:
    entries: dict[tuple[int, ...], tuple] = {}
    for i in kept_idx:
        t = c.forms[int(i)]
        entries.setdefault(t, (int(i),))
    for k in range(len(new_rows)):
        t = tuple(int(x) for x in new_rows[k])
        if not any(t):
            continue
        entries.setdefault(t, (int(ip[k]), int(jn[k]), int(b[k]), int(a[k]), int(g[k])))
    order = sorted(entries, reverse=True)
    cone = ConeH(c.labels, tuple(order), rays, lines, minimal)
    return StepTrace(cone, kind, h0, hp, hn, [entries[t] for t in order], method)


def _pack_bits(mask: np.ndarray) -> np.ndarray:
    m, g = mask.shape
    words = max(1, (g + 63) // 64)
    padded = np.zeros((m, words * 64), dtype=bool)
    padded[:, :g] = mask
    packed = np.packbits(padded, axis=1, bitorder="little")
    return packed.view(np.uint64).reshape(m, words)


def _popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x).sum(axis=-1, dtype=np.int64)


def _dd_step(c: ConeH, v: tuple[int, ...], kind: str) -> StepTrace:
    F = c.matrix()
    G = _int_array(list(c.rays), c.dim)
    r = np.array(v, dtype=object if F.dtype == object else np.int64)
    if F.dtype == object or G.dtype == object or not _safe_mul_bound(c.dim, _absmax(F), _absmax(G), 1 + _absmax(r)):
        F = F.astype(object)
        G = G.astype(object)
        r = r.astype(object)
    values = F @ r
    pos, neg, zer = _split(values)
    kept = np.sort(np.concatenate([zer, pos])) if kind == "ray" else zer
    lines_rank = exactla.rank(c.lines) if c.lines else 0
    need = c.dim - lines_rank - 2

    ip = np.zeros(0, dtype=np.int64)
    jn = np.zeros(0, dtype=np.int64)
    if len(pos) and len(neg):
        S = F @ G.T
        Z = _pack_bits(S == 0)
        ip, jn = _adjacent_pairs(Z, pos, neg, need)
    new_rows, a, b, g = _combine(F, values, ip, jn)
    if kind == "ray":
        rays, lines = c.rays + (v,), c.lines
    else:
        rays, lines = c.rays, c.lines + (v,)
    trace = _assemble(c, kind, kept, F, new_rows, ip, jn, a, b, g, "dd",
                      len(zer), len(pos), len(neg), rays, lines, True)
    log.debug("dd %s step: h0=%d h+=%d h-=%d adjacent=%d -> %d facets",
              kind, len(zer), len(pos), len(neg), len(ip), len(trace.cone))
    return trace


def _adjacent_pairs(Z: np.ndarray, pos: np.ndarray, neg: np.ndarray, need: int):
    m, words = Z.shape
    Zn = Z[neg]
    out_i, out_j = [], []
    chunk = max(1, 2_000_000 // max(1, len(neg) * words))
    for s in range(0, len(pos), chunk):
        P = pos[s:s + chunk]
        inter = Z[P][:, None, :] & Zn[None, :, :]
        ok = _popcount(inter) >= need
        pi, nj = np.nonzero(ok)
        if pi.size == 0:
            continue
        cand_i = P[pi]
        cand_j = neg[nj]
        Zc = inter[pi, nj]
        keep = _combinatorial_test(Z, Zc)
        out_i.append(cand_i[keep])
        out_j.append(cand_j[keep])
    if not out_i:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(out_i), np.concatenate(out_j)


def _combinatorial_test(Z: np.ndarray, Zc: np.ndarray) -> np.ndarray:
    """True where exactly two facets (the pair itself) vanish on the common zero set."""
    m, words = Z.shape
    keep = np.empty(len(Zc), dtype=bool)
    batch = max(1, 8_000_000 // max(1, m * words))
    for s in range(0, len(Zc), batch):
        zc = Zc[s:s + batch]
        sup = np.ones((len(zc), m), dtype=bool)
        for w in range(words):
            sup &= (Z[None, :, w] & zc[:, None, w]) == zc[:, None, w]
        keep[s:s + batch] = sup.sum(axis=1) == 2
    return keep


def _elimination_step(c: ConeH, v: tuple[int, ...], kind: str, workers: int = 1) -> StepTrace:
    F = c.matrix()
    r = np.array(v, dtype=object)
    Fo = F.astype(object)
    values = Fo @ r
    pos, neg, zer = _split(values)
    kept = np.sort(np.concatenate([zer, pos])) if kind == "ray" else zer
    ip = np.repeat(pos, len(neg))
    jn = np.tile(neg, len(pos))
    new_rows, a, b, g = _combine(Fo, values, ip, jn)
    raw = _assemble(c, kind, kept, Fo, new_rows, ip, jn, a, b, g, "lp",
                    len(zer), len(pos), len(neg), None, (), False)
    reduced = facet_reduce(raw.cone, workers=workers)
    keep = set(reduced.forms)
    origin = [o for f, o in zip(raw.cone.forms, raw.origin) if f in keep]
    rays = lines = None
    if c.rays is not None:
        rays = c.rays + ((v,) if kind == "ray" else ())
        lines = c.lines + ((v,) if kind == "line" else ())
    cone = ConeH(c.labels, tuple(f for f in raw.cone.forms if f in keep),
                 rays, lines or (), True)
    return StepTrace(cone, kind, raw.h0, raw.hplus, raw.hminus, origin, "lp")


def eliminate(forms: Sequence[Sequence[int]], v: Sequence[int], kind: str) -> list[tuple[int, ...]]:
    """One plain elimination of the step parameter: no dedupe, no redundancy removal.

    Every pair (H+, H-) contributes a row even when it repeats another one
    or vanishes, so iterating this function counts the bare
    Fourier-Motzkin system.
    """
    if kind not in ("line", "ray"):
        raise ConeError(f"unknown step kind {kind!r}")
    vals = [exactla.dot(f, v) for f in forms]
    out = [tuple(f) for f, x in zip(forms, vals) if x == 0 or (kind == "ray" and x > 0)]
    for f, a in zip(forms, vals):
        if a <= 0:
            continue
        for h, b in zip(forms, vals):
            if b < 0:
                out.append(normalize_form([a * y - b * x for x, y in zip(f, h)]))
    return out


def facet_reduce(c: ConeH, workers: int = 1) -> ConeH:
    """Drop every form that is a conical combination of the remaining ones.

    Forms are scanned in the cone's canonical order; each is tested against
    the current survivors, so the result is a minimal H-representation.
    """
    from . import lp

    survivors = list(c.forms)
    k = 0
    while k < len(survivors):
        target = survivors[k]
        others = survivors[:k] + survivors[k + 1:]
        if others and lp.conic_certificate(others, target) is not None:
            survivors.pop(k)
        else:
            k += 1
    return ConeH(c.labels, tuple(survivors), c.rays, c.lines, True)


def restrict_to_section(c: ConeH, keep: Sequence[str]) -> ConeH:
    """Intersect with the coordinate subspace spanned by ``keep`` (other coordinates set to 0)."""
    pos = {lab: i for i, lab in enumerate(c.labels)}
    missing = [k for k in keep if k not in pos]
    if missing:
        raise ConeError(f"labels not in the ambient: {missing}")
    cols = [pos[k] for k in keep]
    forms = [[f[j] for j in cols] for f in c.forms]
    return ConeH.build(tuple(keep), forms)


def facet_rank_audit(c: ConeH) -> list[int]:
    """Indices of forms that fail the algebraic facet test against the stored generators.

    A form of a full-dimensional cone is a facet iff the generators on which
    it vanishes span a hyperplane.  Ranks are first computed modulo a large
    prime (a lower bound for the rational rank), then exactly if needed.
    """
    if c.rays is None:
        raise ConeError("facet audit needs a generating set")
    gens = list(c.rays)
    lines = list(c.lines)
    bad = []
    for k, f in enumerate(c.forms):
        if any(exactla.dot(f, l) != 0 for l in lines):
            bad.append(k)
            continue
        vals = [exactla.dot(f, g) for g in gens]
        if min(vals, default=0) < 0:
            bad.append(k)
            continue
        tight = [g for g, x in zip(gens, vals) if x == 0] + lines
        if not tight:
            if c.dim != 1:
                bad.append(k)
            continue
        if exactla.rank_mod_p(tight) == c.dim - 1:
            continue
        if exactla.rank(tight) != c.dim - 1:
            bad.append(k)
    return bad
