"""Exact linear programming over H-cones.

The workhorse is a fraction-free tableau simplex (Bland's rule, all
entries Python integers over one common positive denominator), used to
decide whether a linear form is a conical combination of a cone's forms.
Either answer comes with a witness that is re-checked by plain arithmetic:
nonnegative multipliers (a Farkas certificate) when the form is bounded
below on the cone, or a point of the cone on which the form is negative.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Sequence

import numpy as np

from . import exactla
from .cone import ConeH, normalize_form

log = logging.getLogger(__name__)


class LPError(ValueError):
    pass


# ---------------------------------------------------------------------------
# simplex core


class _Tableau:
    """Integer tableau ``T`` with common denominator ``D``; the rational tableau is ``T / D``."""

    def __init__(self, A: list[list[int]], b: list[int]):
        m = len(A)
        n = len(A[0]) if m else 0
        self.m, self.n = m, n
        self.sign = [1 if x >= 0 else -1 for x in b]
        T = np.zeros((m + 1, n + m + 1), dtype=object)
        for i in range(m):
            s = self.sign[i]
            T[i, :n] = [s * int(x) for x in A[i]]
            T[i, n + i] = 1
            T[i, -1] = s * int(b[i])
        T[m, :n] = -T[:m, :n].sum(axis=0) if m else 0
        T[m, -1] = -T[:m, -1].sum() if m else 0
        self.T = T
        self.D = 1
        self.basis = [n + i for i in range(m)]
        self.pivots = 0

    def pivot(self, r: int, s: int) -> None:
        T = self.T
        p = T[r, s]
        row = T[r].copy()
        T[:, :] = (T * p - np.multiply.outer(T[:, s], row)) // self.D
        T[r] = row
        self.D = p
        if self.D < 0:
            self.T = -T
            self.D = -self.D
        self.basis[r] = s
        self.pivots += 1

    def entering(self, allowed: int) -> int | None:
        obj = self.T[-1, :allowed]
        neg = np.nonzero(obj < 0)[0]
        return int(neg[0]) if neg.size else None

    def leaving(self, s: int) -> int | None:
        T = self.T
        col = T[:-1, s]
        best = None
        for i in np.nonzero(col > 0)[0]:
            i = int(i)
            if best is None:
                best = i
                continue
            # compare T[i,-1]/T[i,s] with T[best,-1]/T[best,s]
            lhs = T[i, -1] * T[best, s]
            rhs = T[best, -1] * T[i, s]
            if lhs < rhs or (lhs == rhs and self.basis[i] < self.basis[best]):
                best = i
        return best

    def run(self, allowed: int, max_pivots: int) -> str:
        while True:
            s = self.entering(allowed)
            if s is None:
                return "optimal"
            r = self.leaving(s)
            if r is None:
                return "unbounded"
            self.pivot(r, s)
            if self.pivots > max_pivots:
                raise LPError("pivot limit exceeded")

    def value(self, var: int) -> Fraction:
        for i, bv in enumerate(self.basis):
            if bv == var:
                return Fraction(int(self.T[i, -1]), int(self.D))
        return Fraction(0)

    def primal(self) -> list[Fraction]:
        x = [Fraction(0)] * self.n
        for i, bv in enumerate(self.basis):
            if bv < self.n:
                x[bv] = Fraction(int(self.T[i, -1]), int(self.D))
        return x


def feasibility(A: Sequence[Sequence[int]], b: Sequence[int], max_pivots: int = 100_000):
    """Decide ``exists z >= 0 with A z = b``.

    Returns ``("feasible", z)`` with z a basic solution, or
    ``("infeasible", y)`` with ``y^T A <= 0`` and ``y^T b > 0``.
    """
    A = [[int(x) for x in row] for row in A]
    b = [int(x) for x in b]
    m = len(A)
    if m == 0:
        return "feasible", []
    tab = _Tableau(A, b)
    tab.run(tab.n + tab.m, max_pivots)
    if tab.T[-1, -1] == 0:
        return "feasible", tab.primal()
    D = int(tab.D)
    y = [tab.sign[i] * (1 - Fraction(int(tab.T[-1, tab.n + i]), D)) for i in range(m)]
    return "infeasible", y


def solve_lp(A: Sequence[Sequence], b: Sequence, c: Sequence, max_pivots: int = 100_000):
    """Minimise ``c^T z`` subject to ``A z = b, z >= 0``.

    Returns ``("optimal", z, value)``, ``("infeasible", y, None)`` with a
    Farkas vector as in :func:`feasibility`, or ``("unbounded", z, d)``
    where d >= 0 is a direction with ``A d = 0`` and ``c^T d < 0``.
    """
    A = [[Fraction(x) for x in row] for row in A]
    b = [Fraction(x) for x in b]
    m = len(A)
    n = len(c)
    # clear denominators row by row; objective scaled by a positive factor
    Ai, bi, scale = [], [], []
    for row, rhs in zip(A, b):
        full = list(row) + [rhs]
        v = exactla.primitive(full) if any(full) else tuple([0] * (n + 1))
        k = next((j for j, x in enumerate(full) if x), None)
        scale.append(Fraction(1) if k is None else Fraction(v[k]) / full[k])
        Ai.append(list(v[:n]))
        bi.append(v[n])
    cq = [Fraction(x) for x in c]
    cscale = 1
    for x in cq:
        cscale = cscale * x.denominator // gcd(cscale, x.denominator)
    ci = [int(x * cscale) for x in cq]
    if m == 0:
        if any(x < 0 for x in ci):
            d = [Fraction(int(x < 0 and j == ci.index(min(ci)))) for j, x in enumerate(ci)]
            return "unbounded", [Fraction(0)] * n, d
        return "optimal", [Fraction(0)] * n, Fraction(0)
    tab = _Tableau(Ai, bi)
    tab.run(n + m, max_pivots)
    if tab.T[-1, -1] != 0:
        D = int(tab.D)
        y = [tab.sign[i] * (1 - Fraction(int(tab.T[-1, n + i]), D)) * scale[i] for i in range(m)]
        return "infeasible", y, None
    # drive artificials out of the basis, dropping redundant rows
    r = 0
    while r < tab.m:
        if tab.basis[r] >= n:
            nz = np.nonzero(tab.T[r, :n] != 0)[0]
            if nz.size:
                tab.pivot(r, int(nz[0]))
            else:
                tab.T = np.delete(tab.T, r, axis=0)
                del tab.basis[r]
                del tab.sign[r]
                tab.m -= 1
                continue
        r += 1
    T = np.delete(tab.T, np.s_[n:n + m], axis=1)
    D = tab.D
    obj = np.zeros(n + 1, dtype=object)
    obj[:n] = [x * D for x in ci]
    obj[n] = 0
    for i, bv in enumerate(tab.basis):
        if ci[bv]:
            obj = obj - ci[bv] * T[i]
    T[-1] = obj
    tab.T = T
    status = tab.run(n, max_pivots)
    if status == "unbounded":
        s = tab.entering(n)
        d = [Fraction(0)] * n
        d[s] = Fraction(1)
        for i, bv in enumerate(tab.basis):
            d[bv] = -Fraction(int(tab.T[i, s]), int(tab.D)) if bv != s else d[bv]
        return "unbounded", tab.primal(), d
    z = tab.primal()
    return "optimal", z, sum(Fraction(ci[j], cscale) * z[j] for j in range(n))


# ---------------------------------------------------------------------------
# certificates and verdicts


@dataclass(frozen=True)
class FarkasCertificate:
    """``target == sum(mult * forms[index])`` with every multiplier >= 0."""

    target: tuple[int, ...]
    support: tuple[tuple[int, Fraction], ...]

    def scaled(self, factor: Fraction) -> "FarkasCertificate":
        return FarkasCertificate(self.target, tuple((i, m * factor) for i, m in self.support))


@dataclass(frozen=True)
class BoundednessVerdict:
    """Outcome of minimising a form over a cone: 0 (bounded) or -infinity."""

    bounded: bool
    certificate: FarkasCertificate | None = None
    point: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.bounded != (self.certificate is not None) or self.bounded == (self.point is not None):
            raise LPError("a verdict carries exactly one witness of the matching kind")


def verify_certificate(c: ConeH | Sequence[Sequence[int]], cert: FarkasCertificate) -> bool:
    """Pure arithmetic audit: multipliers nonnegative and the combination reproduces the target."""
    forms = c.forms if isinstance(c, ConeH) else c
    if not cert.target:
        return False
    acc = [Fraction(0)] * len(cert.target)
    for idx, mult in cert.support:
        if not isinstance(idx, int) or not 0 <= idx < len(forms):
            return False
        mult = Fraction(mult)
        if mult < 0:
            return False
        f = forms[idx]
        if len(f) != len(acc):
            return False
        for j, x in enumerate(f):
            if x:
                acc[j] += mult * x
    return all(a == t for a, t in zip(acc, cert.target))


def verify_point(c: ConeH | Sequence[Sequence[int]], target, x) -> bool:
    forms = c.forms if isinstance(c, ConeH) else c
    return all(exactla.dot(f, x) >= 0 for f in forms) and exactla.dot(target, x) < 0


def verify_verdict(c: ConeH, target, verdict: BoundednessVerdict) -> bool:
    if verdict.bounded:
        return tuple(verdict.certificate.target) == tuple(target) and verify_certificate(c, verdict.certificate)
    return verify_point(c, target, verdict.point)


def _columns(forms: Sequence[Sequence[int]], dim: int) -> list[list[int]]:
    return [[f[i] for f in forms] for i in range(dim)]


def _float_guess(F: np.ndarray, target: tuple[int, ...]):
    """Floating-point hint for the verdict, turned into an exact witness or None.

    HiGHS only proposes a support (feasible case) or a vertex of the
    normalised dual (infeasible case); the rational witness is rebuilt from
    that combinatorial data and verified before anyone sees it.
    """
    from scipy.optimize import linprog

    m, dim = F.shape
    h = np.asarray(target, dtype=float)
    res = linprog(np.zeros(m), A_eq=F.T, b_eq=h, bounds=(0, None), method="highs")
    if res.status == 0:
        support = [k for k in range(m) if res.x[k] > 1e-9]
        coef = exactla.solve_in_span([F_int for F_int in _int_rows(F, support)], target)
        if coef is not None and all(q >= 0 for q in coef):
            return FarkasCertificate(target, tuple((k, q) for k, q in zip(support, coef) if q))
        return None
    if res.status != 2:
        return None
    res = linprog(h, A_ub=-F, b_ub=np.zeros(m), bounds=(-1, 1), method="highs")
    if res.status != 0 or res.fun >= -1e-9:
        return None
    x = res.x
    tight = [list(map(int, F[k])) for k in range(m) if abs(F[k] @ x) < 1e-7]
    for i in range(dim):
        if abs(abs(x[i]) - 1) < 1e-7:
            e = [0] * dim
            e[i] = 1
            tight.append(e + [int(round(x[i]))])
    rows = [r if len(r) == dim + 1 else r + [0] for r in tight]
    sol = exactla.solve_in_span([[r[j] for r in rows] for j in range(dim)], [r[dim] for r in rows]) if rows else None
    cands = []
    if sol is not None and len(exactla.nullspace([r[:dim] for r in rows])) == 0:
        cands.append(sol)
    cands.append([Fraction(v).limit_denominator(10_000) for v in x])
    for cand in cands:
        if any(cand):
            pt = normalize_form(cand)
            if all(F[k] @ np.asarray(pt, dtype=float) >= -0.5 for k in range(m)) and \
                    verify_point(_int_rows(F, range(m)), target, pt):
                return pt
    return None


def _int_rows(F: np.ndarray, idx) -> list[list[int]]:
    return [[int(v) for v in F[k]] for k in idx]


def _float_forms(forms: Sequence[Sequence[int]]) -> np.ndarray | None:
    """Forms as a float array when that conversion is exact, else None."""
    if not forms or max(abs(v) for f in forms for v in f) >= 2 ** 40:
        return None
    return np.array(forms, dtype=float)


def _decide(forms: Sequence[Sequence[int]], dim: int, target: Sequence[int],
            guided: bool = True, F: np.ndarray | None = None) -> BoundednessVerdict:
    target = tuple(int(x) for x in target)
    if len(target) != dim:
        raise LPError(f"target of length {len(target)} in a {dim}-dimensional ambient")
    if not forms:
        if not any(target):
            return BoundednessVerdict(True, FarkasCertificate(target, ()))
        return BoundednessVerdict(False, point=normalize_form([-x for x in target]))
    if guided and F is None:
        F = _float_forms(forms)
    if guided and F is not None:
        hint = _float_guess(F, target)
        if isinstance(hint, FarkasCertificate) and verify_certificate(forms, hint):
            return BoundednessVerdict(True, hint)
        if isinstance(hint, tuple) and verify_point(forms, target, hint):
            return BoundednessVerdict(False, point=hint)
        log.debug("float hint rejected; running the exact simplex")
    status, z = feasibility(_columns(forms, dim), target)
    if status == "feasible":
        support = tuple((k, q) for k, q in enumerate(z) if q)
        cert = FarkasCertificate(target, support)
        if not verify_certificate(forms, cert):
            raise AssertionError("simplex returned an invalid certificate")
        return BoundednessVerdict(True, cert)
    x = normalize_form([-q for q in z])
    if not verify_point(forms, target, x):
        raise AssertionError("simplex returned an invalid separating point")
    return BoundednessVerdict(False, point=x)


def min_over_cone(c: ConeH, target: Sequence[int]) -> BoundednessVerdict:
    """Minimum of ``target`` over the cone: bounded (0, with certificate) or -infinity (with a point)."""
    if len(target) != c.dim:
        raise LPError(f"target of length {len(target)} in a {c.dim}-dimensional ambient")
    return _decide(c.forms, c.dim, target)


def conic_certificate(forms: Sequence[Sequence[int]], target: Sequence[int]) -> FarkasCertificate | None:
    """Certificate that ``target`` is a nonnegative combination of ``forms``, else None."""
    v = _decide(list(forms), len(target), target)
    return v.certificate


# ---------------------------------------------------------------------------
# batched decisions with a pool of known cone points


def _big(rows) -> bool:
    return any(abs(x) >= 2 ** 31 for r in rows for x in r)


def _absmax(a: np.ndarray) -> int:
    return int(np.max(np.abs(a))) if a.size else 0


class ConeMembership:
    """Decides boundedness of many forms over one fixed cone.

    Every separating point found is kept; a new target that is negative on a
    known point is unbounded without solving an LP.
    """

    def __init__(self, cone: ConeH, pool_size: int = 4096):
        self.cone = cone
        self.forms = list(cone.forms)
        self.dim = cone.dim
        self.pool: list[tuple[int, ...]] = []
        self.pool_size = pool_size
        self._pool_arr = np.zeros((0, self.dim), dtype=np.int64)
        self._float = _float_forms(self.forms)
        self.lp_calls = 0

    def add_point(self, x: Sequence[int]) -> None:
        if len(self.pool) >= self.pool_size:
            return
        x = tuple(int(t) for t in x)
        if not self.cone.contains_point(x):
            raise LPError("pool points must lie in the cone")
        self.pool.append(x)
        self._pool_arr = np.array(self.pool, dtype=object if _big(self.pool) else np.int64)

    def _from_pool(self, targets: np.ndarray) -> np.ndarray:
        """Index into the pool of a point with negative value, or -1, per target row."""
        if not self.pool or not len(targets):
            return np.full(len(targets), -1, dtype=np.int64)
        P = self._pool_arr
        bound = max(_absmax(targets), 1) * max(_absmax(P), 1) * self.dim
        if P.dtype == object or targets.dtype == object or bound >= 2 ** 62:
            vals = targets.astype(object) @ P.T.astype(object)
        elif bound < 2 ** 52:
            # exact: every partial sum is an integer below 2**53
            vals = targets.astype(np.float64) @ P.T.astype(np.float64)
        else:
            vals = targets @ P.T
        neg = vals < 0
        has = neg.any(axis=1)
        first = np.argmax(neg, axis=1)
        return np.where(has, first, -1)

    def decide(self, target: Sequence[int]) -> BoundednessVerdict:
        return self.decide_many([target])[0]

    def decide_many(self, targets: Sequence[Sequence[int]]) -> list[BoundednessVerdict]:
        targets = [tuple(int(x) for x in t) for t in targets]
        out: list[BoundednessVerdict | None] = [None] * len(targets)
        if not targets:
            return []
        arr = np.array(targets, dtype=object if _big(targets) else np.int64).reshape(len(targets), self.dim)
        hit = self._from_pool(arr)
        for k, h in enumerate(hit):
            if h >= 0:
                out[k] = BoundednessVerdict(False, point=self.pool[h])
        for k, t in enumerate(targets):
            if out[k] is not None:
                continue
            if self.pool:
                x = self.pool[-1]
                if exactla.dot(t, x) < 0:
                    out[k] = BoundednessVerdict(False, point=x)
                    continue
            self.lp_calls += 1
            v = _decide(self.forms, self.dim, t, F=self._float)
            if not v.bounded:
                self.add_point(v.point)
            out[k] = v
        return out


def _decide_chunk(args):
    forms, dim, targets = args
    oracle = ConeMembership(ConeH(tuple(map(str, range(dim))), tuple(forms)))
    return oracle.decide_many(targets)


def decide_all(inner: ConeH, targets: Sequence[Sequence[int]], workers: int = 1,
               oracle: ConeMembership | None = None) -> list[BoundednessVerdict]:
    """Boundedness verdict of every target over ``inner`` (order preserved)."""
    targets = [tuple(t) for t in targets]
    for t in targets:
        if len(t) != inner.dim:
            raise LPError(f"target of length {len(t)} in a {inner.dim}-dimensional ambient")
    if workers <= 1 or len(targets) < 2 * workers:
        oracle = oracle or ConeMembership(inner)
        return oracle.decide_many(targets)
    size = (len(targets) + workers - 1) // workers
    chunks = [(inner.forms, inner.dim, targets[s:s + size]) for s in range(0, len(targets), size)]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(_decide_chunk, chunks))
    return [v for part in parts for v in part]


def _check_same_ambient(inner: ConeH, outer: ConeH) -> None:
    if inner.dim != outer.dim:
        raise LPError(f"dimension mismatch: {inner.dim} vs {outer.dim}")


def containment_index(inner: ConeH, outer: ConeH, workers: int = 1) -> tuple[int, list[int]]:
    """Number of outer forms unbounded below on ``inner``, and their indices."""
    _check_same_ambient(inner, outer)
    verdicts = decide_all(inner, outer.forms, workers)
    violated = [k for k, v in enumerate(verdicts) if not v.bounded]
    return len(violated), violated


def contains(inner: ConeH, outer: ConeH, workers: int = 1) -> tuple[bool, list[FarkasCertificate]]:
    """Whether ``inner`` is a subset of ``outer``; on success one certificate per outer form."""
    _check_same_ambient(inner, outer)
    verdicts = decide_all(inner, outer.forms, workers)
    if all(v.bounded for v in verdicts):
        return True, [v.certificate for v in verdicts]
    return False, []
