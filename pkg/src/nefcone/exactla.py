"""Exact rational linear algebra on dense matrices.

Scalars are :class:`fractions.Fraction` (always reduced, positive
denominator).  Matrices are plain lists of rows.  Nothing in here ever
touches floating point.
"""
from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

Rat = Fraction
Mat = list[list[Fraction]]


def rat(value) -> Fraction:
    """Coerce an int, Fraction or ``"p/q"`` string to a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return decode_rat(value)
    raise TypeError(f"not an exact rational: {value!r}")


def encode_rat(q) -> str:
    q = rat(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def decode_rat(text: str) -> Fraction:
    text = text.strip()
    if "/" in text:
        p, q = text.split("/")
        den = int(q)
        if den <= 0:
            raise ValueError(f"non-canonical rational {text!r}")
        out = Fraction(int(p), den)
    else:
        out = Fraction(int(text))
    if encode_rat(out) != text:
        raise ValueError(f"non-canonical rational {text!r}")
    return out


def to_matrix(rows: Iterable[Sequence]) -> Mat:
    m = [[rat(x) for x in row] for row in rows]
    if m and any(len(r) != len(m[0]) for r in m):
        raise ValueError("ragged matrix")
    return m


def identity(n: int) -> Mat:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def rref(m: Sequence[Sequence]) -> tuple[Mat, list[int]]:
    """Reduced row echelon form and the (strictly increasing) pivot columns."""
    a = to_matrix(m)
    if a and all(x.denominator == 1 for row in a for x in row):
        return _rref_int([[x.numerator for x in row] for row in a])
    rows = len(a)
    cols = len(a[0]) if rows else 0
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = next((i for i in range(r, rows) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(rows):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                ai, ar = a[i], a[r]
                a[i] = [x - f * y for x, y in zip(ai, ar)]
        pivots.append(c)
        r += 1
    return a, pivots


def _rref_int(a: list[list[int]]) -> tuple[Mat, list[int]]:
    # Fraction-free Gauss-Jordan: every entry stays an integer minor, and at
    # the end each pivot row carries the same pivot value ``prev``.
    rows, cols = len(a), len(a[0])
    pivots: list[int] = []
    prev = 1
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = next((i for i in range(r, rows) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        piv = a[r][c]
        ar = a[r]
        for i in range(rows):
            if i == r:
                continue
            ai = a[i]
            f = ai[c]
            if f == 0 and piv == prev:
                continue
            a[i] = [(piv * x - f * y) // prev for x, y in zip(ai, ar)]
        prev = piv
        pivots.append(c)
        r += 1
    out = []
    for i, row in enumerate(a):
        if i < r:
            out.append([Fraction(x, prev) for x in row])
        else:
            out.append([Fraction(0)] * cols)
    return out, pivots


def rank(m: Sequence[Sequence]) -> int:
    """Rank of an integer or rational matrix (fraction-free elimination)."""
    rows = [list(r) for r in m]
    if not rows:
        return 0
    if any(isinstance(x, Fraction) and x.denominator != 1 for r in rows for x in r):
        return len(rref(rows)[1])
    rows = [[int(x) for x in r] for r in rows]
    return _bareiss_rank(rows)


def _bareiss_rank(a: list[list[int]]) -> int:
    nrows, ncols = len(a), len(a[0])
    prev = 1
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        p = next((i for i in range(r, nrows) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        piv = a[r][c]
        for i in range(r + 1, nrows):
            f = a[i][c]
            a[i] = [(piv * x - f * y) // prev for x, y in zip(a[i], a[r])]
        prev = piv
        r += 1
    return r


def solve_in_span(basis_rows: Sequence[Sequence], target: Sequence) -> list[Fraction] | None:
    """Coefficients ``c`` with ``sum_i c[i] * basis_rows[i] == target``, or None.

    Free directions (dependent rows) get coefficient zero.
    """
    rows = to_matrix(basis_rows)
    t = [rat(x) for x in target]
    k = len(rows)
    if k == 0:
        return [] if all(x == 0 for x in t) else None
    if len(rows[0]) != len(t):
        raise ValueError("dimension mismatch")
    # Solve A^T c = t with A^T = columns of the basis rows.
    aug = [[rows[i][j] for i in range(k)] + [t[j]] for j in range(len(t))]
    red, piv = rref(aug)
    if k in piv:
        return None
    coef = [Fraction(0)] * k
    for row, c in zip(red, piv):
        coef[c] = row[k]
    return coef


def nullspace(m: Sequence[Sequence]) -> Mat:
    """Basis of ``{x : m x = 0}``."""
    a = to_matrix(m)
    if not a:
        return []
    cols = len(a[0])
    red, piv = rref(a)
    free = [c for c in range(cols) if c not in piv]
    basis = []
    for f in free:
        x = [Fraction(0)] * cols
        x[f] = Fraction(1)
        for row, c in zip(red, piv):
            x[c] = -row[f]
        basis.append(x)
    return basis


def inverse(m: Sequence[Sequence]) -> Mat:
    a = to_matrix(m)
    n = len(a)
    if any(len(r) != n for r in a):
        raise ValueError("inverse of a non-square matrix")
    aug = [row + ident for row, ident in zip(a, identity(n))]
    red, piv = rref(aug)
    if piv[:n] != list(range(n)):
        raise ZeroDivisionError("singular matrix")
    return [row[n:] for row in red]


def mat_vec(m: Sequence[Sequence], v: Sequence) -> list:
    return [sum(x * y for x, y in zip(row, v)) for row in m]


def vec_mat(v: Sequence, m: Sequence[Sequence]) -> list:
    cols = len(m[0]) if m else 0
    out = [0] * cols
    for c, row in zip(v, m):
        if c:
            for j, x in enumerate(row):
                if x:
                    out[j] += c * x
    return out


def dot(u: Sequence, v: Sequence):
    return sum(x * y for x, y in zip(u, v))


def primitive(v: Iterable) -> tuple[int, ...]:
    """Positive rescaling of a rational vector to coprime integers.

    The direction (and hence every sign) is preserved.  The zero vector is
    returned unchanged.
    """
    q = [rat(x) for x in v]
    lcm = 1
    for x in q:
        lcm = lcm * x.denominator // gcd(lcm, x.denominator)
    ints = [int(x * lcm) for x in q]
    g = 0
    for x in ints:
        g = gcd(g, x)
    if g > 1:
        ints = [x // g for x in ints]
    return tuple(ints)


def rank_mod_p(rows: Sequence[Sequence[int]], p: int = 2_147_483_629) -> int:
    """Rank over GF(p).  Never exceeds the rank over Q."""
    import numpy as np

    a = np.array(rows, dtype=object) % p
    a = a.astype(np.int64)
    nrows, ncols = a.shape
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        nz = np.nonzero(a[r:, c])[0]
        if nz.size == 0:
            continue
        i = r + nz[0]
        if i != r:
            a[[r, i]] = a[[i, r]]
        inv = pow(int(a[r, c]), p - 2, p)
        a[r] = (a[r] * inv) % p
        below = a[r + 1:, c].copy()
        if below.any():
            # split the product to stay below 2**63
            hi = (below[:, None] * (a[r] >> 16)[None, :]) % p
            lo = (below[:, None] * (a[r] & 0xFFFF)[None, :]) % p
            prod = ((hi * 65536) % p + lo) % p
            a[r + 1:] = (a[r + 1:] - prod) % p
        r += 1
    return r
