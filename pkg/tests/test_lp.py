import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

import goldens
import oracle
from nefcone import cone, engine, lp, moduli
from nefcone.cone import ConeH, positive_orthant
from nefcone.lp import FarkasCertificate


def orthant5():
    return positive_orthant(moduli.enumerate_classes(5).labels)


def unit(d, i, s=1):
    return tuple(s * int(i == j) for j in range(d))


def test_orthant_bounded():
    c = orthant5()
    v = lp.min_over_cone(c, unit(10, 0))
    assert v.bounded
    assert v.certificate.support == ((c.index_of(unit(10, 0)), 1),)


def test_orthant_unbounded():
    c = orthant5()
    v = lp.min_over_cone(c, unit(10, 0, -1))
    assert not v.bounded
    assert lp.verify_point(c, unit(10, 0, -1), v.point)
    assert v.point == unit(10, 0)


def test_violated_forms_of_orthant_n7():
    basis = moduli.basis_Bn(7)
    labels = [b.label for b in basis]
    section = engine.fnef_section(7, basis)
    outer = positive_orthant(labels)
    gamma, violated = lp.containment_index(section, outer)
    assert gamma == 7
    names = sorted(labels[outer.forms[k].index(1)] for k in violated)
    assert names == sorted(goldens.VIOLATED7)
    w145 = unit(42, labels.index("1,4,5"))
    assert not lp.min_over_cone(section, w145).bounded


def test_self_containment():
    c = engine.fnef_cone(5)
    ok, certs = lp.contains(c, c)
    assert ok and len(certs) == len(c)
    assert lp.containment_index(c, c) == (0, [])


def test_fnef5_inside_final_cone():
    c = orthant5()
    for v in moduli.relation_basis(5):
        c = cone.sum_line(c, v)
    ok, certs = lp.contains(engine.fnef_cone(5), c)
    assert ok
    assert all(lp.verify_certificate(engine.fnef_cone(5), cert) for cert in certs)


def test_quotient_n6_step1_contains_section():
    basis = moduli.basis_Bn(6)
    ray = engine.quotient_rays(6, basis)[moduli.parse_class(6, "1,2,3")]
    outer = cone.sum_ray(positive_orthant([b.label for b in basis]), ray)
    ok, certs = lp.contains(engine.fnef_section(6, basis), outer)
    assert ok and len(certs) == 25


def test_certificate_tampering_detected():
    c = engine.fnef_cone(5)
    target = tuple(2 * a + 3 * b for a, b in zip(c.forms[0], c.forms[4]))
    cert = lp.min_over_cone(c, target).certificate
    assert lp.verify_certificate(c, cert)
    i, m = cert.support[0]
    negated = FarkasCertificate(cert.target, ((i, -m),) + cert.support[1:])
    assert not lp.verify_certificate(c, negated)
    off = FarkasCertificate(tuple(cert.target[:1]) + (cert.target[1] + 1,) + tuple(cert.target[2:]), cert.support)
    assert not lp.verify_certificate(c, off)
    assert not lp.verify_certificate(c, FarkasCertificate(cert.target, ((len(c), Fraction(1)),)))


def random_cone(rng, dim, count):
    forms = [tuple(rng.randint(-4, 4) for _ in range(dim)) for _ in range(count)]
    return ConeH.build(tuple(f"x{i}" for i in range(dim)), forms)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10 ** 9), st.integers(1, 6), st.integers(0, 9))
def test_dichotomy(seed, dim, count):
    rng = random.Random(seed)
    c = random_cone(rng, dim, count)
    target = tuple(rng.randint(-4, 4) for _ in range(dim))
    guided = lp.min_over_cone(c, target)
    exact = lp._decide(c.forms, c.dim, target, guided=False)
    assert lp.verify_verdict(c, target, guided)
    assert lp.verify_verdict(c, target, exact)
    assert guided.bounded == exact.bounded
    scaled = lp.min_over_cone(c, tuple(3 * x for x in target))
    assert scaled.bounded == guided.bounded


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 9), st.integers(2, 5))
def test_bounded_iff_nonnegative_on_extreme_rays(seed, dim):
    rng = random.Random(seed)
    while True:
        rays = [tuple(rng.randint(0, 3) for _ in range(dim)) for _ in range(dim + 2)]
        if oracle.rank(rays, dim) == dim:
            break
    c = ConeH.build(tuple(f"x{i}" for i in range(dim)), oracle.facets(rays, [], dim))
    gens = oracle.extreme_rays(c.forms, dim)
    for _ in range(5):
        target = tuple(rng.randint(-3, 3) for _ in range(dim))
        expected = all(sum(a * b for a, b in zip(target, g)) >= 0 for g in gens)
        assert lp.min_over_cone(c, target).bounded == expected


def test_scaled_outer_forms_keep_gamma():
    basis = moduli.basis_Bn(6)
    labels = tuple(b.label for b in basis)
    inner = engine.fnef_section(6, basis)
    outer = positive_orthant(labels)
    scaled = ConeH(labels, tuple(tuple(5 * x for x in f) for f in outer.forms))
    assert lp.containment_index(inner, outer) == lp.containment_index(inner, scaled)


def test_workers_and_pool_agree():
    inner = engine.fnef_cone(6)
    targets = [tuple(random.Random(k).randint(-2, 2) for _ in range(25)) for k in range(40)]
    a = lp.decide_all(inner, targets, workers=1)
    b = lp.decide_all(inner, targets, workers=2)
    assert [v.bounded for v in a] == [v.bounded for v in b]
    member = lp.ConeMembership(inner)
    assert [v.bounded for v in member.decide_many(targets)] == [v.bounded for v in a]
    assert all(lp.verify_verdict(inner, t, v) for t, v in zip(targets, b))


def test_dimension_mismatch():
    with pytest.raises(lp.LPError):
        lp.min_over_cone(orthant5(), (1, 0))
    with pytest.raises(lp.LPError):
        lp.containment_index(orthant5(), engine.fnef_cone(6))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10 ** 9), st.integers(1, 4), st.integers(1, 6))
def test_solve_lp_matches_scipy(seed, m, n):
    rng = random.Random(seed)
    A = [[rng.randint(-3, 3) for _ in range(n)] for _ in range(m)]
    b = [rng.randint(-3, 3) for _ in range(m)]
    c = [rng.randint(-3, 3) for _ in range(n)]
    status, z, extra = lp.solve_lp(A, b, c)
    ref = linprog(c, A_eq=np.array(A, float), b_eq=np.array(b, float), bounds=[(0, None)] * n, method="highs")
    if status == "optimal":
        assert ref.status == 0
        assert all(x >= 0 for x in z)
        assert [sum(a * x for a, x in zip(row, z)) for row in A] == b
        assert abs(float(extra) - ref.fun) < 1e-7
    elif status == "infeasible":
        assert ref.status == 2
        y = z
        assert all(sum(y[i] * A[i][j] for i in range(m)) <= 0 for j in range(n))
        assert sum(yi * bi for yi, bi in zip(y, b)) > 0
    else:
        assert ref.status == 3
        d = extra
        assert all(x >= 0 for x in d)
        assert all(sum(a * x for a, x in zip(row, d)) == 0 for row in A)
        assert sum(ci * di for ci, di in zip(c, d)) < 0
