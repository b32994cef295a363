"""Acceptance criteria, one test (or group) per criterion.

Every test carries a ``criterion`` marker; the terminal summary prints one
PASS/FAIL line per criterion.  The optional n=7 ambient steps 6-7 run
under their own key, ``8.opt``.
"""
import random
import time
from fractions import Fraction
from itertools import combinations

import pytest

import goldens
import oracle
import sampling
from helpers import ambient_vector, basis_vector
from nefcone import cli, cone, engine, formats, lp, moduli
from nefcone.cone import positive_orthant


def criterion(key, title):
    return pytest.mark.criterion(str(key), title)


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def step_names(report, k):
    rec, c = report.steps[k], report.cones[k]
    return sorted(c.labels[c.forms[j].index(1)] for j in rec.violated)


@criterion(1, "dimension identities for n = 4..7")
def test_c1_dimensions():
    with Timer() as t:
        got = [(moduli.ambient_dim(n), len(moduli.enumerate_classes(n)), len(moduli.relation_basis(n)),
                moduli.picard_dim(n), len(moduli.basis_Bn(n))) for n in range(4, 8)]
    assert [g[0] for g in got] == [3, 10, 25, 56]
    assert [g[1] for g in got] == [3, 10, 25, 56]
    assert [g[2] for g in got] == [2, 5, 9, 14]
    assert [g[3] for g in got] == [1, 5, 16, 42]
    assert [g[4] for g in got] == [1, 5, 16, 42]
    assert t.seconds < 1


@criterion(2, "F-nef form counts and the printed n=5 list")
def test_c2_fnef():
    with Timer() as t:
        counts = [len(moduli.fnef_forms(n)) for n in (5, 6, 7)]
        n5 = set(moduli.fnef_forms(5))
    assert counts == [10, 65, 350]
    assert n5 == {ambient_vector(5, f) for f in goldens.FNEF5}
    assert t.seconds < 1


@criterion(3, "n=5 worked example: first system, facet sequence, final facets, containment")
def test_c3_n5_example():
    with Timer() as t:
        first = cone.sum_line(positive_orthant(moduli.enumerate_classes(5).labels), moduli.relation_basis(5)[0])
        report = engine.run_ambient_filtration(5)
        ok, certs = lp.contains(engine.fnef_cone(5), report.cones[-1])
    assert set(first.forms) == {ambient_vector(5, f) for f in goldens.E5_STEP1}
    assert report.facet_counts()[:5] == [10, 10, 12, 11, 10]
    assert set(report.cones[-1].forms) == {ambient_vector(5, f) for f in goldens.E5_FACETS}
    assert ok and all(lp.verify_certificate(engine.fnef_cone(5), c) for c in certs)
    assert t.seconds < 10


def orthant_gamma(n, basis):
    section = engine.fnef_section(n, basis)
    return lp.containment_index(section, positive_orthant([b.label for b in basis]))[0]


def oracle_gamma_n5(classes):
    # a basis coordinate is violated iff some extreme ray of the section is negative on it
    amb = moduli.enumerate_classes(5)
    cols = [amb.index(c) for c in classes]
    forms = [[f[j] for j in cols] for f in moduli.fnef_forms(5)]
    rays = oracle.extreme_rays([f for f in forms if any(f)], len(cols))
    return sum(1 for j in range(len(cols)) if any(r[j] < 0 for r in rays))


@criterion(4, "containment index of the B_n orthant (0, 1, 7) and n=5 random-complement smoke test")
def test_c4_orthant_gammas():
    with Timer() as t:
        gammas = [orthant_gamma(n, moduli.basis_Bn(n)) for n in (5, 6, 7)]
    assert gammas == [0, 1, 7]
    assert t.seconds < 60


@criterion(4, "containment index of the B_n orthant (0, 1, 7) and n=5 random-complement smoke test")
def test_c4_random_complements():
    classes = moduli.enumerate_classes(5).classes
    population = {}
    for subset in combinations(classes, 5):
        if moduli.is_complement(5, subset):
            population[subset] = orthant_gamma(5, subset)
            assert population[subset] == oracle_gamma_n5(subset)
    rng = random.Random(20240607)
    sample = []
    while len(sample) < 1000:
        subset = tuple(sorted(rng.sample(classes, 5)))
        if subset in population:
            sample.append(population[subset])
    assert min(sample) >= 0 and max(sample) <= 2
    mean = Fraction(sum(sample), len(sample))
    assert abs(mean - Fraction(111, 100)) <= Fraction(3, 10)


@criterion(5, "n=6 ambient filtration facets and gamma")
def test_c5_n6_ambient():
    with Timer() as t:
        r = engine.run_ambient_filtration(6, keep_cones=False)
    assert r.facet_counts() == [25, 33, 77, 109, 175, 266, 341, 871, 1420, 2750]
    assert r.gammas() == [25, 33, 77, 109, 175, 260, 326, 781, 1033, 0]
    assert t.seconds < 15 * 60


@criterion(6, "n=6 quotient filtration in the printed order")
def test_c6_n6_quotient():
    with Timer() as t:
        r = engine.run_quotient_filtration(6, order=list(engine.STANDARD_ORDERS[6]),
                                           stop_at_containment=False, keep_cones=False)
    assert r.facet_counts() == [16, 25, 34, 49, 108, 239, 491, 869, 1419, 2750]
    assert r.gammas() == [1, 0, 0, 0, 0, 0, 0, 0, 0, 0]
    assert t.seconds < 15 * 60


@pytest.fixture(scope="module")
def n7_quotient():
    with Timer() as t:
        r = engine.run_quotient_filtration(7, order=list(engine.STANDARD_ORDERS[7]))
    return r, t.seconds


@criterion(7, "n=7 quotient filtration steps 0-5, violated set, enlarged counts")
def test_c7_n7_quotient(n7_quotient):
    r, seconds = n7_quotient
    assert [s.added for s in r.steps[1:]] == ["1,2,3", "4,6,7", "1,3,5", "2,4,6", "3,5,7"]
    assert r.facet_counts() == [42, 91, 196, 477, 1433, 5753]
    assert r.gammas() == [7, 14, 16, 8, 4, 0]
    assert step_names(r, 0) == sorted(goldens.VIOLATED7)
    assert [(s.enlarged, len(p.violated)) for s, p in zip(r.steps[1:], r.steps)] == \
        [(3, 7), (8, 14), (13, 16), (6, 8), (4, 4)]
    assert seconds < 3600


@criterion(7, "n=7 quotient filtration steps 0-5, violated set, enlarged counts")
def test_c7_gamma_audit(n7_quotient):
    r, _ = n7_quotient
    section = engine.fnef_section(7, moduli.basis_Bn(7))
    for rec, c in zip(r.steps, r.cones):
        assert lp.containment_index(section, c)[0] == rec.gamma


@criterion(8, "n=7 ambient filtration steps 0-5")
def test_c8_n7_ambient():
    with Timer() as t:
        r = engine.run_ambient_filtration(7, max_steps=5, keep_cones=False)
    assert r.facet_counts() == [56, 104, 544, 1320, 4052, 12276]
    assert t.seconds < 2 * 3600


@criterion("8.opt", "n=7 ambient filtration steps 6-7 (optional)")
def test_c8_n7_ambient_long():
    r = engine.run_ambient_filtration(7, max_steps=7, keep_cones=False)
    assert r.facet_counts()[6:] == [28966, 99281]
    assert r.gammas()[7] == 99249


@criterion(9, "containment certificates for n = 5, 6, 7 pass the arithmetic audit")
@pytest.mark.parametrize("n,count", [(5, 10), (6, 25), (7, 5753)])
def test_c9_certificates(n, count, tmp_path):
    bundle = engine.verify_theorem(n)
    assert bundle.ok and len(bundle.certificates) == count
    assert bundle.audit() == (count, [])
    formats.write_bundle(bundle, tmp_path)
    assert cli.audit_bundle(tmp_path) == (count, count, [])


def n4_n5_cones():
    out = []
    for n in (4, 5):
        amb = moduli.enumerate_classes(n)
        units = [tuple(int(i == j) for j in range(amb.N)) for i in range(amb.N)]
        r = engine.run_ambient_filtration(n)
        for k, c in enumerate(r.cones):
            out.append((c, units, list(moduli.relation_basis(n)[:k])))
        basis = moduli.basis_Bn(n)
        q = engine.run_quotient_filtration(n, order=list(engine.STANDARD_ORDERS.get(n, ())) or "greedy")
        for c in q.cones:
            d = len(basis)
            out.append((c, [tuple(int(i == j) for j in range(d)) for i in range(d)], []))
    return out


@criterion(10, "naive double-description oracle agrees on the n=4,5 pipelines and 200 random steps")
def test_c10_pipelines():
    for c, rays, lines in n4_n5_cones():
        assert set(c.forms) == oracle.facets(rays, lines, c.dim)


@criterion(10, "naive double-description oracle agrees on the n=4,5 pipelines and 200 random steps")
def test_c10_random_steps():
    rng = random.Random(7)
    for k in range(200):
        dim = rng.randint(2, 8)
        while True:
            rays = [tuple(rng.randint(-3, 3) for _ in range(dim)) for _ in range(dim + rng.randint(0, 3))]
            if oracle.rank(rays, dim) == dim:
                break
        v = tuple(rng.choice([x for x in range(-3, 4)]) for _ in range(dim))
        if not any(v):
            v = (1,) + v[1:]
        kind = "line" if k % 2 else "ray"
        labels = tuple(f"x{i}" for i in range(dim))
        c = cone.ConeH.build(labels, oracle.facets(rays, [], dim), rays, (), True)
        expected = oracle.facets(rays + ([v] if kind == "ray" else []), [v] if kind == "line" else [], dim)
        for method, start in (("dd", c), ("lp", c.without_generators())):
            assert set(cone.minkowski_step(start, v, kind, method=method).cone.forms) == expected


@criterion(11, "printed quotient-coordinate expansions for n = 6, 7")
def test_c11_expansions():
    with Timer() as t:
        q6 = moduli.quotient_coordinates(6)
        q7 = moduli.quotient_coordinates(7)
    for q, n, printed, basis in ((q6, 6, goldens.EXPANSIONS6, goldens.BASIS6),
                                 (q7, 7, goldens.EXPANSIONS7, goldens.BASIS7)):
        assert len(printed) == {6: 9, 7: 5}[n]
        for label, terms in printed.items():
            assert q[moduli.parse_class(n, label)] == basis_vector(basis, terms)
    assert t.seconds < 1


@criterion(12, "effective representation of 100 sampled F-nef points at n = 5 and n = 6")
@pytest.mark.parametrize("n", [5, 6])
def test_c12_effective(n):
    rels = moduli.relation_basis(n)
    for a in sampling.fnef_points(n, 100, seed=n):
        rep = engine.effective_representation(n, a)
        assert rep.feasible and rep.check()
        assert all(x >= 0 for x in rep.b)
        diff = [b - x for b, x in zip(rep.b, a)]
        assert oracle.rank(list(rels) + [diff], len(a)) == len(rels)
