"""Filtrations of the effective cone and the containment proofs built on them.

Two filtrations are supported.  In the ambient one the positive orthant of
W_n is enlarged by the Keel relation lines one at a time, and every cone is
compared with the full F-nef cone.  In the quotient one the orthant of a
basis of Pic is enlarged by rays delta_S, and every cone is compared with
the F-nef cone restricted to the basis section.

Containment indices are maintained incrementally: a facet that survives a
step keeps its verdict, and a new facet combined from two bounded parents
inherits the matching combination of their certificates.  Only the
remaining facets go to the LP.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Callable, Sequence

from . import exactla, lp, moduli
from .cone import ConeH, StepTrace, eliminate, minkowski_step, positive_orthant, restrict_to_section
from .moduli import BoundaryClass

log = logging.getLogger(__name__)

AMBIENT = "ambient-line"
QUOTIENT = "quotient-ray"

# Orders of added classes that reproduce the published quotient runs.
STANDARD_ORDERS: dict[int, tuple[str, ...]] = {
    5: (),
    6: ("1,2,3", "1,2", "1,2,4", "1,3", "1,3,5", "2,4", "3,5", "4,6", "5,6"),
    7: ("1,2,3", "4,6,7", "1,3,5", "2,4,6", "3,5,7"),
}

# Ambient runs at n = 7 beyond this many lines need an explicit override.
AMBIENT_N7_LIMIT = 7


class EngineError(RuntimeError):
    pass


class GreedyDeadEnd(EngineError):
    pass


@dataclass
class StepRecord:
    step: int
    added: str | None
    raw: int | None
    facets: int
    gamma: int | None
    violated: tuple[int, ...] | None
    enlarged: int | None
    seconds: float = 0.0


@dataclass
class FiltrationReport:
    n: int
    mode: str
    labels: tuple[str, ...]
    steps: list[StepRecord] = field(default_factory=list)
    status: str = "running"
    message: str = ""
    cones: list[ConeH] = field(default_factory=list, repr=False)
    tracker: "ContainmentTracker | None" = field(default=None, repr=False, compare=False)

    @property
    def final(self) -> StepRecord:
        return self.steps[-1]

    @property
    def contained(self) -> bool:
        return bool(self.steps) and self.steps[-1].gamma == 0

    def facet_counts(self) -> list[int]:
        return [s.facets for s in self.steps]

    def gammas(self) -> list[int | None]:
        return [s.gamma for s in self.steps]


# ---------------------------------------------------------------------------
# incremental containment index


def combine_certificates(target, plus: lp.FarkasCertificate, minus: lp.FarkasCertificate,
                         c_plus: int, c_minus: int, g: int) -> lp.FarkasCertificate:
    """Certificate of ``(c_plus*P + c_minus*M) / g`` from certificates of P and M."""
    acc: dict[int, Fraction] = {}
    for cert, c in ((plus, c_plus), (minus, c_minus)):
        f = Fraction(c, g)
        for idx, m in cert.support:
            acc[idx] = acc.get(idx, Fraction(0)) + m * f
    support = tuple(sorted((i, m) for i, m in acc.items() if m))
    return lp.FarkasCertificate(tuple(target), support)


class ContainmentTracker:
    """Boundedness verdicts of every facet of a growing cone over a fixed inner cone."""

    def __init__(self, inner: ConeH, workers: int = 1):
        self.inner = inner
        self.workers = workers
        self.oracle = lp.ConeMembership(inner)
        self.verdicts: list[lp.BoundednessVerdict] = []
        self.lp_targets = 0

    def reset(self, cone: ConeH) -> None:
        self.lp_targets += len(cone)
        self.verdicts = lp.decide_all(self.inner, cone.forms, self.workers, self.oracle)

    def advance(self, trace: StepTrace) -> None:
        forms = trace.cone.forms
        new: list[lp.BoundednessVerdict | None] = [None] * len(forms)
        pending = []
        for k, o in enumerate(trace.origin):
            if len(o) == 1:
                new[k] = self.verdicts[o[0]]
                continue
            ip, jn, cp, cm, g = o
            vp, vm = self.verdicts[ip], self.verdicts[jn]
            if vp.bounded and vm.bounded:
                cert = combine_certificates(forms[k], vp.certificate, vm.certificate, cp, cm, g)
                new[k] = lp.BoundednessVerdict(True, cert)
            else:
                pending.append(k)
        self.lp_targets += len(pending)
        solved = lp.decide_all(self.inner, [forms[k] for k in pending], self.workers, self.oracle)
        for k, v in zip(pending, solved):
            new[k] = v
        self.verdicts = new

    @property
    def violated(self) -> tuple[int, ...]:
        return tuple(k for k, v in enumerate(self.verdicts) if not v.bounded)

    def certificates(self) -> list[lp.FarkasCertificate]:
        if any(not v.bounded for v in self.verdicts):
            raise EngineError("containment does not hold; no complete certificate set")
        return [v.certificate for v in self.verdicts]


def enlarged_count(cone: ConeH, violated: Sequence[int], v: Sequence[int]) -> int:
    """How many of the violated forms are negative on the added generator."""
    return sum(1 for k in violated if exactla.dot(cone.forms[k], v) < 0)


# ---------------------------------------------------------------------------
# ambient filtration


def fnef_cone(n: int) -> ConeH:
    return ConeH.build(moduli.enumerate_classes(n).labels, moduli.fnef_forms(n))


def fnef_section(n: int, basis: Sequence[BoundaryClass]) -> ConeH:
    """The F-nef cone restricted to the coordinate section of ``basis``."""
    return restrict_to_section(fnef_cone(n), [b.label for b in basis])


def run_ambient_filtration(n: int, generators: Sequence[Sequence[int]] | None = None,
                           max_steps: int | None = None, *, compute_gamma: bool = True,
                           allow_long: bool = False, method: str = "auto", workers: int = 1,
                           on_step: Callable[[StepRecord, ConeH], None] | None = None,
                           keep_cones: bool = True,
                           resume: tuple[Sequence[StepRecord], ConeH] | None = None) -> FiltrationReport:
    """Orthant of W_n plus one relation line per step, with facets and containment index.

    ``resume`` continues from stored step records and the cone of the last
    one; its containment index is recomputed and must match the record.
    """
    moduli.check_n(n)
    amb = moduli.enumerate_classes(n)
    gens = [tuple(int(x) for x in g) for g in (generators if generators is not None
                                               else moduli.relation_basis(n))]
    budget = 2 * moduli.relation_dim(n)
    if max_steps is None:
        max_steps = min(budget, AMBIENT_N7_LIMIT) if n == 7 and not allow_long else budget
    elif n == 7 and max_steps > AMBIENT_N7_LIMIT and not allow_long:
        raise EngineError(f"n=7 ambient runs beyond {AMBIENT_N7_LIMIT} steps need allow_long=True")
    if max_steps < 0:
        raise EngineError("max_steps must be nonnegative")
    report = FiltrationReport(n, AMBIENT, amb.labels)
    tracker = ContainmentTracker(fnef_cone(n), workers) if compute_gamma else None
    if resume is None:
        cone = positive_orthant(amb.labels)
        t0 = time.perf_counter()
        violated = None
        if tracker:
            tracker.reset(cone)
            violated = tracker.violated
        _record(report, StepRecord(0, None, None, len(cone), _len(violated), violated, None,
                                   time.perf_counter() - t0), cone, keep_cones, on_step)
    else:
        cone, violated = _resume(report, resume, tracker, keep_cones)
        for k, rec in enumerate(report.steps[1:]):
            if rec.added != f"v{k + 1}":
                raise EngineError(f"stored step {k + 1} added {rec.added}, expected v{k + 1}")
    steps = min(max_steps, len(gens))
    for i in range(len(report.steps) - 1, steps):
        t0 = time.perf_counter()
        v = gens[i]
        enl = enlarged_count(cone, violated, v) + enlarged_count(cone, violated, [-x for x in v]) \
            if violated is not None else None
        trace = minkowski_step(cone, v, "line", method=method, workers=workers)
        cone = trace.cone
        if tracker:
            tracker.advance(trace)
            violated = tracker.violated
        rec = StepRecord(i + 1, f"v{i + 1}", trace.raw, len(cone), _len(violated), violated, enl,
                         time.perf_counter() - t0)
        _record(report, rec, cone, keep_cones, on_step)
    report.tracker = tracker
    if len(report.steps) - 1 < len(gens):
        report.status = "budget"
        report.message = f"stopped after {steps} of {len(gens)} lines"
    elif report.final.gamma == 0:
        report.status = "contained"
    else:
        report.status = "complete"
    if not keep_cones:
        report.cones = [cone]
    return report


def _resume(report: FiltrationReport, resume, tracker, keep_cones: bool):
    records, cone = resume
    records = list(records)
    if not records or records[-1].facets != len(cone) or tuple(cone.labels) != report.labels:
        raise EngineError("stored filtration does not match its cone")
    report.steps.extend(records)
    if keep_cones:
        report.cones.append(cone)
    violated = None
    if tracker:
        tracker.reset(cone)
        violated = tracker.violated
        if records[-1].gamma is not None and records[-1].gamma != len(violated):
            raise EngineError(f"stored gamma {records[-1].gamma} differs from recount {len(violated)}")
        records[-1].violated = violated
        records[-1].gamma = len(violated)
    return cone, violated


def _len(x) -> int | None:
    return None if x is None else len(x)


def _record(report: FiltrationReport, rec: StepRecord, cone: ConeH, keep: bool, on_step) -> None:
    report.steps.append(rec)
    if keep:
        report.cones.append(cone)
    log.info("%s n=%d step %d: %s facets=%d gamma=%s", report.mode, report.n, rec.step,
             rec.added or "-", rec.facets, rec.gamma)
    if on_step is not None:
        on_step(rec, cone)


# ---------------------------------------------------------------------------
# quotient filtration


def greedy_select(candidates: Sequence[tuple[BoundaryClass, Sequence[int]]],
                  violated_forms: Sequence[Sequence[int]]) -> tuple[BoundaryClass, tuple[int, ...], int]:
    """Candidate negative on the most violated forms; ties go to the smallest class."""
    if not violated_forms:
        raise EngineError("greedy selection needs at least one violated form")
    best = None
    for cls, vec in sorted(candidates, key=lambda cv: cv[0]):
        hits = sum(1 for h in violated_forms if exactla.dot(h, vec) < 0)
        if best is None or hits > best[2]:
            best = (cls, tuple(vec), hits)
    if best is None or best[2] == 0:
        raise GreedyDeadEnd("no candidate is negative on any violated form")
    return best


def as_class(n: int, item) -> BoundaryClass:
    if isinstance(item, BoundaryClass):
        return item
    if isinstance(item, str):
        return moduli.parse_class(n, item)
    return moduli.canonical_class(n, item)


def quotient_rays(n: int, basis: Sequence[BoundaryClass]) -> dict[BoundaryClass, tuple[int, ...]]:
    """Primitive integer direction of every non-basis class in basis coordinates."""
    qc = moduli.quotient_coordinates(n, basis)
    members = set(basis)
    return {c: exactla.primitive(v) for c, v in qc.items() if c not in members}


def run_quotient_filtration(n: int, basis: Sequence | None = None,
                            order: str | Sequence = "greedy", max_steps: int | None = None, *,
                            stop_at_containment: bool = True, method: str = "auto",
                            workers: int = 1,
                            on_step: Callable[[StepRecord, ConeH], None] | None = None,
                            keep_cones: bool = True,
                            resume: tuple[Sequence[StepRecord], ConeH] | None = None) -> FiltrationReport:
    """Orthant of a basis section plus one delta_S ray per step, compared with the restricted F-nef cone.

    ``order`` is ``"greedy"`` or an explicit sequence of classes.  The run
    stops at the first cone containing the F-nef section unless
    ``stop_at_containment`` is false; greedy runs always stop there since
    no form is left to aim at.
    """
    moduli.check_n(n)
    if basis is None:
        basis = moduli.basis_Bn(n)
    basis = tuple(sorted(as_class(n, b) for b in basis))
    if not moduli.is_complement(n, basis):
        raise moduli.NotAComplement("the basis classes do not span a complement of the relations")
    labels = tuple(b.label for b in basis)
    rays = quotient_rays(n, basis)
    greedy = isinstance(order, str)
    if greedy and order != "greedy":
        raise EngineError(f"unknown order {order!r}")
    explicit: list[BoundaryClass] = []
    if not greedy:
        for item in order:
            cls = as_class(n, item)
            if cls not in rays:
                raise EngineError(f"{cls} is a basis class or repeated")
            if cls in explicit:
                raise EngineError(f"{cls} appears twice in the order")
            explicit.append(cls)
    if max_steps is None:
        max_steps = moduli.relation_dim(n) if greedy else len(explicit)

    report = FiltrationReport(n, QUOTIENT, labels)
    tracker = ContainmentTracker(fnef_section(n, basis), workers)
    if resume is None:
        cone = positive_orthant(labels)
        t0 = time.perf_counter()
        tracker.reset(cone)
        violated = tracker.violated
        _record(report, StepRecord(0, None, None, len(cone), len(violated), violated, None,
                                   time.perf_counter() - t0), cone, keep_cones, on_step)
    else:
        cone, violated = _resume(report, resume, tracker, keep_cones)
    used = [as_class(n, rec.added) for rec in report.steps[1:]]
    if not greedy and used != explicit[:len(used)]:
        raise EngineError("stored steps do not follow the requested order")
    used = set(used)
    step = len(report.steps) - 1
    while True:
        if not violated and (stop_at_containment or greedy):
            report.status = "contained"
            break
        if step >= max_steps:
            report.status = "contained" if not violated else "budget"
            if violated:
                report.message = f"budget of {max_steps} steps exhausted with gamma={len(violated)}"
            break
        if greedy:
            cands = [(c, v) for c, v in rays.items() if c not in used]
            try:
                cls, vec, _ = greedy_select(cands, [cone.forms[k] for k in violated])
            except GreedyDeadEnd as exc:
                report.status = "dead-end"
                report.message = str(exc)
                break
        else:
            if step >= len(explicit):
                report.status = "contained" if not violated else "budget"
                if violated:
                    report.message = f"order exhausted with gamma={len(violated)}"
                break
            cls = explicit[step]
            vec = rays[cls]
        used.add(cls)
        t0 = time.perf_counter()
        enl = enlarged_count(cone, violated, vec)
        trace = minkowski_step(cone, vec, "ray", method=method, workers=workers)
        cone = trace.cone
        tracker.advance(trace)
        violated = tracker.violated
        step += 1
        rec = StepRecord(step, cls.label, trace.raw, len(cone), len(violated), violated, enl,
                         time.perf_counter() - t0)
        _record(report, rec, cone, keep_cones, on_step)
    report.tracker = tracker
    if not keep_cones:
        report.cones = [cone]
    return report


def raw_system_sizes(n: int, steps: int | None = None) -> list[int]:
    """Sizes of the bare elimination systems for the ambient filtration (nothing removed)."""
    amb = moduli.enumerate_classes(n)
    forms = list(positive_orthant(amb.labels).forms)
    sizes = [len(forms)]
    for v in moduli.relation_basis(n)[:steps]:
        forms = eliminate(forms, v, "line")
        sizes.append(len(forms))
    return sizes


# ---------------------------------------------------------------------------
# effective representatives


@dataclass(frozen=True)
class EffectiveRepresentation:
    """``b = a + sum_m t[m] * relation_basis(n)[m]`` with b >= 0, or a separating functional."""

    n: int
    a: tuple[Fraction, ...]
    feasible: bool
    t: tuple[Fraction, ...] | None = None
    b: tuple[Fraction, ...] | None = None
    witness: tuple[int, ...] | None = None

    def check(self) -> bool:
        rels = moduli.relation_basis(self.n)
        if self.feasible:
            if any(x < 0 for x in self.b):
                return False
            combo = exactla.vec_mat(self.t, rels)
            if any(bi != ai + ci for ai, bi, ci in zip(self.a, self.b, combo)):
                return False
            # independent of t: the difference must lie in the relation span
            diff = [bi - ai for ai, bi in zip(self.a, self.b)]
            return exactla.solve_in_span(rels, diff) is not None
        w = self.witness
        return (all(x >= 0 for x in w) and all(exactla.dot(w, r) == 0 for r in rels)
                and exactla.dot(w, self.a) < 0)


def effective_representation(n: int, a: Sequence) -> EffectiveRepresentation:
    """Shift ``a`` by relations into the nonnegative orthant, if possible.

    Infeasibility comes with a functional that is nonnegative on the
    orthant, zero on every relation and negative on ``a``.
    """
    moduli.check_n(n)
    amb = moduli.enumerate_classes(n)
    a = tuple(exactla.rat(x) for x in a)
    if len(a) != amb.N:
        raise EngineError(f"divisor of length {len(a)}, expected {amb.N}")
    rels = moduli.relation_basis(n)
    M = len(rels)
    if all(x >= 0 for x in a):
        return EffectiveRepresentation(n, a, True, tuple([Fraction(0)] * M), a)
    # a = b - V^T t+ + V^T t-  with b, t+, t- >= 0
    scale = 1
    for x in a:
        scale = scale * x.denominator // gcd(scale, x.denominator)
    rhs = [int(x * scale) for x in a]
    A = []
    for j in range(amb.N):
        row = [int(i == j) for i in range(amb.N)]
        row += [-rels[m][j] for m in range(M)] + [rels[m][j] for m in range(M)]
        A.append(row)
    status, z = lp.feasibility(A, rhs)
    if status == "feasible":
        b = tuple(z[j] / scale for j in range(amb.N))
        t = tuple((z[amb.N + m] - z[amb.N + M + m]) / scale for m in range(M))
        rep = EffectiveRepresentation(n, a, True, t, b)
    else:
        rep = EffectiveRepresentation(n, a, False, witness=exactla.primitive([-y for y in z]))
    if not rep.check():
        raise AssertionError("effective representation failed its own check")
    return rep


# ---------------------------------------------------------------------------
# bounds and proofs


def worst_case_bound(N: int, d: int) -> Fraction | int:
    """N^(2^d) / 4^(2^d - 1): facet bound after d eliminations, as an exact rational."""
    if N < 1 or d < 0:
        raise EngineError("need N >= 1 and d >= 0")
    e = 2 ** d
    q = Fraction(N ** e, 4 ** (e - 1))
    return q.numerator if q.denominator == 1 else q


@dataclass
class ProofBundle:
    n: int
    report: FiltrationReport
    inner: ConeH
    outer: ConeH
    certificates: list[lp.FarkasCertificate]

    @property
    def ok(self) -> bool:
        return self.report.contained and len(self.certificates) == len(self.outer)

    def audit(self) -> tuple[int, list[int]]:
        """Re-check every certificate by arithmetic only; returns (verified, failing indices)."""
        bad = [k for k, (f, c) in enumerate(zip(self.outer.forms, self.certificates))
               if tuple(c.target) != f or not lp.verify_certificate(self.inner, c)]
        return len(self.certificates) - len(bad), bad


def verify_theorem(n: int, *, mode: str | None = None, order: str | Sequence | None = None,
                   workers: int = 1) -> ProofBundle:
    """Filtration to containment plus one certificate per facet of the final cone.

    The default is the quotient filtration, except at n = 5 where the
    ambient cone (orthant plus all relation lines, 10 facets) is certified.
    """
    if n not in STANDARD_ORDERS:
        raise EngineError(f"verify_theorem supports n in {sorted(STANDARD_ORDERS)}, got {n}")
    if mode is None:
        mode = AMBIENT if n == 5 else QUOTIENT
    if mode == AMBIENT:
        report = run_ambient_filtration(n, workers=workers, keep_cones=False)
    elif mode == QUOTIENT:
        if order is None:
            order = STANDARD_ORDERS[n]
        report = run_quotient_filtration(n, order=order, stop_at_containment=True,
                                         workers=workers, keep_cones=False)
    else:
        raise EngineError(f"unknown mode {mode!r}")
    tracker = report.tracker
    outer = report.cones[-1]
    if not report.contained:
        raise EngineError(f"no containment: gamma={report.final.gamma}, violated forms "
                          f"{[outer.describe(k) for k in report.final.violated]}")
    certs = tracker.certificates()
    bundle = ProofBundle(n, report, tracker.inner, outer, certs)
    ok, bad = bundle.audit()
    if bad:
        raise AssertionError(f"{len(bad)} certificates failed the audit")
    return bundle
