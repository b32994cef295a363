"""Versioned JSON documents for cones, certificates, reports and proof bundles.

Every document carries ``format`` and ``version`` fields.  Quantities
(form coefficients, multipliers, divisor coordinates) are strings in the
canonical ``p`` / ``p/q`` encoding; structural integers (n, indices,
counts) are plain JSON integers.  Rendering is canonical, so equal
objects always produce identical bytes.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Sequence

from . import exactla
from .cone import ConeH
from .engine import FiltrationReport, ProofBundle, StepRecord
from .lp import FarkasCertificate

VERSION = 1


class FormatError(ValueError):
    pass


def dumps(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=True) + "\n"


def write(path: Path, doc: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(dumps(doc))
    tmp.replace(path)


def read(path: Path, kind: str | None = None) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if kind is not None:
        check_header(doc, kind, path)
    return doc


def header(kind: str) -> dict:
    return {"format": f"nefcone/{kind}", "version": VERSION}


def check_header(doc, kind: str, where="document") -> None:
    if not isinstance(doc, dict) or doc.get("format") != f"nefcone/{kind}":
        raise FormatError(f"{where}: not a nefcone/{kind} document")
    if doc.get("version") != VERSION:
        raise FormatError(f"{where}: unsupported version {doc.get('version')!r}")


def encode_vec(v: Sequence) -> list[str]:
    return [exactla.encode_rat(x) for x in v]


def decode_vec(v, integral: bool = False) -> tuple:
    if not isinstance(v, list):
        raise FormatError("expected a list of rationals")
    try:
        out = tuple(exactla.decode_rat(x) for x in v)
    except (ValueError, AttributeError, TypeError) as exc:
        raise FormatError(str(exc)) from exc
    if integral:
        if any(q.denominator != 1 for q in out):
            raise FormatError("expected integer entries")
        return tuple(int(q) for q in out)
    return out


# ---------------------------------------------------------------------------
# cones


def cone_doc(c: ConeH, n: int, ambient: str) -> dict:
    if ambient not in ("full", "basis"):
        raise FormatError(f"ambient kind must be full or basis, got {ambient!r}")
    doc = header("cone")
    doc.update(n=n, ambient=ambient, labels=list(c.labels), minimal=bool(c.minimal),
               forms=[encode_vec(f) for f in c.forms])
    if c.rays is not None:
        doc["rays"] = [encode_vec(r) for r in c.rays]
        doc["lines"] = [encode_vec(l) for l in c.lines]
    return doc


def parse_cone(doc) -> tuple[ConeH, int, str]:
    check_header(doc, "cone")
    try:
        labels = tuple(doc["labels"])
        forms = [decode_vec(f, True) for f in doc["forms"]]
        rays = [decode_vec(r, True) for r in doc["rays"]] if "rays" in doc else None
        lines = [decode_vec(l, True) for l in doc.get("lines", [])]
        n, ambient = int(doc["n"]), doc["ambient"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed cone document: {exc}") from exc
    if any(len(f) != len(labels) for f in forms):
        raise FormatError("form length differs from the number of labels")
    c = ConeH.build(labels, forms, rays, lines, bool(doc.get("minimal", False)))
    if len(c.forms) != len(forms) or list(c.forms) != [tuple(f) for f in forms]:
        raise FormatError("forms are not normalized, unique and canonically ordered")
    return c, n, ambient


# ---------------------------------------------------------------------------
# certificates


def certificate_doc(cert: FarkasCertificate, index: int | None = None) -> dict:
    doc = header("certificate")
    doc.update(target=encode_vec(cert.target),
               support=[[i, exactla.encode_rat(m)] for i, m in cert.support])
    if index is not None:
        doc["outer_index"] = index
    return doc


def parse_certificate(doc) -> FarkasCertificate:
    check_header(doc, "certificate")
    try:
        target = decode_vec(doc["target"], True)
        support = []
        for i, m in doc["support"]:
            if not isinstance(i, int) or isinstance(i, bool):
                raise FormatError(f"form index {i!r} is not an integer")
            support.append((i, exactla.decode_rat(m)))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed certificate: {exc}") from exc
    return FarkasCertificate(target, tuple(support))


# ---------------------------------------------------------------------------
# reports

_STEP_FIELDS = ("step", "added", "raw", "facets", "gamma", "violated", "enlarged")


def step_doc(rec: StepRecord) -> dict:
    d = {k: getattr(rec, k) for k in _STEP_FIELDS}
    if d["violated"] is not None:
        d["violated"] = list(d["violated"])
    return d


def parse_step(d) -> StepRecord:
    try:
        vals = {k: d[k] for k in _STEP_FIELDS}
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed step record: {exc}") from exc
    if vals["violated"] is not None:
        vals["violated"] = tuple(vals["violated"])
    return StepRecord(**vals)


def report_doc(r: FiltrationReport) -> dict:
    doc = header("report")
    doc.update(n=r.n, mode=r.mode, labels=list(r.labels), status=r.status, message=r.message,
               steps=[step_doc(s) for s in r.steps])
    return doc


def parse_report(doc) -> FiltrationReport:
    check_header(doc, "report")
    try:
        r = FiltrationReport(int(doc["n"]), doc["mode"], tuple(doc["labels"]),
                             [parse_step(s) for s in doc["steps"]], doc["status"], doc["message"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed report: {exc}") from exc
    return r


def render_table(r: FiltrationReport) -> str:
    """Two-row layout: one column per cone of the filtration."""
    head = ["", *[f"E({s.step})" for s in r.steps]]
    rows = [head,
            ["facets", *[str(s.facets) for s in r.steps]],
            ["gamma", *["-" if s.gamma is None else str(s.gamma) for s in r.steps]]]
    widths = [max(len(row[k]) for row in rows) for k in range(len(head))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    added = ", ".join(s.added for s in r.steps if s.added)
    lines.append(f"n={r.n} mode={r.mode} status={r.status}" + (f" added: {added}" if added else ""))
    if r.message:
        lines.append(r.message)
    return "\n".join(lines) + "\n"


def render_csv(r: FiltrationReport) -> str:
    out = ["step,facets,gamma"]
    out += [f"{s.step},{s.facets},{'' if s.gamma is None else s.gamma}" for s in r.steps]
    return "\n".join(out) + "\n"


def render_report(r: FiltrationReport, fmt: str) -> str:
    if fmt == "table":
        return render_table(r)
    if fmt == "csv":
        return render_csv(r)
    if fmt == "structured":
        return dumps(report_doc(r))
    raise FormatError(f"unknown report format {fmt!r}")


# ---------------------------------------------------------------------------
# proof bundles

MANIFEST = "manifest.json"


def write_bundle(bundle: ProofBundle, out: Path) -> Path:
    out = Path(out)
    inner_kind = "full" if len(bundle.inner.labels) == len(bundle.report.labels) and \
        bundle.report.mode == "ambient-line" else "basis"
    write(out / "cones" / "inner.json", cone_doc(bundle.inner.without_generators(), bundle.n, inner_kind))
    write(out / "cones" / "outer.json", cone_doc(bundle.outer.without_generators(), bundle.n, inner_kind))
    names = []
    for k, cert in enumerate(bundle.certificates):
        name = f"certificates/{k:06d}.json"
        write(out / name, certificate_doc(cert, k))
        names.append(name)
    doc = header("bundle")
    doc.update(n=bundle.n, inner="cones/inner.json", outer="cones/outer.json",
               certificates=names, report=report_doc(bundle.report))
    write(out / MANIFEST, doc)
    return out / MANIFEST


def digest(obj: Any) -> str:
    return hashlib.sha256(dumps(obj).encode()).hexdigest()
