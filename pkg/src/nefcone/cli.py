"""Command-line front end: ``nefcone <verb> [options]``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import engine, formats, lp, moduli
from .formats import FormatError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COMPUTE = 3
EXIT_VERIFY = 4

CACHE_ENV = "NEFCONE_CACHE_DIR"

log = logging.getLogger("nefcone")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    n: int
    mode: str | None = "quotient"
    basis: str = "Bn"
    order: str = "standard"
    max_steps: int | None = None
    out: Path | None = None
    cache: Path | None = None
    workers: int = 1
    fmt: str = "table"
    allow_long: bool = False
    keep_going: bool = False

    def validate(self) -> "RunConfig":
        try:
            moduli.check_n(self.n)
        except moduli.ModuliError as exc:
            raise ConfigError(str(exc)) from exc
        if self.workers < 1:
            raise ConfigError("--workers must be at least 1")
        if self.max_steps is not None and self.max_steps < 0:
            raise ConfigError("--max-steps must be nonnegative")
        if self.mode is None and self.command != "verify":
            self.mode = "quotient"
        if self.mode not in ("ambient", "quotient", None):
            raise ConfigError(f"unknown mode {self.mode!r}")
        for p in (self.out, self.cache):
            if p is not None and p.exists() and not os.access(p, os.W_OK):
                raise ConfigError(f"{p} is not writable")
        return self


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "nefcone"


# ---------------------------------------------------------------------------
# input files


def _read_labels(path: Path) -> list[str]:
    text = Path(path).read_text()
    try:
        doc = formats.json.loads(text)
    except ValueError:
        return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if isinstance(doc, dict):
        doc = doc.get("labels", doc.get("order"))
    if not isinstance(doc, list) or not all(isinstance(x, str) for x in doc):
        raise ConfigError(f"{path}: expected a list of class labels")
    return doc


def resolve_basis(cfg: RunConfig):
    if cfg.basis == "Bn":
        return moduli.basis_Bn(cfg.n)
    try:
        classes = [moduli.parse_class(cfg.n, lab) for lab in _read_labels(Path(cfg.basis))]
    except (OSError, ValueError) as exc:
        raise ConfigError(f"basis file: {exc}") from exc
    if not moduli.is_complement(cfg.n, classes):
        raise ConfigError("basis classes do not span a complement of the relations")
    return tuple(sorted(classes))


def resolve_order(cfg: RunConfig):
    """Quotient mode: "greedy" or a list of labels.  Ambient mode: a list of vectors."""
    if cfg.mode == "quotient":
        if cfg.order == "greedy":
            return "greedy"
        if cfg.order == "standard":
            if cfg.n not in engine.STANDARD_ORDERS:
                raise ConfigError(f"no standard order for n={cfg.n}; use greedy or a file")
            return list(engine.STANDARD_ORDERS[cfg.n])
        try:
            return _read_labels(Path(cfg.order))
        except OSError as exc:
            raise ConfigError(f"order file: {exc}") from exc
    if cfg.order == "greedy":
        raise ConfigError("greedy order applies to quotient mode only")
    if cfg.order == "standard":
        return [list(v) for v in moduli.relation_basis(cfg.n)]
    doc = formats.read(Path(cfg.order))
    try:
        vecs = [list(formats.decode_vec(v, True)) for v in doc["vectors"]]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"order file needs a 'vectors' list: {exc}") from exc
    return vecs


# ---------------------------------------------------------------------------
# cache


class StepCache:
    """One file per filtration prefix; the key covers everything the prefix depends on."""

    def __init__(self, root: Path | None, base: dict):
        self.root = None if root is None else Path(root)
        self.base = dict(base, cache_version=formats.VERSION)

    def key(self, prefix) -> str:
        return formats.digest({"base": self.base, "prefix": prefix})

    def path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def load(self, prefix):
        if self.root is None:
            return None
        key = self.key(prefix)
        p = self.path(key)
        if not p.exists():
            return None
        try:
            doc = formats.read(p, "cache-entry")
            if doc.get("key") != key:
                return None
            rec = formats.parse_step(doc["record"])
            cone, _, _ = formats.parse_cone(doc["cone"])
        except (FormatError, KeyError, TypeError, ValueError):
            log.warning("ignoring unreadable cache entry %s", p)
            return None
        if rec.facets != len(cone):
            return None
        return rec, cone

    def store(self, prefix, rec, cone, n: int, ambient: str) -> None:
        if self.root is None:
            return
        key = self.key(prefix)
        doc = formats.header("cache-entry")
        doc.update(key=key, record=formats.step_doc(rec), cone=formats.cone_doc(cone, n, ambient))
        formats.write(self.path(key), doc)


def _cached_filtration(cfg: RunConfig) -> engine.FiltrationReport:
    n = cfg.n
    root = cfg.cache
    if cfg.mode == "ambient":
        gens = resolve_order(cfg)
        budget = cfg.max_steps
        if n == 7 and budget is not None and budget > engine.AMBIENT_N7_LIMIT and not cfg.allow_long:
            raise ConfigError(f"n=7 ambient runs beyond {engine.AMBIENT_N7_LIMIT} steps need --allow-long")
        if budget is None:
            budget = engine.AMBIENT_N7_LIMIT if n == 7 and not cfg.allow_long else 2 * moduli.relation_dim(n)
        total = min(budget, len(gens))
        cache = StepCache(root, {"n": n, "mode": engine.AMBIENT})
        prefixes = [gens[:k] for k in range(total + 1)]
        records, cone = _warm(cache, prefixes)

        def on_step(rec, c):
            cache.store(gens[:rec.step], rec, c, n, "full")

        kw = dict(generators=gens, max_steps=total, allow_long=True, workers=cfg.workers,
                  on_step=on_step, keep_cones=False)
        if records and len(records) == total + 1:
            return _from_records(n, engine.AMBIENT, cone.labels, records, cone,
                                 "contained" if records[-1].gamma == 0 and total == len(gens)
                                 else "complete" if total == len(gens) else "budget")
        return engine.run_ambient_filtration(n, resume=(records, cone) if records else None, **kw)

    basis = resolve_basis(cfg)
    order = resolve_order(cfg)
    stop = not cfg.keep_going
    cache = StepCache(root, {"n": n, "mode": engine.QUOTIENT, "basis": [b.label for b in basis],
                             "greedy": order == "greedy", "stop": stop})
    labels = tuple(b.label for b in basis)
    if order == "greedy":
        limit = moduli.relation_dim(n) if cfg.max_steps is None else cfg.max_steps
        prefixes = [["greedy", k] for k in range(limit + 1)]
        pref_of = lambda rec: ["greedy", rec.step]
    else:
        try:
            order = [engine.as_class(n, x).label for x in order]
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        limit = len(order) if cfg.max_steps is None else min(cfg.max_steps, len(order))
        prefixes = [order[:k] for k in range(limit + 1)]
        pref_of = lambda rec: order[:rec.step]
    records, cone = _warm(cache, prefixes)
    if records:
        last = records[-1]
        done = len(records) == limit + 1 or (last.gamma == 0 and (stop or order == "greedy"))
        if done:
            status = "contained" if last.gamma == 0 else "budget"
            return _from_records(n, engine.QUOTIENT, labels, records, cone, status)

    def on_step(rec, c):
        cache.store(pref_of(rec), rec, c, n, "basis")

    return engine.run_quotient_filtration(
        n, basis, order, limit, stop_at_containment=stop, workers=cfg.workers,
        on_step=on_step, keep_cones=False, resume=(records, cone) if records else None)


def _warm(cache: StepCache, prefixes):
    """Longest run of consecutive cached prefixes starting at the empty one."""
    records, cone = [], None
    for p in prefixes:
        hit = cache.load(p)
        if hit is None:
            break
        records.append(hit[0])
        cone = hit[1]
    return records, cone


def _from_records(n, mode, labels, records, cone, status) -> engine.FiltrationReport:
    msg = ""
    if status == "budget" and records[-1].gamma:
        msg = f"budget exhausted with gamma={records[-1].gamma}"
    r = engine.FiltrationReport(n, mode, tuple(labels), list(records), status, msg, [cone])
    return r


# ---------------------------------------------------------------------------
# verbs


def cmd_generate(cfg: RunConfig, out=sys.stdout) -> int:
    n = cfg.n
    dest = cfg.out or Path(f"nefcone-n{n}")
    amb = moduli.enumerate_classes(n)
    doc = formats.header("ambient")
    doc.update(n=n, labels=list(amb.labels))
    formats.write(dest / "ambient.json", doc)
    doc = formats.header("relations")
    doc.update(n=n, labels=list(amb.labels),
               quadruples=[list(q) for q in moduli.relation_quadruples(n)],
               vectors=[formats.encode_vec(v) for v in moduli.relation_basis(n)])
    formats.write(dest / "relations.json", doc)
    fnef = engine.fnef_cone(n)
    formats.write(dest / "fnef.json", formats.cone_doc(fnef, n, "full"))
    basis = resolve_basis(cfg)
    doc = formats.header("basis")
    doc.update(n=n, labels=[b.label for b in basis])
    formats.write(dest / "basis.json", doc)
    qc = moduli.quotient_coordinates(n, basis)
    doc = formats.header("quotient")
    doc.update(n=n, basis=[b.label for b in basis],
               expansions={c.label: formats.encode_vec(v) for c, v in qc.items()})
    formats.write(dest / "quotient.json", doc)
    formats.write(dest / "fnef-section.json",
                  formats.cone_doc(engine.fnef_section(n, basis), n, "basis"))
    print(f"n={n}: {amb.N} classes, {len(moduli.relation_basis(n))} relations, "
          f"{len(fnef)} F-nef forms, {len(basis)} basis classes -> {dest}", file=out)
    return EXIT_OK


def cmd_filtrate(cfg: RunConfig, out=sys.stdout) -> int:
    report = _cached_filtration(cfg)
    text = formats.render_report(report, cfg.fmt)
    if cfg.out is not None:
        formats.write(cfg.out / "report.json", formats.report_doc(report))
        for name, c in (("final-cone.json", report.cones[-1]),):
            kind = "full" if report.mode == engine.AMBIENT else "basis"
            formats.write(cfg.out / name, formats.cone_doc(c, cfg.n, kind))
    out.write(text)
    if report.status in ("budget", "dead-end"):
        print(f"filtration stopped: {report.status} {report.message}".rstrip(), file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out=sys.stdout) -> int:
    dest = cfg.out or Path(f"nefcone-proof-n{cfg.n}")
    mode = {None: None, "ambient": engine.AMBIENT, "quotient": engine.QUOTIENT}[cfg.mode]
    order = None
    if cfg.mode != "ambient" and cfg.order != "standard":
        order = resolve_order(cfg)
    try:
        bundle = engine.verify_theorem(cfg.n, mode=mode, order=order, workers=cfg.workers)
    except engine.EngineError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    formats.write_bundle(bundle, dest)
    ok, bad = bundle.audit()
    print(f"n={cfg.n}: containment proven, {ok}/{len(bundle.certificates)} certificates verified "
          f"-> {dest}", file=out)
    return EXIT_OK if not bad else EXIT_VERIFY


def audit_bundle(path: Path) -> tuple[int, int, list[str]]:
    """(verified, total, failing file names) using arithmetic only."""
    path = Path(path)
    manifest = formats.read(path / formats.MANIFEST, "bundle")
    inner, _, _ = formats.parse_cone(formats.read(path / manifest["inner"]))
    outer, _, _ = formats.parse_cone(formats.read(path / manifest["outer"]))
    names = manifest.get("certificates", [])
    bad = []
    for k, name in enumerate(names):
        try:
            cert = formats.parse_certificate(formats.read(path / name))
        except FormatError:
            bad.append(name)
            continue
        if k >= len(outer) or tuple(cert.target) != outer.forms[k] or not lp.verify_certificate(inner, cert):
            bad.append(name)
    if len(names) != len(outer):
        bad.append(f"{formats.MANIFEST} (lists {len(names)} certificates for {len(outer)} forms)")
    return len(names) - len([b for b in bad if b in names]), len(names), bad


def cmd_audit(bundle: Path, out=sys.stdout) -> int:
    if not (Path(bundle) / formats.MANIFEST).exists():
        print(f"audit failed: no certificates in {bundle}", file=sys.stderr)
        return EXIT_VERIFY
    try:
        ok, total, bad = audit_bundle(bundle)
    except FormatError as exc:
        print(f"audit failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    if total == 0:
        print("audit failed: no certificates", file=sys.stderr)
        return EXIT_VERIFY
    print(f"{ok}/{total} verified", file=out)
    for name in bad:
        print(f"invalid: {name}", file=sys.stderr)
    return EXIT_OK if not bad else EXIT_VERIFY


def parse_divisor(n: int, doc) -> tuple:
    formats.check_header(doc, "divisor")
    amb = moduli.enumerate_classes(n)
    if doc.get("n") != n:
        raise ConfigError(f"divisor is for n={doc.get('n')}, not n={n}")
    if "vector" in doc:
        a = formats.decode_vec(doc["vector"])
        if len(a) != amb.N:
            raise ConfigError(f"divisor vector has length {len(a)}, expected {amb.N}")
        return a
    a = [0] * amb.N
    for lab, q in doc.get("terms", {}).items():
        a[amb.index(moduli.parse_class(n, lab))] += formats.decode_vec([q])[0]
    return tuple(a)


def cmd_effective(cfg: RunConfig, divisor: Path, out=sys.stdout) -> int:
    try:
        a = parse_divisor(cfg.n, formats.read(divisor))
    except (FormatError, ValueError) as exc:
        raise ConfigError(f"divisor file: {exc}") from exc
    rep = engine.effective_representation(cfg.n, a)
    doc = formats.header("effective")
    doc.update(n=cfg.n, labels=list(moduli.enumerate_classes(cfg.n).labels),
               a=formats.encode_vec(rep.a), feasible=rep.feasible)
    if rep.feasible:
        doc.update(t=formats.encode_vec(rep.t), b=formats.encode_vec(rep.b),
                   checks={"b_nonnegative": all(x >= 0 for x in rep.b),
                           "difference_in_relation_span": rep.check()})
    else:
        doc.update(witness=formats.encode_vec(rep.witness),
                   checks={"witness_separates": rep.check()})
    text = formats.dumps(doc)
    if cfg.out is not None:
        formats.write(cfg.out / "effective.json", doc)
    out.write(text)
    return EXIT_OK if rep.feasible else EXIT_COMPUTE


def cmd_estimate(n: int | None, dim: int | None, steps: int, out=sys.stdout) -> int:
    if dim is None:
        if n is None:
            raise ConfigError("estimate needs --n or --dim")
        dim = moduli.ambient_dim(moduli.check_n(n))
    print("steps,bound", file=out)
    for d in range(steps + 1):
        b = engine.worst_case_bound(dim, d)
        print(f"{d},{formats.exactla.encode_rat(b)}", file=out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nefcone", description="Exact cone computations for F-nef divisors on M_0,n.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, mode=True, order=True):
        sp.add_argument("--n", type=int, required=True)
        if mode:
            sp.add_argument("--mode", choices=("ambient", "quotient"), default=None,
                            help="default: quotient (verify at n=5: ambient)")
        sp.add_argument("--basis", default="Bn", help="Bn or a file of class labels")
        if order:
            sp.add_argument("--order", default="standard", help="standard, greedy or a file")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", type=Path)

    sp = sub.add_parser("generate", help="write ambient index, relations, F-nef cone, basis and expansions")
    common(sp, mode=False, order=False)

    sp = sub.add_parser("filtrate", help="run a filtration and print facets and containment index per step")
    common(sp)
    sp.add_argument("--max-steps", type=int)
    sp.add_argument("--cache", type=Path, help=f"cache directory (default ${CACHE_ENV} or ~/.cache/nefcone)")
    sp.add_argument("--no-cache", action="store_true")
    sp.add_argument("--format", dest="fmt", choices=("table", "csv", "structured"), default="table")
    sp.add_argument("--allow-long", action="store_true", help="permit n=7 ambient runs beyond 7 steps")
    sp.add_argument("--keep-going", action="store_true", help="continue a fixed order after containment")

    sp = sub.add_parser("verify", help="prove containment and write a certificate bundle")
    common(sp)

    sp = sub.add_parser("audit", help="re-check every certificate of a bundle by arithmetic")
    sp.add_argument("bundle", type=Path)

    sp = sub.add_parser("effective", help="find an effective representative of a divisor")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("divisor", type=Path)
    sp.add_argument("--out", type=Path)

    sp = sub.add_parser("estimate", help="worst-case facet bound after d eliminations")
    sp.add_argument("--n", type=int)
    sp.add_argument("--dim", type=int, help="starting facet count (default: ambient dimension)")
    sp.add_argument("--max-steps", type=int, default=3)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "audit":
            return cmd_audit(args.bundle, out)
        if args.command == "estimate":
            if args.max_steps < 0 or (args.dim is not None and args.dim < 1):
                raise ConfigError("need --max-steps >= 0 and --dim >= 1")
            return cmd_estimate(args.n, args.dim, args.max_steps, out)
        cfg = RunConfig(args.command, args.n, out=getattr(args, "out", None))
        for name in ("mode", "basis", "order", "workers", "fmt", "max_steps", "allow_long", "keep_going"):
            if hasattr(args, name):
                setattr(cfg, name, getattr(args, name))
        if args.command == "filtrate":
            cfg.cache = None if args.no_cache else (args.cache or default_cache_dir())
        cfg.validate()
        if args.command == "generate":
            return cmd_generate(cfg, out)
        if args.command == "filtrate":
            return cmd_filtrate(cfg, out)
        if args.command == "verify":
            if cfg.n not in engine.STANDARD_ORDERS:
                raise ConfigError(f"verify supports n in {sorted(engine.STANDARD_ORDERS)}")
            return cmd_verify(cfg, out)
        if args.command == "effective":
            return cmd_effective(cfg, args.divisor, out)
    except (ConfigError, moduli.ModuliError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (engine.EngineError, lp.LPError, OSError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
