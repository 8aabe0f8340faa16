"""Command-line front end: ``poisson-lab <command> ...``.

Exit codes: 0 success, 2 load error, 3 check failure, 4 internal error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
import traceback
from typing import Optional, Sequence

import numpy as np

from . import gallery
from .classify import CHECK_IDS, DEFAULT_SAMPLES, DEFAULT_TOL, DefectReport, classify, default_seed
from .errors import LeftValidityBox, PoissonLabError
from .foliation import LeafTrace, trace_leaf
from .identities import IDENTITIES, run_identities
from .report import ReportDocument
from .structure import Structure, load_structure
from .submersion import SUBMERSION_CHECKS, check_submersion, parse_submersion

EXIT_OK, EXIT_LOAD, EXIT_CHECK, EXIT_INTERNAL = 0, 2, 3, 4


class LoadFailure(Exception):
    pass


# loading ------------------------------------------------------------------------------------

def _load(target: str, kind: str, allow_non_poisson: bool):
    """Resolve a gallery id or a file path; returns (object, entry or None, source)."""
    try:
        if os.path.exists(target):
            with open(target, encoding="utf-8") as fh:
                text = fh.read()
            if kind == "structure":
                return load_structure(text, allow_non_poisson=allow_non_poisson), None, target
            return parse_submersion(text, allow_non_poisson=allow_non_poisson), None, target
        entry = gallery.get(target)
        if entry.kind != kind:
            raise LoadFailure(f"{target!r} is a {entry.kind} entry, expected a {kind}")
        if kind == "structure":
            # the override flag is the caller's to give, even for flagged gallery entries
            obj = load_structure(entry.text, allow_non_poisson=allow_non_poisson)
        else:
            obj = parse_submersion(entry.text, allow_non_poisson=allow_non_poisson)
        return obj, entry, "gallery"
    except LoadFailure:
        raise
    except (PoissonLabError, OSError, ValueError) as exc:
        raise LoadFailure(str(exc)) from exc


def _split_list(text: Optional[str]) -> Optional[list]:
    if text is None:
        return None
    return [t.strip() for t in text.split(",") if t.strip()]


def _seed(args) -> int:
    return default_seed() if args.seed is None else int(args.seed)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _document(args, argv, name, source, seed, samples, reports, expected, decisive, t0) -> ReportDocument:
    return ReportDocument(
        command=list(argv),
        structure=name,
        source=source,
        seed=seed,
        samples=samples,
        tolerance=args.tol if args.tol is not None else DEFAULT_TOL,
        reports=reports,
        expected=expected,
        decisive=decisive,
        wall_time=None if args.reproducible else round(time.perf_counter() - t0, 6),
    )


def _finish(doc: ReportDocument, args) -> int:
    _emit(doc.to_json(), args.out)
    bad = doc.failures()
    if bad:
        print(f"checks not meeting expectation: {', '.join(bad)}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def _decisive(names, entry, explicit: bool):
    """Which checks set the exit code, and what is expected of each.

    An explicit --checks list requires every named check to pass. Otherwise a
    gallery entry's annotations decide (measure-only checks never count) and
    structures from files require every check to pass.
    """
    if explicit or entry is None:
        return list(names), {n: "pass" for n in names}
    expected = {n: entry.expected.get(n, gallery.MEASURE) for n in names}
    return [n for n in names if expected[n] != gallery.MEASURE], expected


def _tolerances(args, entry, names) -> dict:
    if args.tol is not None:
        return {n: float(args.tol) for n in names}
    return dict(entry.tolerances) if entry is not None else {}


# commands -----------------------------------------------------------------------------------

def cmd_check(args, argv) -> int:
    t0 = time.perf_counter()
    S, entry, source = _load(args.target, "structure", args.allow_non_poisson)
    names = _split_list(args.checks) or list(CHECK_IDS)
    unknown = [n for n in names if n not in CHECK_IDS]
    if unknown:
        raise LoadFailure(f"unknown checks: {', '.join(unknown)}")
    seed = _seed(args)
    rep = classify(S, samples=args.samples, seed=seed, tol=args.tol if args.tol is not None else DEFAULT_TOL,
                   checks=names, tolerances=_tolerances(args, entry, names))
    decisive, expected = _decisive(names, entry, args.checks is not None)
    if entry is not None:
        rep.notes.extend(entry.notes)
    doc = _document(args, argv, S.name, source, seed, args.samples, [rep], expected, decisive, t0)
    return _finish(doc, args)


def cmd_identities(args, argv) -> int:
    t0 = time.perf_counter()
    S, entry, source = _load(args.target, "structure", args.allow_non_poisson)
    names = _split_list(args.checks) or list(IDENTITIES)
    unknown = [n for n in names if n not in IDENTITIES]
    if unknown:
        raise LoadFailure(f"unknown identities: {', '.join(unknown)}")
    seed = _seed(args)
    tolerances = {n: float(args.tol) for n in names} if args.tol is not None else None
    rep = run_identities(S, samples=args.samples, seed=seed, checks=names, tolerances=tolerances)
    doc = _document(args, argv, S.name, source, seed, args.samples, [rep],
                    {n: "pass" for n in names}, list(names), t0)
    return _finish(doc, args)


def cmd_submersion(args, argv) -> int:
    t0 = time.perf_counter()
    sub, entry, source = _load(args.target, "submersion", args.allow_non_poisson)
    names = _split_list(args.checks)
    if names is not None:
        unknown = [n for n in names if n not in SUBMERSION_CHECKS]
        if unknown:
            raise LoadFailure(f"unknown submersion checks: {', '.join(unknown)}")
    seed = _seed(args)
    recs = check_submersion(sub, samples=args.samples, seed=seed,
                            tol=args.tol if args.tol is not None else DEFAULT_TOL,
                            checks=names, tolerances=_tolerances(args, entry, names or SUBMERSION_CHECKS))
    rep = DefectReport(sub.name, seed, args.samples, recs,
                       list(entry.notes) if entry is not None else [])
    ran = [r.check for r in recs]
    decisive, expected = _decisive(ran, entry, names is not None)
    doc = _document(args, argv, sub.name, source, seed, args.samples, [rep], expected, decisive, t0)
    return _finish(doc, args)


def _schedule(args, S: Structure) -> list:
    if args.schedule:
        out = []
        for part in args.schedule.split(","):
            name, _, dur = part.partition(":")
            out.append((_coord(S, name.strip()), float(dur)))
        return out
    if args.ham is None:
        raise LoadFailure("give --ham with --t, or --schedule")
    return [(_coord(S, args.ham), float(args.t))]


def _coord(S: Structure, name: str):
    if name in S.coords:
        return name
    if name.isdigit() and 1 <= int(name) <= S.dim:
        return int(name) - 1
    raise LoadFailure(f"unknown coordinate {name!r}")


def leaf_svg(trace: LeafTrace, coords: Sequence[str], plane=(0, 1), title: str = "", size: int = 480) -> str:
    """Static SVG 1.1: orthographic projection of a trace with axes and a title."""
    i, j = plane
    pts = trace.points[:, [i, j]] if len(trace.points) else np.zeros((0, 2))
    lo = np.minimum(pts.min(axis=0), 0.0) if len(pts) else np.array([-1.0, -1.0])
    hi = np.maximum(pts.max(axis=0), 0.0) if len(pts) else np.array([1.0, 1.0])
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-9))
    pad = 40.0
    scale = (size - 2 * pad) / span

    def xy(p):
        return pad + (p[0] - lo[0]) * scale, size - pad - (p[1] - lo[1]) * scale

    ox, oy = xy((0.0, 0.0))
    poly = " ".join(f"{x:.3f},{y:.3f}" for x, y in (xy(p) for p in pts))
    return "\n".join([
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<title>{_esc(title)}</title>',
        f'<text x="{size / 2:.1f}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{_esc(title)}</text>',
        f'<line x1="{pad}" y1="{oy:.3f}" x2="{size - pad}" y2="{oy:.3f}" stroke="#888" stroke-width="1"/>',
        f'<line x1="{ox:.3f}" y1="{pad}" x2="{ox:.3f}" y2="{size - pad}" stroke="#888" stroke-width="1"/>',
        f'<text x="{size - pad + 4}" y="{oy + 4:.3f}" font-family="sans-serif" font-size="12">{_esc(coords[i])}</text>',
        f'<text x="{ox + 4:.3f}" y="{pad - 6}" font-family="sans-serif" font-size="12">{_esc(coords[j])}</text>',
        f'<polyline points="{poly}" fill="none" stroke="#1f5fbf" stroke-width="1.5"/>',
        "</svg>",
        "",
    ])


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def cmd_leaf(args, argv) -> int:
    S, entry, source = _load(args.target, "structure", args.allow_non_poisson)
    try:
        start = [float(v) for v in args.start.split(",")]
    except ValueError as exc:
        raise LoadFailure(f"bad --start {args.start!r}") from exc
    if len(start) != S.dim:
        raise LoadFailure(f"--start needs {S.dim} coordinates")
    sched = _schedule(args, S)
    plane = None
    if args.plane:
        names = _split_list(args.plane)
        if len(names) != 2:
            raise LoadFailure("--plane takes two coordinates")
        plane = tuple(S.coords.index(n) if n in S.coords else int(n) - 1 for n in names)
    code = EXIT_OK
    try:
        trace = trace_leaf(S, start, sched, step=args.h)
    except LeftValidityBox as exc:
        if exc.trace is None:
            raise LoadFailure("start point is outside the validity region") from exc
        print(str(exc), file=sys.stderr)
        trace, code = exc.trace, EXIT_INTERNAL
    _emit(trace.to_csv(S.coords), args.out)
    if plane is None:
        # the two coordinates that move the most
        spread = np.ptp(trace.points, axis=0) if len(trace.points) else np.zeros(S.dim)
        plane = tuple(sorted(np.argsort(-spread, kind="stable")[:2].tolist()))
    if args.svg:
        with open(args.svg, "w", encoding="utf-8") as fh:
            fh.write(leaf_svg(trace, S.coords, plane, title=f"{S.name} leaf through {args.start}"))
    return code


def cmd_list(args, argv) -> int:
    for e in gallery.list_entries():
        print(f"{e.id:40s} {e.kind:10s} {e.reference}")
    return EXIT_OK


def cmd_describe(args, argv) -> int:
    try:
        e = gallery.get(args.target)
    except PoissonLabError as exc:
        raise LoadFailure(str(exc)) from exc
    lines = [f"id: {e.id}", f"kind: {e.kind}", f"reference: {e.reference}"]
    obj = gallery.load(e.id)
    desc = getattr(obj, "description", "")
    if desc:
        lines.append(f"description: {desc}")
    lines.append("expected checks:")
    for check, want in e.expected_table():
        tol = e.tolerances.get(check)
        lines.append(f"  {check:28s} {want}" + (f"  (tol {tol!r})" if tol is not None else ""))
    for n in e.notes:
        lines.append(f"note: {n}")
    if e.id.split("@")[0] in gallery.J_REG_TERMS:
        dev = gallery.j_reg_deviation(e.id, obj.base)
        lines.append("displayed J_reg vs canonical J at base: "
                     + ", ".join(f"{k} reading {v:.3g}" for k, v in dev.items()))
    print("\n".join(lines))
    return EXIT_OK


# argument parsing ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, samples: int) -> None:
    p.add_argument("target", help="gallery id or path to a file")
    p.add_argument("--samples", type=int, default=samples)
    p.add_argument("--seed", type=int, default=None, help="default: $POISSON_LAB_SEED or 0")
    p.add_argument("--checks", default=None, help="comma-separated check ids")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--allow-non-poisson", action="store_true")
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    p.add_argument("--format", choices=["json"], default="json")
    p.add_argument("--reproducible", action="store_true", help="omit wall-clock timing")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="poisson-lab", description="Poisson and metric structure checks")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("check", help="classify a structure")
    _common(p, DEFAULT_SAMPLES)
    p.set_defaults(func=cmd_check)
    p = sub.add_parser("identities", help="run the identity suite on a structure")
    _common(p, 100)
    p.set_defaults(func=cmd_identities)
    p = sub.add_parser("submersion", help="check a submersion between two structures")
    _common(p, 100)
    p.set_defaults(func=cmd_submersion)
    p = sub.add_parser("leaf", help="trace a leaf by Hamiltonian flows (CSV)")
    p.add_argument("target")
    p.add_argument("--start", required=True, help="comma-separated start point")
    p.add_argument("--ham", default=None, help="coordinate whose Hamiltonian flow to follow")
    p.add_argument("--t", type=float, default=1.0, help="flow time for --ham")
    p.add_argument("--schedule", default=None, help="coord:duration,... (overrides --ham/--t)")
    p.add_argument("--h", type=float, default=1e-3, help="RK4 step")
    p.add_argument("--svg", default=None)
    p.add_argument("--plane", default=None, help="two coordinates for the SVG projection")
    p.add_argument("--out", default=None)
    p.add_argument("--allow-non-poisson", action="store_true")
    p.set_defaults(func=cmd_leaf)
    p = sub.add_parser("list", help="list gallery entries")
    p.set_defaults(func=cmd_list)
    p = sub.add_parser("describe", help="show a gallery entry and its expected checks")
    p.add_argument("target")
    p.set_defaults(func=cmd_describe)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, argv)
    except LoadFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOAD
    except Exception:  # noqa: BLE001 - report anything unexpected as internal
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

