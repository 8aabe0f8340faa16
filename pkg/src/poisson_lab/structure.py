"""Structures on a single chart: bivector, cometric, optional J, Casimirs.

A structure file is line oriented::

    name = so3_euclid
    dim = 3
    coords = x, y, z
    pi x y = z              # upper triangle, indices are names or 1-based
    pi y z = x
    pi x z = -y
    metric x x = 1          # cometric g^{ij}, upper triangle
    J x y = z               # optional, J_i^j acting on covectors
    casimir = x^2 + y^2 + z^2
    base = 0, 0, 1
    box = [-2, 2] x [-2, 2] x [-2, 2]
    exclude = x^2 + y^2 + z^2 - 0.01 <= 0   # points where this holds are excluded

Missing ``metric`` entries default to the Euclidean cometric when no metric
line is given at all. Cosymplectic data is declared with ``omega i j`` and
``eta i`` lines.
"""

from __future__ import annotations

import math
import re
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainError,
    ExprSyntaxError,
    ParseError,
    PoissonLabError,
    SingularG,
    ValidationError,
)
from .expr import Const, Expr, ZERO, parse_expr

VALIDATION_POINTS = 32
VALIDATION_SEED = 20240611


# matrix fields ---------------------------------------------------------------

class MatrixField:
    """An n x n tensor field whose value and first partials can be evaluated."""

    n: int

    def jet(self, p) -> tuple[np.ndarray, np.ndarray]:
        """Return (value[i, j], der[i, j, l] = d_l value[i, j])."""
        raise NotImplementedError

    def value(self, p) -> np.ndarray:
        return self.jet(p)[0]


class ExprMatrix(MatrixField):
    """Matrix of expressions; ``kind`` is 'skew', 'sym' or 'full'."""

    def __init__(self, exprs, kind: str = "full"):
        arr = np.empty((len(exprs), len(exprs)), dtype=object)
        for i, row in enumerate(exprs):
            for j, e in enumerate(row):
                arr[i, j] = e
        self.exprs = arr
        self.n = arr.shape[0]
        self.kind = kind

    @classmethod
    def from_entries(cls, n: int, entries: dict, kind: str) -> "ExprMatrix":
        rows = [[ZERO] * n for _ in range(n)]
        for (i, j), e in entries.items():
            rows[i][j] = e
            if kind == "skew" and i != j:
                rows[j][i] = _negate(e)
            elif kind == "sym":
                rows[j][i] = e
        return cls(rows, kind)

    def entries(self):
        """Stored entries: upper triangle for skew/sym kinds, everything else."""
        for i in range(self.n):
            for j in range(self.n):
                if self.kind == "skew" and j <= i:
                    continue
                if self.kind == "sym" and j < i:
                    continue
                e = self.exprs[i, j]
                if isinstance(e, Const) and e.value == 0.0:
                    continue
                yield i, j, e

    def jet(self, p):
        n = self.n
        val = np.zeros((n, n))
        der = np.zeros((n, n, len(p)))
        for i, j, e in self.entries():
            jt = e.jet(p)
            val[i, j] = jt.val
            der[i, j] = jt.der
            if self.kind == "skew":
                val[j, i] = -jt.val
                der[j, i] = -jt.der
            elif self.kind == "sym":
                val[j, i] = jt.val
                der[j, i] = jt.der
        return val, der

    def value(self, p):
        n = self.n
        val = np.zeros((n, n))
        for i, j, e in self.entries():
            v = e(p)
            val[i, j] = v
            if self.kind == "skew":
                val[j, i] = -v
            elif self.kind == "sym":
                val[j, i] = v
        return val

    def max_index(self) -> int:
        return max((e.max_index() for _, _, e in self.entries()), default=-1)


class NegInverseField(MatrixField):
    """The field -W^{-1} for an invertible matrix field W (e.g. pi = -omega^{-1})."""

    def __init__(self, form: MatrixField):
        self.form = form
        self.n = form.n

    def jet(self, p):
        W, dW = self.form.jet(p)
        try:
            Winv = np.linalg.inv(W)
        except np.linalg.LinAlgError as exc:
            raise DomainError("form is not invertible") from exc
        # d(-W^{-1}) = W^{-1} dW W^{-1}
        der = np.einsum("ia,abl,bj->ijl", Winv, dW, Winv)
        return -Winv, der


def _negate(e: Expr) -> Expr:
    from .expr import neg

    return neg(e)


# box -----------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, p, slack: float = 0.0) -> bool:
        return all(l - slack <= x <= h + slack for x, l, h in zip(p, self.lo, self.hi))

    def to_text(self) -> str:
        return " x ".join(f"[{_num(l)}, {_num(h)}]" for l, h in zip(self.lo, self.hi))


def _num(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 1e16 else repr(v)


# structure -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Structure:
    name: str
    coords: tuple
    pi: MatrixField
    cometric: MatrixField
    J: Optional[MatrixField] = None
    casimirs: tuple = ()
    base: tuple = ()
    box: Optional[Box] = None
    exclude: Optional[Expr] = None
    signature: Optional[tuple] = None
    omega: Optional[MatrixField] = None
    eta: Optional[tuple] = None
    description: str = ""
    _cache: dict = field(default_factory=OrderedDict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def has_J(self) -> bool:
        return self.J is not None

    def at(self, p) -> "PointData":
        """Pointwise data at p (cached for recently used points)."""
        key = tuple(float(x) for x in np.asarray(p, dtype=float).ravel())
        if len(key) != self.dim:
            raise DimensionMismatch(f"point has dimension {len(key)}, chart has {self.dim}")
        pd = self._cache.get(key)
        if pd is None:
            pd = PointData(self, np.array(key))
            self._cache[key] = pd
            if len(self._cache) > 256:
                self._cache.popitem(last=False)
        return pd

    def admissible(self, p) -> bool:
        """Inside the validity box and outside the excluded locus."""
        if self.box is not None and not self.box.contains(p):
            return False
        if self.exclude is not None:
            try:
                return self.exclude(p) > 0.0
            except DomainError:
                return False
        return True

    def sample(self, count: int, seed: int) -> np.ndarray:
        """Seeded uniform sample of admissible points in the validity box."""
        if self.box is None:
            raise PoissonLabError(f"structure {self.name!r} declares no validity box")
        rng = np.random.Generator(np.random.PCG64(int(seed)))
        lo = np.asarray(self.box.lo, dtype=float)
        hi = np.asarray(self.box.hi, dtype=float)
        out = []
        attempts = 0
        limit = max(1000, 1000 * count)
        while len(out) < count:
            if attempts >= limit:
                raise PoissonLabError(
                    f"could not sample {count} admissible points for {self.name!r}"
                )
            p = lo + (hi - lo) * rng.random(self.dim)
            attempts += 1
            if self.admissible(p):
                out.append(p)
        return np.array(out).reshape(count, self.dim)

    def to_text(self) -> str:
        return dump_structure(self)


class PointData:
    """Values and first partials of all structure fields at one point.

    Index conventions: Pi[i, j] = pi^{ij}, G[i, j] = g^{ij} (cometric),
    Jm[i, j] = J_i^j, and derivative arrays carry the differentiation index
    last, e.g. dPi[i, j, l] = d_l pi^{ij}.
    """

    def __init__(self, S: Structure, p: np.ndarray):
        self.S = S
        self.p = p
        self.n = S.dim
        self.Pi, self.dPi = S.pi.jet(p)
        self.G, self.dG = S.cometric.jet(p)
        if S.J is not None:
            self.Jm, self.dJm = S.J.jet(p)
        else:
            self.Jm = self.dJm = None

    @cached_property
    def Gcov(self) -> np.ndarray:
        """Covariant metric g_{ij}, inverse of the cometric."""
        cond = np.linalg.cond(self.G)
        if not np.isfinite(cond) or cond > 1e13:
            raise SingularG(f"cometric is singular at {tuple(self.p)} (cond {cond:.3e})")
        return np.linalg.inv(self.G)

    @cached_property
    def dGcov(self) -> np.ndarray:
        g = self.Gcov
        return -np.einsum("ia,abl,bj->ijl", g, self.dG, g)

    @cached_property
    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.Pi), initial=0.0)))

    def symbols(self):
        from .connections import contravariant_symbols_at

        return contravariant_symbols_at(self)

    def cov_symbols(self):
        from .connections import covariant_symbols_at

        return covariant_symbols_at(self)


# parsing -----------------------------------------------------------------------

_KEYED = re.compile(r"^(pi|metric|J|omega)\s+(\S+)\s+(\S+)\s*=\s*(.+)$")
_ETA = re.compile(r"^eta\s+(\S+)\s*=\s*(.+)$")
_PLAIN = re.compile(r"^([A-Za-z_]+)\s*=\s*(.*)$")
_INTERVAL = re.compile(r"\[\s*([^,\]]+)\s*,\s*([^\]]+)\s*\]")


def _strip_comment(line: str) -> str:
    i = line.find("#")
    return (line if i < 0 else line[:i]).strip()


def _float(text: str, lineno: int) -> float:
    try:
        v = float(parse_expr(text.strip(), [])(()))
    except (ExprSyntaxError, DomainError, ValueError) as exc:
        raise ParseError(lineno, f"bad number {text.strip()!r}: {exc}") from exc
    return v


def _parse_point(text: str, n: int, lineno: int) -> tuple:
    parts = [t for t in re.split(r"[,\s]+", text.strip().strip("()")) if t]
    if len(parts) != n:
        raise ParseError(lineno, f"point needs {n} coordinates, got {len(parts)}")
    return tuple(_float(t, lineno) for t in parts)


def _parse_box(text: str, n: int, lineno: int) -> Box:
    intervals = _INTERVAL.findall(text)
    rest = _INTERVAL.sub("", text)
    if rest.replace("x", "").replace("×", "").replace("*", "").strip():
        raise ParseError(lineno, f"malformed box {text!r}")
    if len(intervals) != n:
        raise ParseError(lineno, f"box needs {n} intervals, got {len(intervals)}")
    lo, hi = [], []
    for a, b in intervals:
        l, h = _float(a, lineno), _float(b, lineno)
        if not (math.isfinite(l) and math.isfinite(h) and l < h):
            raise ParseError(lineno, f"empty or unbounded interval [{a}, {b}]")
        lo.append(l)
        hi.append(h)
    return Box(tuple(lo), tuple(hi))


def _index(tok: str, coords: Sequence[str], lineno: int) -> int:
    if tok in coords:
        return list(coords).index(tok)
    if tok.isdigit():
        k = int(tok)
        if 1 <= k <= len(coords):
            return k - 1
    raise ParseError(lineno, f"unknown index {tok!r}")


def _expr(text: str, coords, lineno: int) -> Expr:
    try:
        return parse_expr(text.strip(), coords)
    except ExprSyntaxError as exc:
        raise ParseError(lineno, f"{exc} in {text.strip()!r}") from exc


def parse_structure(text: str) -> Structure:
    """Parse structure-file text without running the validation checks."""
    header = {}
    keyed = []
    etas = []
    casimirs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        m = _KEYED.match(line)
        if m:
            keyed.append((lineno, m.group(1), m.group(2), m.group(3), m.group(4)))
            continue
        m = _ETA.match(line)
        if m:
            etas.append((lineno, m.group(1), m.group(2)))
            continue
        m = _PLAIN.match(line)
        if not m:
            raise ParseError(lineno, f"cannot parse line {line!r}")
        key, val = m.group(1), m.group(2).strip()
        if key == "casimir":
            casimirs.append((lineno, val))
        elif key in ("name", "dim", "coords", "base", "box", "exclude", "signature", "description"):
            if key in header:
                raise ParseError(lineno, f"duplicate key {key!r}")
            header[key] = (lineno, val)
        else:
            raise ParseError(lineno, f"unknown key {key!r}")

    for key in ("dim", "coords"):
        if key not in header:
            raise ParseError(0, f"missing required key {key!r}")
    lineno, dim_text = header["dim"]
    try:
        n = int(dim_text)
    except ValueError as exc:
        raise ParseError(lineno, f"dim must be an integer, got {dim_text!r}") from exc
    if n < 1:
        raise ParseError(lineno, "dim must be positive")
    lineno, coord_text = header["coords"]
    coords = tuple(t for t in re.split(r"[,\s]+", coord_text) if t)
    if len(coords) != n:
        raise ParseError(lineno, f"{len(coords)} coordinate names for dim {n}")
    if len(set(coords)) != n:
        raise ParseError(lineno, "duplicate coordinate names")
    for c in coords:
        if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", c):
            raise ParseError(lineno, f"bad coordinate name {c!r}")
        if c in ("sin", "cos", "exp", "log", "sqrt", "abs"):
            raise ParseError(lineno, f"coordinate name {c!r} clashes with a function")

    tables = {"pi": {}, "metric": {}, "J": {}, "omega": {}}
    for lineno, kind, a, b, etext in keyed:
        i, j = _index(a, coords, lineno), _index(b, coords, lineno)
        if kind in ("pi", "omega") and i == j:
            raise ParseError(lineno, f"diagonal {kind} entry must vanish")
        if kind in ("pi", "omega", "metric") and i > j:
            if kind == "metric":
                i, j = j, i
                e = _expr(etext, coords, lineno)
            else:
                i, j = j, i
                e = _negate(_expr(etext, coords, lineno))
        else:
            e = _expr(etext, coords, lineno)
        if (i, j) in tables[kind]:
            raise ParseError(lineno, f"duplicate {kind} entry ({coords[i]}, {coords[j]})")
        tables[kind][(i, j)] = e

    pi = ExprMatrix.from_entries(n, tables["pi"], "skew")
    if tables["metric"]:
        cometric = ExprMatrix.from_entries(n, tables["metric"], "sym")
    else:
        cometric = ExprMatrix.from_entries(n, {(i, i): Const(1.0) for i in range(n)}, "sym")
    J = ExprMatrix.from_entries(n, tables["J"], "full") if tables["J"] else None
    omega = ExprMatrix.from_entries(n, tables["omega"], "skew") if tables["omega"] else None
    eta = None
    if etas:
        comps = [ZERO] * n
        for lineno, a, etext in etas:
            comps[_index(a, coords, lineno)] = _expr(etext, coords, lineno)
        eta = tuple(comps)

    name = header.get("name", (0, "unnamed"))[1]
    base = _parse_point(header["base"][1], n, header["base"][0]) if "base" in header else (0.0,) * n
    box = _parse_box(header["box"][1], n, header["box"][0]) if "box" in header else None
    exclude = None
    if "exclude" in header:
        lineno, etext = header["exclude"]
        m = re.fullmatch(r"(.+?)\s*<=\s*0", etext)
        if not m:
            raise ParseError(lineno, "exclude must read '<expr> <= 0'")
        exclude = _expr(m.group(1), coords, lineno)
    signature = None
    if "signature" in header:
        lineno, stext = header["signature"]
        parts = [t for t in re.split(r"[,\s]+", stext) if t]
        try:
            signature = tuple(int(t) for t in parts)
        except ValueError as exc:
            raise ParseError(lineno, f"bad signature {stext!r}") from exc
        if len(signature) != 2 or sum(signature) != n or min(signature) < 0:
            raise ParseError(lineno, f"signature must be 'r, s' with r + s = {n}")
    description = header.get("description", (0, ""))[1]
    return Structure(
        name=name,
        coords=coords,
        pi=pi,
        cometric=cometric,
        J=J,
        casimirs=tuple(_expr(t, coords, ln) for ln, t in casimirs),
        base=base,
        box=box,
        exclude=exclude,
        signature=signature,
        omega=omega,
        eta=eta,
        description=description,
    )


def validation_points(S: Structure, count: int = VALIDATION_POINTS) -> np.ndarray:
    pts = [np.asarray(S.base, dtype=float)]
    if S.box is not None and count > 0:
        pts.extend(S.sample(count, VALIDATION_SEED))
    return np.array(pts)


def validate_structure(S: Structure, allow_non_poisson: bool = False, tol: float = 1e-8) -> None:
    """Run the load-time checks; raise ValidationError with the worst point."""
    from .fields import casimir_defect, jacobiator

    base = np.asarray(S.base, dtype=float)
    try:
        cond = np.linalg.cond(S.at(base).G)
    except DomainError as exc:
        raise ValidationError("evaluation", base, float("inf"), str(exc)) from exc
    if not np.isfinite(cond) or cond > 1e13:
        raise ValidationError("cometric_invertible", base, float("inf"), "cometric singular at base point")
    if S.signature is not None:
        eig = np.linalg.eigvalsh(S.at(base).G)
        sig = (int(np.sum(eig > 0)), int(np.sum(eig < 0)))
        if sig != tuple(S.signature):
            raise ValidationError(
                "signature", base, float(abs(sig[1] - S.signature[1])),
                f"declared {tuple(S.signature)}, found {sig}",
            )
    checks = [("casimir", lambda pd: casimir_defect(pd))]
    if not allow_non_poisson:
        checks.append(("jacobi", lambda pd: jacobiator(pd)))
    pts = validation_points(S)
    for check, fn in checks:
        worst, worst_p = 0.0, base
        for p in pts:
            try:
                pd = S.at(p)
                d = fn(pd)
            except DomainError as exc:
                raise ValidationError("evaluation", p, float("inf"), str(exc)) from exc
            if d > worst:
                worst, worst_p = d, p
        if worst > tol:
            raise ValidationError(check, worst_p, worst)


def load_structure(text: str, allow_non_poisson: bool = False) -> Structure:
    """Parse and validate a structure file."""
    S = parse_structure(text)
    validate_structure(S, allow_non_poisson=allow_non_poisson)
    return S


def dump_structure(S: Structure) -> str:
    """Serialize to the structure-file format (expression fields only)."""
    for fld in (S.pi, S.cometric, S.J, S.omega):
        if fld is not None and not isinstance(fld, ExprMatrix):
            raise PoissonLabError(f"structure {S.name!r} has derived fields and cannot be exported")
    c = S.coords
    lines = [f"name = {S.name}", f"dim = {S.dim}", f"coords = {', '.join(c)}"]
    if S.description:
        lines.append(f"description = {S.description}")
    if S.signature is not None:
        lines.append(f"signature = {S.signature[0]}, {S.signature[1]}")
    for i, j, e in S.pi.entries():
        lines.append(f"pi {c[i]} {c[j]} = {e}")
    for i, j, e in S.cometric.entries():
        lines.append(f"metric {c[i]} {c[j]} = {e}")
    if S.J is not None:
        for i, j, e in S.J.entries():
            lines.append(f"J {c[i]} {c[j]} = {e}")
    if S.omega is not None:
        for i, j, e in S.omega.entries():
            lines.append(f"omega {c[i]} {c[j]} = {e}")
    if S.eta is not None:
        for i, e in enumerate(S.eta):
            if not (isinstance(e, Const) and e.value == 0.0):
                lines.append(f"eta {c[i]} = {e}")
    for e in S.casimirs:
        lines.append(f"casimir = {e}")
    lines.append("base = " + ", ".join(_num(v) for v in S.base))
    if S.box is not None:
        lines.append(f"box = {S.box.to_text()}")
    if S.exclude is not None:
        lines.append(f"exclude = {S.exclude} <= 0")
    return "\n".join(lines) + "\n"


def make_structure(
    name: str,
    coords: Sequence[str],
    pi: MatrixField,
    cometric: MatrixField,
    **kw,
) -> Structure:
    """Build a structure from already-constructed fields (no validation)."""
    return Structure(name=name, coords=tuple(coords), pi=pi, cometric=cometric, **kw)

