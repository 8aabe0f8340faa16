"""Submersions t: P -> M between structures: Poisson-map and Riemannian
submersion defects, pullback identities for the contravariant connection,
the induced partially complex structure and the cosymplectic lift.

Pulled-back coordinate covectors t*dy^a have components D[a, i] = d_i t^a,
so every identity below is evaluated on the coframe {t*dy^a}.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import connections as cn
from .classify import DEFAULT_TOL, Skip, default_seed, riemann_poisson_defect, sweep
from .errors import (
    DegenerateCosymplectic,
    MissingJ,
    NotClosed,
    ParseError,
    PoissonLabError,
    RankDeficient,
)
from .expr import parse_expr
from .structure import Box, ExprMatrix, MatrixField, NegInverseField, Structure, load_structure, make_structure

RANK_TOL = 1e-10
CLOSED_TOL = 1e-9


@dataclass(eq=False)
class SubmersionSpec:
    name: str
    P: Structure
    M: Structure
    maps: tuple  # t^a as expressions in P coordinates
    description: str = ""
    cosymplectic: Optional[Structure] = None  # original M carrying omega and eta
    _hess: list = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.maps) != self.M.dim:
            raise PoissonLabError(f"{len(self.maps)} map components for dim M = {self.M.dim}")
        if self.M.dim > self.P.dim:
            raise PoissonLabError("dim M exceeds dim P")
        self._hess = [[m.diff(i) for i in range(self.P.dim)] for m in self.maps]

    def point_map(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.array([m(p) for m in self.maps])

    def differential(self, p):
        """t(p), D[a, i] = d_i t^a and H[a, i, l] = d_l d_i t^a."""
        p = np.asarray(p, dtype=float)
        m, n = self.M.dim, self.P.dim
        tp = np.empty(m)
        D = np.empty((m, n))
        H = np.empty((m, n, n))
        for a, e in enumerate(self.maps):
            jt = e.jet(p)
            tp[a] = jt.val
            D[a] = jt.der
            for i in range(n):
                H[a, i] = self._hess[a][i].jet(p).der
        return tp, D, H


@dataclass
class _Eval:
    pP: object
    pM: object
    D: np.ndarray
    H: np.ndarray


def _evaluate(sub: SubmersionSpec, p) -> _Eval:
    tp, D, H = sub.differential(p)
    s = np.linalg.svd(D, compute_uv=False)
    if s.size == 0 or s[-1] <= RANK_TOL * max(1.0, s[0]):
        raise RankDeficient(f"dt is rank deficient at {tuple(np.asarray(p, float))}")
    return _Eval(sub.P.at(p), sub.M.at(tp), D, H)


def _maxabs(a) -> float:
    return float(np.max(np.abs(a), initial=0.0))


# basic defects --------------------------------------------------------------------

def poisson_map_defect(sub: SubmersionSpec, p) -> float:
    """max over a < b of |pi_P(t*dy^a, t*dy^b) - pi_M^{ab}(t(p))|."""
    tp, D, _ = sub.differential(p)
    PiP = sub.P.at(p).Pi
    PiM = sub.M.at(tp).Pi
    diff = D @ PiP @ D.T - PiM
    m = sub.M.dim
    iu = np.triu_indices(m, 1)
    return _maxabs(diff[iu])


def riem_submersion_defect(sub: SubmersionSpec, p) -> float:
    """max over a <= b of |<t*dy^a, t*dy^b>_P - g_M^{ab}(t(p))|."""
    e = _evaluate(sub, p)
    diff = e.D @ e.pP.G @ e.D.T - e.pM.G
    iu = np.triu_indices(sub.M.dim)
    return _maxabs(diff[iu])


def _J_of(pd, canonical_ok: bool = True):
    if pd.Jm is not None:
        return pd.Jm, pd.dJm
    if not canonical_ok:
        raise MissingJ(f"{pd.S.name!r} declares no J")
    J, dJ = cn.canonical_J(pd)
    if cn.fstructure_defect(J) >= cn.FSTRUCT_TOL:
        raise MissingJ(f"{pd.S.name!r} declares no J and its canonical J is not an f-structure")
    return J, dJ


def induced_J(sub: SubmersionSpec, p) -> np.ndarray:
    """J_M = -flat_M . dt . J'_P . sharp_P . dt*, with J'_P = -sharp J_P flat.

    As a matrix on M-covectors this is G_M^{-1} D G_P J_P D^T.
    """
    e = _evaluate(sub, p)
    JP, _ = _J_of(e.pP)
    return np.linalg.solve(e.pM.G, e.D @ e.pP.G @ JP @ e.D.T)


def pullback_identity_defects(sub: SubmersionSpec, p) -> dict:
    """All pointwise submersion identities at p; None marks a slot that does not apply."""
    e = _evaluate(sub, p)
    pP, pM, D, H = e.pP, e.pM, e.D, e.H
    m = sub.M.dim
    GamM = cn.contravariant_symbols_at(pM).Gamma
    # nabla^{t*dy^a} t*dy^b on P; jets of t*dy^b are the Hessian rows of t^b
    nab = np.array([[cn.contra_derivative(pP, D[a], D[b], H[b]) for b in range(m)] for a in range(m)])
    lhs2 = np.einsum("abi,ij,cj->abc", nab, pP.G, D)
    rhs2 = np.einsum("abk,kc->abc", GamM, pM.G)
    lhs3 = np.einsum("abi,ij,cj->abc", nab, pP.Pi, D)
    rhs3 = np.einsum("abk,kc->abc", GamM, pM.Pi)
    out = {
        "pullback_metric_conn": _maxabs(lhs2 - rhs2),
        "pullback_poisson_conn": _maxabs(lhs3 - rhs3),
    }
    # <t*a, J_P t*b>_P against <t*a, t*(J_M b)>_P
    try:
        JP, _ = _J_of(pP)
        JM, _ = _J_of(pM)
        lhs1 = D @ pP.G @ JP @ D.T
        rhs1 = D @ pP.G @ D.T @ JM
        out["pullback_J"] = _maxabs(lhs1 - rhs1)
    except MissingJ:
        JP = JM = None
        out["pullback_J"] = None
    # kernel containment t*(Ker pi_M#) in Ker pi_P#
    U, s, Vt = np.linalg.svd(pM.Pi)
    r = int(np.sum(s > 1e-10 * max(s[0], 1e-300))) if s.size else 0
    K = Vt[r:]  # rows: kernel covectors of pi_M
    out["kernel_containment"] = _maxabs((K @ D) @ pP.Pi) if K.size else 0.0
    # gradient relatedness dt(grad(y^a o t)) = grad y^a
    out["gradient_related"] = _maxabs(D @ pP.G @ D.T - pM.G)
    # (t*dy^a)# is orthogonal to Ker dt
    Vd = np.linalg.svd(D)[2]
    Z = Vd[m:]
    out["horizontal"] = _maxabs((D @ pP.G) @ pP.Gcov @ Z.T) if Z.size else 0.0
    if JP is not None:
        # basic condition: J_P t*dy^a stays in the span of the t*dy^b
        img = JP @ D.T
        coef, *_ = np.linalg.lstsq(D.T, img, rcond=None)
        out["basic_condition"] = _maxabs(D.T @ coef - img)
        JMi = np.linalg.solve(pM.G, D @ pP.G @ JP @ D.T)
        out["induced_J_compat"] = _maxabs(pM.Pi - pM.G @ JMi)
        # J_P(t*dy^a) - t*(J_M dy^a) with J_M the induced structure
        out["J_roundtrip"] = _maxabs(img - D.T @ JMi)
    else:
        out["basic_condition"] = out["induced_J_compat"] = out["J_roundtrip"] = None
    return out


# cosymplectic lift -----------------------------------------------------------------

class _LiftedForm(MatrixField):
    """omega~ = t*omega + t*eta ^ ds on M x R (last coordinate s)."""

    def __init__(self, omega: MatrixField, eta: tuple):
        self.omega = omega
        self.eta = eta
        self.n = omega.n + 1

    def jet(self, p):
        p = np.asarray(p, dtype=float)
        m = self.n - 1
        x = p[:m]
        W = np.zeros((m + 1, m + 1))
        dW = np.zeros((m + 1, m + 1, m + 1))
        w, dw = self.omega.jet(x)
        W[:m, :m] = w
        dW[:m, :m, :m] = dw
        for i, e in enumerate(self.eta):
            jt = e.jet(x)
            W[i, m], W[m, i] = jt.val, -jt.val
            dW[i, m, :m], dW[m, i, :m] = jt.der, -jt.der
        return W, dW


class _ProductCometric(MatrixField):
    """blockdiag(G_M(x), 1) on M x R."""

    def __init__(self, G: MatrixField):
        self.G = G
        self.n = G.n + 1

    def jet(self, p):
        p = np.asarray(p, dtype=float)
        m = self.n - 1
        g, dg = self.G.jet(p[:m])
        val = np.zeros((m + 1, m + 1))
        der = np.zeros((m + 1, m + 1, m + 1))
        val[:m, :m] = g
        val[m, m] = 1.0
        der[:m, :m, :m] = dg
        return val, der


class _TopBlock(MatrixField):
    """The M-block of a field on M x R, evaluated on the slice s = 0."""

    def __init__(self, F: MatrixField, m: int):
        self.F = F
        self.n = m

    def jet(self, x):
        x = np.asarray(x, dtype=float)
        m = self.n
        v, d = self.F.jet(np.append(x, 0.0))
        return v[:m, :m], d[:m, :m, :m]


def _closedness(M: Structure, points) -> tuple[float, float]:
    """Largest components of d(omega) and d(eta) over points."""
    worst_w = worst_e = 0.0
    for x in points:
        w, dw = M.omega.jet(x)
        # (d omega)_{ijk} = d_i w_jk + d_j w_ki + d_k w_ij
        dw_ = dw.transpose(2, 0, 1)
        c = dw_ + dw_.transpose(1, 2, 0) + dw_.transpose(2, 0, 1)
        worst_w = max(worst_w, _maxabs(c))
        de = np.array([e.jet(x).der for e in M.eta])  # de[j, i] = d_i eta_j
        worst_e = max(worst_e, _maxabs(de - de.T))
    return worst_w, worst_e


def cosymplectic_lift(M: Structure, samples: int = 16, seed: int = 20240611) -> SubmersionSpec:
    """P = M x R with pi_P = -omega~^{-1}, product cometric, projection t."""
    if M.omega is None or M.eta is None:
        raise DegenerateCosymplectic(f"{M.name!r} declares no omega/eta")
    m = M.dim
    base = np.asarray(M.base, dtype=float)
    pts = [base]
    if M.box is not None:
        pts.extend(M.sample(samples, seed))
    dw, de = _closedness(M, pts)
    if dw > CLOSED_TOL:
        raise NotClosed("omega", dw)
    if de > CLOSED_TOL:
        raise NotClosed("eta", de)
    form = _LiftedForm(M.omega, M.eta)
    W, _ = form.jet(np.append(base, 0.0))
    s = np.linalg.svd(W, compute_uv=False)
    if m % 2 == 0 or s[-1] <= 1e-12 * max(1.0, s[0]):
        raise DegenerateCosymplectic("omega^n ^ eta vanishes at the base point")
    piP = NegInverseField(form)
    coords = tuple(M.coords) + (_fresh_name(M.coords, "s"),)
    box = None
    if M.box is not None:
        box = Box(tuple(M.box.lo) + (-1.0,), tuple(M.box.hi) + (1.0,))
    P = make_structure(
        f"{M.name}_x_R",
        coords,
        piP,
        _ProductCometric(M.cometric),
        base=tuple(M.base) + (0.0,),
        box=box,
        exclude=M.exclude,
        description=f"symplectic lift of {M.name}",
    )
    piM = M.pi
    if isinstance(M.pi, ExprMatrix) and not any(True for _ in M.pi.entries()):
        piM = _TopBlock(piP, m)
    Mnew = make_structure(
        M.name,
        M.coords,
        piM,
        M.cometric,
        J=M.J,
        casimirs=M.casimirs,
        base=M.base,
        box=M.box,
        exclude=M.exclude,
        signature=M.signature,
        omega=M.omega,
        eta=M.eta,
        description=M.description,
    )
    maps = tuple(parse_expr(c, coords) for c in M.coords)
    return SubmersionSpec(f"{M.name}_lift", P, Mnew, maps, f"cosymplectic lift of {M.name}", cosymplectic=M)


def _fresh_name(coords, stem: str) -> str:
    name = stem
    k = 0
    while name in coords:
        k += 1
        name = f"{stem}{k}"
    return name


def cosymplectic_conditions(M: Structure, x) -> dict:
    """Defects of Im J c Ker eta, J(#eta) = 0 and J^2 + Id = eta (x) #eta for J = # omega#."""
    x = np.asarray(x, dtype=float)
    G = M.cometric.value(x)
    w = M.omega.value(x)
    eta = np.array([e(x) for e in M.eta])
    Jt = G @ w.T  # (J X)^k = g^{kj} X^i omega_ij
    sharp_eta = G @ eta
    return {
        "cosym_image_ker_eta": _maxabs(eta @ Jt),
        "cosym_J_reeb": _maxabs(Jt @ sharp_eta),
        "cosym_J_squared": _maxabs(Jt @ Jt + np.eye(M.dim) - np.outer(sharp_eta, eta)),
    }


# suite -----------------------------------------------------------------------------------

SUBMERSION_CHECKS = (
    "rank",
    "poisson_map",
    "riem_submersion",
    "pullback_J",
    "pullback_metric_conn",
    "pullback_poisson_conn",
    "kernel_containment",
    "gradient_related",
    "horizontal",
    "basic_condition",
    "induced_J_compat",
    "J_roundtrip",
    "transport",
    "cosym_image_ker_eta",
    "cosym_J_reeb",
    "cosym_J_squared",
)


def _point_checks(sub: SubmersionSpec, tol: float) -> dict[str, Callable]:
    cache: dict = {}

    def identities(p):
        key = tuple(p)
        if key not in cache:
            cache.clear()
            cache[key] = pullback_identity_defects(sub, p)
        return cache[key]

    def slot(name):
        def fn(p):
            v = identities(p)[name]
            if v is None:
                raise Skip("missing-J")
            return v

        return fn

    def rank(p):
        _evaluate(sub, p)
        return 0.0

    def roundtrip(p):
        d = identities(p)
        if d["basic_condition"] is None:
            raise Skip("missing-J")
        if d["basic_condition"] >= tol:
            raise Skip("not-basic")
        return d["J_roundtrip"]

    def transport(p):
        if riemann_poisson_defect(sub.P.at(p)) >= tol:
            raise Skip("P-not-riemann-poisson")
        return riemann_poisson_defect(sub.M.at(sub.point_map(p)))

    checks = {
        "rank": rank,
        "poisson_map": lambda p: poisson_map_defect(sub, p),
        "riem_submersion": lambda p: riem_submersion_defect(sub, p),
        "transport": transport,
        "J_roundtrip": roundtrip,
    }
    for name in ("pullback_J", "pullback_metric_conn", "pullback_poisson_conn", "kernel_containment",
                 "gradient_related", "horizontal", "basic_condition", "induced_J_compat"):
        checks[name] = slot(name)
    if sub.cosymplectic is not None:
        for name in ("cosym_image_ker_eta", "cosym_J_reeb", "cosym_J_squared"):
            checks[name] = lambda p, name=name: cosymplectic_conditions(sub.cosymplectic, sub.point_map(p))[name]
    return checks


def check_submersion(
    sub: SubmersionSpec,
    samples: int = 100,
    seed: Optional[int] = None,
    tol: float = DEFAULT_TOL,
    checks=None,
    tolerances: Optional[dict] = None,
) -> list:
    """Run the submersion suite over seeded points of P; returns CheckRecords."""
    if seed is None:
        seed = default_seed()
    fns = _point_checks(sub, tol)
    names = [c for c in SUBMERSION_CHECKS if c in fns] if checks is None else list(checks)
    unknown = [c for c in names if c not in fns]
    if unknown:
        raise ValueError(f"unknown or inapplicable submersion checks {unknown}")
    pts = [p for p in sub.P.sample(samples, seed) if sub.M.admissible(sub.point_map(p))]
    tolmap = dict(tolerances or {})
    out = []
    for c in names:
        out.append(sweep(c, fns[c], pts, tolmap.get(c, tol)))
    return out


# file format -------------------------------------------------------------------------------

_BLOCK = re.compile(r"^begin\s+(P|M)\s*$")
_END = re.compile(r"^end\s+(P|M)\s*$")
_MAP = re.compile(r"^map\s+(\S+)\s*=\s*(.+)$")
_REF = re.compile(r"^(P|M)\s*=\s*(\S+)\s*$")


def _gallery_structure(ref: str, allow_non_poisson: bool = False) -> Structure:
    from .gallery import get_structure

    return get_structure(ref)


def parse_submersion(text: str, allow_non_poisson: bool = False, resolver=None) -> SubmersionSpec:
    """Parse a submersion file.

    Layout: ``name = ...``; two structures, each either inline between
    ``begin P``/``end P`` (resp. M) or a gallery reference ``P = <id>``;
    one ``map a = <expr in P coordinates>`` line per M coordinate. A file
    with only ``M`` declaring omega and eta and ``lift = cosymplectic``
    builds the cosymplectic lift instead.
    """
    resolver = resolver or _gallery_structure
    blocks: dict = {}
    refs: dict = {}
    maps: list = []
    header: dict = {}
    current = None
    buf: list = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if current is not None:
            m = _END.match(line)
            if m:
                if m.group(1) != current:
                    raise ParseError(lineno, f"'end {m.group(1)}' closes block {current}")
                blocks[current] = "\n".join(buf)
                current, buf = None, []
            else:
                buf.append(raw)
            continue
        if not line:
            continue
        m = _BLOCK.match(line)
        if m:
            if m.group(1) in blocks or m.group(1) in refs:
                raise ParseError(lineno, f"structure {m.group(1)} given twice")
            current = m.group(1)
            continue
        m = _MAP.match(line)
        if m:
            maps.append((lineno, m.group(1), m.group(2)))
            continue
        m = _REF.match(line)
        if m:
            if m.group(1) in blocks or m.group(1) in refs:
                raise ParseError(lineno, f"structure {m.group(1)} given twice")
            refs[m.group(1)] = (lineno, m.group(2))
            continue
        m = re.match(r"^(name|description|lift)\s*=\s*(.*)$", line)
        if m:
            header[m.group(1)] = m.group(2).strip()
            continue
        raise ParseError(lineno, f"cannot parse line {line!r}")
    if current is not None:
        raise ParseError(0, f"unterminated block {current}")

    def structure(key):
        if key in blocks:
            return load_structure(blocks[key], allow_non_poisson=allow_non_poisson)
        if key in refs:
            lineno, ref = refs[key]
            try:
                return resolver(ref)
            except KeyError as exc:
                raise ParseError(lineno, f"unknown gallery reference {ref!r}") from exc
        return None

    M = structure("M")
    if M is None:
        raise ParseError(0, "missing structure M")
    if header.get("lift") == "cosymplectic":
        sub = cosymplectic_lift(M)
        if "name" in header:
            sub.name = header["name"]
        return sub
    P = structure("P")
    if P is None:
        raise ParseError(0, "missing structure P")
    comps: list = [None] * M.dim
    for lineno, a, etext in maps:
        if a in M.coords:
            k = M.coords.index(a)
        elif a.isdigit() and 1 <= int(a) <= M.dim:
            k = int(a) - 1
        else:
            raise ParseError(lineno, f"unknown M coordinate {a!r}")
        if comps[k] is not None:
            raise ParseError(lineno, f"duplicate map component {a!r}")
        try:
            comps[k] = parse_expr(etext.strip(), P.coords)
        except Exception as exc:
            raise ParseError(lineno, str(exc)) from exc
    missing = [M.coords[k] for k, c in enumerate(comps) if c is None]
    if missing:
        raise ParseError(0, f"missing map components {missing}")
    return SubmersionSpec(header.get("name", "unnamed"), P, M, tuple(comps), header.get("description", ""))


def dump_submersion(sub: SubmersionSpec) -> str:
    """Serialize with inline structure blocks."""
    if sub.cosymplectic is not None:
        lines = [f"name = {sub.name}", "lift = cosymplectic", "begin M", sub.cosymplectic.to_text().rstrip(), "end M"]
        return "\n".join(lines) + "\n"
    lines = [f"name = {sub.name}"]
    if sub.description:
        lines.append(f"description = {sub.description}")
    lines += ["begin P", sub.P.to_text().rstrip(), "end P", "begin M", sub.M.to_text().rstrip(), "end M"]
    for c, e in zip(sub.M.coords, sub.maps):
        lines.append(f"map {c} = {e}")
    return "\n".join(lines) + "\n"
