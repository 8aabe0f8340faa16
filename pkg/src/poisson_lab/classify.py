"""Sampled classification of Poisson-metric structures by defect tensors."""

from __future__ import annotations

import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import connections as cn
from .errors import (
    DegeneratePi,
    DomainError,
    IndefiniteRestriction,
    NotFStructure,
    PoissonLabError,
    RankDrop,
    SingularG,
)
from .fields import (
    div_pi_coordinate,
    gradient_jet,
    jacobiator,
    koszul_bracket_jets,
    lie_pi_jets,
    lie_sym2_jets,
)
from .foliation import frame_jets
from .linear import EPS_RANK, numerical_rank
from .structure import PointData, Structure

DEFAULT_TOL = 1e-9
DEFAULT_SAMPLES = 200
CHECK_TOLERANCES = {"mean_curvature": 1e-6}

CHECK_IDS = (
    "jacobi",
    "almost_kp",
    "riemann_poisson",
    "kahler_poisson",
    "div_free",
    "casimir_invariance",
    "killing_poisson",
    "involutivity",
    "strong_transversal",
    "nijenhuis",
    "bundle_like",
    "mean_curvature",
    "nabla_omega",
)

CONVENTIONS = {
    "covectors": "(pi# a)^j = a_i pi^{ij}; <a, b> = a_i g^{ij} b_j; (J a)_i = J_i^k a_k",
    "compatibility": "pi^{ij} = g^{ik} J_k^j; canonical J_i^l = g_{ij} pi^{jl}",
    "omega": "omega := -pi^{-1} on invertible pi",
    "div_pi": "(div pi)(f) = div(X_f) with volume sqrt|det g_cov|; modular vector field = -div pi",
    "nabla_pi": "(nabla^{dx^i} pi)(dx^j, dx^k), max absolute component",
}


class Skip(PoissonLabError):
    """A check does not apply at this point (reason in args[0])."""


def default_seed() -> int:
    try:
        return int(os.environ.get("POISSON_LAB_SEED", "0"))
    except ValueError:
        return 0


# per-point defects ----------------------------------------------------------------

def _pd(S, p) -> PointData:
    return S if isinstance(S, PointData) else S.at(p)


def _J_for(pd: PointData):
    if pd.Jm is not None:
        return pd.Jm, pd.dJm
    return cn.canonical_J(pd)


def almost_kp_defect(pd: PointData) -> float:
    J, _ = _J_for(pd)
    compat = float(np.max(np.abs(pd.Pi - pd.G @ J), initial=0.0))
    return max(compat, cn.fstructure_defect(J))


def riemann_poisson_defect(pd: PointData) -> float:
    return float(np.max(np.abs(cn.nabla_pi_at(pd)), initial=0.0))


def kahler_poisson_defect(pd: PointData) -> float:
    J, dJ = _J_for(pd)
    nj = float(np.max(np.abs(cn.nabla_J_arrays(pd, J, dJ)), initial=0.0))
    return max(nj, almost_kp_defect(pd))


def div_free_defect(pd: PointData) -> float:
    return float(np.max(np.abs(div_pi_coordinate(pd)), initial=0.0))


def casimir_invariance_defect(pd: PointData) -> float:
    """max over declared Casimirs f of |L_{grad f} pi|."""
    if not pd.S.casimirs:
        if numerical_rank(pd.Pi) == pd.n:
            return 0.0  # only constant Casimirs
        raise Skip("no-casimirs-declared")
    worst = 0.0
    for f in pd.S.casimirs:
        X, dX = gradient_jet(pd, f)
        worst = max(worst, float(np.max(np.abs(lie_pi_jets(pd, X, dX)), initial=0.0)))
    return worst


def killing_poisson_defect(pd: PointData) -> float:
    return max(casimir_invariance_defect(pd), div_free_defect(pd))


def involutivity_defect(S, p=None, eps_rank: float = EPS_RANK) -> float:
    """Kernel components of Koszul brackets of the complement coframe.

    Returns max over pairs of the Euclidean norm of the coefficients
    <[a, b]_pi, flat N_c> in the orthonormal kernel frame.
    """
    pd = _pd(S, p)
    fj = frame_jets(pd, eps_rank=eps_rank)
    A, dA = fj.flat("tangent")
    worst = 0.0
    r = A.shape[0]
    for a in range(r):
        for b in range(a + 1, r):
            br = koszul_bracket_jets(pd, A[a], dA[a], A[b], dA[b])
            coeff = fj.N @ br  # <br, flat N_c> = br(N_c)
            worst = max(worst, float(np.sqrt(np.sum(coeff**2))))
    return worst


def involutivity_lie_oracle(S, p=None, eps_rank: float = EPS_RANK) -> float:
    """Same quantity via (L_{N_c} pi)(a, b) with a, b the complement coframe at p."""
    pd = _pd(S, p)
    fj = frame_jets(pd, eps_rank=eps_rank)
    A, _ = fj.flat("tangent")
    worst = 0.0
    Ls = [lie_pi_jets(pd, N, dN) for N, dN in zip(fj.N, fj.dN)]
    for a in range(A.shape[0]):
        for b in range(a + 1, A.shape[0]):
            coeff = np.array([A[a] @ L @ A[b] for L in Ls])
            worst = max(worst, float(np.sqrt(np.sum(coeff**2))))
    return worst


def strong_transversal_defect(S, p=None, eps_rank: float = EPS_RANK) -> float:
    """max over the orthonormal normal frame of componentwise |L_{N_b} pi|."""
    pd = _pd(S, p)
    fj = frame_jets(pd, eps_rank=eps_rank)
    worst = 0.0
    for N, dN in zip(fj.N, fj.dN):
        worst = max(worst, float(np.max(np.abs(lie_pi_jets(pd, N, dN)), initial=0.0)))
    return worst


def mean_curvature(S, p=None, eps_rank: float = EPS_RANK) -> np.ndarray:
    """H = sum_a eps_a pr_perp(nabla_{E_a} E_a) in ambient components."""
    pd = _pd(S, p)
    fj = frame_jets(pd, eps_rank=eps_rank)
    if fj.eps_tangent.size and not (np.all(fj.eps_tangent > 0) or np.all(fj.eps_tangent < 0)):
        raise IndefiniteRestriction(f"leaf metric is indefinite at {tuple(pd.p)}")
    H = np.zeros(pd.n)
    g = pd.Gcov
    for E, dE, e in zip(fj.E, fj.dE, fj.eps_tangent):
        V = cn.cov_derivative_vector(pd, E, E, dE)
        for N, s in zip(fj.N, fj.eps_normal):
            H += e * s * (V @ g @ N) * N
    return H


def bundle_like_defect(S, p=None, eps_rank: float = EPS_RANK) -> float:
    """max over coordinate Hamiltonians of |(L_{X_f} g_perp)(N_a, N_b)|."""
    pd = _pd(S, p)
    fj = frame_jets(pd, eps_rank=eps_rank)
    F, dF = fj.flat("normal")
    n = pd.n
    h = np.zeros((n, n))
    dh = np.zeros((n, n, n))
    for v, dv, s in zip(F, dF, fj.eps_normal):
        h += s * np.outer(v, v)
        dh += s * (np.einsum("il,j->ijl", dv, v) + np.einsum("i,jl->ijl", v, dv))
    worst = 0.0
    for f in range(n):
        X, dX = pd.Pi[f], pd.dPi[f]
        L = lie_sym2_jets(X, dX, h, dh)
        vals = fj.N @ L @ fj.N.T
        worst = max(worst, float(np.max(np.abs(vals), initial=0.0)))
    return worst


def nijenhuis_defect(pd: PointData) -> float:
    J, dJ = _J_for(pd)
    return float(np.max(np.abs(cn.nijenhuis_arrays(pd, J, dJ)), initial=0.0))


def nabla_omega_defect(pd: PointData) -> float:
    if numerical_rank(pd.Pi) < pd.n:
        raise Skip("degenerate-pi")
    return float(np.max(np.abs(cn.nabla_omega(pd)), initial=0.0))


def _mean_curvature_norm(pd: PointData) -> float:
    return float(np.linalg.norm(mean_curvature(pd)))


POINT_CHECKS: dict[str, Callable[[PointData], float]] = {
    "jacobi": jacobiator,
    "almost_kp": almost_kp_defect,
    "riemann_poisson": riemann_poisson_defect,
    "kahler_poisson": kahler_poisson_defect,
    "div_free": div_free_defect,
    "casimir_invariance": casimir_invariance_defect,
    "killing_poisson": killing_poisson_defect,
    "involutivity": involutivity_defect,
    "strong_transversal": strong_transversal_defect,
    "nijenhuis": nijenhuis_defect,
    "bundle_like": bundle_like_defect,
    "mean_curvature": _mean_curvature_norm,
    "nabla_omega": nabla_omega_defect,
}

_SKIPPABLE = (Skip, DomainError, SingularG, RankDrop, IndefiniteRestriction, DegeneratePi, NotFStructure)


# reports ------------------------------------------------------------------------------

@dataclass
class CheckRecord:
    check: str
    max_defect: Optional[float]
    worst_point: Optional[list]
    tolerance: float
    passed: Optional[bool]
    evaluated: int = 0
    skipped: int = 0
    skip_reasons: dict = field(default_factory=dict)
    note: str = ""

    @property
    def status(self) -> str:
        if self.passed is None:
            return "skipped"
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "status": self.status,
            "max_defect": self.max_defect,
            "worst_point": self.worst_point,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "evaluated": self.evaluated,
            "skipped": self.skipped,
            "skip_reasons": dict(sorted(self.skip_reasons.items())),
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CheckRecord":
        return cls(
            check=d["check"],
            max_defect=d["max_defect"],
            worst_point=d["worst_point"],
            tolerance=d["tolerance"],
            passed=d["pass"],
            evaluated=d.get("evaluated", 0),
            skipped=d.get("skipped", 0),
            skip_reasons=dict(d.get("skip_reasons", {})),
            note=d.get("note", ""),
        )


@dataclass
class DefectReport:
    structure: str
    seed: int
    samples: int
    records: list
    notes: list = field(default_factory=list)
    conventions: dict = field(default_factory=lambda: dict(CONVENTIONS))

    def __getitem__(self, check: str) -> CheckRecord:
        for r in self.records:
            if r.check == check:
                return r
        raise KeyError(check)

    def __contains__(self, check: str) -> bool:
        return any(r.check == check for r in self.records)

    def to_dict(self) -> dict:
        return {
            "structure": self.structure,
            "seed": self.seed,
            "samples": self.samples,
            "conventions": self.conventions,
            "records": [r.to_dict() for r in self.records],
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DefectReport":
        return cls(
            structure=d["structure"],
            seed=d["seed"],
            samples=d["samples"],
            records=[CheckRecord.from_dict(r) for r in d["records"]],
            notes=list(d.get("notes", [])),
            conventions=dict(d.get("conventions", {})),
        )


def _better(defect: float, p, best: float, best_p) -> bool:
    """Max by value, ties broken by the lexicographically smallest point."""
    if best_p is None or defect > best:
        return True
    return defect == best and tuple(p) < tuple(best_p)


def sweep(
    name: str,
    fn: Callable[[np.ndarray], float],
    points: Iterable,
    tol: float,
    note: str = "",
) -> CheckRecord:
    """Evaluate a pointwise defect over points; errors skip the point."""
    best, best_p = 0.0, None
    evaluated = skipped = 0
    reasons: Counter = Counter()
    for p in points:
        try:
            d = float(fn(p))
        except _SKIPPABLE as exc:
            skipped += 1
            reasons[exc.args[0] if isinstance(exc, Skip) else type(exc).__name__] += 1
            continue
        evaluated += 1
        if not np.isfinite(d):
            d = float("inf")
        if _better(d, p, best, best_p):
            best, best_p = d, p
    if evaluated == 0:
        return CheckRecord(name, None, None, tol, None, 0, skipped, dict(reasons), note)
    return CheckRecord(
        name,
        best,
        [float(x) for x in best_p],
        tol,
        bool(best < tol),
        evaluated,
        skipped,
        dict(reasons),
        note,
    )


def classify(
    S: Structure,
    samples: int = DEFAULT_SAMPLES,
    seed: Optional[int] = None,
    tol: float = DEFAULT_TOL,
    checks: Optional[Sequence[str]] = None,
    tolerances: Optional[dict] = None,
    points: Optional[np.ndarray] = None,
) -> DefectReport:
    """Run the requested checks over seeded sample points."""
    if seed is None:
        seed = default_seed()
    checks = list(CHECK_IDS if checks is None else checks)
    unknown = [c for c in checks if c not in POINT_CHECKS]
    if unknown:
        raise ValueError(f"unknown checks {unknown}")
    if points is None:
        points = S.sample(samples, seed)
    points = np.asarray(points, dtype=float)
    base_rank = numerical_rank(S.at(S.base).Pi)

    regular = []
    dropped = 0
    for p in points:
        try:
            if numerical_rank(S.at(p).Pi) == base_rank:
                regular.append(p)
            else:
                dropped += 1
        except DomainError:
            dropped += 1
    tolmap = dict(CHECK_TOLERANCES)
    tolmap.update(tolerances or {})
    records = []
    for c in checks:
        fn = POINT_CHECKS[c]
        rec = sweep(c, lambda p, fn=fn: fn(S.at(p)), regular, tolmap.get(c, tol))
        if dropped:
            rec.skipped += dropped
            rec.skip_reasons["rank-differs-from-base"] = dropped
        records.append(rec)
    notes = [f"no defect above tolerance at {len(regular)} points is not a proof that a property holds everywhere"]
    return DefectReport(S.name, int(seed), int(len(points)), records, notes)
