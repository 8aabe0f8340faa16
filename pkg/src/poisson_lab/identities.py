"""Invariant suites: identities that must hold on every structure, plus
identities that hold under a stated hypothesis (checked only at points
where the hypothesis is met, other points are skipped with a reason).

Each pointwise identity takes a PointData and a numpy Generator (for the
random test fields) and returns a defect.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from . import connections as cn
from .classify import (
    DEFAULT_TOL,
    DefectReport,
    Skip,
    almost_kp_defect,
    default_seed,
    involutivity_defect,
    riemann_poisson_defect,
    strong_transversal_defect,
    sweep,
)
from .expr import mul, parse_expr
from .fields import (
    div_pi_coordinate,
    div_pi_frame,
    koszul_bracket_jets,
    lie_form_jets,
    lie_pi_jets,
    lie_vector_jets,
    sharp_jet,
)
from .foliation import frame_jets, leaf_frame, leaf_metric_38, leaf_symplectic, tangent_J
from .linear import kernel_splitting, numerical_rank
from .structure import PointData, Structure

HYPOTHESIS_TOL = 1e-8


def _amax(x) -> float:
    return float(np.max(np.abs(x), initial=0.0))


def _linear_field(rng, n):
    """Random affine field frozen at p: value and constant Jacobian."""
    return rng.normal(size=n), rng.normal(size=(n, n))


def _require_rp(pd: PointData) -> None:
    if riemann_poisson_defect(pd) >= HYPOTHESIS_TOL:
        raise Skip("not-riemann-poisson")


def _require_akp(pd: PointData) -> None:
    if almost_kp_defect(pd) >= HYPOTHESIS_TOL:
        raise Skip("not-almost-kp")


def _J_for(pd: PointData):
    if pd.Jm is not None:
        return pd.Jm, pd.dJm
    return cn.canonical_J(pd)


# unconditional identities -----------------------------------------------------------

def anchor_lie(pd: PointData, rng) -> float:
    """beta(L_X(pi# a) - pi#(L_X a)) - (L_X pi)(a, beta) for random X, a, beta."""
    n = pd.n
    X, dX = _linear_field(rng, n)
    a, da = _linear_field(rng, n)
    b = rng.normal(size=n)
    Y, dY = sharp_jet(pd, a, da)
    lhs = b @ (lie_vector_jets(X, dX, Y, dY) - lie_form_jets(X, dX, a, da) @ pd.Pi)
    rhs = a @ lie_pi_jets(pd, X, dX) @ b
    return abs(lhs - rhs)


def bracket_expansion(pd: PointData, rng) -> float:
    """[a,b](X) - [pi#a(b(X)) - pi#b(a(X)) + (L_X pi)(a,b)] for random fields."""
    n = pd.n
    X, dX = _linear_field(rng, n)
    a, da = _linear_field(rng, n)
    b, db = _linear_field(rng, n)
    br = koszul_bracket_jets(pd, a, da, b, db)
    d_bX = X @ db + b @ dX
    d_aX = X @ da + a @ dX
    rhs = d_bX @ (a @ pd.Pi) - d_aX @ (b @ pd.Pi) + a @ lie_pi_jets(pd, X, dX) @ b
    return abs(br @ X - rhs)


def koszul_antisymmetry(pd: PointData, rng) -> float:
    n = pd.n
    a, da = _linear_field(rng, n)
    b, db = _linear_field(rng, n)
    return _amax(koszul_bracket_jets(pd, a, da, b, db) + koszul_bracket_jets(pd, b, db, a, da))


def _test_functions(coords):
    c0, c1 = coords[0], coords[min(1, len(coords) - 1)]
    f = parse_expr(f"sin({c0}) + {coords[-1]}^2 + 1", coords)
    g = parse_expr(f"exp(0.3*{c0}) * (1 + {c1}^2)", coords)
    return f, g


def anchor_leibniz(pd: PointData, rng) -> float:
    """pi#(d(fg)) - f pi#(dg) - g pi#(df) for fixed nonpolynomial f, g.

    Relative to the size of the terms: the test functions grow fast on
    large boxes.
    """
    f, g = _test_functions(pd.S.coords)
    jf, jg, jfg = f.jet(pd.p), g.jet(pd.p), mul(f, g).jet(pd.p)
    P = pd.Pi
    lhs = jfg.der @ P
    return _amax(lhs - jf.val * (jg.der @ P) - jg.val * (jf.der @ P)) / max(1.0, _amax(lhs))


def div_agreement(pd: PointData, rng) -> float:
    """Volume-form and frame-sum divergence of pi, relative to their size."""
    a = div_pi_coordinate(pd)
    b = div_pi_frame(pd)
    return _amax(a - b) / max(1.0, _amax(a))


def metricity(pd: PointData, rng) -> float:
    return _amax(cn.metricity_tensor(pd))


def torsion(pd: PointData, rng) -> float:
    return _amax(cn.torsion_tensor(pd))


def nijenhuis_nabla_J(pd: PointData, rng) -> float:
    """N_J(a,b) against (nJ)(Ja,b) - (nJ)(Jb,a) - J((nJ)(a,b) - (nJ)(b,a)) on the coframe."""
    J, dJ = _J_for(pd)
    NJ = cn.nabla_J_arrays(pd, J, dJ)
    N = cn.nijenhuis_arrays(pd, J, dJ)
    # (nabla^a J) b = a_i b_j NJ[i, j, :]
    def DJ(a, b):
        return np.einsum("i,j,ijk->k", a, b, NJ)

    eye = np.eye(pd.n)
    worst = 0.0
    for i in range(pd.n):
        for j in range(pd.n):
            a, b = eye[i], eye[j]
            alt = DJ(J @ a, b) - DJ(J @ b, a) - J @ (DJ(a, b) - DJ(b, a))
            worst = max(worst, _amax(N[i, j] - alt))
    return worst


def kernel_anchor_symmetry(pd: PointData, rng) -> float:
    """pi#(n^a b - n^b a) for kernel covector fields a and the coordinate coframe b."""
    fj = frame_jets(pd)
    K, dK = fj.flat("normal")
    Gam = cn.contravariant_symbols_at(pd).Gamma
    worst = 0.0
    for a, da in zip(K, dK):
        for j in range(pd.n):
            e = np.zeros(pd.n)
            e[j] = 1.0
            ab = np.einsum("i,ik->k", a, Gam[:, j, :])  # nabla^a dx^j
            ba = cn.contra_derivative(pd, e, a, da)
            worst = max(worst, _amax((ab - ba) @ pd.Pi))
    return worst


def lie_gradient_pi(pd: PointData, rng) -> float:
    """(L_{a#} pi)(b, c) - [<n^c a, b> - <n^b a, c>] for a random a, coframe b, c."""
    n = pd.n
    a, da = _linear_field(rng, n)
    X = pd.G @ a
    dX = np.einsum("ijl,j->il", pd.dG, a) + pd.G @ da
    L = lie_pi_jets(pd, X, dX)
    eye = np.eye(n)
    nab = np.array([cn.contra_derivative(pd, eye[c], a, da) for c in range(n)]) @ pd.G
    # nab[c, b] = <nabla^{dx^c} a, dx^b>
    return _amax(L - (nab.T - nab))


def kernel_bracket_lie(pd: PointData, rng) -> float:
    """<[a,b], g> - (L_{g#} pi)(a, b), complement a, b and kernel g (componentwise)."""
    fj = frame_jets(pd)
    A, dA = fj.flat("tangent")
    Ls = [lie_pi_jets(pd, N, dN) for N, dN in zip(fj.N, fj.dN)]
    worst = 0.0
    for a in range(A.shape[0]):
        for b in range(a + 1, A.shape[0]):
            br = koszul_bracket_jets(pd, A[a], dA[a], A[b], dA[b])
            for N, L in zip(fj.N, Ls):
                worst = max(worst, abs(br @ N - A[a] @ L @ A[b]))
    return worst


def transversal_agreement(pd: PointData, rng, tol: float = DEFAULT_TOL) -> float:
    """1.0 when the strong transversal and involutivity verdicts disagree."""
    st = strong_transversal_defect(pd) < tol
    inv = involutivity_defect(pd) < tol
    return 0.0 if st == inv else 1.0


def frame_independence(pd: PointData, rng) -> float:
    """Leaf metric and leaf symplectic Gram matrices under two pivot choices."""
    f1 = leaf_frame(pd)
    alt = alternative_pivots(pd)
    if alt is None or alt == f1.pivots:
        raise Skip("single-pivot-choice")
    f2 = leaf_frame(pd, pivots=alt)
    E1, E2 = f1.tangent, f2.tangent
    if E1.shape[0] == 0:
        return 0.0
    C = np.linalg.lstsq(E1.T, E2.T, rcond=None)[0].T  # E2 = C E1
    worst = 0.0
    for form in (leaf_metric_38, leaf_symplectic):
        M1 = np.array([[form(pd, None, x, y) for y in E1] for x in E1])
        M2 = np.array([[form(pd, None, x, y) for y in E2] for x in E2])
        worst = max(worst, _amax(M2 - C @ M1 @ C.T) / max(1.0, _amax(M1)))
    return worst


def alternative_pivots(pd: PointData):
    """Pivots chosen greedily in reverse index order (a test hook for frame independence)."""
    n = pd.n
    r = numerical_rank(pd.Pi)
    tp = []
    for k in reversed(range(n)):
        if len(tp) < r and numerical_rank(pd.Pi[tp + [k]]) == len(tp) + 1:
            tp.append(k)
    if len(tp) < r:
        return None
    rows = [pd.Pi[k] for k in tp]
    npiv = []
    for k in reversed(range(n)):
        if len(npiv) == n - r:
            break
        cand = np.array(rows + [np.eye(n)[k]])
        if np.linalg.matrix_rank(cand, tol=1e-8) == len(rows) + 1:
            rows.append(np.eye(n)[k])
            npiv.append(k)
    if len(npiv) < n - r:
        return None
    return tuple(tp), tuple(npiv)


# identities under a hypothesis ---------------------------------------------------------

def kernel_parallel(pd: PointData, rng) -> float:
    """On Riemann-Poisson points: nabla^a = 0 on the coframe for kernel a."""
    _require_rp(pd)
    K = kernel_splitting(pd.Pi, pd.G).kernel_basis.T
    Gam = cn.contravariant_symbols_at(pd).Gamma
    return max((_amax(np.einsum("i,ijk->jk", a, Gam)) for a in K), default=0.0)


def hamiltonian_symmetry(pd: PointData, rng) -> float:
    """On Riemann-Poisson points: pi(n^b df, c) = pi(n^c df, b) for coordinates f."""
    _require_rp(pd)
    Gam = cn.contravariant_symbols_at(pd).Gamma
    # T[b, f, c] = pi(nabla^{dx^b} dx^f, dx^c)
    T = np.einsum("bfk,kc->bfc", Gam, pd.Pi)
    return _amax(T - T.transpose(2, 1, 0))


def nabla_J_bridge(pd: PointData, rng, literal: bool = False) -> float:
    """<g, (nJ)(a, b)> against nabla pi on the coordinate coframe (almost-KP points).

    With (nJ)(a, b) = (nabla^a J) b the proof's chain lands on
    (nabla^a pi)(g, b), which is what is compared by default. ``literal``
    compares against (nabla^a pi)(b, g) instead.
    """
    _require_akp(pd)
    J, dJ = _J_for(pd)
    NJ = cn.nabla_J_arrays(pd, J, dJ)
    NP = cn.nabla_pi_at(pd)
    if literal:
        lhs = np.einsum("ijm,mk->ijk", NJ, pd.G)  # [a, b, g]
    else:
        lhs = np.einsum("ikm,mj->ijk", NJ, pd.G)  # [a, g, b]
    return _amax(lhs - NP)


def omega_bridge(pd: PointData, rng) -> float:
    """(nabla_{pi#a} pi)(b, c) + (nabla omega)(pi#a, pi#b, pi#c) for invertible pi."""
    NW = cn.nabla_omega(pd)
    P = pd.Pi
    lhs = np.einsum("ak,bck->abc", P, cn.cov_nabla_pi(pd))
    rhs = np.einsum("ijk,ak,bi,cj->abc", NW, P, P, P)
    return _amax(lhs + rhs)


def symplectic_agreement(pd: PointData, rng, tol: float = DEFAULT_TOL) -> float:
    """1.0 when the nabla pi and nabla omega verdicts disagree (invertible pi)."""
    nw = _amax(cn.nabla_omega(pd)) < tol
    rp = riemann_poisson_defect(pd) < tol
    return 0.0 if nw == rp else 1.0


def leaf_omega_J(pd: PointData, rng) -> float:
    """omega_F(X, Y) - <J'X, Y> on the leaf frame, J' = -# J flat (almost-KP points)."""
    _require_akp(pd)
    J, _ = _J_for(pd)
    Jt = tangent_J(pd, J)
    E = leaf_frame(pd).tangent
    worst = 0.0
    for X in E:
        for Y in E:
            worst = max(worst, abs(leaf_symplectic(pd, None, X, Y) - (Jt @ X) @ pd.Gcov @ Y))
    return worst


def leaf_metric_restriction(pd: PointData, rng) -> float:
    """Leaf metric of the complement preimages against the restricted metric (almost-KP points)."""
    _require_akp(pd)
    E = leaf_frame(pd).tangent
    worst = 0.0
    for X in E:
        for Y in E:
            worst = max(worst, abs(leaf_metric_38(pd, None, X, Y) - X @ pd.Gcov @ Y))
    return worst


def leaf_omega_parallel(pd: PointData, rng) -> float:
    """The leafwise connection pi#(nabla^a b) preserves omega_F (Riemann-Poisson points)."""
    _require_rp(pd)
    n = pd.n
    Gam = cn.contravariant_symbols_at(pd).Gamma
    P = pd.Pi
    E = leaf_frame(pd).tangent
    if E.shape[0] == 0:
        return 0.0
    eye = np.eye(n)
    worst = 0.0
    for a in range(n):
        X = P[a]
        for b in range(n):
            for c in range(b + 1, n):
                deriv = pd.dPi[b, c] @ X  # pi#(dx^a) of pi^{bc}
                t1 = leaf_symplectic(pd, None, Gam[a, b] @ P, eye[c] @ P)
                t2 = leaf_symplectic(pd, None, eye[b] @ P, Gam[a, c] @ P)
                worst = max(worst, abs(deriv - t1 - t2))
    return worst


# suites ----------------------------------------------------------------------------------

IDENTITIES: dict = {
    "anchor_lie": anchor_lie,
    "bracket_expansion": bracket_expansion,
    "koszul_antisymmetry": koszul_antisymmetry,
    "anchor_leibniz": anchor_leibniz,
    "div_agreement": div_agreement,
    "metricity": metricity,
    "torsion": torsion,
    "nijenhuis_nabla_J": nijenhuis_nabla_J,
    "kernel_anchor_symmetry": kernel_anchor_symmetry,
    "kernel_parallel": kernel_parallel,
    "lie_gradient_pi": lie_gradient_pi,
    "hamiltonian_symmetry": hamiltonian_symmetry,
    "nabla_J_bridge": nabla_J_bridge,
    "omega_bridge": omega_bridge,
    "symplectic_agreement": symplectic_agreement,
    "transversal_agreement": transversal_agreement,
    "kernel_bracket_lie": kernel_bracket_lie,
    "leaf_omega_J": leaf_omega_J,
    "leaf_metric_restriction": leaf_metric_restriction,
    "leaf_omega_parallel": leaf_omega_parallel,
    "frame_independence": frame_independence,
}

IDENTITY_TOLERANCES = {
    "nijenhuis_nabla_J": 1e-8,
    "kernel_parallel": 1e-8,
    "leaf_omega_J": 1e-8,
    "leaf_metric_restriction": 1e-8,
    # verdict agreement is an indicator, anything below 1 passes
    "symplectic_agreement": 0.5,
    "transversal_agreement": 0.5,
}

IDENTITY_NOTES = {
    "nabla_J_bridge": "compared as <g, (nabla^a J) b> = (nabla^a pi)(g, b)",
    "leaf_omega_J": "compared as omega_F(X, Y) = <J'X, Y>",
    "omega_bridge": "nabla_pi^a b := nabla_{pi# a} b with the covariant Levi-Civita connection",
}


def run_identities(
    S: Structure,
    samples: int = 100,
    seed: Optional[int] = None,
    tol: float = DEFAULT_TOL,
    checks: Optional[Sequence[str]] = None,
    tolerances: Optional[dict] = None,
    points=None,
) -> DefectReport:
    """Evaluate the identity suite at seeded sample points."""
    if seed is None:
        seed = default_seed()
    names = list(IDENTITIES if checks is None else checks)
    unknown = [c for c in names if c not in IDENTITIES]
    if unknown:
        raise ValueError(f"unknown identities {unknown}")
    if points is None:
        points = S.sample(samples, seed)
    points = np.asarray(points, dtype=float)
    tolmap = dict(IDENTITY_TOLERANCES)
    tolmap.update(tolerances or {})
    records = []
    for k, name in enumerate(names):
        fn = IDENTITIES[name]
        rng = np.random.default_rng([int(seed), k])
        t = tolmap.get(name, tol)
        rec = sweep(name, _pointwise(S, fn, rng, tol), points, t, IDENTITY_NOTES.get(name, ""))
        records.append(rec)
    notes = [f"identities evaluated at {len(points)} sample points"]
    return DefectReport(S.name, int(seed), int(len(points)), records, notes)


def _pointwise(S: Structure, fn: Callable, rng, tol: float):
    def run(p):
        pd = S.at(p)
        if fn in (transversal_agreement, symplectic_agreement):
            return fn(pd, rng, tol)
        return fn(pd, rng)

    return run
