"""Covariant and contravariant Levi-Civita connections and the derivative
tensors built from them.

Array layouts:

* ``CovariantSymbols.Gamma[k, i, j]`` is Gamma^k_{ij}.
* ``ContravariantSymbols.Gamma[i, j, k]`` is Gamma^{ij}_k with
  nabla^{dx^i} dx^j = Gamma^{ij}_k dx^k.
* ``nabla_pi(...)[i, j, k]`` is (nabla^{dx^i} pi)(dx^j, dx^k).
* ``nabla_J(...)[i, j, k]`` is the k-th component of (nabla^{dx^i} J)(dx^j).
* ``nijenhuis(...)[i, j, k]`` is the k-th component of N_J(dx^i, dx^j).
* ``nabla_omega(...)[i, j, k]`` is (nabla_{d_k} omega)_{ij}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePi, MissingJ, NotFStructure
from .fields import koszul_bracket_jets
from .structure import PointData

FSTRUCT_TOL = 1e-8


@dataclass(frozen=True)
class CovariantSymbols:
    Gamma: np.ndarray

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.Gamma - self.Gamma.transpose(0, 2, 1)), initial=0.0))


@dataclass(frozen=True)
class ContravariantSymbols:
    Gamma: np.ndarray


def _pd(S, p) -> PointData:
    return S if isinstance(S, PointData) else S.at(p)


def covariant_symbols_at(pd: PointData) -> CovariantSymbols:
    cached = pd.__dict__.get("_cov")
    if cached is None:
        G, dg = pd.G, pd.dGcov
        # Gamma^k_{ij} = 1/2 g^{kl} (d_i g_{lj} + d_j g_{li} - d_l g_{ij})
        T = dg.transpose(0, 2, 1) + dg - dg.transpose(2, 0, 1)
        cached = CovariantSymbols(0.5 * np.einsum("kl,lij->kij", G, T))
        pd.__dict__["_cov"] = cached
    return cached


def contravariant_symbols_at(pd: PointData) -> ContravariantSymbols:
    cached = pd.__dict__.get("_contra")
    if cached is None:
        P, dP, G, dG = pd.Pi, pd.dPi, pd.G, pd.dG
        T = (
            np.einsum("il,jkl->ijk", P, dG)
            + np.einsum("jl,ikl->ijk", P, dG)
            - np.einsum("kl,ijl->ijk", P, dG)
            + np.einsum("lk,ijl->ijk", G, dP)
            - np.einsum("lj,ikl->ijk", G, dP)
            - np.einsum("li,jkl->ijk", G, dP)
        )
        cached = ContravariantSymbols(0.5 * np.einsum("ijk,mk->ijm", T, pd.Gcov))
        pd.__dict__["_contra"] = cached
    return cached


def covariant_christoffels(S, p=None) -> CovariantSymbols:
    return covariant_symbols_at(_pd(S, p))


def contravariant_christoffels(S, p=None) -> ContravariantSymbols:
    return contravariant_symbols_at(_pd(S, p))


# applying the connections ----------------------------------------------------------

def contra_derivative(pd: PointData, a, b, db) -> np.ndarray:
    """nabla^a b for a covector a at p and a covector field jet (b, db)."""
    Gam = contravariant_symbols_at(pd).Gamma
    return db @ (a @ pd.Pi) + np.einsum("i,j,ijk->k", a, b, Gam)


def cov_derivative_vector(pd: PointData, X, Y, dY) -> np.ndarray:
    """(nabla_X Y)^k = X^i d_i Y^k + Gamma^k_{ij} X^i Y^j."""
    Gam = covariant_symbols_at(pd).Gamma
    return dY @ X + np.einsum("kij,i,j->k", Gam, X, Y)


# defects of the defining axioms ---------------------------------------------------

def metricity_tensor(pd: PointData) -> np.ndarray:
    """pi#(dx^i) <dx^j, dx^k> - <nabla^i dx^j, dx^k> - <dx^j, nabla^i dx^k>."""
    Gam = contravariant_symbols_at(pd).Gamma
    lhs = np.einsum("il,jkl->ijk", pd.Pi, pd.dG)
    rhs = np.einsum("ijm,mk->ijk", Gam, pd.G) + np.einsum("ikm,jm->ijk", Gam, pd.G)
    return lhs - rhs


def torsion_tensor(pd: PointData) -> np.ndarray:
    """nabla^i dx^j - nabla^j dx^i - [dx^i, dx^j]_pi, bracket via the Koszul formula."""
    n = pd.n
    Gam = contravariant_symbols_at(pd).Gamma
    zero = np.zeros((n, n))
    eye = np.eye(n)
    out = np.empty((n, n, n))
    for i in range(n):
        for j in range(n):
            br = koszul_bracket_jets(pd, eye[i], zero, eye[j], zero)
            out[i, j] = Gam[i, j] - Gam[j, i] - br
    return out


def covariant_metricity_defect(pd: PointData) -> float:
    """d_k g_{ij} - Gamma^l_{ki} g_{lj} - Gamma^l_{kj} g_{il}."""
    Gam = covariant_symbols_at(pd).Gamma
    g = pd.Gcov
    lhs = pd.dGcov.transpose(2, 0, 1)  # [k, i, j]
    rhs = np.einsum("lki,lj->kij", Gam, g) + np.einsum("lkj,il->kij", Gam, g)
    return float(np.max(np.abs(lhs - rhs), initial=0.0))


# derivative tensors ---------------------------------------------------------------

def nabla_pi_at(pd: PointData) -> np.ndarray:
    Gam = contravariant_symbols_at(pd).Gamma
    P = pd.Pi
    return (
        np.einsum("il,jkl->ijk", P, pd.dPi)
        - np.einsum("ijm,mk->ijk", Gam, P)
        - np.einsum("ikm,jm->ijk", Gam, P)
    )


def nabla_pi(S, p=None) -> np.ndarray:
    """(nabla^{dx^i} pi)(dx^j, dx^k)."""
    return nabla_pi_at(_pd(S, p))


def canonical_J(pd: PointData):
    """J_i^l = g_{ij} pi^{jl} and its first partials."""
    g, dg = pd.Gcov, pd.dGcov
    J = g @ pd.Pi
    dJ = np.einsum("ijl,jk->ikl", dg, pd.Pi) + np.einsum("ij,jkl->ikl", g, pd.dPi)
    return J, dJ


def fstructure_defect(J: np.ndarray) -> float:
    return float(np.max(np.abs(J @ J @ J + J), initial=0.0))


def resolve_J(pd: PointData, canonical: bool = False):
    """Declared J, or the canonical one when requested and an f-structure at p."""
    if pd.Jm is not None and not canonical:
        return pd.Jm, pd.dJm
    if not canonical:
        raise MissingJ(f"structure {pd.S.name!r} declares no J")
    J, dJ = canonical_J(pd)
    d = fstructure_defect(J)
    if d >= FSTRUCT_TOL:
        raise NotFStructure(d)
    return J, dJ


def nabla_J_arrays(pd: PointData, J, dJ) -> np.ndarray:
    """NJ[i, j, k] = pi^{il} d_l J_k^j + Gamma^{im}_k J_m^j - Gamma^{ij}_m J_k^m."""
    Gam = contravariant_symbols_at(pd).Gamma
    return (
        np.einsum("il,kjl->ijk", pd.Pi, dJ)
        + np.einsum("imk,mj->ijk", Gam, J)
        - np.einsum("ijm,km->ijk", Gam, J)
    )


def nabla_J(S, p=None, canonical: bool = False) -> np.ndarray:
    pd = _pd(S, p)
    J, dJ = resolve_J(pd, canonical)
    return nabla_J_arrays(pd, J, dJ)


def nijenhuis_arrays(pd: PointData, J, dJ) -> np.ndarray:
    """N_J(a, b) = [Ja, Jb] + J^2 [a, b] - J([a, Jb] + [Ja, b]) on the coframe."""
    n = pd.n
    zero = np.zeros((n, n))
    eye = np.eye(n)
    # coframe images J dx^i have components J_k^i; their jets d_l J_k^i
    Jcols = [(J[:, i], dJ[:, i, :]) for i in range(n)]
    J2 = J @ J
    out = np.empty((n, n, n))
    for i in range(n):
        for j in range(n):
            a, b = eye[i], eye[j]
            Ja, dJa = Jcols[i]
            Jb, dJb = Jcols[j]
            t1 = koszul_bracket_jets(pd, Ja, dJa, Jb, dJb)
            t2 = koszul_bracket_jets(pd, a, zero, b, zero)
            t3 = koszul_bracket_jets(pd, a, zero, Jb, dJb)
            t4 = koszul_bracket_jets(pd, Ja, dJa, b, zero)
            out[i, j] = t1 + J2 @ t2 - J @ (t3 + t4)
    return out


def nijenhuis(S, p=None, canonical: bool = False) -> np.ndarray:
    pd = _pd(S, p)
    J, dJ = resolve_J(pd, canonical)
    return nijenhuis_arrays(pd, J, dJ)


def omega_of(pd: PointData):
    """omega = -pi^{-1} and d_k omega, for invertible pi."""
    P = pd.Pi
    s = np.linalg.svd(P, compute_uv=False)
    if s.size == 0 or s[-1] <= 1e-10 * max(s[0], 1e-300):
        raise DegeneratePi(f"pi is not invertible at {tuple(pd.p)}")
    W = -np.linalg.inv(P)
    dW = np.einsum("ia,abl,bj->ijl", W, pd.dPi, W)
    return W, dW


def nabla_omega(S, p=None) -> np.ndarray:
    """(nabla_k omega)_{ij} = d_k omega_{ij} - Gamma^l_{ki} omega_{lj} - Gamma^l_{kj} omega_{il}."""
    pd = _pd(S, p)
    W, dW = omega_of(pd)
    Gam = covariant_symbols_at(pd).Gamma
    return dW - np.einsum("lki,lj->ijk", Gam, W) - np.einsum("lkj,il->ijk", Gam, W)


def cov_nabla_pi(pd: PointData) -> np.ndarray:
    """(nabla_k pi)^{ij} = d_k pi^{ij} + Gamma^i_{kl} pi^{lj} + Gamma^j_{kl} pi^{il}, layout [i, j, k]."""
    Gam = covariant_symbols_at(pd).Gamma
    P = pd.Pi
    return pd.dPi + np.einsum("ikl,lj->ijk", Gam, P) + np.einsum("jkl,il->ijk", Gam, P)
