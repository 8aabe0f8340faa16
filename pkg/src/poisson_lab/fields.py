"""Chart-level tensor calculus: anchor map, Hamiltonian fields, Koszul bracket,
Lie derivatives, Jacobi defect and the divergence of the bivector.

Field arguments are anything with a ``jet(p)`` method returning
``(val, der)`` with ``der[i, l] = d_l val[i]``; :class:`VectorField` and
:class:`CovectorField` cover expression, exact, constant and callable fields.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch
from .expr import Const, Expr
from .structure import PointData, load_structure  # noqa: F401 - re-export


def _pd(S, p) -> PointData:
    return S if isinstance(S, PointData) else S.at(p)


class _Field:
    """n components, evaluated with jets."""

    def __init__(self, components=None, fn: Callable | None = None, n: int | None = None):
        if fn is None:
            comps = tuple(c if isinstance(c, Expr) else Const(float(c)) for c in components)
            self.components = comps
            self.n = len(comps)
        else:
            self.components = None
            self.n = n
        self._fn = fn

    @classmethod
    def from_exprs(cls, exprs: Sequence[Expr]):
        return cls(tuple(exprs))

    @classmethod
    def constant(cls, vec):
        vec = np.asarray(vec, dtype=float)
        n = vec.shape[0]
        return cls(fn=lambda p, v=vec: (v.copy(), np.zeros((n, len(p)))), n=n)

    @classmethod
    def from_function(cls, fn: Callable, n: int):
        """fn(p) -> (val, der) with der[i, l] = d_l val[i]."""
        return cls(fn=fn, n=n)

    def jet(self, p):
        if self._fn is not None:
            val, der = self._fn(np.asarray(p, dtype=float))
            return np.asarray(val, dtype=float), np.asarray(der, dtype=float)
        m = len(p)
        val = np.empty(self.n)
        der = np.empty((self.n, m))
        for i, e in enumerate(self.components):
            jt = e.jet(p)
            val[i] = jt.val
            der[i] = jt.der
        return val, der

    def value(self, p) -> np.ndarray:
        return self.jet(p)[0]


class VectorField(_Field):
    """Contravariant components X^i."""


class CovectorField(_Field):
    """Covariant components alpha_i."""

    @classmethod
    def exact(cls, f: Expr, n: int):
        """df, with components d_k f (differentiated symbolically for jets)."""
        return cls(tuple(f.diff(k) for k in range(n)))


def field_jet(F, p, n: int):
    """Normalize a field argument to (val, der)."""
    if hasattr(F, "jet"):
        val, der = F.jet(p)
    elif isinstance(F, tuple) and len(F) == 2:
        val, der = np.asarray(F[0], float), np.asarray(F[1], float)
    else:
        val = np.asarray(F, dtype=float)
        der = np.zeros((val.shape[0], n))
    if val.shape != (n,) or der.shape != (n, n):
        raise DimensionMismatch(f"field has shape {val.shape}/{der.shape}, expected ({n},)")
    return val, der


# anchor and Hamiltonian fields ------------------------------------------------

def sharp_pi(S, p, alpha) -> np.ndarray:
    """(pi# alpha)^j = alpha_i pi^{ij}."""
    pd = _pd(S, p)
    return np.asarray(alpha, dtype=float) @ pd.Pi


def sharp_jet(pd: PointData, a, da):
    """Jet of pi# applied to a covector field jet (a, da)."""
    X = a @ pd.Pi
    dX = np.einsum("il,ij->jl", da, pd.Pi) + np.einsum("i,ijl->jl", a, pd.dPi)
    return X, dX


def hamiltonian_field(S, f: Expr, p) -> np.ndarray:
    """X_f = pi#(df) at p."""
    pd = _pd(S, p)
    return f.jet(pd.p).der @ pd.Pi


def hamiltonian_jet(pd: PointData, f: Expr):
    """Jet of X_f (needs second partials of f, taken symbolically)."""
    n = pd.n
    df = np.empty(n)
    hess = np.empty((n, n))
    for k in range(n):
        jt = f.diff(k).jet(pd.p)
        df[k] = jt.val
        hess[k] = jt.der
    return sharp_jet(pd, df, hess)


def gradient_jet(pd: PointData, f: Expr):
    """Jet of grad f = #df, (grad f)^j = g^{ji} d_i f."""
    n = pd.n
    df = np.empty(n)
    hess = np.empty((n, n))
    for k in range(n):
        jt = f.diff(k).jet(pd.p)
        df[k] = jt.val
        hess[k] = jt.der
    X = pd.G @ df
    dX = np.einsum("jil,i->jl", pd.dG, df) + pd.G @ hess
    return X, dX


def casimir_defect(pd: PointData) -> float:
    """max |pi#(df)| over declared Casimirs f."""
    worst = 0.0
    for f in pd.S.casimirs:
        v = f.jet(pd.p).der @ pd.Pi
        worst = max(worst, float(np.max(np.abs(v), initial=0.0)))
    return worst


# Jacobi identity -----------------------------------------------------------------

def jacobiator_tensor(pd: PointData) -> np.ndarray:
    """C^{ijk} = pi^{il} d_l pi^{jk} + cyclic."""
    T = np.einsum("il,jkl->ijk", pd.Pi, pd.dPi)
    return T + T.transpose(1, 2, 0) + T.transpose(2, 0, 1)


def jacobiator(S, p=None) -> float:
    """Largest cyclic-sum component over i < j < k."""
    pd = _pd(S, p)
    if pd.n < 3:
        return 0.0
    return float(np.max(np.abs(jacobiator_tensor(pd))))


# Koszul bracket and Lie derivatives ---------------------------------------------

def koszul_bracket_jets(pd: PointData, a, da, b, db) -> np.ndarray:
    """[a, b]_pi = L_{pi# a} b - L_{pi# b} a - d(pi(a, b)) from field jets."""
    X, dX = sharp_jet(pd, a, da)
    Y, dY = sharp_jet(pd, b, db)
    dpab = (
        np.einsum("ik,ij,j->k", da, pd.Pi, b)
        + np.einsum("i,ijk,j->k", a, pd.dPi, b)
        + np.einsum("i,ij,jk->k", a, pd.Pi, db)
    )
    return db @ X + dX.T @ b - da @ Y - dY.T @ a - dpab


def koszul_bracket(S, alpha, beta, p) -> np.ndarray:
    pd = _pd(S, p)
    a, da = field_jet(alpha, pd.p, pd.n)
    b, db = field_jet(beta, pd.p, pd.n)
    return koszul_bracket_jets(pd, a, da, b, db)


def lie_pi_jets(pd: PointData, X, dX) -> np.ndarray:
    """(L_X pi)^{ij} = X^l d_l pi^{ij} - pi^{lj} d_l X^i - pi^{il} d_l X^j."""
    return pd.dPi @ X - dX @ pd.Pi - pd.Pi @ dX.T


def lie_derivative_pi(S, X, p) -> np.ndarray:
    pd = _pd(S, p)
    x, dx = field_jet(X, pd.p, pd.n)
    return lie_pi_jets(pd, x, dx)


def lie_form_jets(X, dX, b, db) -> np.ndarray:
    """(L_X b)_i = X^l d_l b_i + b_l d_i X^l."""
    return db @ X + dX.T @ b


def lie_derivative_form(X, beta, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    n = p.shape[0]
    x, dx = field_jet(X, p, n)
    b, db = field_jet(beta, p, n)
    return lie_form_jets(x, dx, b, db)


def lie_vector_jets(X, dX, Y, dY) -> np.ndarray:
    """[X, Y]^j = X^l d_l Y^j - Y^l d_l X^j."""
    return dY @ X - dX @ Y


def lie_sym2_jets(X, dX, h, dh) -> np.ndarray:
    """(L_X h)_{ij} for a covariant 2-tensor h with dh[i, j, l] = d_l h_{ij}."""
    return dh @ X + dX.T @ h + h @ dX


# divergence -------------------------------------------------------------------------

@dataclass(frozen=True)
class Divergence:
    """div pi by the volume-form formula and by the connection frame sum."""

    coordinate: np.ndarray
    frame: np.ndarray

    @property
    def discrepancy(self) -> float:
        return float(np.max(np.abs(self.coordinate - self.frame), initial=0.0))

    @property
    def value(self) -> np.ndarray:
        return self.coordinate


def div_pi_coordinate(pd: PointData) -> np.ndarray:
    """V^i = d_j pi^{ij} + pi^{ij} d_j log sqrt|det g_cov|, so (div pi)(f) = div X_f."""
    G = pd.G
    trace = np.einsum("ab,bal->l", np.linalg.inv(G), pd.dG)  # d_l log|det G|
    return np.einsum("ijj->i", pd.dPi) - 0.5 * pd.Pi @ trace


def orthonormal_coframe(G: np.ndarray):
    """Covectors alpha_a (rows) with <alpha_a, alpha_b> = eps_a delta_ab."""
    lam, Q = np.linalg.eigh(G)
    frame = (Q / np.sqrt(np.abs(lam))).T
    return frame, np.sign(lam)


def div_pi_frame(pd: PointData) -> np.ndarray:
    """Sign-adjusted frame sum: component m is -sum_a eps_a <nabla^{alpha_a} dx^m, alpha_a>."""
    from .connections import contravariant_symbols_at

    Gam = contravariant_symbols_at(pd).Gamma
    frame, eps = orthonormal_coframe(pd.G)
    out = np.zeros(pd.n)
    for a, e in zip(frame, eps):
        # nabla^{alpha} dx^m has components alpha_i Gamma^{im}_k (dx^m is constant)
        nab = np.einsum("i,imk->mk", a, Gam)
        out += e * (nab @ pd.G @ a)
    return -out


def div_pi(S, p=None) -> Divergence:
    pd = _pd(S, p)
    return Divergence(coordinate=div_pi_coordinate(pd), frame=div_pi_frame(pd))
