"""Leafwise geometry: frames adapted to the symplectic foliation, the leaf
metric and symplectic form, and leaf tracing by Hamiltonian flows.

Frames are built by Gram-Schmidt with pivots chosen once from plain values.
Rerunning the same pivot sequence over Jet scalars differentiates the frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import jet as jm
from .errors import DomainError, LeftValidityBox, NotLeafTangent, RankDrop
from .linear import EPS_RANK, numerical_rank
from .structure import PointData, Structure

TANGENT_TOL = 1e-8


@dataclass(frozen=True)
class LeafFrame:
    p: np.ndarray
    tangent: np.ndarray  # rows E_a
    normal: np.ndarray  # rows N_b
    eps_tangent: np.ndarray
    eps_normal: np.ndarray
    generators: np.ndarray  # rows: covectors beta_a with pi# beta_a spanning the leaf
    pivots: tuple  # (tangent pivots, normal pivots)

    @property
    def rank(self) -> int:
        return self.tangent.shape[0]

    tangent_flat: np.ndarray = field(default=None, repr=False)
    normal_flat: np.ndarray = field(default=None, repr=False)

    @property
    def complement_covectors(self) -> np.ndarray:
        """Flat of the tangent frame: a basis of (Ker pi#)^perp."""
        return self.tangent_flat

    @property
    def kernel_covectors(self) -> np.ndarray:
        """Flat of the normal frame: a basis of Ker pi#."""
        return self.normal_flat


def _pd(S, p) -> PointData:
    return S if isinstance(S, PointData) else S.at(p)


def _inner(u, v, g):
    return u @ g @ v


def _choose_pivots(cands, g, count, basis, eps):
    """Greedy Gram-Schmidt pivots on plain floats; returns the chosen indices."""
    basis = list(basis)
    eps = list(eps)
    chosen = []
    for _ in range(count):
        best, best_r = None, -1.0
        for k, c in enumerate(cands):
            if k in chosen:
                continue
            r = c.astype(float).copy()
            for e, s in zip(basis, eps):
                r = r - s * _inner(r, e, g) * e
            size = abs(_inner(r, r, g))
            if size > best_r:
                best, best_r = k, size
        if best is None or best_r <= 0.0:
            raise RankDrop(np.zeros(len(g)), "could not complete frame")
        r = cands[best].astype(float).copy()
        for e, s in zip(basis, eps):
            r = r - s * _inner(r, e, g) * e
        q = _inner(r, r, g)
        if abs(q) < 1e-14 * max(1.0, float(np.max(np.abs(cands[best])) ** 2)):
            raise RankDrop(np.zeros(len(g)), "null direction in Gram-Schmidt")
        basis.append(r / math.sqrt(abs(q)))
        eps.append(1.0 if q > 0 else -1.0)
        chosen.append(best)
    return chosen


def _gram_schmidt(cands, g, pivots, basis=(), eps=()):
    """Orthonormalize cands[pivots] against basis; works on floats or Jets."""
    out, signs = [], []
    basis = list(basis)
    eps = list(eps)
    for k in pivots:
        r = cands[k]
        for e, s in zip(basis, eps):
            r = r - (s * _inner(r, e, g)) * e
        q = _inner(r, r, g)
        qv = jm.value_of(q)
        s = 1.0 if qv > 0 else -1.0
        norm = jm.sqrt(s * q)
        e = r / norm if isinstance(norm, jm.Jet) else r / float(norm)
        basis.append(e)
        eps.append(s)
        out.append(e)
        signs.append(s)
    return out, signs


def frame_pivots(pd: PointData, eps_rank: float = EPS_RANK, rank: Optional[int] = None):
    n = pd.n
    if rank is None:
        rank = numerical_rank(pd.Pi, eps_rank)
    g = pd.Gcov
    tp = _choose_pivots(pd.Pi, g, rank, (), ())
    tang, teps = _gram_schmidt(pd.Pi, g, tp)
    npiv = _choose_pivots(np.eye(n), g, n - rank, tang, teps)
    return tuple(tp), tuple(npiv)


def _build(Pi, g, pivots, n):
    tang, teps = _gram_schmidt(Pi, g, pivots[0])
    norm, neps = _gram_schmidt(np.eye(n), g, pivots[1], tang, teps)
    return tang, teps, norm, neps


def leaf_frame(S, p=None, eps_rank: float = EPS_RANK, pivots=None) -> LeafFrame:
    """Orthonormal tangent and normal frames of the leaf through p.

    ``pivots`` overrides the greedy choice (a pair of index tuples), which the
    tests use to check frame independence.
    """
    pd = _pd(S, p)
    if pivots is None:
        pivots = frame_pivots(pd, eps_rank)
    g = pd.Gcov
    tang, teps, norm, neps = _build(pd.Pi, g, pivots, pd.n)
    T = np.array(tang, dtype=float).reshape(len(tang), pd.n)
    N = np.array(norm, dtype=float).reshape(len(norm), pd.n)
    return LeafFrame(
        p=pd.p,
        tangent=T,
        normal=N,
        eps_tangent=np.array(teps),
        eps_normal=np.array(neps),
        generators=np.eye(pd.n)[list(pivots[0])].reshape(len(pivots[0]), pd.n),
        pivots=tuple(tuple(x) for x in pivots),
        tangent_flat=T @ g,
        normal_flat=N @ g,
    )


@dataclass
class FrameJets:
    """Frames with first partials: val[a, i], der[a, i, l]."""

    E: np.ndarray
    dE: np.ndarray
    N: np.ndarray
    dN: np.ndarray
    eps_tangent: np.ndarray
    eps_normal: np.ndarray
    g: np.ndarray
    dg: np.ndarray

    def flat(self, which: str):
        """Jets of the covectors g(E_a) or g(N_b)."""
        V, dV = (self.E, self.dE) if which == "tangent" else (self.N, self.dN)
        val = V @ self.g
        der = np.einsum("ai,ijl->ajl", V, self.dg) + np.einsum("ail,ij->ajl", dV, self.g)
        return val, der


def frame_jets(S, p=None, eps_rank: float = EPS_RANK, pivots=None, check_rank: bool = True) -> FrameJets:
    """Differentiate the pivot-frozen frames by running them over Jet scalars."""
    pd = _pd(S, p)
    n = pd.n
    if check_rank:
        _check_rank_locally_constant(pd, eps_rank)
    if pivots is None:
        pivots = frame_pivots(pd, eps_rank)
    Pi_j = jm.lift(pd.Pi, pd.dPi)
    g_j = jm.lift(pd.Gcov, pd.dGcov)
    eye = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            eye[i, j] = float(i == j)
    tang, teps = _gram_schmidt(Pi_j, g_j, pivots[0])
    norm, neps = _gram_schmidt(eye, g_j, pivots[1], tang, teps)
    E, dE = jm.split(np.array(tang, dtype=object).reshape(len(tang), n), n)
    N, dN = jm.split(np.array(norm, dtype=object).reshape(len(norm), n), n)
    return FrameJets(E, dE, N, dN, np.array(teps), np.array(neps), pd.Gcov, pd.dGcov)


def _check_rank_locally_constant(pd: PointData, eps_rank: float, h: float = 1e-4) -> None:
    """Rank at p must equal the rank at a few nearby points."""
    r = numerical_rank(pd.Pi, eps_rank)
    n = pd.n
    for k in range(n):
        for sgn in (1.0, -1.0):
            q = pd.p.copy()
            q[k] += sgn * h
            try:
                Pq = pd.S.pi.value(q)
            except DomainError:
                continue
            if numerical_rank(Pq, eps_rank) != r:
                raise RankDrop(pd.p)


# leaf metric and symplectic form -------------------------------------------------

def _preimage(pd: PointData, X, eps_rank: float = EPS_RANK) -> np.ndarray:
    """beta in (Ker pi#)^perp with pi# beta = X."""
    from .linear import kernel_splitting

    X = np.asarray(X, dtype=float)
    sp = kernel_splitting(pd.Pi, pd.G, eps_rank)
    C = sp.complement_basis
    if sp.rank == 0:
        if np.max(np.abs(X), initial=0.0) > TANGENT_TOL:
            raise NotLeafTangent(float(np.max(np.abs(X))))
        return np.zeros(pd.n)
    M = pd.Pi.T @ C  # pi#(C c) = Pi^T C c
    c, *_ = np.linalg.lstsq(M, X, rcond=None)
    resid = float(np.max(np.abs(M @ c - X), initial=0.0))
    if resid > TANGENT_TOL * max(1.0, float(np.max(np.abs(X), initial=0.0))):
        raise NotLeafTangent(resid)
    return C @ c


def leaf_metric_38(S, p, X, Y) -> float:
    """<(pi_F#)^{-1} X, (pi_F#)^{-1} Y> with preimages in the complement."""
    pd = _pd(S, p)
    b = _preimage(pd, X)
    c = _preimage(pd, Y)
    return float(b @ pd.G @ c)


def leaf_symplectic(S, p, X, Y) -> float:
    """omega_F(X, Y) = pi(beta, gamma) for complement preimages."""
    pd = _pd(S, p)
    b = _preimage(pd, X)
    c = _preimage(pd, Y)
    return float(b @ pd.Pi @ c)


def tangent_J(pd: PointData, J: np.ndarray) -> np.ndarray:
    """J' = -# J flat as a matrix on vectors."""
    return -pd.G @ J @ pd.Gcov


# leaf tracing ---------------------------------------------------------------------------

@dataclass
class LeafTrace:
    times: np.ndarray
    points: np.ndarray
    schedule: list
    drift: np.ndarray  # drift[row, c] = |C_c(x) - C_c(x0)|
    step: float
    method: str = "rk4"
    casimir_names: list = field(default_factory=list)

    @property
    def max_drift(self) -> np.ndarray:
        if self.drift.size == 0:
            return np.zeros(self.drift.shape[1] if self.drift.ndim == 2 else 0)
        return self.drift.max(axis=0)

    def to_csv(self, coords: Sequence[str]) -> str:
        header = ["t", *coords] + [f"drift_{k}" for k in range(self.drift.shape[1])]
        lines = [",".join(header)]
        for t, x, d in zip(self.times, self.points, self.drift):
            lines.append(",".join(repr(float(v)) for v in (t, *x, *d)))
        return "\n".join(lines) + "\n"


def trace_leaf(S: Structure, p0, schedule, step: float = 1e-3) -> LeafTrace:
    """Integrate dx/dt = X_{x_i}(x) segment by segment with classical RK4.

    ``schedule`` is a list of (coordinate index or name, duration). Each
    segment uses ceil(|T| / step) equal steps; negative durations run the flow
    backwards.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(p0, dtype=float).copy()
    if not S.admissible(x):
        raise LeftValidityBox(0.0)
    cas = list(S.casimirs)
    c0 = np.array([f(x) for f in cas])

    def drift_at(y):
        return np.abs(np.array([f(y) for f in cas]) - c0) if cas else np.zeros(0)

    times = [0.0]
    pts = [x.copy()]
    drifts = [drift_at(x)]
    t = 0.0
    norm_sched = []
    for idx, dur in schedule:
        k = S.coords.index(idx) if isinstance(idx, str) else int(idx)
        norm_sched.append((k, float(dur)))
        dur = float(dur)
        if dur == 0.0:
            continue
        steps = max(1, math.ceil(abs(dur) / step - 1e-9))
        h = dur / steps

        def f(y, k=k):
            return S.pi.value(y)[k]

        for _ in range(steps):
            k1 = f(x)
            k2 = f(x + 0.5 * h * k1)
            k3 = f(x + 0.5 * h * k2)
            k4 = f(x + h * k3)
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
            if not S.admissible(x):
                partial = LeafTrace(np.array(times), np.array(pts), norm_sched,
                                    np.array(drifts).reshape(len(pts), len(cas)), step)
                raise LeftValidityBox(t, partial)
            times.append(t)
            pts.append(x.copy())
            drifts.append(drift_at(x))
    return LeafTrace(
        times=np.array(times),
        points=np.array(pts),
        schedule=norm_sched,
        drift=np.array(drifts).reshape(len(pts), len(cas)),
        step=float(step),
        casimir_names=[str(c) for c in cas],
    )
