"""Pointwise linear algebra of compatible triples (Pi, G, J).

Conventions: covectors are column vectors, (pi# a)^j = a_i Pi[i, j],
<a, b> = a^T G b, (J a)_i = J[i, k] a_k. Compatibility reads Pi = G J.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, IndefiniteRestriction, MissingJ, SingularG

EPS_RANK = 1e-10
COND_LIMIT = 1e13


@dataclass(frozen=True)
class LinearTriple:
    Pi: np.ndarray
    G: np.ndarray
    Jmat: Optional[np.ndarray] = None

    def __post_init__(self):
        Pi = np.asarray(self.Pi, dtype=float)
        G = np.asarray(self.G, dtype=float)
        n = Pi.shape[0]
        if Pi.shape != (n, n) or G.shape != (n, n):
            raise DimensionMismatch("Pi and G must be square of the same size")
        scale = max(1.0, float(np.max(np.abs(Pi), initial=0.0)))
        if np.max(np.abs(Pi + Pi.T), initial=0.0) > 1e-12 * scale:
            raise ValueError("Pi is not skew-symmetric")
        gscale = max(1.0, float(np.max(np.abs(G), initial=0.0)))
        if np.max(np.abs(G - G.T), initial=0.0) > 1e-12 * gscale:
            raise ValueError("G is not symmetric")
        _check_invertible(G)
        object.__setattr__(self, "Pi", Pi)
        object.__setattr__(self, "G", G)
        if self.Jmat is not None:
            J = np.asarray(self.Jmat, dtype=float)
            if J.shape != (n, n):
                raise DimensionMismatch("Jmat has the wrong shape")
            object.__setattr__(self, "Jmat", J)

    @property
    def n(self) -> int:
        return self.Pi.shape[0]

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.G))


@dataclass(frozen=True)
class Splitting:
    """Kernel of pi# and its G-orthogonal complement; bases are columns."""

    kernel_basis: np.ndarray
    complement_basis: np.ndarray
    rank: int

    @property
    def basis(self) -> np.ndarray:
        """[kernel | complement] as one change-of-basis matrix."""
        return np.hstack([self.kernel_basis, self.complement_basis])


def _check_invertible(G: np.ndarray) -> None:
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularG(f"cometric is singular (condition number {cond:.3e})")


def compat_defect(t: LinearTriple) -> float:
    """max |pi^{ij} - g^{ik} J_k^j|."""
    if t.Jmat is None:
        raise MissingJ("compatibility needs J")
    return float(np.max(np.abs(t.Pi - t.G @ t.Jmat), initial=0.0))


def canonical_endomorphism(Pi, G) -> np.ndarray:
    """A = G^{-1} Pi, the unique map with pi(a, b) = <a, A b>."""
    G = np.asarray(G, dtype=float)
    _check_invertible(G)
    return np.linalg.solve(G, np.asarray(Pi, dtype=float))


def numerical_rank(Pi, eps_rank: float = EPS_RANK) -> int:
    s = np.linalg.svd(np.asarray(Pi, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > eps_rank * s[0]))


def kernel_splitting(Pi, G, eps_rank: float = EPS_RANK) -> Splitting:
    """Ker pi# and (Ker pi#)^perp, the latter spanned by G^{-1} Im(Pi)."""
    Pi = np.asarray(Pi, dtype=float)
    G = np.asarray(G, dtype=float)
    _check_invertible(G)
    n = Pi.shape[0]
    U, s, Vt = np.linalg.svd(Pi)
    r = 0 if s.size == 0 or s[0] == 0.0 else int(np.sum(s > eps_rank * s[0]))
    if r % 2:
        r -= 1  # skew matrices have even rank; a lone tiny singular value is noise
    K = Vt[r:].T.copy()
    C = np.linalg.solve(G, U[:, :r])
    # fixed sign normalization for determinism
    for M in (K, C):
        for j in range(M.shape[1]):
            k = int(np.argmax(np.abs(M[:, j])))
            if M[k, j] < 0:
                M[:, j] *= -1
    return Splitting(kernel_basis=K.reshape(n, n - r), complement_basis=C.reshape(n, r), rank=r)


def _polar_pieces(Pi, G, eps_rank):
    G = np.asarray(G, dtype=float)
    Pi = np.asarray(Pi, dtype=float)
    sp = kernel_splitting(Pi, G, eps_rank)
    A = canonical_endomorphism(Pi, G)
    r = sp.rank
    C = sp.complement_basis
    B = sp.basis
    if r == 0:
        return sp, B, None, None, None
    G1 = C.T @ G @ C
    G1 = 0.5 * (G1 + G1.T)
    try:
        L = np.linalg.cholesky(G1)
    except np.linalg.LinAlgError as exc:
        raise IndefiniteRestriction("cometric restricted to (Ker pi#)^perp is not positive definite") from exc
    A1 = np.linalg.lstsq(C, A @ C, rcond=None)[0]
    # B1 = L^T A1 L^{-T} is skew in a G1-orthonormal basis
    Linv_T = np.linalg.inv(L).T
    Bs = L.T @ A1 @ Linv_T
    Bs = 0.5 * (Bs - Bs.T)
    # SVD of Bs: right singular vectors diagonalize -Bs^2 = Bs^T Bs without squaring the condition number
    U, s, Vt = np.linalg.svd(Bs)
    if s[-1] <= 0 or s[-1] < 1e-14 * s[0]:
        raise IndefiniteRestriction("leafwise operator is degenerate")
    absB = (Vt.T * s) @ Vt
    JB = U @ Vt
    JB = 0.5 * (JB - JB.T)
    absA1 = Linv_T @ absB @ L.T
    J1 = Linv_T @ JB @ L.T
    return sp, B, G1, absA1, J1


def polar_f_structure(Pi, G, eps_rank: float = EPS_RANK):
    """Polar construction: an f-structure J and cometric G_A compatible with Pi.

    G_A equals G on Ker pi#, <-, |A1| -> on the complement, and has zero
    cross blocks; J vanishes on Ker pi# and is the unitary polar factor of A
    on the complement.
    """
    G = np.asarray(G, dtype=float)
    sp, B, G1, absA1, J1 = _polar_pieces(Pi, G, eps_rank)
    n, r = G.shape[0], sp.rank
    if r == 0:
        return np.zeros((n, n)), G.copy()
    K = sp.kernel_basis
    Binv = np.linalg.inv(B)
    Jblock = scipy.linalg.block_diag(np.zeros((n - r, n - r)), J1)
    J = B @ Jblock @ Binv
    leaf = G1 @ absA1
    leaf = 0.5 * (leaf + leaf.T)
    M = scipy.linalg.block_diag(K.T @ G @ K, leaf)
    GA = Binv.T @ M @ Binv
    return J, 0.5 * (GA + GA.T)


def assemble_block_cometric(leaf_block, transverse_block, splitting: Splitting) -> np.ndarray:
    """Cometric with the given complement and kernel Gram blocks, zero cross terms.

    Blocks are Gram matrices in the splitting's complement and kernel bases.
    """
    leaf = np.atleast_2d(np.asarray(leaf_block, dtype=float)) if np.size(leaf_block) else np.zeros((0, 0))
    trans = np.atleast_2d(np.asarray(transverse_block, dtype=float)) if np.size(transverse_block) else np.zeros((0, 0))
    r = splitting.rank
    k = splitting.kernel_basis.shape[1]
    if leaf.shape != (r, r) or trans.shape != (k, k):
        raise DimensionMismatch(
            f"blocks must be {r}x{r} (leaf) and {k}x{k} (transverse), got {leaf.shape} and {trans.shape}"
        )
    if np.max(np.abs(leaf - leaf.T), initial=0.0) > 1e-12 or np.max(np.abs(trans - trans.T), initial=0.0) > 1e-12:
        raise ValueError("blocks must be symmetric")
    Binv = np.linalg.inv(splitting.basis)
    M = scipy.linalg.block_diag(trans, leaf)
    return Binv.T @ M @ Binv



def j_flat_j_defects(Pi, G) -> dict:
    """Discrete check of J o flat o J = flat for invertible Pi.

    omega = -Pi^{-1}; the vector-side J is read off omega(X, Y) = <J X, Y>
    with <-, -> the inner product on vectors (G^{-1}), the covector-side J is
    the canonical one G^{-1} Pi. Returns the identity defect and the two
    complex-structure defects |J^2 + I| on covectors and on vectors.
    """
    Pi = np.asarray(Pi, dtype=float)
    G = np.asarray(G, dtype=float)
    n = Pi.shape[0]
    _check_invertible(G)
    if numerical_rank(Pi) < n:
        raise ValueError("Pi must be invertible")
    flat = np.linalg.inv(G)
    W = -np.linalg.inv(Pi)
    Jv = -G @ W          # X^T W Y = (Jv X)^T flat Y
    Jc = flat @ Pi
    eye = np.eye(n)
    return {
        "identity": float(np.max(np.abs(Jc @ flat @ Jv - flat))),
        "covector_J2": float(np.max(np.abs(Jc @ Jc + eye))),
        "vector_J2": float(np.max(np.abs(Jv @ Jv + eye))),
    }
