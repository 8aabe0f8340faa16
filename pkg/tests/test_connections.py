import numpy as np
import pytest

from poisson_lab import gallery
from poisson_lab.connections import (
    canonical_J,
    contravariant_christoffels,
    covariant_christoffels,
    covariant_metricity_defect,
    metricity_tensor,
    nabla_J,
    nabla_omega,
    nabla_pi,
    nijenhuis,
    torsion_tensor,
)
from poisson_lab.errors import DegeneratePi, MissingJ, NotFStructure
from poisson_lab.identities import run_identities
from poisson_lab.structure import load_structure

from conftest import central_difference, make_text, rel_err

LABELS = [lbl for lbl, _ in gallery.all_structures()]


def _s(label):
    return dict(gallery.all_structures())[label]


def fd_covariant_symbols(S, p):
    """Christoffel symbols of g_cov from finite-difference metric derivatives."""
    g = lambda q: np.linalg.inv(S.at(q).G)
    dg = central_difference(g, p)  # [i, j, l] = d_l g_ij
    ginv = np.linalg.inv(g(p))
    n = len(p)
    Gam = np.zeros((n, n, n))
    for k in range(n):
        for i in range(n):
            for j in range(n):
                Gam[k, i, j] = 0.5 * sum(ginv[k, l] * (dg[l, j, i] + dg[l, i, j] - dg[i, j, l]) for l in range(n))
    return Gam


def brute_contravariant_symbols(S, p):
    """Solve the Koszul-type system 2<nabla^i dx^j, dx^k> = ... on the coordinate coframe."""
    Pi = S.at(p).Pi
    G = S.at(p).G
    dG = central_difference(lambda q: S.at(q).G, p)
    dP = central_difference(lambda q: S.at(q).Pi, p)
    n = len(p)
    rhs = np.zeros((n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                anchor = Pi[i] @ dG[j, k] + Pi[j] @ dG[i, k] - Pi[k] @ dG[i, j]
                # [dx^a, dx^b]_pi = d pi^{ab}
                brackets = G[k] @ dP[i, j] - G[i] @ dP[j, k] + G[j] @ dP[k, i]
                rhs[i, j, k] = 0.5 * (anchor + brackets)
    # rhs[i, j, k] = Gamma^{ij}_m G^{mk}
    return np.einsum("ijk,km->ijm", rhs, np.linalg.inv(G))


def test_covariant_euclidean_zero(so3):
    assert not covariant_christoffels(so3, [0.3, 0.2, 1.0]).Gamma.any()


def test_covariant_lorentzian_zero():
    S = _s("sl2_lorentz")
    assert not covariant_christoffels(S, S.sample(1, 0)[0]).Gamma.any()


def test_covariant_radial_cometric_against_fd():
    S = _s("so3_reg_conformal@cometric")
    p = np.array([0.0, 0.0, 2.0])
    got = covariant_christoffels(S, p)
    assert np.abs(got.Gamma).max() > 0.1
    assert rel_err(got.Gamma, fd_covariant_symbols(S, p)) < 1e-6
    assert got.symmetry_defect() == 0.0
    assert covariant_metricity_defect(S.at(p)) < 1e-9


def test_contravariant_constant_zero():
    S = gallery.get_structure("euclid_rn_rs")
    assert not contravariant_christoffels(S, S.sample(1, 0)[0]).Gamma.any()


def test_contravariant_zero_bivector():
    S = _s("zero_pi_curved")
    for p in S.sample(5, 0):
        assert not contravariant_christoffels(S, p).Gamma.any()


def test_contravariant_so3_pole_brute_force(so3):
    p = np.array([0.0, 0.0, 1.0])
    got = contravariant_christoffels(so3, p).Gamma
    np.testing.assert_allclose(got, brute_contravariant_symbols(so3, p), atol=1e-9)
    pd = so3.at(p)
    assert np.abs(metricity_tensor(pd)).max() < 1e-10
    assert np.abs(torsion_tensor(pd)).max() < 1e-10


@pytest.mark.parametrize("label", ["so3_reg_conformal@metric", "sl2_lorentz", "symplectic_r2_conformal"])
def test_contravariant_brute_force_curved(label):
    S = _s(label)
    for p in S.sample(5, 1):
        got = contravariant_christoffels(S, p).Gamma
        assert rel_err(got, brute_contravariant_symbols(S, p)) < 1e-6


@pytest.mark.parametrize("label", LABELS)
def test_connection_axioms(label):
    S = _s(label)
    for p in S.sample(50, 2):
        pd = S.at(p)
        scale = max(1.0, pd.scale)
        assert np.abs(metricity_tensor(pd)).max() < 1e-9 * scale
        assert np.abs(torsion_tensor(pd)).max() < 1e-9 * scale
        assert covariant_metricity_defect(pd) < 1e-9 * scale


def test_nabla_pi_skew_in_last_two(so3):
    for p in so3.sample(20, 3):
        N = nabla_pi(so3, p)
        assert np.abs(N + N.transpose(0, 2, 1)).max() < 1e-14


def test_nabla_pi_so3_closed_form(so3):
    # unique metric torsion-free connection gives 1/2 (x_j delta_ik - x_k delta_ij)
    eye = np.eye(3)
    for p in so3.sample(20, 4):
        expect = 0.5 * (np.einsum("j,ik->ijk", p, eye) - np.einsum("k,ij->ijk", p, eye))
        np.testing.assert_allclose(nabla_pi(so3, p), expect, atol=1e-14)


def test_nabla_pi_zero_bivector():
    S = _s("zero_pi_curved")
    assert not nabla_pi(S, S.sample(1, 5)[0]).any()


def test_nabla_J_flat():
    S = gallery.get_structure("euclid_rn_rs")
    for p in S.sample(5, 6):
        assert not nabla_J(S, p).any()


def test_nabla_J_zero_structure():
    text = make_text("z", ("x", "y"), pi=[], extra="J x y = 0")
    S = load_structure(text)
    assert not nabla_J(S, [0.2, 0.3]).any()


def test_nabla_J_missing(so3):
    with pytest.raises(MissingJ):
        nabla_J(so3, [0.0, 0.0, 1.0])


def test_canonical_J_requires_f_structure():
    S = gallery.get_structure("euclid_rn_rs")
    canonical = nabla_J(S, S.sample(1, 0)[0], canonical=True)
    assert not canonical.any()
    # so3 with the Euclidean cometric: J = Pi has J^3 + J = (1 - r^2) J
    so3 = gallery.get_structure("so3_euclid")
    with pytest.raises(NotFStructure):
        nabla_J(so3, [0.0, 0.0, 1.5], canonical=True)


def test_canonical_J_derivative_against_fd():
    S = _s("so3_reg_conformal@metric")
    for p in S.sample(5, 7):
        J, dJ = canonical_J(S.at(p))
        fd = central_difference(lambda q: canonical_J(S.at(q))[0], p)
        assert rel_err(dJ, fd) < 1e-6


def test_nijenhuis_constant():
    S = gallery.get_structure("euclid_rn_rs")
    assert not nijenhuis(S, S.sample(1, 0)[0]).any()


@pytest.mark.parametrize("label", [lbl for lbl, S in gallery.all_structures() if S.has_J])
def test_nijenhuis_antisymmetric(label):
    S = _s(label)
    for p in S.sample(10, 8):
        N = nijenhuis(S, p)
        assert np.abs(N + N.transpose(1, 0, 2)).max() < 1e-9 * max(1.0, np.abs(N).max())


def test_nabla_omega_flat_symplectic():
    S = load_structure(make_text("flat2", ("x", "y"), pi=[("x", "y", "1")]))
    assert not nabla_omega(S, [0.3, -0.4]).any()


def test_nabla_omega_conformal_against_fd():
    S = load_structure(
        make_text("conf2", ("x", "y"), pi=[("x", "y", "1")], metric=[("x", "x", "exp(2*x)"), ("y", "y", "exp(2*x)")])
    )

    def W(q):
        return -np.linalg.inv(S.at(q).Pi)

    for p in S.sample(5, 9):
        got = nabla_omega(S, p)
        assert np.abs(got).max() > 1e-3
        Gam = fd_covariant_symbols(S, p)
        dW = central_difference(W, p)
        w = W(p)
        expect = dW - np.einsum("lki,lj->ijk", Gam, w) - np.einsum("lkj,il->ijk", Gam, w)
        assert rel_err(got, expect) < 1e-6


def test_nabla_omega_degenerate(so3):
    with pytest.raises(DegeneratePi):
        nabla_omega(so3, [0.0, 0.0, 1.0])


@pytest.mark.parametrize("label", LABELS)
def test_connection_identities_over_gallery(label):
    S = _s(label)
    rep = run_identities(
        S,
        samples=40,
        seed=5,
        checks=[
            "metricity",
            "torsion",
            "nijenhuis_nabla_J",
            "nabla_J_bridge",
            "omega_bridge",
            "kernel_anchor_symmetry",
            "kernel_parallel",
            "lie_gradient_pi",
            "hamiltonian_symmetry",
            "symplectic_agreement",
        ],
    )
    bad = [r.check for r in rep.records if r.passed is False]
    assert not bad, rep.to_dict()
