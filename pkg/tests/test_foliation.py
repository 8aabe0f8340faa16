import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poisson_lab import gallery
from poisson_lab.connections import resolve_J
from poisson_lab.errors import LeftValidityBox, NotLeafTangent
from poisson_lab.foliation import (
    leaf_frame,
    leaf_metric_38,
    leaf_symplectic,
    tangent_J,
    trace_leaf,
)
from poisson_lab.identities import alternative_pivots, run_identities

LABELS = [lbl for lbl, _ in gallery.all_structures()]


def _s(label):
    return dict(gallery.all_structures())[label]


def _frame_invariants(S, p):
    fr = leaf_frame(S, p)
    g = S.at(p).Gcov
    F = np.vstack([fr.tangent, fr.normal])
    gram = F @ g @ F.T
    np.testing.assert_allclose(gram, np.diag(np.concatenate([fr.eps_tangent, fr.eps_normal])), atol=1e-10)
    # every pi# dx^i lies in span E
    Pi = S.at(p).Pi
    if fr.rank:
        coef, *_ = np.linalg.lstsq(fr.tangent.T, Pi.T, rcond=None)
        assert np.abs(fr.tangent.T @ coef - Pi.T).max() < 1e-9 * max(1.0, np.abs(Pi).max())
    return fr


def test_frame_flat():
    S = gallery.get_structure("euclid_rn_rs")
    fr = _frame_invariants(S, [0.3, 0.1, -0.2])
    assert fr.rank == 2
    # E is {d_1, d_2} up to order and sign
    np.testing.assert_allclose(np.abs(fr.tangent).sum(axis=0), [1, 1, 0], atol=1e-14)
    assert np.count_nonzero(fr.tangent) == 2
    np.testing.assert_allclose(np.abs(fr.normal), [[0, 0, 1]], atol=1e-14)


def test_frame_so3_pole(so3):
    fr = _frame_invariants(so3, [0.0, 0.0, 1.0])
    assert fr.rank == 2
    assert np.abs(fr.tangent[:, 2]).max() < 1e-14
    np.testing.assert_allclose(np.abs(fr.normal), [[0, 0, 1]], atol=1e-14)


def test_frame_zero_bivector():
    S = _s("zero_pi_curved")
    fr = leaf_frame(S, S.sample(1, 0)[0])
    assert fr.rank == 0
    assert fr.normal.shape == (S.dim, S.dim)


@pytest.mark.parametrize("label", LABELS)
def test_frame_invariants_over_gallery(label):
    S = _s(label)
    for p in S.sample(10, 1):
        _frame_invariants(S, p)


def test_frame_deterministic(so3):
    a = leaf_frame(so3, [0.4, -0.3, 1.1])
    b = leaf_frame(so3, [0.4, -0.3, 1.1])
    assert np.array_equal(a.tangent, b.tangent) and a.pivots == b.pivots


def test_leaf_metric_flat():
    S = gallery.get_structure("euclid_rn_rs")
    assert leaf_metric_38(S, [0, 0, 0], [1.0, 0, 0], [1.0, 0, 0]) == pytest.approx(1.0, abs=1e-14)


def test_leaf_symplectic_flat():
    S = gallery.get_structure("euclid_rn_rs")
    X, Y = [1.0, 0, 0], [0, 1.0, 0]
    w = leaf_symplectic(S, [0, 0, 0], X, Y)
    # omega = -pi^{-1} restricted to the leaf
    Pi2 = S.at([0, 0, 0]).Pi[:2, :2]
    assert w == pytest.approx(np.array(X[:2]) @ (-np.linalg.inv(Pi2)) @ np.array(Y[:2]), abs=1e-14)
    assert abs(w) == pytest.approx(1.0)
    assert leaf_symplectic(S, [0, 0, 0], X, X) == 0.0


def test_not_leaf_tangent():
    S = gallery.get_structure("euclid_rn_rs")
    with pytest.raises(NotLeafTangent):
        leaf_metric_38(S, [0, 0, 0], [0, 0, 1.0], [1.0, 0, 0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_leaf_forms_bilinear_and_symmetric(seed):
    S = gallery.get_structure("so3_reg_conformal@metric")
    rng = np.random.default_rng(seed)
    p = S.sample(1, int(rng.integers(1 << 31)))[0]
    Pi = S.at(p).Pi
    a, b, c = (rng.normal(size=3) @ Pi for _ in range(3))
    s, t = rng.normal(size=2)
    for form in (leaf_metric_38, leaf_symplectic):
        lin = form(S, p, s * a + t * b, c) - s * form(S, p, a, c) - t * form(S, p, b, c)
        assert abs(lin) < 1e-10 * max(1.0, abs(form(S, p, a, c)))
    assert abs(leaf_metric_38(S, p, a, b) - leaf_metric_38(S, p, b, a)) < 1e-10
    assert abs(leaf_symplectic(S, p, a, b) + leaf_symplectic(S, p, b, a)) < 1e-10
    fr = leaf_frame(S, p)
    gram = [[leaf_symplectic(S, p, e, f) for f in fr.tangent] for e in fr.tangent]
    assert abs(np.linalg.det(gram)) > 1e-8


@pytest.mark.parametrize("label", LABELS)
def test_leaf_identities_over_gallery(label):
    S = _s(label)
    rep = run_identities(S, samples=30, seed=3, checks=["leaf_omega_J", "leaf_metric_restriction", "leaf_omega_parallel", "frame_independence"])
    bad = [r.check for r in rep.records if r.passed is False]
    assert not bad, rep.to_dict()


def test_lemma_on_flat_kahler():
    # omega_F(X, Y) = <J'X, Y> and leaf metric = ambient metric on leaf vectors
    S = gallery.get_structure("euclid_rn_rs")
    p = np.zeros(3)
    pd = S.at(p)
    J, _ = resolve_J(pd)
    Jp = tangent_J(pd, J)
    rng = np.random.default_rng(0)
    for _ in range(10):
        X, Y = (rng.normal(size=3) @ pd.Pi for _ in range(2))
        assert abs(leaf_symplectic(S, p, X, Y) - (Jp @ X) @ pd.Gcov @ Y) < 1e-12
        assert abs(leaf_metric_38(S, p, X, Y) - X @ pd.Gcov @ Y) < 1e-12


def test_frame_independence_hook(so3):
    p = np.array([0.3, 0.5, 1.2])
    pd = so3.at(p)
    alt = alternative_pivots(pd)
    a, b = leaf_frame(so3, p), leaf_frame(so3, p, pivots=alt)
    assert a.pivots != b.pivots
    for form in (leaf_metric_38, leaf_symplectic):
        ga = np.array([[form(so3, p, e, f) for f in a.tangent] for e in a.tangent])
        gb = np.array([[form(so3, p, e, f) for f in b.tangent] for e in b.tangent])
        C, *_ = np.linalg.lstsq(a.tangent.T, b.tangent.T, rcond=None)
        np.testing.assert_allclose(C.T @ ga @ C, gb, atol=1e-9)


# tracing

def test_trace_so3_exact_flow(so3):
    tr = trace_leaf(so3, [0.0, 0.0, 1.0], [("x", 10.0)], step=1e-3)
    exact = np.column_stack([np.zeros_like(tr.times), np.sin(tr.times), np.cos(tr.times)])
    assert np.abs(tr.points - exact).max() < 1e-6
    assert tr.max_drift.max() < 1e-8
    assert tr.times[-1] == pytest.approx(10.0)


def test_trace_sl2_conserves_casimir():
    S = gallery.get_structure("sl2_lorentz")
    tr = trace_leaf(S, [1.0, 0.2, 0.3], [("y", 2.0), ("x", 3.0), ("z", -1.5)], step=1e-3)
    assert len(tr.casimir_names) == 1
    assert tr.max_drift.max() < 1e-8


def test_trace_flat_straight_segment():
    S = gallery.get_structure("euclid_rn_rs")
    tr = trace_leaf(S, [0.0, 0.0, 0.0], [("x1", 1.0)], step=1e-3)
    np.testing.assert_array_equal(tr.points[:, [0, 2]], 0.0)
    assert abs(tr.points[-1, 1] - 1.0) < 1e-12
    assert np.abs(np.diff(tr.points[:, 1]) - 1e-3).max() < 1e-12


def test_trace_consecutive_points_bounded(so3):
    tr = trace_leaf(so3, [0.6, 0.0, 0.8], [("z", 1.0), ("y", 1.0)], step=1e-2)
    speeds = np.linalg.norm(np.diff(tr.points, axis=0), axis=1) / np.diff(tr.times)
    bound = max(np.abs(so3.at(q).Pi).sum(axis=1).max() for q in tr.points)
    assert speeds.max() <= bound
    assert np.isfinite(tr.drift).all()


def test_trace_zero_duration(so3):
    tr = trace_leaf(so3, [0.0, 0.0, 1.0], [("x", 0.0)])
    assert tr.points.shape == (1, 3)
    assert tr.to_csv(so3.coords).count("\n") == 2


def test_trace_leaves_box():
    S = gallery.get_structure("euclid_rn_rs")
    with pytest.raises(LeftValidityBox) as info:
        trace_leaf(S, [0.0, 1.5, 0.0], [("x1", 1.0)], step=1e-2)
    assert 0.4 < info.value.time < 0.6
    assert info.value.trace is not None and len(info.value.trace.points) > 1


def test_trace_rejects_bad_step(so3):
    with pytest.raises(ValueError):
        trace_leaf(so3, [0, 0, 1.0], [("x", 1.0)], step=0.0)


def test_trace_csv(so3):
    tr = trace_leaf(so3, [0.0, 0.0, 1.0], [("x", 0.01)], step=1e-3)
    lines = tr.to_csv(so3.coords).splitlines()
    assert lines[0] == "t,x,y,z,drift_0"
    assert len(lines) == 1 + len(tr.times)
    assert float(lines[-1].split(",")[2]) == pytest.approx(np.sin(0.01), abs=1e-12)
