import numpy as np
import pytest

from poisson_lab import gallery
from poisson_lab.classify import riemann_poisson_defect
from poisson_lab.errors import DegenerateCosymplectic, NotClosed, RankDeficient
from poisson_lab.submersion import (
    SubmersionSpec,
    check_submersion,
    cosymplectic_conditions,
    cosymplectic_lift,
    dump_submersion,
    induced_J,
    parse_submersion,
    poisson_map_defect,
    pullback_identity_defects,
    riem_submersion_defect,
)

from conftest import make_text

SUBMERSIONS = [e.id for e in gallery.list_entries() if e.kind == "submersion"]
R4 = gallery.get("r4_to_r3").text


def _r4_with_M_pi(line):
    return R4.replace("pi y1 y2 = 1\nJ y1 y2 = 1\nJ y2 y1 = -1\n", line)


def test_ex_projection_is_poisson_and_riemannian():
    sub = gallery.get_submersion("r4_to_r3")
    for p in sub.P.sample(20, 0):
        assert poisson_map_defect(sub, p) < 1e-14
        assert riem_submersion_defect(sub, p) < 1e-14


def test_wrong_target_bivector():
    sub = parse_submersion(_r4_with_M_pi("pi y1 y3 = 1\n"))
    assert poisson_map_defect(sub, [0.1, 0.2, 0.3, 0.4]) == pytest.approx(1.0)


def test_product_projection_poisson():
    sub = gallery.get_submersion("product_proj")
    for p in sub.P.sample(20, 1):
        assert poisson_map_defect(sub, p) < 1e-10


def test_translation_quotient_riemannian():
    sub = gallery.get_submersion("translation_quotient")
    for p in sub.P.sample(20, 2):
        assert riem_submersion_defect(sub, p) < 1e-12


def test_scaling_map_is_not_riemannian():
    line = make_text("L", ("x",), metric=[("x", "x", "1")])
    text = "name = scale\nbegin P\n" + line + "end P\nbegin M\n" + line.replace("coords = x", "coords = y").replace("metric x x", "metric y y") + "end M\nmap y = 2*x\n"
    sub = parse_submersion(text)
    assert riem_submersion_defect(sub, [0.3]) == pytest.approx(3.0)


def test_rank_deficient_map():
    text = R4.replace("map y3 = x3", "map y3 = x1 + x2")
    sub = parse_submersion(text)
    with pytest.raises(RankDeficient):
        riem_submersion_defect(sub, [0.1, 0.2, 0.3, 0.4])


def test_pullback_identities_flat_projection():
    sub = gallery.get_submersion("r4_to_r3")
    for p in sub.P.sample(10, 3):
        d = pullback_identity_defects(sub, p)
        for k in ("pullback_J", "pullback_metric_conn", "pullback_poisson_conn", "gradient_related", "horizontal", "induced_J_compat"):
            assert d[k] < 1e-10, k
        # t*dy^3 is not in Ker pi_P#; J_P t*dy^3 leaves the pulled-back span
        assert d["kernel_containment"] == pytest.approx(1.0)
        assert d["basic_condition"] > 0.5


def test_pullback_zero_bivectors():
    text = make_text("Z4", ("a", "b", "c", "d"))
    m = make_text("Z2", ("u", "v"))
    sub = parse_submersion("name = z\nbegin P\n" + text + "end P\nbegin M\n" + m + "end M\nmap u = a\nmap v = b\n")
    d = pullback_identity_defects(sub, [0.1, 0.2, 0.3, 0.4])
    assert all(v == 0.0 for v in d.values() if v is not None)


def test_induced_J_matches_flat_structure():
    sub = gallery.get_submersion("r4_to_r3")
    JM = induced_J(sub, [0.1, -0.2, 0.3, 0.5])
    np.testing.assert_allclose(JM, sub.M.at([0.1, -0.2, 0.3]).Jm, atol=1e-10)


def test_induced_J_zero():
    text = R4.replace("J x1 x2 = 1\nJ x2 x1 = -1\nJ x3 x4 = 1\nJ x4 x3 = -1\n", "J x1 x2 = 0\n")
    text = text.replace("pi x1 x2 = 1\npi x3 x4 = 1\n", "")
    text = text.replace("pi y1 y2 = 1\nJ y1 y2 = 1\nJ y2 y1 = -1\n", "")
    sub = parse_submersion(text)
    assert not induced_J(sub, [0.1, 0.2, 0.3, 0.4]).any()


def test_cosymplectic_lift_recovers_projection():
    sub = gallery.get_submersion("cosymplectic_r3")
    assert sub.P.dim == 4
    for p in sub.P.sample(10, 4):
        assert np.linalg.matrix_rank(sub.P.at(p).Pi) == 4
        assert poisson_map_defect(sub, p) < 1e-10
        assert riem_submersion_defect(sub, p) < 1e-10
        d = pullback_identity_defects(sub, p)
        assert d["pullback_metric_conn"] < 1e-9 and d["pullback_poisson_conn"] < 1e-9
        c = cosymplectic_conditions(sub.cosymplectic, sub.point_map(p))
        assert max(c.values()) < 1e-10


def _cosym_M(omega="omega x y = 1", eta="eta z = 1"):
    text = f"name = c\ndim = 3\ncoords = x, y, z\n{omega}\n{eta}\nbase = 0, 0, 0\nbox = [-2, 2] x [-2, 2] x [-2, 2]\n"
    return parse_submersion("name = lift\nlift = cosymplectic\nbegin M\n" + text + "end M\n")


def test_degenerate_eta():
    with pytest.raises(DegenerateCosymplectic):
        _cosym_M(eta="eta z = 0")


def test_non_closed_form():
    with pytest.raises(NotClosed):
        _cosym_M(omega="omega x y = z")


def test_cosymplectic_lift_direct():
    M = gallery.get_submersion("cosymplectic_r3").cosymplectic
    sub = cosymplectic_lift(M)
    assert isinstance(sub, SubmersionSpec)
    assert sub.M.dim == 3


@pytest.mark.parametrize("entry_id", SUBMERSIONS)
def test_suite_matches_annotations(entry_id):
    entry = gallery.get(entry_id)
    sub = gallery.get_submersion(entry_id)
    for rec in check_submersion(sub, samples=40, seed=5):
        want = entry.expected.get(rec.check)
        if want in ("pass", "fail") and rec.passed is not None:
            assert rec.passed == (want == "pass"), (rec.check, rec.max_defect)


@pytest.mark.parametrize("entry_id", SUBMERSIONS)
def test_horizontal_lift_and_roundtrip(entry_id):
    sub = gallery.get_submersion(entry_id)
    for p in sub.P.sample(20, 6):
        d = pullback_identity_defects(sub, p)
        assert d["horizontal"] < 1e-9
        if d["basic_condition"] is not None and d["basic_condition"] < 1e-9:
            assert d["J_roundtrip"] < 1e-8


@pytest.mark.parametrize("entry_id", SUBMERSIONS)
def test_transport_of_riemann_poisson(entry_id):
    sub = gallery.get_submersion(entry_id)
    for p in sub.P.sample(20, 7):
        if riemann_poisson_defect(sub.P.at(p)) < 1e-9:
            assert riemann_poisson_defect(sub.M.at(sub.point_map(p))) < 1e-9


@pytest.mark.parametrize("entry_id", SUBMERSIONS)
def test_dump_round_trip(entry_id):
    sub = gallery.get_submersion(entry_id)
    again = parse_submersion(dump_submersion(sub))
    assert dump_submersion(again) == dump_submersion(sub)
    p = sub.P.sample(1, 8)[0]
    np.testing.assert_array_equal(again.point_map(p), sub.point_map(p))
