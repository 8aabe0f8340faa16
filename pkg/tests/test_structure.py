import numpy as np
import pytest

from poisson_lab import gallery
from poisson_lab.errors import DimensionMismatch, ParseError, PoissonLabError, UnknownSymbol, ValidationError
from poisson_lab.structure import dump_structure, load_structure, parse_structure

from conftest import central_difference, make_text, rel_err

XYZ = ("x", "y", "z")


def test_flat_structure_loads():
    S = load_structure(gallery.euclid_rn_rs_text(3, 1, 2))
    for p in S.sample(10, 0):
        assert np.linalg.matrix_rank(S.at(p).Pi) == 2


def test_so3_text_loads_with_casimir(so3):
    S = load_structure(so3.to_text())
    assert len(S.casimirs) == 1
    assert str(S.casimirs[0]).replace(" ", "") == "x^2+y^2+z^2"


def test_comments_and_whitespace():
    text = "# header\n" + make_text("c", XYZ, pi=[("x", "y", "z")]).replace("pi x y = z", "  pi   x y=z   # inline")
    S = load_structure(text)
    assert S.at([0, 0, 2.0]).Pi[0, 1] == 2.0


def test_upper_triangle_skew_fill():
    S = load_structure(make_text("c", XYZ, pi=[("x", "z", "y")]))
    Pi = S.at([0.0, 3.0, 0.0]).Pi
    assert Pi[0, 2] == 3.0 and Pi[2, 0] == -3.0


def test_parse_error_reports_line():
    text = make_text("c", XYZ).replace("coords = x, y, z", "coords = x, y, z\nbogus line here")
    with pytest.raises(ParseError) as info:
        parse_structure(text)
    assert info.value.line == 4


def test_unknown_symbol_in_entry():
    with pytest.raises((ParseError, UnknownSymbol)):
        parse_structure(make_text("c", XYZ, pi=[("x", "y", "q")]))


def test_non_poisson_rejected_then_allowed():
    text = gallery.get("nonpoisson_demo").text
    with pytest.raises(ValidationError) as info:
        load_structure(text)
    assert info.value.check == "jacobi"
    assert info.value.defect == pytest.approx(1.0)
    assert load_structure(text, allow_non_poisson=True).name == "nonpoisson_demo"


def test_false_casimir_rejected():
    with pytest.raises(ValidationError) as info:
        load_structure(make_text("c", XYZ, pi=[("x", "y", "1")], extra="casimir = x"))
    assert info.value.check == "casimir"


def test_dimension_mismatch(so3):
    with pytest.raises(DimensionMismatch):
        so3.at([1.0, 2.0])


EXPORTABLE = [lbl for lbl, S in gallery.all_structures() if not lbl.startswith("cosymplectic_r3")]


@pytest.mark.parametrize("label", EXPORTABLE)
def test_dump_round_trip(label):
    S = dict(gallery.all_structures())[label]
    again = load_structure(dump_structure(S))
    assert dump_structure(again) == dump_structure(S)
    for p in S.sample(5, 1):
        a, b = S.at(p), again.at(p)
        np.testing.assert_array_equal(a.Pi, b.Pi)
        np.testing.assert_array_equal(a.G, b.G)


def test_derived_fields_not_exportable():
    S = gallery.get_submersion("cosymplectic_r3").P
    with pytest.raises(PoissonLabError):
        dump_structure(S)


def test_sampling_deterministic_and_admissible(so3):
    a = so3.sample(50, 42)
    assert np.array_equal(a, so3.sample(50, 42))
    assert not np.array_equal(a, so3.sample(50, 43))
    assert all(so3.admissible(p) for p in a)
    assert np.linalg.norm(a, axis=1).min() > 0.1
    assert not so3.admissible([0.0, 0.0, 0.05])
    assert not so3.admissible([3.0, 0.0, 0.0])


@pytest.mark.parametrize("label", [lbl for lbl, _ in gallery.all_structures()])
def test_jets_match_finite_differences(label):
    S = dict(gallery.all_structures())[label]
    fields = [S.pi, S.cometric] + ([S.J] if S.J is not None else [])
    for p in S.sample(20, 2):
        for F in fields:
            _, der = F.jet(p)
            assert rel_err(der, central_difference(F.value, p)) < 1e-6
