import numpy as np
import pytest

from poisson_lab import gallery
from poisson_lab.classify import classify
from poisson_lab.errors import UnknownEntry
from poisson_lab.structure import load_structure

REQUIRED = [
    "euclid_rn_rs", "so3_euclid", "so3_rescaled", "so3_reg_conformal@metric", "so3_reg_conformal@cometric",
    "sl2_lorentz", "sl2_reg_conformal@metric", "symplectic_r2_conformal", "product_proj", "r4_to_r3",
    "cosymplectic_r3", "translation_quotient", "nonpoisson_demo", "zero_pi_curved",
]
STRUCTURES = [e.id for e in gallery.list_entries() if e.kind == "structure" and not e.allow_non_poisson]


def test_required_ids_present():
    assert set(REQUIRED) <= set(gallery.ids())


def test_unknown_entry():
    with pytest.raises(UnknownEntry):
        gallery.get("no_such_structure")
    with pytest.raises(UnknownEntry):
        gallery.get("euclid_rn_rs:3,1,7")
    assert gallery.entry_for("no_such_structure") is None


def test_so3_content(so3):
    p = np.array([0.3, -0.5, 1.1])
    x, y, z = p
    pd = so3.at(p)
    np.testing.assert_array_equal(pd.Pi, [[0, z, -y], [-z, 0, x], [y, -x, 0]])
    np.testing.assert_array_equal(pd.G, np.eye(3))
    assert so3.casimirs[0](p) == pytest.approx(x * x + y * y + z * z)
    assert list(so3.box.lo) == [-2] * 3 and list(so3.box.hi) == [2] * 3
    assert not so3.admissible([0.05, 0.0, 0.0])


def test_sl2_content():
    S = gallery.get_structure("sl2_lorentz")
    p = np.array([0.3, -0.5, 1.1])
    x, y, z = p
    pd = S.at(p)
    np.testing.assert_array_equal(pd.Pi, [[0, -z, -y], [z, 0, x], [y, -x, 0]])
    np.testing.assert_array_equal(pd.G, np.diag([1.0, 1.0, -1.0]))
    assert S.casimirs[0](p) == pytest.approx(x * x + y * y - z * z)
    assert not S.admissible([0.3, 0.0, 0.3])


def test_parametric_family():
    S = gallery.get_structure("euclid_rn_rs:5,2,4")
    Pi = S.at(np.zeros(5)).Pi
    assert Pi[1, 3] == 1.0 and np.count_nonzero(Pi) == 2


@pytest.mark.parametrize("entry_id", gallery.ids())
def test_entries_load_and_export(entry_id):
    entry = gallery.get(entry_id)
    obj = gallery.load(entry_id)
    assert entry.reference
    if entry.kind == "structure":
        again = load_structure(obj.to_text(), allow_non_poisson=entry.allow_non_poisson)
        assert again.to_text() == obj.to_text()


def test_loading_is_deterministic():
    a = gallery.get("so3_euclid").load()
    b = gallery.get("so3_euclid").load()
    assert a.to_text() == b.to_text()


@pytest.mark.parametrize("entry_id", STRUCTURES)
def test_annotations_hold(entry_id):
    entry = gallery.get(entry_id)
    S = gallery.get_structure(entry_id)
    rep = classify(S, samples=60, seed=3, tolerances=entry.tolerances)
    for rec in rep.records:
        want = entry.expected.get(rec.check, "measure")
        if want == "measure" or rec.passed is None:
            continue
        assert rec.passed == (want == "pass"), (rec.check, rec.max_defect, entry.notes)


def test_contested_entries_are_measure_only():
    for v in ("metric", "cometric", "metric_rpi", "cometric_rpi"):
        for base in ("so3_reg_conformal", "sl2_reg_conformal"):
            entry = gallery.get(f"{base}@{v}")
            assert {k for k, w in entry.expected.items() if w != "measure"} == {"jacobi"}


@pytest.mark.parametrize("family,flipped", [("so3_reg_conformal", (0, 2)), ("sl2_reg_conformal", (1, 2))])
def test_displayed_J_reg_readings(family, flipped):
    S = gallery.get_structure(f"{family}@metric")
    i, j = flipped
    for p in S.sample(5, 4):
        # antisymmetrized, the display is -pi up to one entry pair of opposite sign, with no
        # conformal factor; it is not the canonical g pi under either reading
        expect = -S.at(p).Pi
        expect[[i, j], [j, i]] *= -1
        np.testing.assert_allclose(gallery.verbatim_J_reg(family, p, "skew"), expect, atol=1e-14)
        assert np.count_nonzero(gallery.verbatim_J_reg(family, p, "tensor")) <= 3
        dev = gallery.j_reg_deviation(f"{family}@metric", p)
        assert min(dev.values()) > 0.1
