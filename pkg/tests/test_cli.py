import json
import shutil
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from poisson_lab import gallery
from poisson_lab.cli import main
from poisson_lab.report import ReportDocument, recomputed_pass_flags_agree


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_check_gallery_entry_meets_annotations(capsys):
    code, out, _ = run(capsys, "check", "so3_euclid", "--samples", "50", "--seed", "7")
    assert code == 0
    doc = ReportDocument.from_json(out)
    assert doc.structure == "so3_euclid"
    assert doc.seed == 7 and doc.samples == 50
    assert recomputed_pass_flags_agree(doc)
    assert "riemann_poisson" in doc.decisive and doc.expected["riemann_poisson"] == "fail"


def test_json_round_trip(capsys):
    code, out, _ = run(capsys, "check", "euclid_rn_rs", "--samples", "20", "--seed", "1")
    assert code == 0
    doc = ReportDocument.from_json(out)
    assert json.loads(doc.to_json()) == json.loads(out)
    assert doc.to_dict()["tool"] == "poisson-lab"
    assert "div_pi" in doc.conventions


def test_reproducible_output_is_byte_identical(capsys):
    argv = ("check", "so3_rescaled", "--samples", "30", "--seed", "3", "--reproducible")
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b
    assert "timing" not in json.loads(a)
    _, c, _ = run(capsys, *argv[:-1])
    assert "wall_time_s" in json.loads(c)["timing"]


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("POISSON_LAB_SEED", "11")
    _, out, _ = run(capsys, "check", "flat_r2", "--samples", "5", "--reproducible")
    assert json.loads(out)["seed"] == 11


def test_explicit_check_failing_exits_3(capsys):
    code, out, err = run(capsys, "check", "so3_euclid", "--samples", "20", "--checks", "casimir_invariance")
    assert code == 3
    assert "casimir_invariance" in err
    assert json.loads(out)["reports"]


def test_explicit_check_passing(capsys):
    code, _, _ = run(capsys, "check", "so3_euclid", "--samples", "20", "--checks", "jacobi,div_free")
    assert code == 0


def test_non_poisson_load_error(capsys):
    code, _, err = run(capsys, "check", "nonpoisson_demo")
    assert code == 2
    assert "jacobi" in err


def test_non_poisson_allowed(capsys):
    code, out, _ = run(capsys, "check", "nonpoisson_demo", "--allow-non-poisson", "--samples", "10", "--checks", "jacobi")
    assert code == 3
    rec = ReportDocument.from_json(out).reports[0]["jacobi"]
    assert rec.max_defect == pytest.approx(1.0)


def test_unknown_target(capsys):
    assert run(capsys, "check", "does_not_exist")[0] == 2
    assert run(capsys, "check", "so3_euclid", "--checks", "bogus")[0] == 2


def test_file_target_requires_all_checks(capsys, tmp_path):
    path = tmp_path / "flat.txt"
    path.write_text(gallery.euclid_rn_rs_text(3, 1, 2))
    code, out, _ = run(capsys, "check", str(path), "--samples", "20", "--checks", "jacobi,riemann_poisson,kahler_poisson")
    assert code == 0
    path2 = tmp_path / "so3.txt"
    path2.write_text(gallery.get_structure("so3_euclid").to_text())
    code, _, _ = run(capsys, "check", str(path2), "--samples", "20")
    assert code == 3


def test_malformed_file(capsys, tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("name = bad\ndim = 2\ncoords = x, y\npi x y = x +\n")
    assert run(capsys, "check", str(path))[0] == 2


def test_out_file(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, stdout, _ = run(capsys, "check", "flat_r2", "--samples", "5", "--out", str(out))
    assert code == 0 and stdout == ""
    assert ReportDocument.from_json(out.read_text()).structure == "flat_r2"


def test_identities_command(capsys):
    code, out, _ = run(capsys, "identities", "so3_euclid", "--samples", "20", "--seed", "2")
    assert code == 0
    doc = ReportDocument.from_json(out)
    assert recomputed_pass_flags_agree(doc)
    assert any(r.check == "metricity" for r in doc.records())


def test_submersion_command(capsys):
    code, out, _ = run(capsys, "submersion", "r4_to_r3", "--samples", "20")
    assert code == 0
    doc = ReportDocument.from_json(out)
    assert {"poisson_map", "riem_submersion"} <= {r.check for r in doc.records()}


def test_submersion_cosymplectic(capsys):
    code, out, _ = run(capsys, "submersion", "cosymplectic_r3", "--samples", "20")
    assert code == 0
    checks = {r.check: r for r in ReportDocument.from_json(out).records()}
    assert checks["cosym_J_squared"].passed


def test_pass_flags_tamper_detected(capsys):
    _, out, _ = run(capsys, "check", "flat_r2", "--samples", "5", "--reproducible")
    d = json.loads(out)
    rec = next(r for r in d["reports"][0]["records"] if r["max_defect"] is not None)
    rec["pass"] = not rec["pass"]
    assert not recomputed_pass_flags_agree(ReportDocument.from_dict(d))


def test_leaf_csv_and_svg(capsys, tmp_path):
    svg = tmp_path / "leaf.svg"
    code, out, _ = run(capsys, "leaf", "so3_euclid", "--start", "0,0,1", "--ham", "x", "--t", "1", "--h", "0.01", "--svg", str(svg))
    assert code == 0
    rows = out.strip().splitlines()
    assert rows[0] == "t,x,y,z,drift_0"
    last = [float(v) for v in rows[-1].split(",")]
    assert last[0] == pytest.approx(1.0)
    np.testing.assert_allclose(last[1:4], [0, np.sin(1), np.cos(1)], atol=1e-8)
    root = ET.parse(svg).getroot()
    assert root.tag.endswith("svg")
    assert any(el.tag.endswith("polyline") for el in root.iter())


def test_leaf_schedule(capsys):
    code, out, _ = run(capsys, "leaf", "sl2_lorentz", "--start", "1,0,0", "--schedule", "y:1,x:0.5")
    assert code == 0
    drift = max(float(r.split(",")[-1]) for r in out.strip().splitlines()[1:])
    assert drift < 1e-8


def test_leaf_zero_duration(capsys):
    code, out, _ = run(capsys, "leaf", "so3_euclid", "--start", "0,0,1", "--ham", "x", "--t", "0")
    assert code == 0
    assert len(out.strip().splitlines()) == 2


def test_leaf_leaving_box_writes_partial_and_exits_4(capsys):
    code, out, err = run(capsys, "leaf", "euclid_rn_rs", "--start", "0,1.5,0", "--ham", "x1", "--t", "1", "--h", "0.01")
    assert code == 4
    assert "validity" in err
    assert len(out.strip().splitlines()) > 2


def test_leaf_bad_start(capsys):
    assert run(capsys, "leaf", "so3_euclid", "--start", "0,0", "--ham", "x")[0] == 2


def test_list_and_describe(capsys):
    code, out, _ = run(capsys, "list")
    assert code == 0
    assert all(i in out for i in ("so3_euclid", "r4_to_r3", "cosymplectic_r3"))
    code, out, _ = run(capsys, "describe", "so3_rescaled")
    assert code == 0
    assert "killing_poisson" in out and "pass" in out
    assert run(capsys, "describe", "nope")[0] == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "poisson_lab", "check", "flat_r2", "--samples", "3", "--reproducible"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["structure"] == "flat_r2"


@pytest.mark.skipif(shutil.which("poisson-lab") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["poisson-lab", "list"], capture_output=True, text=True)
    assert res.returncode == 0 and "so3_euclid" in res.stdout
