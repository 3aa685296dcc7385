import json
import subprocess
import sys

import pytest

from discrete_ainfty.cli import build_report, main, verification_suite
from discrete_ainfty.complex import CATALOGUE


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def disc_file(tmp_path):
    f = tmp_path / "disc.json"
    f.write_text(json.dumps({"maximal": [[1, 2, 3]]}))
    return str(f)


def test_validate(capsys, disc_file, tmp_path):
    code, out, _ = run(capsys, "validate", "--complex", disc_file)
    assert code == 0 and out.strip() == "8 simplexes: 1×∅, 3×0d, 3×1d, 1×2d"
    star = tmp_path / "star.json"
    star.write_text(json.dumps({"maximal": [[1, 2], [2, 3], [2, 4]]}))
    code, out, _ = run(capsys, "validate", "--complex", str(star))
    assert out.startswith("8 simplexes")


def test_validate_errors(capsys, tmp_path):
    empty = tmp_path / "e.json"
    empty.write_text("")
    code, _, err = run(capsys, "validate", "--complex", str(empty))
    assert code != 0 and "empty" in err
    dup = tmp_path / "d.json"
    dup.write_text(json.dumps({"maximal": [[1, 1]]}))
    code, _, err = run(capsys, "validate", "--complex", str(dup))
    assert code != 0


def test_operator_d(capsys, disc_file):
    code, out, _ = run(capsys, "operator", "d", "--complex", disc_file, "--degree", "0")
    lines = out.splitlines()
    assert lines[1].split("|")[1].split() == ["-1", "1", "0"]
    assert lines[2].split("|")[1].split() == ["-1", "0", "1"]
    assert lines[3].split("|")[1].split() == ["0", "-1", "1"]
    assert "augmentation" in lines[4]


def test_operator_laplace_star(capsys):
    code, out, _ = run(capsys, "operator", "laplace", "--complex", "star", "--degree", "1")
    rows = [ln.split("|")[1].split() for ln in out.splitlines()[1:]]
    assert rows == [["2", "-1", "-1"], ["-1", "2", "1"], ["-1", "1", "2"]]


def test_operator_block(capsys):
    code, out, _ = run(capsys, "operator", "laplace-loc", "--complex", "2-disc", "--grade", "2",
                       "--block", "1,2", "2")
    rows = [ln.split("|")[1].split() for ln in out.splitlines()[1:]]
    assert rows == [["3", "-1"], ["-1", "3"]]


def test_operator_byte_stable(capsys):
    _, a, _ = run(capsys, "operator", "wedge", "--complex", "2-disc")
    _, b, _ = run(capsys, "operator", "wedge", "--complex", "2-disc")
    assert a == b and "1/6" in a


def test_operator_unknown(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["operator", "curl", "--complex", "2-disc"])
    assert exc.value.code == 2


def test_formula(capsys, tmp_path):
    code, out, _ = run(capsys, "formula", "wedge", "1,1")
    assert code == 0 and out.count("1/6") == 6
    code, out, _ = run(capsys, "formula", "assoc", "1,0,0")
    assert out.count("1/4") == 4
    j = tmp_path / "f.json"
    code, out, _ = run(capsys, "formula", "m3", "0,1,1", "--json", str(j))
    data = json.loads(j.read_text())
    assert data["schema"] == 1 and len(data["terms"]) == 2
    assert all("/" in t["coefficient"] for t in data["terms"])


def test_formula_infeasible(capsys):
    with pytest.raises(SystemExit):
        main(["formula", "m3", "0,0,0"])


def test_verify_disc(capsys, tmp_path):
    j = tmp_path / "r.json"
    code, out, _ = run(capsys, "verify", "--complex", "2-disc", "--p-max", "4", "--json", str(j))
    assert code == 0 and "all checks pass" in out
    report = json.loads(j.read_text())
    assert report["schema"] == 1 and report["flavor"] == "local" and report["p_max"] == 4
    assert {"name", "grade", "basis_count", "pass"} <= set(report["checks"][0])
    assert json.loads(json.dumps(report)) == report


def test_verify_sphere(capsys):
    code, _, err = run(capsys, "verify", "--complex", "sphere", "--flavor", "naive-right")
    assert code != 0 and "topology" in err
    code, out, _ = run(capsys, "verify", "--complex", "sphere", "--flavor", "local", "--p-max", "4")
    assert code == 0


def test_report_roundtrip():
    checks = verification_suite(CATALOGUE["1-simplex"](), 3, "local")
    rep = build_report("1-simplex", "local", 3, checks)
    assert json.loads(json.dumps(rep)) == rep


def test_console_entry():
    out = subprocess.run([sys.executable, "-m", "discrete_ainfty.cli", "validate", "--complex", "star"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "8 simplexes: 1×∅, 4×0d, 3×1d"
