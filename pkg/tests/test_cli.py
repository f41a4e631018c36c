from __future__ import annotations

import cmath
import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from weylpair.cli import GridSpec, main, render
from weylpair.model import ExpDecay, Problem
from weylpair.problem_json import ConfigError, problem_from_dict, problem_to_dict


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, doc, name="p.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def rows(text):
    return [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]


def test_grid_parsing():
    g = GridSpec.parse("1:4:4")
    assert np.allclose(g.points(), [1, 2, 3, 4])
    assert np.allclose(GridSpec.parse("0:4:3:sqrt").points(), [0, 1, 4])
    for bad in ("1:1:3", "2:1:3", "0:1:1", "0:1", "a:b:c", "0:1:3:log", "-1:1:3:sqrt"):
        with pytest.raises(ConfigError):
            GridSpec.parse(bad)


def test_mfunc_free_row_at_i(capsys):
    code, out, _ = run(["mfunc", "--grid", "1:2:2", "--theta", str(math.pi / 2)], capsys)
    assert code == 0
    header, first = rows(out)[:2]
    vals = dict(zip(header, first))
    ref = cmath.exp(-1j * math.pi / 4) * (1j * np.full((2, 2), 0.5) - np.array([[0.5, -0.5],
                                                                                 [-0.5, 0.5]]))
    got = complex(float(vals["m11_re"]), float(vals["m11_im"]))
    assert abs(got - ref[0, 0]) < 1e-7
    got = complex(float(vals["m12_re"]), float(vals["m12_im"]))
    assert abs(got - ref[0, 1]) < 1e-7
    assert vals["flag"] == "ok"


@pytest.mark.parametrize("args", [
    ["mfunc", "--grid", "1:1:1"],
    ["mfunc", "--grid", "0:1:0"],
    ["mfunc", "--tol", "0"],
    ["mfunc", "--theta", "0"],
    ["pair", "--eps", "0.1"],
    ["nonsense"],
    ["mfunc", "--problem", "/does/not/exist.json"],
])
def test_config_errors_exit_1(args, capsys):
    code, _, _ = run(args, capsys)
    assert code == 1


def test_bad_problem_file_exit_1(tmp_path, capsys):
    path = write(tmp_path, {"potential": {"kind": "nope"}})
    code, _, err = run(["mfunc", "--problem", path], capsys)
    assert code == 1 and "nope" in err


def test_no_convergence_exit_2(tmp_path, capsys):
    # lam = 4 exp(0.0025 i) ~ 4 + 0.01 i is too close to the axis to certify by b = 200
    path = write(tmp_path, {"alpha": {"re": 1, "im": 1}})
    code, out, _ = run(["mfunc", "--problem", path, "--grid", "3.9:4:2", "--theta", "0.0025"],
                       capsys)
    assert code == 2
    assert all(r[-1] == "no_convergence" for r in rows(out)[1:])


def test_pair_free_alpha_one_has_atom(tmp_path, capsys):
    path = write(tmp_path, {"alpha": 1})
    code, out, _ = run(["pair", "--problem", path, "--grid", "0.5:2:4"], capsys)
    assert code == 0
    atoms = [l.split(",") for l in out.splitlines() if l.startswith("# atom,") and
             "location" not in l]
    assert len(atoms) == 1
    _, loc, mass, pre, pim = atoms[0]
    assert float(loc) == pytest.approx(1, abs=1e-6)
    assert float(mass) == pytest.approx(2, abs=1e-3)
    assert complex(float(pre), float(pim)) == pytest.approx(-1, abs=1e-3)
    assert rows(out)[0] == ["s", "nu_density", "psi_re", "psi_im", "err_est", "flag"]


def test_pair_free_dirichlet_psi_one(tmp_path, capsys):
    path = write(tmp_path, {"alpha": "inf"})
    code, out, _ = run(["pair", "--problem", path, "--grid", "0.5:20:5"], capsys)
    assert code == 0
    for r in rows(out)[1:]:
        psi = complex(float(r[2]), float(r[3]))
        assert abs(psi - 1) <= max(float(r[4]), 1e-6)


def test_pair_complex_alpha_spot_value(tmp_path, capsys):
    path = write(tmp_path, {"alpha": {"re": 1, "im": 1}})
    code, out, _ = run(["pair", "--problem", path, "--grid", "3:4:2"], capsys)
    last = rows(out)[-1]
    assert float(last[0]) == 4
    assert float(last[1]) == pytest.approx(3 / (2 * math.pi), abs=1e-6)
    assert complex(float(last[2]), float(last[3])) == pytest.approx(-1j, abs=1e-5)


def test_density_and_atoms_commands(tmp_path, capsys):
    path = write(tmp_path, {"alpha": 2})
    code, out, _ = run(["atoms", "--problem", path, "--grid", "0.5:6:2"], capsys)
    assert code == 0
    (atom,) = rows(out)[1:]
    assert float(atom[0]) == pytest.approx(4, abs=1e-6) and float(atom[1]) == pytest.approx(10,
                                                                                           abs=1e-2)
    code, out, _ = run(["density", "--grid", "1:4:2"], capsys)
    assert code == 0 and len(rows(out)) == 3


def test_asympt_command(tmp_path, capsys):
    path = write(tmp_path, {"alpha": "inf"})
    code, out, _ = run(["asympt", "--problem", path, "--grid", "50:100:2"], capsys)
    assert code == 0
    for r in rows(out)[1:]:
        if r[1] == "1":
            assert float(r[3]) == pytest.approx(float(r[6]), rel=5e-3)


def test_csv_bit_stable(tmp_path):
    path = write(tmp_path, {"potential": {"kind": "exp_decay", "amplitude": {"re": 1, "im": 1}},
                            "alpha": {"re": 0.5, "im": -1}})
    outs = []
    for i in range(2):
        target = tmp_path / f"out{i}.csv"
        assert main(["mfunc", "--problem", path, "--grid", "0.5:10:3", "--out", str(target)]) == 0
        outs.append(target.read_bytes())
    assert outs[0] == outs[1]
    assert b"\r" not in outs[0]
    # 17 significant digits
    first = outs[0].decode().splitlines()[1].split(",")
    assert len(first[2].lstrip("-").replace(".", "").replace("e", "").lstrip("0")) >= 15


def test_jobs_preserve_order(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["density", "--grid", "1:5:4", "--out", str(a)]) == 0
    assert main(["density", "--grid", "1:5:4", "--out", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_json_output_round_trips(tmp_path, capsys):
    p = Problem(potential=ExpDecay(amplitude=1 + 1j), alpha=0.5j)
    path = write(tmp_path, problem_to_dict(p))
    code, out, _ = run(["mfunc", "--problem", path, "--grid", "1:2:2", "--format", "json"],
                       capsys)
    doc = json.loads(out)
    assert code == 0 and problem_from_dict(doc["problem"]) == p
    assert len(doc["rows"]) == 2 and doc["columns"][-1] == "flag"


def test_render_nan_in_json():
    text = render("json", "mfunc", Problem(), ["a"], [[math.nan]])
    assert json.loads(text)["rows"] == [[None]]


def test_check_default_suite_passes():
    r = subprocess.run([sys.executable, "-m", "weylpair", "check", "--fast"],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stdout
    assert all(row[3] == "true" for row in rows(r.stdout)[1:])


def test_check_complex_potential_suite(tmp_path):
    path = write(tmp_path, {"potential": {"kind": "exp_decay", "amplitude": {"re": 1, "im": 1}}})
    r = subprocess.run([sys.executable, "-m", "weylpair", "check", "--fast", "--problem", path],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stdout


def test_check_wrong_branch_fails_herglotz():
    r = subprocess.run([sys.executable, "-m", "weylpair", "check", "--fast", "--hook-wrong-k"],
                       capture_output=True, text=True)
    assert r.returncode == 3
    herglotz = [row for row in rows(r.stdout) if row[0] == "herglotz"][0]
    assert herglotz[3] == "false"


def test_console_script_help():
    r = subprocess.run(["weylpair", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "mfunc" in r.stdout
