import json
import subprocess
import sys

import numpy as np
import pytest

from hmod.cli import SCHEMA, main
from hmod.representations import Gaussian, Grid, sample, write_field, write_field_csv


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out.strip().splitlines()
    return code, [json.loads(line) for line in out]


def test_classify_examples(capsys):
    code, [rec] = run(capsys, "classify", "--form", "f_s=1")
    assert code == 0 and rec["schema"] == SCHEMA
    assert rec["case"] == 1 and rec["orbit_dim"] == 6 and rec["planck_constant"] == 1
    code, [rec] = run(capsys, "classify", "--n", "2", "--form", "f_s=1")
    assert rec["orbit_dim"] == 10
    code, [rec] = run(capsys, "classify", "--form", "0")
    assert rec["case"] == 4 and rec["planck_constant"] is None
    code, [rec] = run(capsys, "classify", "--form", "f_w=2,f_x1=1")
    assert rec["case"] == 2 and rec["planck_constant"] == 2 and rec["kernel_dim"] == 5
    code, [rec] = run(capsys, "classify", "--form", "0,0,0,1,0,0,0")
    assert rec["case"] == 3 and rec["orbit_dim"] == 2


@pytest.mark.parametrize("form", ["f_q=1", "1,2,3", "f_s=abc", "f_x=1,2"])
def test_classify_malformed(capsys, form):
    assert main(["classify", "--form", form]) == 2


def test_norm_self_orthogonality(capsys):
    code, [rec] = run(capsys, "norm", "--space", "E", "--p", "2", "--q", "2", "--s", "0", "--grid", "32",
                      "--window", "gauss:0.5", "--self")
    assert code == 0
    psi = Gaussian((0.5,) * 3)
    assert rec["results"]["coorbit"]["value"] == pytest.approx(psi.l2_norm() ** 2, rel=0.02)


def test_norm_zero_field(capsys):
    code, [rec] = run(capsys, "norm", "--grid", "16", "--zero")
    assert code == 0 and rec["results"]["coorbit"]["value"] == 0


def test_norm_both_modes(capsys):
    code, [rec] = run(capsys, "norm", "--mode", "both", "--grid", "32", "--field", "gauss:1")
    res = rec["results"]
    assert code == 0
    assert res["ratio"] == pytest.approx(res["coorbit"]["value"] / res["decomposition"]["value"])
    code, [rec] = run(capsys, "norm", "--space", "M", "--mode", "both", "--grid", "32", "--field", "gauss:1")
    assert set(rec["results"]) == {"stft", "decomposition", "ratio"}
    code, [rec] = run(capsys, "norm", "--space", "Bdot", "--grid", "32", "--field", "gauss:1", "--s", "1")
    assert rec["results"]["besov"]["value"] > 0


def test_norm_input_files(capsys, tmp_path):
    g = Grid.cube(3, 16, 4.0)
    f = sample(Gaussian((1.0,) * 3), g)
    write_field(tmp_path / "f.hmf", f)
    write_field_csv(tmp_path / "f.csv", f)
    _, [a] = run(capsys, "norm", "--grid", "16", "--input", str(tmp_path / "f.hmf"))
    _, [b] = run(capsys, "norm", "--grid", "16", "--input", str(tmp_path / "f.csv"), "--csv")
    _, [c] = run(capsys, "norm", "--grid", "16", "--field", "gauss:1")
    assert a["results"] == b["results"] == c["results"]


def test_norm_errors(capsys, tmp_path):
    assert main(["norm", "--input", str(tmp_path / "missing.hmf")]) == 2
    (tmp_path / "bad.hmf").write_bytes(b"garbage")
    assert main(["norm", "--input", str(tmp_path / "bad.hmf")]) == 2
    assert main(["norm", "--grid", "24", "--zero"]) == 2
    assert main(["norm", "--p", "0.5", "--zero"]) == 2
    assert main(["norm", "--window", "box:1", "--zero"]) == 2
    capsys.readouterr()
    # lattice too small for the spectrum: truncation leakage
    code, [rec] = run(capsys, "norm", "--mode", "decomposition", "--grid", "32", "--radius", "2",
                      "--field", "gauss:1")
    assert code == 3 and rec["leakage"] > 1e-6
    # frequency grid too coarse for the partition of unity
    code, [rec] = run(capsys, "norm", "--mode", "decomposition", "--grid", "16", "--half-width", "1",
                      "--field", "gauss:0.3")
    assert code == 3 and "eps/2" in rec["error"]


def test_covering_compare(capsys, tmp_path):
    code, [rec] = run(capsys, "covering", "compare", "--a", "heis", "--b", "uniform", "--radii", "8,16")
    assert code == 0
    assert rec["strictly_increasing"] == {"N_ab": True, "N_ba": True}
    assert rec["admissibility_b"]["value"] == 27
    code, [rec] = run(capsys, "covering", "--a", "heis", "--b", "heis", "--radii", "8,12")
    assert all(r["N_ab"] == r["N_ba"] == 31 for r in rec["table"])
    svg = tmp_path / "c.svg"
    code, [rec] = run(capsys, "covering", "--a", "heis", "--b", "dyadic", "--radii", "8,16", "--svg", str(svg))
    assert rec["strictly_increasing"]["N_ba"] and not rec["strictly_increasing"]["N_ab"]
    assert svg.read_text().lstrip().startswith("<")


def test_plot_and_out_file(capsys, tmp_path):
    out = tmp_path / "r.jsonl"
    assert main(["--out", str(out), "plot", "--radius", "4", "--output", str(tmp_path / "p.svg")]) == 0
    assert main(["--out", str(out), "classify", "--form", "f_s=2"]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2 and json.loads(lines[1])["params"]["lambda"] == 2
    assert (tmp_path / "p.svg").exists()


def test_determinism(capsys):
    _, a = run(capsys, "norm", "--grid", "16", "--field", "gauss:1", "--s", "1", "--p", "1")
    _, b = run(capsys, "--threads", "2", "norm", "--grid", "16", "--field", "gauss:1", "--s", "1", "--p", "1")
    assert json.dumps(a) == json.dumps(b)


def test_selftest(capsys):
    code, [rec] = run(capsys, "selftest", "--seed", "3")
    assert code == 0 and rec["passed"]


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "hmod.cli", "classify", "--form", "f_s=1"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["case"] == 1
    r = subprocess.run([sys.executable, "-m", "hmod.cli", "classify"], capture_output=True, text=True)
    assert r.returncode == 2
