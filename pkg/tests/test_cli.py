import json
import subprocess
import sys

import pytest

from hardy_ground_states import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_constants_examples(capsys):
    code, out, _ = run(capsys, "constants", "--N", "4", "--lambda", "0.75")
    assert code == 0
    d = json.loads(out)
    assert d["a_lambda"] == pytest.approx(0.5)
    assert d["convention"] == "talenti_power"
    d = json.loads(run(capsys, "constants", "--N", "3", "--lambda", "0.1875")[1])
    assert d["a_lambda"] == pytest.approx(0.25)
    d = json.loads(run(capsys, "constants", "--N", "5", "--lambda", "0")[1])
    assert d["S_lambda"] == d["S"]


def test_constants_csv(capsys):
    code, out, _ = run(capsys, "constants", "--N", "4", "--lambda", "0.5", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "key,value"
    rows = dict(line.split(",", 1) for line in lines[1:])
    assert float(rows["lambda"]) == 0.5


@pytest.mark.parametrize("argv", [
    ("constants", "--N", "2", "--lambda", "0.1"),
    ("constants", "--N", "4", "--lambda", "1.5"),
    ("thresholds", "--alpha", "2.5", "--beta", "1.5", "--N", "4"),
    ("thresholds", "--alpha", "2.5", "--N", "5"),
    ("exact",),
    ("minimize", "--N", "4"),
    ("nosuchcommand",),
])
def test_invalid_input_exit_2(capsys, argv):
    assert run(capsys, *argv)[0] == cli.EXIT_INVALID


def test_thresholds_exact_fraction(capsys):
    code, out, _ = run(capsys, "thresholds", "--alpha", "5/3", "--N", "5")
    assert code == 0
    d = json.loads(out)
    assert d["nu_star"] == "2/5"
    assert d["d1"] == d["d2"] == d["d3"] == "5/3"


def test_exact_gamma(capsys, tmp_path):
    fields = tmp_path / "f.csv"
    code, out, _ = run(capsys, "exact", "--gamma", "[[1,2,2],[2,1,2],[2,2,1]]", "--check",
                       "--M", "256", "--fields-csv", str(fields))
    assert code == 0
    d = json.loads(out)
    assert d["c"] == pytest.approx([0.2, 0.2, 0.2])
    assert fields.read_text().splitlines()[0] == "r,u1,u2,u3"
    assert max(abs(x) for x in d["checks"]["nehari_defects"]) < 1e-3


def test_exact_hypothesis_exit_4(capsys):
    code, _, err = run(capsys, "exact", "--gamma", "[[1,-2,0],[-2,1,0],[0,0,1]]")
    assert code == cli.EXIT_HYPOTHESIS
    assert "hypothesis" in err


def test_exact_two_component(capsys):
    code, out, _ = run(capsys, "exact", "--N", "5", "--alpha", "1.5", "--nu", "2.0")
    assert code == 0
    assert json.loads(out)["ground_state"] is True


def test_minimize_and_repulsive(capsys):
    code, out, _ = run(capsys, "minimize", "--N", "4", "--lambdas", "0.5,0.6", "--beta", "1",
                       "--M", "256", "--strict")
    assert code == 0
    assert json.loads(out)["converged"]
    code, _, _ = run(capsys, "minimize", "--N", "4", "--lambdas", "0.5,0.6", "--beta", "-1")
    assert code == cli.EXIT_HYPOTHESIS


def test_minimize_nonconvergence_exit_3(capsys):
    code, _, _ = run(capsys, "minimize", "--N", "4", "--lambdas", "0.5,0.6", "--beta", "1",
                     "--M", "256", "--strict", "--max-iter", "1", "--tol", "1e-14")
    assert code == cli.EXIT_NONCONVERGENCE


def test_nonexistence_table(capsys):
    code, out, _ = run(capsys, "nonexistence", "--N", "4", "--lambdas", "0.25,0.25",
                       "--beta", "-0.5", "--mu-schedule", "4,16", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("mu,t1,t2,J,J_minus_infimum")
    assert len(lines) == 3


def test_scaling_deterministic(capsys):
    a = run(capsys, "scaling", "--seed", "3", "--starts", "8")
    b = run(capsys, "scaling", "--seed", "3", "--starts", "8")
    assert a[0] == 0 and a[1] == b[1]
    d = json.loads(a[1])
    assert d["solvability"]["solvable"]


def test_scaling_certificate_required(capsys, tmp_path):
    prob = {"N": 4, "A": [1, 1], "B": [1, 1], "D": [[0, 0.8], [0.8, 0]],
            "alphas": [[0, 2], [2, 0]]}
    path = tmp_path / "p.json"
    path.write_text(json.dumps(prob))
    assert run(capsys, "scaling", "--problem", str(path))[0] == 0
    assert run(capsys, "scaling", "--problem", str(path),
               "--require-certificate")[0] == cli.EXIT_HYPOTHESIS


def test_config_file_and_output_dir(capsys, tmp_path, monkeypatch):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"format": "csv"}))
    monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path))
    code, out, _ = run(capsys, "constants", "--N", "4", "--lambda", "0.5", "--config", str(conf),
                       "--output", "sub/c.csv")
    assert code == 0 and out == ""
    assert (tmp_path / "sub" / "c.csv").read_text().startswith("key,value")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hardy_ground_states", "thresholds",
                           "--alpha", "3/2", "--beta", "3/2"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["nu_star"] == "1/3"


def test_exact_symmetric_two_component(capsys):
    code, out, _ = run(capsys, "exact", "--N", "6", "--alpha", "1.5", "--nu", "1.0",
                       "--lambda", "1.0")
    assert code == 0
    c = (1 + 1.5) ** (-1 / 0.5)
    assert json.loads(out)["c"] == pytest.approx([c, c], rel=1e-11)
