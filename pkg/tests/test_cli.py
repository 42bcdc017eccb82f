import io
import json

import numpy as np
import pytest

from robustph.cli import main
from robustph.data import CensoredDataset, to_csv

from conftest import simulate


def run(argv):
    out = io.StringIO()
    return main(argv, out), out.getvalue()


@pytest.fixture
def toy(tmp_path):
    path = tmp_path / "toy.csv"
    to_csv(CensoredDataset([1.0, 2.0, 3.0], [1, 1, 1], np.zeros((3, 0))), path)
    return str(path)


@pytest.fixture
def sample(tmp_path):
    _, data = simulate(beta=(1.0, 0.0), n=80, censoring=0.05, seed=1)
    path = tmp_path / "sample.csv"
    to_csv(data, path)
    return str(path)


def test_fit_toy(toy, tmp_path):
    code, text = run(["fit", "--data", toy, "--alpha", "0", "--format", "json", "--out", str(tmp_path / "f.json")])
    assert code == 0
    assert abs(json.loads(text)["theta"][0] - 0.5) < 1e-8
    assert json.loads((tmp_path / "f.json").read_text())["converged"]


def test_test_command(sample):
    code, text = run(["test", "--data", sample, "--covariates", "z1,z2", "--alpha", "0.3", "--hypothesis", "beta[2]=0"])
    assert code == 0 and "p-value" in text
    code, text = run(["test", "--data", sample, "--covariates", "z1,z2", "--hypothesis", "beta[1]=0",
                      "--format", "json"])
    assert json.loads(text)["reject"] is True


def test_exit_codes(sample, toy, tmp_path):
    assert run(["test", "--data", sample, "--covariates", "z1,z2", "--hypothesis", "bta[1]=0"])[0] == 2
    assert run(["fit", "--data", str(tmp_path / "missing.csv")])[0] == 3
    assert run(["fit", "--data", sample, "--covariates", "age"])[0] == 3
    assert run(["fit", "--data", toy, "--alpha", "2"])[0] == 2
    assert run(["test", "--data", toy, "--hypothesis", "gamma[1]=1", "--tau", "1.5"])[0] == 2
    with pytest.raises(SystemExit) as info:
        main(["fit"])
    assert info.value.code == 2


def test_influence_csv(sample, tmp_path):
    out = tmp_path / "if.csv"
    code, _ = run(["influence", "--data", sample, "--covariates", "z1,z2", "--hypothesis", "beta[2]=0",
                   "--alpha-grid", "0,0.3", "--x-grid", "0,1,10", "--z-t", "1,1", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "alpha,x_t,delta_t,if_gamma,if_z1,if_z2,if2,pif,lif"
    assert len(lines) == 1 + 2 * 2 * 3
    assert all(line.endswith(",0.0") for line in lines[1:])


def test_select_commands(sample, tmp_path):
    code, text = run(["select", "--data", sample, "--covariates", "z1,z2", "--alpha-grid", "0,0.5",
                      "--out", str(tmp_path / "s.csv")])
    assert code == 0 and "selected model" in text
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 7
    code, text = run(["select-alpha", "--data", sample, "--covariates", "z1,z2", "--alpha-grid", "0:0.5:0.25",
                      "--out", str(tmp_path / "a.csv")])
    assert code == 0 and "selected alpha: 0." in text
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "alpha,amse"


def test_simulate_deterministic(tmp_path):
    argv = ["simulate", "--n", "40", "--reps", "4", "--seed", "9", "--epsilon", "0.05,0.1", "--alpha-grid", "0,0.5"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(argv + ["--out", str(a)])[0] == 0
    assert run(argv + ["--out", str(b)])[0] == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "censoring,epsilon,alpha_0,alpha_0.5,failures"
    assert [l.split(",")[1] for l in lines[1:]] == ["0.05", "0.1"]


def test_simulate_default_columns():
    code, text = run(["simulate", "--n", "30", "--reps", "1", "--seed", "1"])
    assert code == 0
    assert text.splitlines()[0] == "censoring,epsilon,alpha_0,alpha_0.05,alpha_0.1,alpha_0.2,alpha_0.3,alpha_0.4,alpha_0.5,failures"
