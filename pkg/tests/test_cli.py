import json

import numpy as np
import pytest

from kernel_entropy.cli import main
from kernel_entropy.io import read_coeff_csv, read_table


def run(tmp_path, *argv):
    code = main(list(argv) + ["--out", str(tmp_path)])
    return code


def load(tmp_path, name):
    return (tmp_path / f"{name}.csv").read_text(), json.loads((tmp_path / f"{name}.json").read_text())


def test_kernel_fejer(tmp_path):
    assert run(tmp_path, "kernel", "--family", "fejer", "--order", "8") == 0
    csv, summary = load(tmp_path, "kernel")
    poly = read_coeff_csv(csv)
    assert len(poly) == 15
    assert summary["result"]["norm_1"] == pytest.approx(1, abs=1e-10)
    assert summary["result"]["value_at_0"] == pytest.approx(8)
    assert f"# config_hash={summary['config_hash']}" in csv


def test_certify_bernoulli(tmp_path):
    assert run(tmp_path, "certify", "--kernel", "bernoulli", "--a", "2", "--d", "1", "--r", "1",
               "--smax", "10") == 0
    _, summary = load(tmp_path, "certify")
    assert summary["result"]["slope"] <= -1 + 0.1


def test_decompose(tmp_path):
    assert run(tmp_path, "decompose", "--r", "1", "--u", "1", "--d", "2", "--n", "9") == 0
    csv, summary = load(tmp_path, "decompose")
    assert summary["result"]["reconstruction_error"] < 1e-12
    header, data = read_table(csv)
    assert header == ["n", "norm_1inf", "bound_shape", "ratio"] and data[0, 0] == 4


def test_entropy_modes(tmp_path):
    assert run(tmp_path, "entropy", "exact", "--cube", "1", "--per-axis", "401", "--eps", "0.5",
               "--cap", "401") == 0
    _, s = load(tmp_path, "entropy_exact")
    assert s["result"]["n_upper"] == 2 and s["result"]["ball_lower"] == 2
    assert run(tmp_path, "entropy", "greedy", "--cube", "2", "--per-axis", "9", "--eps", "0.5") == 0
    assert run(tmp_path, "entropy", "bracket", "--cube", "2", "--per-axis", "9", "--k", "0:4") == 0
    _, s = load(tmp_path, "entropy_bracket")
    assert s["result"]["k"] == [0, 1, 2, 3, 4]
    assert run(tmp_path, "entropy", "ball", "--n", "3", "--count", "50", "--k", "0:5", "--seed", "4") == 0
    csv, s = load(tmp_path, "entropy_ball")
    assert s["result"]["cross_size"] == 15
    assert csv.splitlines()[3] == "k,eps_lower,eps_upper,method,seed"


def test_entropy_points_file(tmp_path):
    pts = tmp_path / "pts.csv"
    pts.write_text("id,x1,x2\n0,0,0\n1,2,0\n2,0,2\n")
    # pairwise sup distances are all 2
    assert run(tmp_path, "entropy", "exact", "--points", str(pts), "--eps", "1") == 0
    assert load(tmp_path, "entropy_exact")[1]["result"]["n_upper"] == 3
    assert run(tmp_path, "entropy", "exact", "--points", str(pts), "--eps", "2") == 0
    assert load(tmp_path, "entropy_exact")[1]["result"]["n_upper"] == 1
    dist = tmp_path / "dist.csv"
    dist.write_text("j1,j2\n0,3\n3,0\n")
    assert run(tmp_path, "entropy", "greedy", "--dist", str(dist), "--eps", "1") == 0


def test_budget_and_predict(tmp_path):
    assert run(tmp_path, "budget", "--a", "2", "--beta", "1", "--u", "2", "--Du", "8") == 0
    csv, s = load(tmp_path, "budget")
    header, data = read_table(csv)
    assert dict(map(tuple, data.astype(int).tolist()))[7] == 4
    assert run(tmp_path, "predict", "--d", "2", "--target", "p") == 0
    _, s = load(tmp_path, "predict")
    assert s["result"]["composed"] == {"power": "-2*r", "log_power": "4*r"}


def test_rates_from_table(tmp_path):
    k = np.arange(2, 30)
    table = tmp_path / "t.csv"
    table.write_text("k,eps\n" + "".join(f"{x},{float(x) ** -2}\n" for x in k))
    assert run(tmp_path, "rates", "--table", str(table), "--column", "eps") == 0
    _, s = load(tmp_path, "rates")
    assert s["result"]["rho"] == pytest.approx(2, abs=1e-8)


@pytest.mark.parametrize("argv,code", [
    (["budget", "--a", "0.5", "--beta", "1", "--u", "2"], 2),
    (["decompose", "--r", "1", "--u", "0"], 2),
    (["entropy", "exact", "--cube", "1", "--per-axis", "50", "--eps", "0.1"], 3),
    (["entropy", "ball", "--n", "9", "--count", "2"], 3),
    (["kernel", "--family", "fejer"], 2),
    (["certify", "--r", "1", "--smax", "10", "--cutoff", "5"], 2),
])
def test_exit_codes(tmp_path, argv, code, capsys):
    assert run(tmp_path, *argv) == code
    assert "error" in capsys.readouterr().err


def test_stdout_mode(capsys):
    assert main(["blocks", "--n", "3"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# schema_version=1\n")
    assert out.strip().splitlines()[-1] == "3,8"


def test_same_seed_same_bytes(tmp_path):
    argv = ["entropy", "ball", "--n", "3", "--count", "40", "--k", "0:5", "--seed", "9"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(argv + ["--out", str(a)]) == 0 and main(argv + ["--out", str(b)]) == 0
    for name in ("entropy_ball.csv", "entropy_ball.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
