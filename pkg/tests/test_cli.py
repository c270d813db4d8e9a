import json
import subprocess
import sys

import pytest

from toeplab.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_norm_coeffs(capsys):
    code, out, _ = run(["norm", "--coeffs", "1,2", "--format", "json"], capsys)
    assert code == 0
    assert json.loads(out)["norm"] == pytest.approx(3.0, abs=1e-8)


def test_norm_dense_and_sandwich(capsys):
    code, out, _ = run(["norm", "--coeffs", "1,1,1,1", "--dense", "--sandwich", "--format", "json"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["norm"] == pytest.approx(4) and doc["sup_laurent"] == pytest.approx(7, abs=1e-6)


def test_norm_sampled_csv(capsys):
    code, out, _ = run(["norm", "--n", "64", "--dist", "gaussian", "--seed", "3", "--format", "csv"], capsys)
    header, row = out.strip().splitlines()
    assert code == 0 and header.startswith("n,norm") and row.startswith("64,")


def test_norm_needs_input(capsys):
    code, _, err = run(["norm"], capsys)
    assert code == 2 and "--coeffs" in err


def test_bounds(capsys):
    code, out, _ = run(["bounds", "--t", "0,1", "--sigma2", "0", "--M", "1"], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0].split(",")[:2] == ["t", "klein_rio"]
    assert float(lines[2].split(",")[1]) == pytest.approx(0.71653, abs=1e-5)


def test_bounds_json(capsys):
    code, out, _ = run(["bounds", "--t", "2", "--p", "2", "--Emax-p", "1", "--format", "json"], capsys)
    doc = json.loads(out)
    assert doc["hj_truncation_level"] == pytest.approx(32**0.5)


def test_growth_csv_to_file(tmp_path, capsys):
    out = tmp_path / "g.csv"
    code, stdout, _ = run(["growth", "--n-grid", "16,32", "--samples", "3", "--seed", "5", "--out", str(out)], capsys)
    assert code == 0 and stdout == ""
    lines = out.read_text().splitlines()
    assert lines[0] == "experiment,ensemble,n,sample_index,seed,norm,sup_fejer,sup_laurent,ratio_sqrt_nlogn,elapsed_ms"
    assert len(lines) == 7


def test_growth_json(capsys):
    code, out, _ = run(["growth", "--n", "16", "--samples", "2", "--format", "json"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["config"]["n_grid"] == [16] and "16" in doc["summary"]["per_n"]


def test_config_file_with_override(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"n_grid": [8, 12], "samples_per_n": 5, "ensemble": "gaussian"}))
    code, out, _ = run(["growth", "--config", str(p), "--samples", "2"], capsys)
    assert code == 0 and len(out.strip().splitlines()) == 1 + 2 * 2


@pytest.mark.parametrize(
    "argv",
    [
        ["growth", "--bogus"],
        ["growth", "--n", "8", "--n-grid", "8,16"],
        ["growth", "--dist", "cauchy"],
        ["growth", "--dist", "constant:2", "--n", "8"],
        ["growth", "--samples", "0"],
        ["growth", "--config", "/nonexistent/c.json"],
        ["frobnicate"],
        [],
    ],
)
def test_usage_errors(argv, capsys):
    code, _, _ = run(argv, capsys)
    assert code == 2


def test_contract_violation_exit_code(monkeypatch, capsys):
    import toeplab.cli as cli
    from toeplab.harness import ExperimentResult

    def fake(config):
        return ExperimentResult(config, [], {"violations": 1}, contract_ok=False)

    monkeypatch.setattr(cli, "run_experiment", fake)
    code, _, err = run(["sandwich", "--n", "8", "--samples", "1"], capsys)
    assert code == 1 and "violation" in err


@pytest.mark.parametrize("cmd", ["mean-case", "noniid", "concentration", "hankel", "sandwich"])
def test_experiment_commands(cmd, capsys):
    dist = {"mean-case": "gaussian:1,1", "noniid": "two_point_heavy", "concentration": "rademacher"}.get(cmd, "gaussian")
    code, out, _ = run([cmd, "--n-grid", "16,24", "--samples", "4", "--dist", dist], capsys)
    assert code == 0 and out.startswith("experiment,")


def test_concentration_curves_dir(tmp_path, capsys):
    code, _, _ = run(
        ["concentration", "--n", "16", "--samples", "50", "--curves-dir", str(tmp_path / "c"), "--t-points", "5"], capsys
    )
    assert code == 0
    assert sorted(p.name for p in (tmp_path / "c").iterdir()) == ["tail_16_lower.csv", "tail_16_upper.csv"]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "toeplab", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("toeplab ")
