import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from gradtrace import GradientTrace, PredictorConfig, load_trace, predictability_report, save_trace
from gradtrace.cli import main


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def trace_file(tmp_path, rng):
    path = tmp_path / "run.gtrc"
    save_trace(GradientTrace(rng.standard_normal((6, 80)), {"params": "6"}), path)
    return path


def test_analyze_zero_predictor_column(tmp_path, trace_file):
    out_csv = tmp_path / "k.csv"
    code = main(["analyze", "--trace", str(trace_file), "--predictors", "zero",
                 "--out-json", str(tmp_path / "r.json"), "--out-csv", str(out_csv)])
    assert code == 0
    rows = _rows(out_csv)
    assert rows[0] == ["run", "zero"]
    assert [float(r[1]) for r in rows[1:]] == [1.0]
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["reports"][0]["kappa"] == 1.0
    assert (tmp_path / "k_rank.csv").exists()


def test_analyze_default_table_layout(tmp_path, trace_file):
    out_csv = tmp_path / "k.csv"
    assert main(["analyze", "--trace", str(trace_file), "--out-csv", str(out_csv),
                 "--out-json", str(tmp_path / "r.json")]) == 0
    assert _rows(out_csv)[0] == ["run", "one-step", "ema-0.9", "ema-0.99", "trend"]
    assert _rows(tmp_path / "k_rank.csv")[0] == ["run", "r*(0.10)", "r*(0.05)", "r*(0.01)", "params"]
    report = json.loads((tmp_path / "r.json").read_text())
    trace = load_trace(trace_file)
    for entry, spec in zip(report["reports"], ["one-step", "ema:0.9", "ema:0.99", "trend:1.0"]):
        assert entry["kappa"] == pytest.approx(
            predictability_report(trace, PredictorConfig.parse(spec)).kappa, rel=1e-15)


def test_analyze_window_too_long(tmp_path, trace_file, capsys):
    code = main(["analyze", "--trace", str(trace_file), "--window", "81",
                 "--out-json", str(tmp_path / "r.json")])
    assert code == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("error:") and "\n" not in err


def test_analyze_windowed_output(tmp_path, trace_file):
    assert main(["analyze", "--trace", str(trace_file), "--window", "20", "--stride", "10",
                 "--out-json", str(tmp_path / "r.json")]) == 0
    report = json.loads((tmp_path / "r.json").read_text())
    windows = report["reports"][0]["windows"]
    assert [(w["start"], w["end"]) for w in windows] == [(s, s + 20) for s in range(0, 61, 10)]
    assert len(report["windowed_ranks"]) == 3


def test_analyze_planted_rank_row(tmp_path):
    trace_path = tmp_path / "planted.gtrc"
    assert main(["generate", "planted", "--r", "5", "--rho", "0.005", "--d", "64", "--T", "300",
                 "--seed", "0", "--out", str(trace_path)]) == 0
    assert main(["analyze", "--trace", str(trace_path), "--epsilons", "0.10,0.05,0.01",
                 "--out-csv", str(tmp_path / "k.csv"), "--out-json", str(tmp_path / "r.json")]) == 0
    rows = _rows(tmp_path / "k_rank.csv")
    assert rows[1] == ["planted", "5", "5", "5", "64"]


def test_analyze_all_zero_trace_exit_3(tmp_path, capsys):
    path = tmp_path / "z.gtrc"
    save_trace(GradientTrace(np.zeros((3, 5))), path)
    assert main(["analyze", "--trace", str(path), "--out-json", str(tmp_path / "r.json")]) == 3
    assert "kappa" in capsys.readouterr().err


def test_analyze_missing_file_exit_2(tmp_path):
    assert main(["analyze", "--trace", str(tmp_path / "missing.gtrc")]) == 2


def test_analyze_corrupt_file_exit_2(tmp_path):
    path = tmp_path / "bad.gtrc"
    path.write_bytes(b"NOPE" + bytes(40))
    assert main(["analyze", "--trace", str(path)]) == 2


def test_bad_flags_exit_2(trace_file):
    assert main(["analyze", "--trace", str(trace_file), "--epsilons", "1.5"]) == 2
    assert main(["analyze", "--trace", str(trace_file), "--predictors", "ema:2"]) == 2
    assert main(["frobnicate"]) == 2


def test_spectrum_example(tmp_path):
    path = tmp_path / "t.csv"
    save_trace(GradientTrace.from_steps([[0, 0], [2, 0], [2, 1]]), path)
    out = tmp_path / "s.csv"
    assert main(["spectrum", "--trace", str(path), "--out-csv", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["index", "sigma", "sigma_sq", "cumulative_fraction"]
    assert [float(r[1]) for r in rows[1:]] == pytest.approx([2.0, 1.0], rel=1e-15)


def test_spectrum_stationary_exit_3(tmp_path):
    path = tmp_path / "t.gtrc"
    save_trace(GradientTrace(np.ones((3, 10))), path)
    assert main(["spectrum", "--trace", str(path), "--out-csv", str(tmp_path / "s.csv")]) == 3


def test_spectrum_final_fraction(tmp_path, trace_file):
    out = tmp_path / "s.csv"
    assert main(["spectrum", "--trace", str(trace_file), "--out-csv", str(out)]) == 0
    assert float(_rows(out)[-1][3]) == pytest.approx(1.0, abs=1e-10)


def test_project_default_k_and_determinism(tmp_path, trace_file):
    outs = []
    for i in range(2):
        proj, tr = tmp_path / f"p{i}.gprj", tmp_path / f"t{i}.gtrc"
        assert main(["project", "--trace", str(trace_file), "--seed", "4",
                     "--proj-out", str(proj), "--trace-out", str(tr)]) == 0
        outs.append((proj.read_bytes(), tr.read_bytes()))
    assert outs[0] == outs[1]
    projected = load_trace(tmp_path / "t0.gtrc")
    assert projected.dim == 256
    assert projected.meta["projection_k"] == "256"
    assert predictability_report(projected, PredictorConfig("zero")).kappa == 1.0


def test_project_reuses_saved_matrix(tmp_path, trace_file):
    proj = tmp_path / "p.gprj"
    assert main(["project", "--trace", str(trace_file), "--k", "8", "--seed", "1", "--proj-out", str(proj)]) == 0
    a, b = tmp_path / "a.gtrc", tmp_path / "b.gtrc"
    assert main(["project", "--trace", str(trace_file), "--k", "8", "--seed", "1", "--trace-out", str(a)]) == 0
    assert main(["project", "--trace", str(trace_file), "--proj", str(proj), "--trace-out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_project_dim_mismatch_exit_2(tmp_path, trace_file, rng):
    proj = tmp_path / "p.gprj"
    other = tmp_path / "o.gtrc"
    save_trace(GradientTrace(rng.standard_normal((4, 5))), other)
    assert main(["project", "--trace", str(other), "--k", "3", "--proj-out", str(proj)]) == 0
    assert main(["analyze", "--trace", str(trace_file), "--proj", str(proj)]) == 2


def test_project_seed_sweep(tmp_path, trace_file):
    out = tmp_path / "sweep.json"
    assert main(["project", "--trace", str(trace_file), "--k", "16", "--sweep-seeds", "3",
                 "--out-json", str(out)]) == 0
    report = json.loads(out.read_text())
    assert [row["seed"] for row in report["sweep"]] == [0, 1, 2]


def test_proxy_gd_large_eta_exit_2(tmp_path):
    assert main(["simulate", "proxy-gd", "--eta", "10", "--T", "10",
                 "--out-json", str(tmp_path / "r.json")]) == 2


def test_proxy_gd_zero_proxy_satisfied(tmp_path):
    out = tmp_path / "r.json"
    assert main(["simulate", "proxy-gd", "--predictors", "zero", "--T", "50", "--out-json", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["runs"][0]["satisfied"] is True
    assert report["lemma_c1_violations"] == 0


def test_proxy_gd_divergence_exit_4(tmp_path):
    assert main(["simulate", "proxy-gd", "--objective", "quadratic", "--predictors", "trend",
                 "--T", "2000", "--out-json", str(tmp_path / "r.json")]) == 4


def test_omd_hundred_seeds(tmp_path):
    out = tmp_path / "r.json"
    assert main(["simulate", "omd", "--seeds", "100", "--out-json", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["total"] == 100
    assert report["satisfied_count"] == 100


def test_omd_fixed_eta_and_variant(tmp_path):
    out = tmp_path / "r.json"
    assert main(["simulate", "omd", "--eta", "0.05", "--variant", "as-written", "--horizon", "50",
                 "--out-json", str(out)]) == 0
    run = json.loads(out.read_text())["runs"][0]
    assert run["variant"] == "as_written" and run["eta"] == 0.05


def test_generate_planted_rank_one(tmp_path):
    path = tmp_path / "p.gtrc"
    assert main(["generate", "planted", "--r", "1", "--rho", "0", "--d", "10", "--T", "40",
                 "--out", str(path)]) == 0
    out = tmp_path / "s.csv"
    assert main(["spectrum", "--trace", str(path), "--out-csv", str(out)]) == 0
    sigma = [float(r[1]) for r in _rows(out)[1:]]
    assert all(s <= 1e-10 * sigma[0] for s in sigma[1:])


@pytest.mark.parametrize("kind", ["planted", "logreg"])
def test_generate_deterministic(tmp_path, kind):
    extra = ["--steps", "40", "--d", "8"] if kind == "logreg" else ["--T", "40", "--d", "8", "--r", "2"]
    a, b = tmp_path / "a.gtrc", tmp_path / "b.gtrc"
    assert main(["generate", kind, "--seed", "3", "--out", str(a), *extra]) == 0
    assert main(["generate", kind, "--seed", "3", "--out", str(b), *extra]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.gtrc.meta.json").read_bytes() == (tmp_path / "b.gtrc.meta.json").read_bytes()


def test_reports_byte_identical(tmp_path, trace_file):
    blobs = []
    for i in range(2):
        j, c = tmp_path / f"r{i}.json", tmp_path / f"k{i}.csv"
        assert main(["analyze", "--trace", str(trace_file), "--window", "16", "--run", "x",
                     "--out-json", str(j), "--out-csv", str(c)]) == 0
        blobs.append((j.read_bytes(), c.read_bytes(), (tmp_path / f"k{i}_rank.csv").read_bytes()))
    assert blobs[0] == blobs[1]


def test_module_entry_point(tmp_path, trace_file):
    proc = subprocess.run(
        [sys.executable, "-m", "gradtrace", "analyze", "--trace", str(trace_file), "--predictors", "zero"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["reports"][0]["kappa"] == 1.0
