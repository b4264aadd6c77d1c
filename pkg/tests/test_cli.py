import json

import numpy as np
import pytest

from rankboot.cli import main


def _long_csv(path, groups):
    lines = ["item,value"]
    for name, values in groups.items():
        lines += [f"{name},{float(v)!r}" for v in values]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def _matrix_csv(path, x, y=None):
    cols = [f"g{k}" for k in range(x.shape[1])] + (["Y"] if y is not None else [])
    body = x if y is None else np.column_stack([x, y])
    lines = [",".join(cols)] + [",".join(repr(float(v)) for v in row) for row in body]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def _rows(path):
    return [l for l in path.read_text().splitlines() if not l.startswith("#")]


def _school_csv(path):
    rng = np.random.default_rng(11)
    groups = {f"school{j:02d}": rng.normal(0.6 - 0.01 * j, 0.5, size=rng.integers(40, 120))
              for j in range(30)}
    return _long_csv(path, groups)


def test_analyze_constant_items(tmp_path):
    inp = _long_csv(tmp_path / "in.csv", {"a": [10, 10, 10], "b": [0, 0, 0]})
    out = tmp_path / "out"
    assert main(["analyze", "--input", inp, "--replicates", "50", "--out", str(out)]) == 0
    assert _rows(out / "intervals.csv")[1:] == ["a,1,1,0.95", "b,2,2,0.95"]
    summary = json.loads((out / "summary.json").read_text())
    assert [i["rank"] for i in summary["items"]] == [1, 2]
    assert summary["m_used"] == [3, 3] and summary["mean_width"] == 1.0
    header = (out / "rank_distribution.csv").read_text().splitlines()[:3]
    assert header[0].startswith("# rankboot ") and "seed=0" in header[1]
    assert header[2].startswith("# config_sha256=")
    echo = json.loads((out / "config.json").read_text())
    assert echo["replicates"] == 50 and "threads" not in echo


def test_fraction_widens_intervals(tmp_path):
    inp = _school_csv(tmp_path / "schools.csv")
    common = ["analyze", "--input", inp, "--scheme", "independent-populations", "--level", "0.95",
              "--replicates", "400", "--seed", "5"]
    assert main(common + ["--full", "--out", str(tmp_path / "full")]) == 0
    assert main(common + ["--fraction", "0.355", "--out", str(tmp_path / "frac")]) == 0
    full = json.loads((tmp_path / "full" / "summary.json").read_text())
    frac = json.loads((tmp_path / "frac" / "summary.json").read_text())
    assert frac["mean_width"] > full["mean_width"]
    assert frac["m_used"][0] == int(np.floor(0.355 * full["m_used"][0] + 0.5))


def test_auto_m(tmp_path):
    inp = _school_csv(tmp_path / "schools.csv")
    assert main(["analyze", "--input", inp, "--auto-m", "--replicates", "100",
                 "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert 0 < summary["auto_rho"] <= 1


@pytest.mark.parametrize("args", [
    ["analyze", "--level", "1.5"],
    ["analyze", "--fraction", "0.5", "--full"],
    ["analyze"],
    ["frobnicate"],
])
def test_usage_errors(tmp_path, args, capsys):
    assert main(args) == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    x = np.column_stack([[0.0, 0.0, 1.0], [1.0, 2.0, 3.0]])
    inp = _matrix_csv(tmp_path / "m.csv", x, np.array([1.0, 2.0, 3.0]))
    code = main(["analyze", "--input", inp, "--layout", "matrix", "--response", "Y",
                 "--estimator", "correlation", "--replicates", "200", "--out", str(tmp_path / "o")])
    assert code == 3
    assert "replicate" in capsys.readouterr().err


def test_config_file_and_flag_override(tmp_path):
    inp = _school_csv(tmp_path / "s.csv")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"input": inp, "replicates": 60, "level": 0.8, "fraction": 0.5}))
    assert main(["analyze", "--config", str(cfg), "--level", "0.9", "--out", str(tmp_path / "o")]) == 0
    echo = json.loads((tmp_path / "o" / "config.json").read_text())
    assert echo["level"] == 0.9 and echo["replicates"] == 60 and echo["size"] == "fraction"
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    assert main(["analyze", "--config", str(bad)]) == 2


def test_select_m_tied_and_separated(tmp_path):
    rng = np.random.default_rng(0)
    base = rng.normal(size=200)
    tied = {f"i{k}": rng.permutation(base) for k in range(5)}
    assert main(["select-m", "--input", _long_csv(tmp_path / "t.csv", tied),
                 "--out", str(tmp_path / "t")]) == 0
    rows = _rows(tmp_path / "t" / "m_selection.csv")
    assert rows[1].startswith("2,") and rows[1].endswith(",1")

    sep = {f"i{k}": rng.normal(3.0 * k, 1.0, size=200) for k in range(5)}
    assert main(["select-m", "--input", _long_csv(tmp_path / "s.csv", sep),
                 "--out", str(tmp_path / "s")]) == 0
    last = _rows(tmp_path / "s" / "m_selection.csv")[-1].split(",")
    assert last[0] == "200" and float(last[1]) == 1.0 and last[3] == "1"


def test_select_m_single_item(tmp_path):
    inp = _long_csv(tmp_path / "one.csv", {"only": [1, 2, 3]})
    assert main(["select-m", "--input", inp, "--out", str(tmp_path / "o")]) == 2


def test_conditional_constant_columns(tmp_path):
    x = np.column_stack([np.full(8, 5.0), np.full(8, 1.0), np.full(8, 3.0)])
    inp = _matrix_csv(tmp_path / "m.csv", x)
    assert main(["conditional", "--input", inp, "--layout", "matrix", "--replicates", "50",
                 "--out", str(tmp_path / "o")]) == 0
    rows = _rows(tmp_path / "o" / "conditional_intervals.csv")
    assert rows[0] == "item,estimate,rank,cond_lo,cond_hi,uncond_lo,uncond_hi,level"
    assert [r.split(",")[2:7] for r in rows[1:]] == [["1", "1", "1", "1", "1"],
                                                     ["2", "2", "2", "2", "2"],
                                                     ["3", "3", "3", "3", "3"]]


def test_conditional_narrower_for_strong_signal(tmp_path):
    rng = np.random.default_rng(3)
    n, p = 30, 300
    x = rng.normal(size=(n, p))
    y = x[:, 0] + rng.normal(size=n)
    inp = _matrix_csv(tmp_path / "m.csv", x, y)
    assert main(["conditional", "--input", inp, "--layout", "matrix", "--response", "Y",
                 "--estimator", "correlation", "--top", "3", "--fraction", "0.7",
                 "--replicates", "300", "--out", str(tmp_path / "o")]) == 0
    first = _rows(tmp_path / "o" / "conditional_intervals.csv")[1].split(",")
    assert first[0] == "g0"
    cond = int(first[4]) - int(first[3])
    uncond = int(first[6]) - int(first[5])
    assert cond < uncond


def test_conditional_rejects_synchronous(tmp_path, capsys):
    inp = _matrix_csv(tmp_path / "m.csv", np.random.default_rng(0).normal(size=(10, 3)))
    code = main(["conditional", "--input", inp, "--layout", "matrix", "--scheme", "synchronous"])
    assert code == 2
    assert "synchronous" in capsys.readouterr().err


def test_conditional_needs_matrix(tmp_path):
    inp = _long_csv(tmp_path / "l.csv", {"a": [1, 2], "b": [3, 4]})
    assert main(["conditional", "--input", inp, "--out", str(tmp_path / "o")]) == 2


def test_oracle_figure4(capsys):
    assert main(["oracle", "figure4", "--z1", "1", "--draws", "200000"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["mean"] == pytest.approx(1.96, abs=0.02)
    assert out["variance"] == pytest.approx(1.4, abs=0.05)


def test_oracle_constant(capsys, tmp_path):
    assert main(["oracle", "constantC", "--out", str(tmp_path / "o")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["quadrature"] == pytest.approx(0.398942, abs=1e-6)
    assert json.loads((tmp_path / "o" / "oracle.json").read_text()) == out


def test_oracle_other_names(capsys):
    assert main(["oracle", "expected-rank", "--j", "1", "--delta", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["expected_rank"] == pytest.approx(1.08331, abs=1e-5)
    assert main(["oracle", "r-limit", "--sigmas", "1,1,1", "--draws", "20000"]) == 0
    assert len(json.loads(capsys.readouterr().out)["pmf"]) == 3
    assert main(["oracle", "limit-cdf", "--sigmas", "1,1", "--offsets", "0,100", "--draws", "10000"]) == 0
    assert json.loads(capsys.readouterr().out)["cdf"][0] == 0.0


def test_simulate_figure7(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "figure7", "--rho", "0", "--reps", "4", "--truth-reps", "500",
                 "--replicates", "200", "--out", str(out)]) == 0
    rows = [r.split(",") for r in _rows(out / "summary.csv")[1:]]
    by_name = {r[0]: float(r[6]) for r in rows}
    assert set(by_name) == {"fig7-rho0.0-sync", "fig7-rho0.0-ic"}
    assert by_name["fig7-rho0.0-ic"] <= by_name["fig7-rho0.0-sync"]
    assert len(_rows(out / "metrics.csv")) == 1 + 8


def test_simulate_json_scenarios(tmp_path):
    cfg = tmp_path / "scen.json"
    cfg.write_text(json.dumps({"scenarios": [{
        "name": "mini", "n": 30, "p": 4, "theta": {"rule": "fixed-spacing", "gap": 0.2},
        "plan": {"replicates": 50}, "dataset_reps": 2, "seed": 1}]}))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert _rows(tmp_path / "o" / "summary.csv")[1].startswith("mini,width,30,4,30,2,")


def test_simulate_errors():
    assert main(["simulate", "figure99"]) == 2
    assert main(["simulate", "figure1", "--growth", "linear"]) == 2


def test_outputs_identical_across_threads(tmp_path):
    inp = _school_csv(tmp_path / "s.csv")
    blobs = []
    for t in (1, 4):
        out = tmp_path / f"t{t}"
        assert main(["analyze", "--input", inp, "--replicates", "300", "--seed", "9",
                     "--threads", str(t), "--out", str(out)]) == 0
        blobs.append([(out / f).read_bytes() for f in
                      ("rank_distribution.csv", "intervals.csv", "summary.json", "config.json")])
    assert blobs[0] == blobs[1]
