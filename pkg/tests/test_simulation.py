import math

import numpy as np
import pytest
from scipy.special import ndtr

from rankboot import simulation as sim
from rankboot.engine import RankDistribution
from rankboot.errors import ValidationError
from rankboot.resampling import ResamplePlan, Scheme, stream


def _dist(probs, replicates=1000):
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    counts = np.rint(probs * replicates).astype(np.int64)
    return RankDistribution(counts, replicates, np.zeros(probs.shape[0], dtype=np.int64),
                            tuple(str(k) for k in range(probs.shape[0])))


def _spec(**kw):
    base = dict(name="t", n=50, p=4, theta=sim.FixedSpacing(0.1),
                plan=ResamplePlan(scheme=Scheme.INDEPENDENT_COMPONENT, replicates=100), dataset_reps=3)
    base.update(kw)
    return sim.ScenarioSpec(**base)


def test_independent_noise_is_uncorrelated():
    n = 4000
    x = sim.generate_dataset(_spec(n=n, p=2), stream(0)).samples
    assert abs(np.corrcoef(x[:, 0], x[:, 1])[0, 1]) < 3 / math.sqrt(n)


def test_equicorrelated_noise():
    x = sim.generate_dataset(_spec(n=5000, p=3, rho=0.5), stream(1)).samples
    c = np.corrcoef(x.T)
    assert np.all(np.abs(c[np.triu_indices(3, 1)] - 0.5) < 0.05)
    assert np.all(np.abs(x.std(axis=0, ddof=1) - 1.0) < 3 * math.sqrt(1 / (2 * 5000)) + 0.01)


def test_fixed_spacing_means():
    n = 10_000
    x = sim.generate_dataset(_spec(n=n, p=10), stream(2)).samples
    theta = 1 - np.arange(1, 11) / 10
    assert np.all(np.abs(x.mean(axis=0) - theta) < 3 * 1.1 / math.sqrt(n))


def test_sd_scales_noise():
    x = sim.generate_dataset(_spec(n=5000, p=2, sd=0.25, theta=sim.TiedBlock(1)), stream(3)).samples
    assert abs(x[:, 0].std(ddof=1) - 0.25) < 0.01


def test_layout_rules():
    np.testing.assert_array_equal(sim.TiedBlock(2, 1.0, 0.0).values(4), [1, 1, 0, 0])
    a = sim.AlphaSpacing(0.5, 100)
    assert a.gap == pytest.approx(0.2 * math.sqrt(0.1))
    np.testing.assert_allclose(a.values(3), [1, 1 - a.gap, 1 - 2 * a.gap])
    np.testing.assert_allclose(sim.LinearModel(2.0, 0.5).values(3), [1.5, 1.0, 0.5])
    tail = sim.UniformTail(2, 1.0, 0.0, 0.9).values(6, np.random.default_rng(0))
    assert tail[:2].tolist() == [1.0, 1.0] and np.all((tail[2:] >= 0) & (tail[2:] <= 0.9))


def test_truth_tied_block_is_uniform():
    truth = sim.true_rank_distribution(_spec(p=6, theta=sim.TiedBlock(3, 5.0, 0.0), truth_reps=3000))
    np.testing.assert_allclose(truth.probs[:3, :3], 1 / 3, atol=0.04)
    assert truth.probs[:3, 3:].sum() == 0.0


def test_truth_constant_and_separated():
    ident = np.eye(4)
    noiseless = sim.true_rank_distribution(_spec(sd=0.0, truth_reps=500))
    np.testing.assert_array_equal(noiseless.probs, ident)
    huge = sim.true_rank_distribution(_spec(n=40_000, truth_reps=500))
    np.testing.assert_array_equal(huge.probs, ident)
    with pytest.raises(ValidationError):
        sim.true_rank_distribution(_spec(), truth_reps=10)


def test_squared_error_examples():
    u = _dist([[0.2] * 5])
    assert sim.squared_error_pointwise(u, u) == 0.0
    assert sim.squared_error_pointwise(_dist([[1, 0]]), _dist([[0, 1]])) == 2.0
    assert sim.squared_error_pointwise(u, _dist([[1, 0, 0, 0, 0]])) == pytest.approx(0.8)
    with pytest.raises(ValidationError):
        sim.squared_error_pointwise(u, _dist([[1, 0]]))


def test_top5_error_examples():
    uniform = np.zeros((6, 6))
    uniform[:5, :5] = 0.2
    uniform[5, 5] = 1.0
    assert sim.error_top5_cdf(_dist(uniform)) == pytest.approx(0.0, abs=1e-12)
    top = np.zeros((5, 5))
    top[:, 0] = 1.0
    assert sim.error_top5_cdf(_dist(top)) == pytest.approx(6.0)
    assert sim.top5_error_max() == pytest.approx(11.0)
    assert sim.error_top5_cdf(_dist(top), scaled=True) == pytest.approx(600 / 11)
    with pytest.raises(ValidationError):
        sim.error_top5_cdf(_dist(np.eye(4)))


def test_top5_max_is_brute_force_bound():
    # every degenerate CDF assignment for 5 items over ranks 1..6 (6 = outside the block)
    ref = np.arange(1, 6) / 5
    per = [float((((np.arange(1, 6) >= s) - ref) ** 2).sum()) for s in range(1, 7)]
    assert sim.top5_error_max() == pytest.approx(5 * max(per))
    rng = np.random.default_rng(0)
    for _ in range(200):
        probs = rng.dirichlet(np.ones(8), size=8)
        assert sim.error_top5_cdf(_dist(probs, 10**6)) <= sim.top5_error_max() + 1e-9


def test_total_variation():
    assert sim.total_variation([1, 0], [0, 1]) == 1.0
    assert sim.total_variation([0.2] * 5, [0.2] * 5) == 0.0


def test_run_scenario_is_deterministic(tmp_path):
    spec = _spec(metrics=("width", "top5_error"), p=6, dataset_reps=4)
    a = sim.run_scenario(spec)
    b = sim.run_scenario(spec, threads=3)
    assert a.rows == b.rows
    assert len(a.rows) == 8 and {s["metric"] for s in a.summary} == {"width", "top5_error"}
    sim.write_metrics_csv([a], tmp_path / "m.csv", ["h"])
    sim.write_summary_csv([a], tmp_path / "s.csv", ["h"])
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[1] == "scenario,rep,n,p,m,metric,value" and len(lines) == 10
    assert (tmp_path / "s.csv").read_text().splitlines()[1].startswith("scenario,metric,n,p,m,reps,mean")


def test_summary_band():
    rows = [{"scenario": "s", "metric": "w", "n": 1, "p": 2, "m": 1, "value": v} for v in (1.0, 2.0, 3.0)]
    s = sim.summarize(rows)[0]
    half = 1.6448536269514722 * 1.0 / math.sqrt(3)
    assert s["mean"] == 2.0 and s["ci90_lo"] == pytest.approx(2.0 - half, rel=1e-6)


def test_scenario_from_dict():
    spec = sim.scenario_from_dict({
        "name": "x", "n": 30, "p": 5, "theta": {"rule": "tied-block", "j0": 2},
        "noise": {"sd": 0.5, "rho": 0.25},
        "plan": {"scheme": "synchronous", "m": 10, "replicates": 50},
        "dataset_reps": 2, "metrics": ["width"], "seed": 4})
    assert spec.theta == sim.TiedBlock(2) and spec.sd == 0.5 and spec.rho == 0.25
    assert spec.plan.scheme is Scheme.SYNCHRONOUS and spec.plan.m_per_item == (10,)
    assert sim.resample_size(spec) == 10
    for bad in ({"name": "y"}, {"name": "z", "n": 5, "p": 5, "theta": {"rule": "nope"}}):
        with pytest.raises(ValidationError):
            sim.scenario_from_dict(bad)


def test_spec_validation():
    with pytest.raises(ValidationError):
        _spec(rho=1.0)
    with pytest.raises(ValidationError):
        _spec(metrics=("squared_error",), truth_reps=10)
    with pytest.raises(ValidationError):
        _spec(plan=ResamplePlan())


def test_presets_and_schedules():
    assert sim.figure3_m(400) == 200 and sim.figure3_m(10_000) == 1000 and sim.figure3_m(50) == 50
    assert sim.figure11_schedule(20) == (500, 20, 0.1)
    p, m, gap = sim.figure11_schedule(60, "linear", shrink_gap=True)
    assert p == 1500 and m == round(20 * (60 / math.log(60)) / (20 / math.log(20)))
    assert gap == pytest.approx(0.1 * math.sqrt(math.log(20) / math.log(60)))
    assert sim.figure11_schedule(40, "quadratic")[0] == 2000
    assert set(sim.PRESETS) == {"figure1", "figure2", "figure3", "figure7", "figure11", "rank_growth"}
    f7 = sim.figure7(rhos=(0.0,))
    assert [s.plan.scheme for s in f7] == [Scheme.SYNCHRONOUS, Scheme.INDEPENDENT_COMPONENT]
    assert f7[0].seed == f7[1].seed


def test_figure1_widths_shrink():
    res = sim.run_scenarios(sim.figure1(ns=(100, 1000, 10000), reps=6, replicates=300))
    widths = [r.summary[0]["mean"] for r in res]
    assert widths[0] > widths[1] > widths[2]


def test_point_rank_metric_needs_no_bootstrap():
    spec = sim.rank_growth(n=100, p=50, reps=5)[0]
    assert not spec.needs_bootstrap
    res = sim.run_scenario(spec)
    assert np.all(res.values("point_rank_1") >= 1)


def test_point_rank_mean_matches_exact_sum():
    # E(rank of item 1) = 1 + sum_k Phi(-(k - 1) eps sqrt(n / 2)) for unit-variance means
    n, p = 400, 2000
    spec = sim.rank_growth(n=n, p=p, reps=120, seed=5)[0]
    ranks = sim.run_scenario(spec).values("point_rank_1")
    delta = math.sqrt(n / 2) * n ** -0.6
    exact = 1 + float(ndtr(-delta * np.arange(1, p)).sum())
    se = ranks.std(ddof=1) / math.sqrt(ranks.size)
    assert abs(ranks.mean() - exact) < 4 * se
