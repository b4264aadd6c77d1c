"""Synthetic ranking experiments and their error metrics.

A :class:`ScenarioSpec` fixes the parameter layout, the Gaussian noise
(optionally equicorrelated across items), the bootstrap plan and the number
of repeated datasets. Dataset ``r`` of a scenario is generated from
``stream(seed, 0, r)`` and bootstrapped with a seed derived from
``(seed, 1, r)``, so two scenarios that differ only in their resampling
scheme see identical datasets and their metrics can be compared pairwise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import PopulationData
from .engine import RankDistribution, bootstrap_rank_distribution, prediction_intervals
from .errors import ValidationError
from .estimators import EstimatorSpec
from .ranking import rank_rows
from .resampling import ResamplePlan, Scheme, SizeRule, stream

_DATA_KEY, _BOOT_KEY, _TRUTH_KEY = 0, 1, 2
Z90 = 1.6448536269514722


# --------------------------------------------------------------------------
# parameter layouts


@dataclass(frozen=True)
class FixedSpacing:
    """``theta_j = 1 - gap * j``."""

    gap: float

    def values(self, p: int, rng=None) -> np.ndarray:
        return 1.0 - self.gap * np.arange(1, p + 1)


@dataclass(frozen=True)
class TiedBlock:
    j0: int
    high: float = 1.0
    low: float = 0.0

    def values(self, p: int, rng=None) -> np.ndarray:
        return np.where(np.arange(p) < self.j0, self.high, self.low).astype(np.float64)


@dataclass(frozen=True)
class AlphaSpacing:
    """Evenly spaced, decreasing from 1, neighbour gap ``base * (10 / m)**alpha``."""

    alpha: float
    m: float
    base: float = 0.2

    @property
    def gap(self) -> float:
        return self.base * (10.0 / self.m) ** self.alpha

    def values(self, p: int, rng=None) -> np.ndarray:
        return 1.0 - self.gap * np.arange(p)


@dataclass(frozen=True)
class LinearModel:
    """``theta_j = a - epsilon * j``."""

    a: float
    epsilon: float

    def values(self, p: int, rng=None) -> np.ndarray:
        return self.a - self.epsilon * np.arange(1, p + 1)


@dataclass(frozen=True)
class UniformTail:
    """Top ``j0`` items at ``high``; the rest drawn uniformly on [tail_lo, tail_hi] per dataset."""

    j0: int
    high: float
    tail_lo: float
    tail_hi: float

    def values(self, p: int, rng: np.random.Generator) -> np.ndarray:
        theta = np.empty(p)
        theta[:self.j0] = self.high
        theta[self.j0:] = rng.uniform(self.tail_lo, self.tail_hi, size=p - self.j0)
        return theta


RULES = {
    "fixed-spacing": FixedSpacing,
    "tied-block": TiedBlock,
    "alpha-spacing": AlphaSpacing,
    "linear-model": LinearModel,
    "uniform-tail": UniformTail,
}

METRICS = ("width", "squared_error", "top5_error", "top5_error_scaled", "point_rank_1")


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    n: int
    p: int
    theta: object
    plan: ResamplePlan = field(default_factory=lambda: ResamplePlan(Scheme.INDEPENDENT_COMPONENT))
    sd: float = 1.0
    rho: float = 0.0
    dataset_reps: int = 50
    truth_reps: int = 0
    level: float = 0.9
    metrics: tuple[str, ...] = ("width",)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValidationError(f"rho must lie in [0, 1), got {self.rho}")
        if self.n < 2 or self.p < 2:
            raise ValidationError("n and p must both be >= 2")
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise ValidationError(f"unknown metrics {sorted(unknown)}")
        if "squared_error" in self.metrics and self.truth_reps < 500:
            raise ValidationError("squared_error needs truth_reps >= 500")
        if self.plan.scheme is Scheme.INDEPENDENT_POPULATIONS:
            raise ValidationError("scenarios generate matrix data; use a matrix scheme")

    @property
    def needs_bootstrap(self) -> bool:
        return any(m != "point_rank_1" for m in self.metrics)


# --------------------------------------------------------------------------
# data generation and truth


def generate_dataset(spec: ScenarioSpec, rng: np.random.Generator) -> PopulationData:
    """``X_ij = theta_j + sd * (sqrt(rho) W_i + sqrt(1 - rho) Z_ij)``."""
    theta = spec.theta.values(spec.p, rng)
    z = rng.standard_normal((spec.n, spec.p))
    w = rng.standard_normal(spec.n)
    noise = math.sqrt(1.0 - spec.rho) * z + math.sqrt(spec.rho) * w[:, None]
    return PopulationData.from_matrix(theta + spec.sd * noise)


def dataset(spec: ScenarioSpec, rep: int) -> PopulationData:
    return generate_dataset(spec, stream(spec.seed, _DATA_KEY, rep))


def true_rank_distribution(spec: ScenarioSpec, truth_reps: int | None = None,
                           seed: int | None = None) -> RankDistribution:
    """Empirical law of the sample ranks over fresh datasets."""
    reps = spec.truth_reps if truth_reps is None else truth_reps
    if reps < 500:
        raise ValidationError(f"truth_reps must be >= 500, got {reps}")
    seed = spec.seed if seed is None else seed
    p = spec.p
    counts = np.zeros((p, p), dtype=np.int64)
    for i in range(reps):
        x = generate_dataset(spec, stream(seed, _TRUTH_KEY, i)).samples
        ranks = rank_rows(x.mean(axis=0))
        counts[np.arange(p), ranks - 1] += 1
    return RankDistribution(counts, reps, np.full(p, spec.n), tuple(f"item{j + 1}" for j in range(p)))


# --------------------------------------------------------------------------
# metrics


def squared_error_pointwise(boot: RankDistribution, truth: RankDistribution) -> float:
    """Sum over items and ranks of the squared difference in rank probabilities."""
    if boot.counts.shape != truth.counts.shape:
        raise ValidationError(f"shape mismatch {boot.counts.shape} vs {truth.counts.shape}")
    return float(((boot.probs - truth.probs) ** 2).sum())


def _top5_reference() -> np.ndarray:
    return np.arange(1, 6) / 5.0


def top5_error_max() -> float:
    """Largest raw top-5 error, by enumerating point-mass rank laws per item.

    A point mass at rank s gives the CDF step I(s <= r); s > 5 covers every
    rank outside the top block.
    """
    ref = _top5_reference()
    per_item = max(float(((np.arange(1, 6) >= s) - ref) @ ((np.arange(1, 6) >= s) - ref))
                   for s in range(1, 7))
    return 5 * per_item


def error_top5_cdf(boot: RankDistribution, scaled: bool = False) -> float:
    """Squared CDF distance of items 1..5 over ranks 1..5 from the uniform law on 1..5."""
    if boot.p < 5:
        raise ValidationError(f"top-5 error needs p >= 5, got {boot.p}")
    cdf = boot.cdf()[:5, :5]
    raw = float(((cdf - _top5_reference()[None, :]) ** 2).sum())
    return 100.0 * raw / top5_error_max() if scaled else raw


def total_variation(probs: np.ndarray, target: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(probs) - np.asarray(target)).sum())


# --------------------------------------------------------------------------
# running


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    rows: list[dict]
    summary: list[dict]
    distributions: list[RankDistribution] | None = None
    truth: RankDistribution | None = None

    def values(self, metric: str) -> np.ndarray:
        return np.array([r["value"] for r in self.rows if r["metric"] == metric])


def boot_seed(spec: ScenarioSpec, rep: int) -> int:
    ss = np.random.SeedSequence(spec.seed, spawn_key=(_BOOT_KEY, rep))
    return int(ss.generate_state(1, np.uint64)[0])


def resample_size(spec: ScenarioSpec) -> int:
    plan = spec.plan
    if plan.size_rule is SizeRule.FULL:
        return spec.n
    if plan.size_rule is SizeRule.FRACTION:
        return max(2, int(math.floor(plan.rho * spec.n + 0.5)))
    return int(plan.m_per_item[0])


def summarize(rows: Sequence[dict]) -> list[dict]:
    out = []
    keys = []
    for r in rows:
        k = (r["scenario"], r["metric"])
        if k not in keys:
            keys.append(k)
    for name, metric in keys:
        sel = [r for r in rows if r["scenario"] == name and r["metric"] == metric]
        v = np.array([r["value"] for r in sel])
        mean = float(v.mean())
        sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
        half = Z90 * sd / math.sqrt(v.size)
        out.append({"scenario": name, "metric": metric, "n": sel[0]["n"], "p": sel[0]["p"],
                    "m": sel[0]["m"], "reps": int(v.size), "mean": mean, "sd": sd,
                    "ci90_lo": mean - half, "ci90_hi": mean + half})
    return out


def run_scenario(spec: ScenarioSpec, threads: int = 1, keep_distributions: bool = False,
                 estimator: EstimatorSpec | None = None) -> ScenarioResult:
    """Generate each dataset, bootstrap it, and record one row per (rep, metric)."""
    estimator = estimator or EstimatorSpec()
    truth = true_rank_distribution(spec) if "squared_error" in spec.metrics else None
    m = resample_size(spec)
    rows, dists = [], []
    for rep in range(spec.dataset_reps):
        data = dataset(spec, rep)
        dist = None
        if spec.needs_bootstrap:
            plan = replace(spec.plan, seed=boot_seed(spec, rep))
            dist = bootstrap_rank_distribution(data, estimator, plan, threads=threads)
            if keep_distributions:
                dists.append(dist)
        for metric in spec.metrics:
            if metric == "width":
                value = float(prediction_intervals(dist, spec.level).widths.mean())
            elif metric == "squared_error":
                value = squared_error_pointwise(dist, truth)
            elif metric == "top5_error":
                value = error_top5_cdf(dist)
            elif metric == "top5_error_scaled":
                value = error_top5_cdf(dist, scaled=True)
            else:
                value = float(rank_rows(data.samples.mean(axis=0))[0])
            rows.append({"scenario": spec.name, "rep": rep, "n": spec.n, "p": spec.p,
                         "m": m, "metric": metric, "value": value})
    return ScenarioResult(spec, rows, summarize(rows), dists if keep_distributions else None, truth)


def run_scenarios(specs: Iterable[ScenarioSpec], threads: int = 1) -> list[ScenarioResult]:
    return [run_scenario(s, threads=threads) for s in specs]


def write_metrics_csv(results: Sequence[ScenarioResult], path: str | Path,
                      header: Sequence[str] = ()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "rep", "n", "p", "m", "metric", "value"])
        for res in results:
            for r in res.rows:
                w.writerow([r["scenario"], r["rep"], r["n"], r["p"], r["m"], r["metric"],
                            repr(float(r["value"]))])


def write_summary_csv(results: Sequence[ScenarioResult], path: str | Path,
                      header: Sequence[str] = ()) -> None:
    cols = ["scenario", "metric", "n", "p", "m", "reps", "mean", "sd", "ci90_lo", "ci90_hi"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for res in results:
            for s in res.summary:
                w.writerow([repr(s[c]) if isinstance(s[c], float) else s[c] for c in cols])


# --------------------------------------------------------------------------
# scenario files and presets


def _plan_from_dict(d: dict, seed: int) -> ResamplePlan:
    scheme = Scheme(d.get("scheme", "independent-component"))
    reps = int(d.get("replicates", 2000))
    if "m" in d:
        return ResamplePlan.per_item([int(d["m"])], scheme=scheme, replicates=reps, seed=seed)
    if "fraction" in d:
        return ResamplePlan.fraction(float(d["fraction"]), scheme=scheme, replicates=reps, seed=seed)
    return ResamplePlan(scheme=scheme, replicates=reps, seed=seed)


def scenario_from_dict(d: dict) -> ScenarioSpec:
    """Build a scenario from its JSON form.

    Example::

        {"name": "fig1-n100", "n": 100, "p": 10,
         "theta": {"rule": "fixed-spacing", "gap": 0.1},
         "noise": {"sd": 1.0, "rho": 0.0},
         "plan": {"scheme": "independent-component", "m": 100, "replicates": 2000},
         "dataset_reps": 50, "metrics": ["width"], "seed": 1}
    """
    try:
        theta_d = dict(d["theta"])
        rule = RULES[theta_d.pop("rule")]
        theta = rule(**theta_d)
        noise = d.get("noise", {})
        seed = int(d.get("seed", 0))
        return ScenarioSpec(
            name=str(d["name"]), n=int(d["n"]), p=int(d["p"]), theta=theta,
            plan=_plan_from_dict(d.get("plan", {}), seed),
            sd=float(noise.get("sd", 1.0)), rho=float(noise.get("rho", 0.0)),
            dataset_reps=int(d.get("dataset_reps", 50)), truth_reps=int(d.get("truth_reps", 0)),
            level=float(d.get("level", 0.9)), metrics=tuple(d.get("metrics", ["width"])),
            seed=seed)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad scenario {d.get('name', '?')!r}: {exc!r}") from None


def _ic(m: int | None = None, replicates: int = 2000, scheme=Scheme.INDEPENDENT_COMPONENT) -> ResamplePlan:
    if m is None:
        return ResamplePlan(scheme=scheme, replicates=replicates)
    return ResamplePlan.per_item([int(m)], scheme=scheme, replicates=replicates)


def figure1(ns=(100, 1000, 10000), reps: int = 50, replicates: int = 2000, seed: int = 1):
    """Evenly spaced means 1 - j/10, n-out-of-n, 90% interval widths."""
    return [ScenarioSpec(f"fig1-n{n}", n, 10, FixedSpacing(0.1), _ic(None, replicates),
                         dataset_reps=reps, seed=seed) for n in ns]


def figure2(n: int = 1000, ms=(300, 1000), reps: int = 50, replicates: int = 2000, seed: int = 2):
    """Two tied blocks of five; compares resample sizes."""
    return [ScenarioSpec(f"fig2-m{m}", n, 10, TiedBlock(5, 1.0, 0.0), _ic(m, replicates),
                         dataset_reps=reps, seed=seed) for m in ms]


def figure3_m(n: int) -> int:
    return int(min(round(10 * math.sqrt(n)), n))


def figure3(ns=(400, 2500, 10000), alphas=(0.2, 0.5, 0.8), reps: int = 20,
            replicates: int = 2000, seed: int = 3):
    """Neighbour gaps shrinking like m^-alpha with m = min(10 sqrt(n), n)."""
    out = []
    for n in ns:
        m = figure3_m(n)
        for a in alphas:
            out.append(ScenarioSpec(f"fig3-n{n}-a{a}", n, 10, AlphaSpacing(a, m), _ic(m, replicates),
                                    dataset_reps=reps, seed=seed))
    return out


def figure7(rhos=(0.0, 0.25, 0.5), n: int = 50, p: int = 200, reps: int = 30,
            truth_reps: int = 2000, replicates: int = 2000, seed: int = 7):
    """Synchronous vs independent-component bootstrap under equicorrelated noise."""
    out = []
    for rho in rhos:
        for scheme, tag in ((Scheme.SYNCHRONOUS, "sync"), (Scheme.INDEPENDENT_COMPONENT, "ic")):
            out.append(ScenarioSpec(f"fig7-rho{rho}-{tag}", n, p, FixedSpacing(1.0 / (p - 1)),
                                    _ic(None, replicates, scheme), rho=rho, dataset_reps=reps,
                                    truth_reps=truth_reps, metrics=("squared_error",), seed=seed))
    return out


def figure11_schedule(n: int, growth: str = "constant", shrink_gap: bool = False,
                      n0: int = 20, p0: int = 500, m0: int = 20, gap0: float = 0.1):
    """``(p, m, gap)`` at sample size ``n`` for the high-dimensional growth study."""
    ratio = n / n0
    p = {"constant": p0, "linear": round(p0 * ratio), "quadratic": round(p0 * ratio ** 2)}[growth]
    m = min(n, int(round(m0 * (n / math.log(n)) / (n0 / math.log(n0)))))
    gap = gap0 * math.sqrt(math.log(n0) / math.log(n)) if shrink_gap else gap0
    return int(p), int(m), gap


def figure11(ns=(20, 40, 60), growth: str = "constant", shrink_gap: bool = False,
             reps: int = 30, replicates: int = 500, seed: int = 11):
    """Top-five tied block above a uniform tail; scaled top-5 error as n grows."""
    out = []
    for n in ns:
        p, m, gap = figure11_schedule(n, growth, shrink_gap)
        theta = UniformTail(5, 1.0, 0.0, 1.0 - gap)
        tag = f"fig11-{growth}-{'shrink' if shrink_gap else 'fixed'}-n{n}"
        out.append(ScenarioSpec(tag, n, p, theta, _ic(m, replicates), sd=0.25, dataset_reps=reps,
                                metrics=("top5_error_scaled",), seed=seed))
    return out


def rank_growth(n: int = 400, p: int = 2000, exponent: float = 0.6, reps: int = 200, seed: int = 33):
    """Evenly spaced means with spacing n^-exponent; records the sample rank of item 1."""
    eps = n ** (-exponent)
    return [ScenarioSpec(f"growth-n{n}", n, p, LinearModel(1.0, eps), _ic(None, 1),
                         dataset_reps=reps, metrics=("point_rank_1",), seed=seed)]


PRESETS = {
    "figure1": figure1,
    "figure2": figure2,
    "figure3": figure3,
    "figure7": figure7,
    "figure11": figure11,
    "rank_growth": rank_growth,
}
