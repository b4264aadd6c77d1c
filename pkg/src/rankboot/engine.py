"""Monte Carlo bootstrap rank distributions and rank prediction intervals.

Replicate ``b`` of a run draws from ``stream(plan.seed, b)`` only, and the
per-replicate ranks are reduced to integer count matrices, so results are
bit-identical for any ``threads`` value.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .data import PopulationData
from .errors import NumericalError, ValidationError
from .estimators import EstimatorSpec, check_compatible, estimate_all, estimate_columns
from .ranking import rank_rows
from .resampling import (
    ResamplePlan,
    Scheme,
    draw_component_indices,
    draw_population_indices,
    draw_rows,
    flatten,
    resolve_sizes,
    stream,
)

CHUNK = 50
# key prefixes keep the conditional-analysis streams apart from plain replicates
_OUTER_KEY = 1
_OBSERVED_KEY = 2

DEGENERACY_MESSAGE = (
    "conditional rank analysis is not available under synchronous resampling: "
    "with continuous data one resampled column identifies the whole resampled row set, "
    "so every conditional probability P(theta*_j <= theta*_k | X, X*_j) collapses to a "
    "0/1 indicator and the conditional spread is not estimated consistently; "
    "use the independent-component scheme")


# --------------------------------------------------------------------------
# one replicate: resample and re-estimate every item


class Replicator:
    """Callable mapping a generator to one vector of bootstrap estimates."""

    def __init__(self, data: PopulationData, spec: EstimatorSpec, plan: ResamplePlan,
                 m: np.ndarray | None = None):
        check_compatible(data, spec)
        self.data = data
        self.spec = spec
        self.scheme = plan.scheme
        self.m = resolve_sizes(plan, data) if m is None else np.asarray(m, dtype=np.int64)
        if self.scheme is Scheme.INDEPENDENT_POPULATIONS:
            self._flat = flatten(data, self.m)
            self._reduce = spec.kind.value in ("mean", "proportion")
        else:
            self._x = np.asarray(data.samples)
            self._y = data.response

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        if self.scheme is Scheme.INDEPENDENT_POPULATIONS:
            flat = self._flat
            drawn = flat.values[draw_population_indices(flat, rng)]
            if self._reduce:
                return np.add.reduceat(drawn, flat.starts) / flat.m
            parts = np.split(drawn, flat.starts[1:])
            return np.array([estimate_columns(part[:, None], self.spec)[0] for part in parts])
        if self.scheme is Scheme.SYNCHRONOUS:
            rows = draw_rows(self._x.shape[0], self.m[0], rng)
            y = None if self._y is None else self._y[rows]
            return estimate_columns(self._x[rows], self.spec, y)
        idx = draw_component_indices(self._x.shape[0], self.m, self._x.shape[1], rng)
        if isinstance(idx, list):
            out = np.empty(len(idx))
            for j, ij in enumerate(idx):
                y = None if self._y is None else self._y[ij]
                out[j] = estimate_columns(self._x[ij, j][:, None], self.spec, y)[0]
            return out
        cols = np.take_along_axis(self._x, idx, axis=0)
        y = None if self._y is None else self._y[idx]
        return estimate_columns(cols, self.spec, y)


def _run_chunks(n_items: int, threads: int, work: Callable[[int, int], object]) -> list:
    """Apply ``work(start, stop)`` over ``range(n_items)`` in fixed chunks, results in order."""
    bounds = [(s, min(s + CHUNK, n_items)) for s in range(0, n_items, CHUNK)]
    if threads <= 1 or len(bounds) == 1:
        return [work(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: work(*ab), bounds))


def bootstrap_estimates(data: PopulationData, spec: EstimatorSpec, plan: ResamplePlan,
                        threads: int = 1) -> np.ndarray:
    """All replicate estimates as a ``(B, p)`` array."""
    rep = Replicator(data, spec, plan)

    def work(a, b):
        return np.stack([_checked(rep, plan.seed, i) for i in range(a, b)])

    return np.concatenate(_run_chunks(plan.replicates, threads, work))


def _checked(rep: Replicator, seed: int, b: int, *prefix: int) -> np.ndarray:
    try:
        theta = rep(stream(seed, *prefix, b))
    except NumericalError as exc:
        raise NumericalError(f"bootstrap replicate {b}: {exc}") from None
    if not np.all(np.isfinite(theta)):
        raise NumericalError(f"bootstrap replicate {b}: non-finite estimate")
    return theta


# --------------------------------------------------------------------------
# rank distributions and intervals


@dataclass(frozen=True, eq=False)
class RankDistribution:
    """Integer rank counts; ``probs[j, r-1]`` estimates P(rank of item j = r)."""

    counts: np.ndarray
    replicates: int
    m_used: np.ndarray
    labels: tuple[str, ...]

    @property
    def probs(self) -> np.ndarray:
        return self.counts / self.replicates

    @property
    def p(self) -> int:
        return self.counts.shape[1]

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.counts, axis=1) / self.replicates

    def mean_rank(self) -> np.ndarray:
        return self.probs @ np.arange(1, self.p + 1)

    def to_csv(self, path: str | Path, header: Sequence[str] = ()) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["item"] + [f"rank_{r}" for r in range(1, self.p + 1)])
            for label, row in zip(self.labels, self.probs):
                w.writerow([label] + [repr(float(v)) for v in row])

    def to_dict(self) -> dict:
        return {"replicates": self.replicates,
                "m_used": [int(v) for v in self.m_used],
                "items": list(self.labels),
                "probs": self.probs.tolist()}


def _count_ranks(ranks: np.ndarray, p: int) -> np.ndarray:
    """``(k, p)`` count matrix from a ``(B, k)`` block of ranks."""
    k = ranks.shape[1]
    flat = np.arange(k) * p + (ranks - 1)
    return np.bincount(flat.ravel(), minlength=k * p).reshape(k, p)


def bootstrap_rank_distribution(data: PopulationData, estimator: EstimatorSpec,
                                plan: ResamplePlan, threads: int = 1) -> RankDistribution:
    """Resample per ``plan``, re-estimate, rank, and tally ranks over ``plan.replicates``."""
    rep = Replicator(data, estimator, plan)
    p = data.p

    def work(a, b):
        thetas = np.stack([_checked(rep, plan.seed, i) for i in range(a, b)])
        return _count_ranks(rank_rows(thetas), p)

    counts = sum(_run_chunks(plan.replicates, threads, work))
    return RankDistribution(counts, plan.replicates, rep.m.copy(), data.labels)


@dataclass(frozen=True, eq=False)
class IntervalSet:
    lo: np.ndarray
    hi: np.ndarray
    level: float
    labels: tuple[str, ...]

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo + 1

    def to_csv(self, path: str | Path, header: Sequence[str] = ()) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["item", "lo", "hi", "level"])
            for label, lo, hi in zip(self.labels, self.lo, self.hi):
                w.writerow([label, int(lo), int(hi), repr(float(self.level))])

    def to_dict(self) -> dict:
        return {"level": self.level,
                "intervals": [{"item": l, "lo": int(a), "hi": int(b)}
                              for l, a, b in zip(self.labels, self.lo, self.hi)]}

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


# absorbs float error in (1 - level) / 2, e.g. (1 - 0.9) / 2 < 0.05
_TAIL_SLACK = 1e-12


def prediction_intervals(dist: RankDistribution, level: float) -> IntervalSet:
    """Equal-tailed discrete rank intervals.

    ``lo`` is the largest r with P(rank < r) <= (1 - level)/2 and ``hi`` the
    smallest r with P(rank > r) <= (1 - level)/2, so coverage is at least
    ``level`` for every item.
    """
    if not 0.0 < level < 1.0:
        raise ValidationError(f"level must lie in (0, 1), got {level}")
    tail = (1.0 - level) / 2.0 + _TAIL_SLACK
    probs = dist.probs
    below = np.cumsum(probs, axis=1) - probs          # P(rank < r), r = 1..p
    above = 1.0 - np.cumsum(probs, axis=1)            # P(rank > r)
    r = np.arange(1, dist.p + 1)
    lo = np.array([r[row <= tail].max() for row in below])
    hi = np.array([r[row <= tail].min() for row in above])
    return IntervalSet(lo, hi, level, dist.labels)


def interval_width_summary(intervals: IntervalSet) -> float:
    """Average number of ranks covered per interval."""
    return float(np.mean(intervals.widths))


# --------------------------------------------------------------------------
# conditional analysis


@dataclass(frozen=True, eq=False)
class ConditionalSummary:
    """Bootstrap rank of one item split into its own and everyone else's noise.

    ``u_samples[b]`` is the mean rank over the inner loop for outer draw ``b``
    (the bootstrap conditional mean rank). ``observed_probs`` is the rank law
    with the item's estimate frozen at its observed value. ``pooled_probs`` and
    ``total_variance`` are over all (outer, inner) pairs.
    """

    item: int
    label: str
    observed_estimate: float
    observed_rank: int
    observed_probs: np.ndarray
    pooled_probs: np.ndarray
    u_samples: np.ndarray
    total_variance: float

    def observed_interval(self, level: float) -> tuple[int, int]:
        dist = RankDistribution(self.observed_probs[None, :], 1, np.zeros(0, dtype=np.int64),
                                (self.label,))
        iv = prediction_intervals(dist, level)
        return int(iv.lo[0]), int(iv.hi[0])


def _rank_against(t, others: np.ndarray, j: int) -> np.ndarray:
    """Rank of value(s) ``t`` for item ``j`` among ``others`` (shape ``(B, p)``, column j ignored).

    Same tie rule as :mod:`rankboot.ranking`.
    """
    t = np.asarray(t, dtype=np.float64).reshape(-1, 1)
    greater = others > t
    ties = others == t
    greater[:, j] = False
    ties[:, j:] = False
    return 1 + greater.sum(axis=1) + ties.sum(axis=1)


def _require_conditional_scheme(plan: ResamplePlan) -> None:
    if plan.scheme is Scheme.SYNCHRONOUS:
        raise ValidationError(DEGENERACY_MESSAGE)


def conditional_rank_distribution(data: PopulationData, estimator: EstimatorSpec,
                                  plan: ResamplePlan, j: int, outer: int = 200,
                                  inner: int = 200, threads: int = 1) -> ConditionalSummary:
    """Nested bootstrap for item ``j`` (0-based).

    Each outer draw resamples item ``j`` alone; its inner loop resamples all
    other items ``inner`` times. The observed-value mode holds item ``j`` at
    its observed estimate and uses ``inner`` fresh draws of the others, with
    no bias recentring.
    """
    _require_conditional_scheme(plan)
    if not 0 <= j < data.p:
        raise ValidationError(f"item index {j} outside 0..{data.p - 1}")
    rep = Replicator(data, estimator, plan)
    p = data.p
    theta_hat = estimate_all(data, estimator)

    def work(a, b):
        ranks = np.empty((b - a, inner), dtype=np.int64)
        for row, ob in enumerate(range(a, b)):
            rng = stream(plan.seed, _OUTER_KEY, ob)
            try:
                own = rep(rng)[j]
                others = np.stack([rep(rng) for _ in range(inner)])
            except NumericalError as exc:
                raise NumericalError(f"conditional outer replicate {ob}: {exc}") from None
            ranks[row] = _rank_against(own, others, j)
        return ranks

    ranks = np.concatenate(_run_chunks(outer, threads, work))

    rng = stream(plan.seed, _OBSERVED_KEY)
    try:
        others = np.stack([rep(rng) for _ in range(inner)])
    except NumericalError as exc:
        raise NumericalError(f"conditional observed-value replicate: {exc}") from None
    obs_ranks = _rank_against(theta_hat[j], others, j)

    return ConditionalSummary(
        item=j,
        label=data.labels[j],
        observed_estimate=float(theta_hat[j]),
        observed_rank=int(rank_rows(theta_hat)[j]),
        observed_probs=np.bincount(obs_ranks - 1, minlength=p) / inner,
        pooled_probs=np.bincount(ranks.ravel() - 1, minlength=p) / ranks.size,
        u_samples=ranks.mean(axis=1),
        total_variance=float(ranks.var()),
    )


def observed_conditional_distribution(data: PopulationData, estimator: EstimatorSpec,
                                      plan: ResamplePlan, items: Sequence[int],
                                      threads: int = 1) -> RankDistribution:
    """Rank laws for several items, each frozen at its observed estimate.

    One bootstrap run of all items is shared: row ``i`` counts the rank of
    ``theta_hat[items[i]]`` among the replicate estimates of the other items.
    """
    _require_conditional_scheme(plan)
    items = [int(j) for j in items]
    rep = Replicator(data, estimator, plan)
    theta_hat = estimate_all(data, estimator)
    p = data.p

    def work(a, b):
        thetas = np.stack([_checked(rep, plan.seed, i) for i in range(a, b)])
        ranks = np.stack([_rank_against(theta_hat[j], thetas, j) for j in items], axis=1)
        return _count_ranks(ranks, p)

    counts = sum(_run_chunks(plan.replicates, threads, work))
    return RankDistribution(counts, plan.replicates, rep.m.copy(),
                            tuple(data.labels[j] for j in items))
