"""Resampling schemes, resample sizes and reproducible random streams.

Seeding
-------
Every random draw comes from :func:`stream`, which maps ``(seed, *key)`` to
``Generator(PCG64(SeedSequence(seed, spawn_key=key)))``. This is exactly the
child that ``SeedSequence(seed).spawn`` would hand out at that key, so
streams for different keys are statistically independent and replicate
``b`` always sees the same numbers no matter which worker runs it or in
what order.

Within one replicate the draw order is fixed:

* independent populations: one ``integers(0, n_rep)`` call where
  ``n_rep = repeat(n_j, m_j)``, items laid out back to back;
* synchronous: one ``integers(0, n, size=m)`` call, shared by every column;
* independent component: one ``integers(0, n, size=(m, p))`` call, column
  ``j`` uses ``idx[:, j]`` (or, with unequal ``m_j``, one call per column).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .data import Layout, PopulationData
from .errors import ValidationError


class Scheme(enum.Enum):
    INDEPENDENT_POPULATIONS = "independent-populations"
    SYNCHRONOUS = "synchronous"
    INDEPENDENT_COMPONENT = "independent-component"


class SizeRule(enum.Enum):
    FULL = "full"
    FRACTION = "fraction"
    PER_ITEM = "per-item"


class Rounding(enum.Enum):
    HALF_UP = "round"
    FLOOR = "floor"


@dataclass(frozen=True)
class ResamplePlan:
    scheme: Scheme = Scheme.INDEPENDENT_POPULATIONS
    size_rule: SizeRule = SizeRule.FULL
    rho: float | None = None
    m_per_item: tuple[int, ...] | None = None
    replicates: int = 2000
    seed: int = 0
    rounding: Rounding = Rounding.HALF_UP

    def __post_init__(self):
        if self.replicates < 1:
            raise ValidationError(f"replicates must be >= 1, got {self.replicates}")
        if self.size_rule is SizeRule.FRACTION:
            if self.rho is None or not 0.0 < self.rho <= 1.0:
                raise ValidationError(f"fraction must lie in (0, 1], got {self.rho}")
        if self.size_rule is SizeRule.PER_ITEM and self.m_per_item is None:
            raise ValidationError("per-item size rule needs m_per_item")

    @classmethod
    def fraction(cls, rho: float, **kwargs) -> ResamplePlan:
        return cls(size_rule=SizeRule.FRACTION, rho=rho, **kwargs)

    @classmethod
    def per_item(cls, m, **kwargs) -> ResamplePlan:
        return cls(size_rule=SizeRule.PER_ITEM, m_per_item=tuple(int(v) for v in np.atleast_1d(m)),
                   **kwargs)


def check_scheme(plan: ResamplePlan, data: PopulationData) -> None:
    if plan.scheme is Scheme.INDEPENDENT_POPULATIONS:
        if data.layout is not Layout.INDEPENDENT_SAMPLES:
            raise ValidationError("the independent-populations scheme needs independent-samples data")
    elif data.layout is not Layout.MATRIX:
        raise ValidationError(f"the {plan.scheme.value} scheme needs matrix data")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def resolve_sizes(plan: ResamplePlan, data: PopulationData) -> np.ndarray:
    """Per-item resample sizes ``m_j`` with ``2 <= m_j <= n_j``."""
    check_scheme(plan, data)
    n = data.sizes
    if plan.size_rule is SizeRule.FULL:
        m = n.copy()
    elif plan.size_rule is SizeRule.FRACTION:
        raw = [plan.rho * int(nj) for nj in n]
        if plan.rounding is Rounding.FLOOR:
            # tiny slack so e.g. 0.355 * 200 = 70.99999... floors to 71
            m = np.array([int(math.floor(v + 1e-9)) for v in raw], dtype=np.int64)
        else:
            m = np.array([_round_half_up(v) for v in raw], dtype=np.int64)
        m = np.minimum(np.maximum(m, 2), n)
    else:
        m = np.asarray(plan.m_per_item, dtype=np.int64)
        if m.size == 1:
            m = np.full(data.p, int(m[0]), dtype=np.int64)
        if m.size != data.p:
            raise ValidationError(f"{m.size} per-item sizes given for {data.p} items")
        for label, mj, nj in zip(data.labels, m, n):
            if not 2 <= mj <= nj:
                raise ValidationError(f"item {label}: resample size {mj} outside [2, {nj}]")
    if plan.scheme is Scheme.SYNCHRONOUS and np.unique(m).size != 1:
        raise ValidationError("the synchronous scheme needs one common resample size")
    return m


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``key`` under master ``seed``."""
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class _Flat:
    """Independent samples concatenated for one-shot resampling."""

    values: np.ndarray
    offsets: np.ndarray
    n: np.ndarray
    m: np.ndarray
    n_rep: np.ndarray = field(init=False)
    base: np.ndarray = field(init=False)
    starts: np.ndarray = field(init=False)

    def __post_init__(self):
        self.n_rep = np.repeat(self.n, self.m)
        self.base = np.repeat(self.offsets, self.m)
        self.starts = np.concatenate(([0], np.cumsum(self.m)[:-1]))


def flatten(data: PopulationData, m: np.ndarray) -> _Flat:
    n = data.sizes
    offsets = np.concatenate(([0], np.cumsum(n)[:-1]))
    return _Flat(np.concatenate(data.samples), offsets, n, np.asarray(m, dtype=np.int64))


def draw_population_indices(flat: _Flat, rng: np.random.Generator) -> np.ndarray:
    """Indices into ``flat.values``; item j occupies ``starts[j]:starts[j]+m[j]``."""
    return flat.base + rng.integers(0, flat.n_rep)


def resample_independent_populations(data: PopulationData, m, rng: np.random.Generator) -> PopulationData:
    """Draw ``m_j`` values with replacement from each sample, independently across items."""
    if data.layout is not Layout.INDEPENDENT_SAMPLES:
        raise ValidationError("independent-populations resampling needs independent-samples data")
    m = np.broadcast_to(np.asarray(m, dtype=np.int64), (data.p,))
    flat = flatten(data, m)
    idx = draw_population_indices(flat, rng)
    drawn = flat.values[idx]
    parts = np.split(drawn, np.cumsum(m)[:-1])
    return PopulationData.from_samples(parts, labels=data.labels)


def draw_rows(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, n, size=int(m))


def resample_synchronous(data: PopulationData, m: int, rng: np.random.Generator) -> PopulationData:
    """Draw ``m`` whole rows with replacement; every column shares the row indices."""
    if data.layout is not Layout.MATRIX:
        raise ValidationError("synchronous resampling needs matrix data")
    if not 2 <= m <= data.n:
        raise ValidationError(f"resample size {m} outside [2, {data.n}]")
    rows = draw_rows(data.n, m, rng)
    resp = None if data.response is None else data.response[rows]
    return PopulationData.from_matrix(data.samples[rows], response=resp, labels=data.labels)


def draw_component_indices(n: int, m, p: int, rng: np.random.Generator) -> np.ndarray | list[np.ndarray]:
    """Row indices per column; a ``(m, p)`` array when all sizes agree, else a list."""
    m = np.broadcast_to(np.asarray(m, dtype=np.int64), (p,))
    if np.all(m == m[0]):
        return rng.integers(0, n, size=(int(m[0]), p))
    return [rng.integers(0, n, size=int(mj)) for mj in m]


def resample_independent_component(data: PopulationData, m, rng: np.random.Generator) -> PopulationData:
    """Resample each column from itself with its own index sequence.

    The response cannot be paired with p different index sequences in one
    matrix, so it is dropped here; the rank engine keeps the pairing by
    working with :func:`draw_component_indices` directly. Unequal ``m_j``
    give an independent-samples result.
    """
    if data.layout is not Layout.MATRIX:
        raise ValidationError("independent-component resampling needs matrix data")
    idx = draw_component_indices(data.n, m, data.p, rng)
    if isinstance(idx, list):
        parts = [data.samples[ij, j] for j, ij in enumerate(idx)]
        return PopulationData.from_samples(parts, labels=data.labels)
    cols = np.take_along_axis(data.samples, idx, axis=0)
    return PopulationData.from_matrix(cols, labels=data.labels)
