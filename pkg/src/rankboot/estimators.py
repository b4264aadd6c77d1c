"""Per-item plug-in statistics and their asymptotic scale.

Every estimator works on a single sample and, for speed inside bootstrap
loops, on a stack of resampled columns at once (:func:`estimate_columns`).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import Layout, PopulationData
from .errors import NumericalError, ValidationError


class Kind(enum.Enum):
    MEAN = "mean"
    PROPORTION = "proportion"
    QUANTILE = "quantile"
    CORRELATION = "correlation"


class SigmaMethod(enum.Enum):
    PLUGIN = "plugin"
    BOOTSTRAP = "bootstrap"


@dataclass(frozen=True)
class EstimatorSpec:
    """Which statistic to rank on and how to estimate its scale.

    ``q`` is used by the quantile kind only. ``b_sigma`` and ``sigma_seed``
    drive the bootstrap-variance route for the scale.
    """

    kind: Kind = Kind.MEAN
    q: float | None = None
    sigma_method: SigmaMethod = SigmaMethod.PLUGIN
    b_sigma: int = 500
    sigma_seed: int = 0

    def __post_init__(self):
        if self.kind is Kind.QUANTILE:
            if self.q is None or not 0.0 < self.q < 1.0:
                raise ValidationError(f"quantile level must lie in (0, 1), got {self.q}")
        if self.sigma_method is SigmaMethod.BOOTSTRAP and self.b_sigma < 100:
            raise ValidationError(f"b_sigma must be >= 100, got {self.b_sigma}")

    @classmethod
    def parse(cls, text: str, **kwargs) -> EstimatorSpec:
        """Build a spec from ``mean``, ``proportion``, ``quantile:q`` or ``correlation``."""
        name, _, arg = text.strip().lower().partition(":")
        try:
            kind = Kind(name)
        except ValueError:
            raise ValidationError(f"unknown estimator {text!r}") from None
        q = None
        if kind is Kind.QUANTILE:
            try:
                q = float(arg)
            except ValueError:
                raise ValidationError(f"quantile estimator needs a level, e.g. quantile:0.5; got {text!r}") from None
        if kind in (Kind.QUANTILE, Kind.CORRELATION):
            kwargs.setdefault("sigma_method", SigmaMethod.BOOTSTRAP)
        return cls(kind=kind, q=q, **kwargs)

    def label(self) -> str:
        return f"quantile:{self.q}" if self.kind is Kind.QUANTILE else self.kind.value


def check_compatible(data: PopulationData, spec: EstimatorSpec) -> None:
    if spec.kind is Kind.CORRELATION:
        if data.layout is not Layout.MATRIX or data.response is None:
            raise ValidationError("the correlation estimator needs matrix data with a response column")
    if spec.kind is Kind.PROPORTION:
        for label, x in zip(data.labels, data.columns()):
            if not np.all((x == 0.0) | (x == 1.0)):
                raise ValidationError(f"item {label}: proportion estimator needs 0/1 data")


def _pearson_columns(values: np.ndarray, response: np.ndarray) -> np.ndarray:
    if response.ndim == 1:
        response = response[:, None]
    xc = values - values.mean(axis=0)
    yc = response - response.mean(axis=0)
    sxy = (xc * yc).sum(axis=0)
    sxx = (xc * xc).sum(axis=0)
    syy = (yc * yc).sum(axis=0)
    denom = np.sqrt(sxx * syy)
    if np.any(denom == 0.0):
        bad = int(np.flatnonzero(denom == 0.0)[0])
        raise NumericalError(f"zero variance in column {bad} or response; correlation undefined")
    return sxy / denom


def estimate_columns(values: np.ndarray, spec: EstimatorSpec,
                     response: np.ndarray | None = None) -> np.ndarray:
    """Apply the estimator down axis 0 of ``values``.

    ``values`` has shape ``(m, k)``; the result has shape ``(k,)``. For the
    correlation kind ``response`` is either shared, shape ``(m,)``, or paired
    column by column, shape ``(m, k)``.
    """
    if spec.kind is Kind.MEAN or spec.kind is Kind.PROPORTION:
        return values.mean(axis=0)
    if spec.kind is Kind.QUANTILE:
        # numpy's default "linear" method interpolates at position q*(n-1)
        return np.quantile(values, spec.q, axis=0)
    if response is None:
        raise ValidationError("the correlation estimator needs a response vector")
    return _pearson_columns(values, response)


def estimate(sample, spec: EstimatorSpec, response=None) -> float:
    x = np.asarray(sample, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValidationError(f"need at least 2 observations, got {x.size}")
    if spec.kind is Kind.PROPORTION and not np.all((x == 0.0) | (x == 1.0)):
        raise ValidationError("proportion estimator needs 0/1 data")
    y = None
    if spec.kind is Kind.CORRELATION:
        if response is None:
            raise ValidationError("the correlation estimator needs a response vector")
        y = np.asarray(response, dtype=np.float64).ravel()
        if y.size != x.size:
            raise ValidationError(f"response length {y.size} != sample length {x.size}")
    return float(estimate_columns(x[:, None], spec, y)[0])


def estimate_all(data: PopulationData, spec: EstimatorSpec) -> np.ndarray:
    """Estimates for every item, in item order."""
    check_compatible(data, spec)
    if data.layout is Layout.MATRIX:
        return estimate_columns(np.asarray(data.samples), spec, data.response)
    return np.array([estimate(x, spec) for x in data.samples])


def sigma_hat(sample, spec: EstimatorSpec, response=None) -> float:
    """Asymptotic standard deviation of sqrt(n) * (estimate - truth).

    The plug-in route covers the mean (sample sd, divisor n-1) and the
    proportion (sqrt(p(1-p))). The bootstrap route works for any kind:
    ``sqrt(n * var*)`` over ``b_sigma`` n-out-of-n resamples of the sample.
    """
    x = np.asarray(sample, dtype=np.float64).ravel()
    n = x.size
    if n < 2:
        raise ValidationError(f"need at least 2 observations, got {n}")
    if spec.sigma_method is SigmaMethod.PLUGIN:
        if spec.kind is Kind.MEAN:
            s = float(np.std(x, ddof=1))
        elif spec.kind is Kind.PROPORTION:
            phat = estimate(x, spec)
            s = float(np.sqrt(phat * (1.0 - phat)))
        else:
            raise ValidationError(
                f"no plug-in scale for the {spec.kind.value} estimator; use the bootstrap method")
    else:
        y = None if response is None else np.asarray(response, dtype=np.float64).ravel()
        rng = np.random.default_rng(spec.sigma_seed)
        idx = rng.integers(0, n, size=(n, spec.b_sigma))
        stars = estimate_columns(x[idx], spec, None if y is None else y[idx])
        s = float(np.sqrt(n * np.var(stars, ddof=1)))
    if not s > 0.0:
        raise NumericalError("degenerate sample: estimated scale is zero")
    return s


def sigma_hat_all(data: PopulationData, spec: EstimatorSpec) -> np.ndarray:
    check_compatible(data, spec)
    out = []
    for label, x in zip(data.labels, data.columns()):
        try:
            out.append(sigma_hat(x, spec, data.response))
        except NumericalError as exc:
            raise NumericalError(f"item {label}: {exc}") from None
    return np.array(out)
