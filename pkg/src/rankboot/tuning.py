"""Choosing the m-out-of-n resample size.

For every ordered pair of items the objective compares the bootstrap
probability that one item beats the other, as a function of m, with its
full-sample counterpart, after shrinking the standardised gap by
``(log(C * n_bar))**-0.5``. The Gaussian-weighted integral over the
resampling noise is done with a 64-node Gauss-Hermite rule.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .data import PopulationData, summarize_sizes
from .errors import ValidationError
from .estimators import EstimatorSpec, estimate_all, sigma_hat_all

GH_NODES = 64
_x, _w = np.polynomial.hermite.hermgauss(GH_NODES)
# integral of f(z) phi(z) dz  ==  sum(W * f(Z))
Z_NODES = math.sqrt(2.0) * _x
Z_WEIGHTS = _w / math.sqrt(math.pi)
_PAIR_CHUNK = 200_000


@dataclass(frozen=True, eq=False)
class TuningInputs:
    """``omega_hat[j, k] = sqrt(n_bar) * (theta_k - theta_j)``, ``c_hat[j, k] = (s_j^2 + s_k^2)^-1/2``."""

    omega_hat: np.ndarray
    c_hat: np.ndarray
    n_bar: float
    candidates: tuple[int, ...] = ()
    log_scale: float = 1.0

    @classmethod
    def from_estimates(cls, theta_hat, sigma_hat, n_bar: float,
                       candidates: Sequence[int] | None = None,
                       log_scale: float = 1.0) -> TuningInputs:
        theta = np.asarray(theta_hat, dtype=np.float64)
        sig = np.asarray(sigma_hat, dtype=np.float64)
        omega = math.sqrt(n_bar) * (theta[None, :] - theta[:, None])
        c = 1.0 / np.sqrt(sig[:, None] ** 2 + sig[None, :] ** 2)
        if candidates is None:
            candidates = candidate_grid(n_bar)
        return cls(omega, c, float(n_bar), tuple(int(m) for m in candidates), log_scale)

    def pair_shifts(self) -> np.ndarray:
        """``-c_jk * omega_jk * log(C n_bar)^-1/2`` over ordered pairs j != k."""
        log_n = math.log(self.log_scale * self.n_bar)
        if not log_n > 0.0:
            raise ValidationError(
                f"log({self.log_scale} * n_bar) = {log_n:.3g} must be positive; need a larger n_bar")
        off = ~np.eye(self.omega_hat.shape[0], dtype=bool)
        return -(self.c_hat[off] * self.omega_hat[off]) / math.sqrt(log_n)


def candidate_grid(n_bar: float, count: int = 40) -> list[int]:
    """About ``count`` log-spaced integers in [2, floor(n_bar)], always including both ends."""
    top = int(math.floor(n_bar))
    if top < 2:
        raise ValidationError(f"average sample size {n_bar} leaves no resample size >= 2")
    grid = np.unique(np.round(np.geomspace(2, top, count)).astype(np.int64))
    return sorted(set(grid.tolist()) | {2, top})


def _objective_from_shifts(m: float, n_bar: float, shifts: np.ndarray) -> float:
    s = math.sqrt(m / n_bar)
    total = 0.0
    for a in range(0, shifts.size, _PAIR_CHUNK):
        sh = shifts[a:a + _PAIR_CHUNK, None]
        diff = ndtr(s * (sh + Z_NODES[None, :])) - ndtr(sh)
        total += float(((diff * diff) @ Z_WEIGHTS).sum())
    return total


def tuning_objective(m: float, inputs: TuningInputs) -> float:
    if inputs.n_bar <= 1.0:
        raise ValidationError(f"n_bar must exceed 1, got {inputs.n_bar}")
    if not 0 < m <= inputs.n_bar:
        raise ValidationError(f"m must lie in (0, n_bar], got {m}")
    return _objective_from_shifts(m, inputs.n_bar, inputs.pair_shifts())


@dataclass(frozen=True)
class Selection:
    m: int
    rho: float
    n_bar: float
    candidates: tuple[int, ...]
    objective: tuple[float, ...]

    def to_csv(self, path: str | Path, header: Sequence[str] = ()) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            fh.write(f"# chosen m={self.m} rho={self.rho!r} n_bar={self.n_bar!r}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m", "rho", "objective", "chosen"])
            for m, v in zip(self.candidates, self.objective):
                w.writerow([m, repr(m / self.n_bar), repr(v), int(m == self.m)])


def select_from_inputs(inputs: TuningInputs) -> Selection:
    if not inputs.candidates:
        raise ValidationError("no candidate resample sizes")
    shifts = inputs.pair_shifts()
    cands = sorted(inputs.candidates)
    for m in cands:
        if not 2 <= m <= inputs.n_bar:
            raise ValidationError(f"candidate m={m} outside [2, {inputs.n_bar}]")
    values = [_objective_from_shifts(m, inputs.n_bar, shifts) for m in cands]
    # argmin returns the first minimum, i.e. ties go to the smaller m
    best = cands[int(np.argmin(values))]
    return Selection(best, best / inputs.n_bar, inputs.n_bar, tuple(cands), tuple(values))


def select_m(data: PopulationData, estimator: EstimatorSpec,
             candidates: Sequence[int] | None = None, log_scale: float = 1.0) -> Selection:
    """Minimise the tuning objective over a candidate grid of resample sizes.

    With unequal sample sizes apply the result as a fraction: ``m_j = rho * n_j``.
    """
    n_bar = summarize_sizes(data).n_bar
    inputs = TuningInputs.from_estimates(estimate_all(data, estimator),
                                         sigma_hat_all(data, estimator), n_bar,
                                         candidates, log_scale)
    return select_from_inputs(inputs)
