"""Limit laws for empirical and bootstrap ranks.

Monte Carlo routines draw in chunks from ``stream(seed, chunk_index)`` so
results depend only on ``(draws, seed)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import ndtr
from scipy.stats import norm

from .errors import ValidationError
from .resampling import stream

_DRAW_CHUNK = 200_000

# integral over x > 0 of Phi(-x) dx; equals phi(0)
RANK_CONSTANT = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class LimitSpec:
    """Parameters of the finite-offset rank law.

    The rank of ``focal`` is ``1 + sum_k I(s_j N_j <= s_k N_k + c_k)`` with
    independent standard normals; ``offsets[focal]`` is ignored.
    """

    sigmas: tuple[float, ...]
    offsets: tuple[float, ...]
    focal: int = 0

    def __post_init__(self):
        if len(self.sigmas) != len(self.offsets):
            raise ValidationError("sigmas and offsets differ in length")
        if len(self.sigmas) < 2:
            raise ValidationError("need at least 2 items")
        if any(not s > 0 for s in self.sigmas):
            raise ValidationError("all sigmas must be positive")
        if not 0 <= self.focal < len(self.sigmas):
            raise ValidationError(f"focal index {self.focal} out of range")

    @property
    def p(self) -> int:
        return len(self.sigmas)


def _mc_rank_pmf(sigmas, offsets, focal: int, draws: int, seed: int,
                 fixed: np.ndarray | None = None) -> np.ndarray:
    """Rank pmf of the focal item for ``s_j X_j <= s_k X_k + c_k``.

    ``X = N`` when ``fixed`` is None, else ``X = fixed + N'`` (N held at ``fixed``).
    """
    sig = np.asarray(sigmas, dtype=np.float64)
    off = np.asarray(offsets, dtype=np.float64)
    p = sig.size
    others = np.array([k for k in range(p) if k != focal], dtype=np.int64)
    counts = np.zeros(p, dtype=np.int64)
    for c, start in enumerate(range(0, draws, _DRAW_CHUNK)):
        size = min(_DRAW_CHUNK, draws - start)
        x = stream(seed, c).standard_normal((size, p))
        if fixed is not None:
            x += fixed
        lhs = sig[focal] * x[:, focal:focal + 1]
        rhs = sig[others] * x[:, others] + off[others]
        rank = 1 + (lhs <= rhs).sum(axis=1)
        counts += np.bincount(rank - 1, minlength=p)
    return counts / draws


def limit_rank_pmf(spec: LimitSpec, draws: int = 10**6, seed: int = 0) -> np.ndarray:
    if draws < 10**4:
        raise ValidationError(f"draws must be >= 10^4, got {draws}")
    return _mc_rank_pmf(spec.sigmas, spec.offsets, spec.focal, draws, seed)


def limit_rank_cdf(spec: LimitSpec, r: int, draws: int = 10**6, seed: int = 0) -> float:
    """Monte Carlo value of P(rank of the focal item <= r)."""
    pmf = limit_rank_pmf(spec, draws, seed)
    return float(pmf[:max(0, min(int(r), spec.p))].sum())


@dataclass(frozen=True)
class GroupClassification:
    """Split of the non-focal items by their limiting gap to the focal item.

    ``above``: gap diverges upwards (outrank the focal item for sure);
    ``below``: diverges downwards; ``tied``: finite limit ``omega0[k]``;
    ``indeterminate``: between the two thresholds at this sample size.
    """

    focal: int
    above: tuple[int, ...]
    below: tuple[int, ...]
    tied: tuple[int, ...]
    omega0: dict[int, float] = field(default_factory=dict)
    indeterminate: tuple[int, ...] = ()

    @property
    def support(self) -> range:
        """Ranks the limiting law can take."""
        return range(len(self.above) + 1, len(self.above) + len(self.tied) + 2)


def classify_groups(theta, n: float, focal: int, m: float | None = None,
                    tau_tie: float = 1.0, tau_sep: float = 3.0) -> GroupClassification:
    """Finite-sample verdict on which items tie with ``focal`` and which separate.

    With ``s = m`` if given else ``n`` and ``d = theta_k - theta_focal``:
    tied if ``|d| sqrt(s) <= tau_tie``, above/below if
    ``+-d sqrt(s / log s) >= tau_sep``, otherwise indeterminate.
    """
    theta = np.asarray(theta, dtype=np.float64)
    s = float(m if m is not None else n)
    if s <= 1.0:
        raise ValidationError(f"scale must exceed 1, got {s}")
    root = math.sqrt(s)
    sep = math.sqrt(s / math.log(s))
    above, below, tied, indet = [], [], [], []
    omega0 = {}
    for k in range(theta.size):
        if k == focal:
            continue
        d = theta[k] - theta[focal]
        if abs(d) * root <= tau_tie:
            tied.append(k)
            omega0[k] = float(d * root)
        elif d * sep >= tau_sep:
            above.append(k)
        elif -d * sep >= tau_sep:
            below.append(k)
        else:
            indet.append(k)
    return GroupClassification(focal, tuple(above), tuple(below), tuple(tied), omega0, tuple(indet))


def _block(cls: GroupClassification, sigmas):
    sig = np.asarray(sigmas, dtype=np.float64)
    idx = [cls.focal] + list(cls.tied)
    block_sig = sig[idx]
    block_off = np.array([0.0] + [cls.omega0.get(k, 0.0) for k in cls.tied])
    return idx, block_sig, block_off


def g_limit_pmf(cls: GroupClassification, sigmas, draws: int = 10**6, seed: int = 0) -> np.ndarray:
    """Limiting rank pmf over ranks 1..p (p = len(sigmas))."""
    p = len(sigmas)
    pmf = np.zeros(p)
    shift = len(cls.above)
    if not cls.tied:
        pmf[shift] = 1.0
        return pmf
    _, bs, bo = _block(cls, sigmas)
    block = _mc_rank_pmf(bs, bo, 0, draws, seed)
    pmf[shift:shift + block.size] = block
    return pmf


def g_limit_distribution(cls: GroupClassification, sigmas, r: int,
                         draws: int = 10**6, seed: int = 0) -> float:
    return float(g_limit_pmf(cls, sigmas, draws, seed)[:max(0, int(r))].sum())


def bootstrap_limit_pmf(cls: GroupClassification, sigmas, z, draws: int = 10**6,
                        seed: int = 0) -> np.ndarray:
    """Weak-limit rank pmf of the n-out-of-n bootstrap, given the realised normals ``z``.

    ``z`` has one entry per item (length p); only the focal and tied entries matter.
    """
    sig = np.asarray(sigmas, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if z.size != sig.size:
        raise ValidationError(f"z has length {z.size}, expected {sig.size}")
    p = sig.size
    pmf = np.zeros(p)
    shift = len(cls.above)
    if not cls.tied:
        pmf[shift] = 1.0
        return pmf
    idx, bs, bo = _block(cls, sig)
    block = _mc_rank_pmf(bs, bo, 0, draws, seed, fixed=z[idx])
    pmf[shift:shift + block.size] = block
    return pmf


def bootstrap_limit_distribution(cls: GroupClassification, sigmas, z, r: int,
                                 draws: int = 10**6, seed: int = 0) -> float:
    return float(bootstrap_limit_pmf(cls, sigmas, z, draws, seed)[:max(0, int(r))].sum())


def pmf_moments(pmf) -> tuple[float, float]:
    pmf = np.asarray(pmf, dtype=np.float64)
    r = np.arange(1, pmf.size + 1)
    mean = float(pmf @ r)
    return mean, float(pmf @ (r - mean) ** 2)


def tied_block(p: int, focal: int = 0) -> GroupClassification:
    """Everything tied with ``focal`` at zero offset."""
    tied = tuple(k for k in range(p) if k != focal)
    return GroupClassification(focal, (), (), tied, {k: 0.0 for k in tied})


def r_limit_pmf(sigmas_top: Sequence[float], j: int, draws: int = 10**6, seed: int = 0) -> np.ndarray:
    """Law of ``R_j = 1 + sum_{k != j} I(Z_j s_j <= Z_k s_k)`` over the top block (j 0-based)."""
    if not 0 <= j < len(sigmas_top):
        raise ValidationError(f"item {j} not in a block of {len(sigmas_top)}")
    return _mc_rank_pmf(sigmas_top, np.zeros(len(sigmas_top)), j, draws, seed)


def r_limit_distribution(sigmas_top: Sequence[float], j: int, r: int,
                         draws: int = 10**6, seed: int = 0) -> float:
    return float(r_limit_pmf(sigmas_top, j, draws, seed)[:max(0, int(r))].sum())


def r_conditional_mean(sigmas_top: Sequence[float], j: int, zj) -> np.ndarray:
    """``E(R_j | Z_j = zj) = 1 + sum_{k != j} Phi(-zj s_j / s_k)``."""
    sig = np.asarray(sigmas_top, dtype=np.float64)
    zj = np.asarray(zj, dtype=np.float64)
    ratios = np.delete(sig, j) / sig[j]
    return 1.0 + ndtr(-zj[..., None] / ratios).sum(axis=-1)


def r_conditional_mean_samples(sigmas_top: Sequence[float], j: int, draws: int = 10**5,
                               seed: int = 0) -> np.ndarray:
    """Draws of ``E(R_j | Z_j)`` with ``Z_j`` standard normal."""
    return r_conditional_mean(sigmas_top, j, stream(seed, 0).standard_normal(draws))


class ExpectedRank(NamedTuple):
    value: float
    constant: float


def expected_rank_asymptotic(j: int, delta: float) -> ExpectedRank:
    """Leading-order expected empirical rank under evenly spaced parameters.

    ``value = (a Phi(a) + phi(a)) / delta`` with ``a = j * delta``, which is
    ``delta^-1 * integral_{-a}^inf Phi(-x) dx`` in closed form. ``constant``
    is the fixed-j multiplier ``integral_0^inf Phi(-x) dx``.
    """
    if not delta > 0:
        raise ValidationError(f"delta must be positive, got {delta}")
    if j < 0:
        raise ValidationError(f"j must be >= 0, got {j}")
    a = j * delta
    return ExpectedRank(float((a * ndtr(a) + norm.pdf(a)) / delta), RANK_CONSTANT)


def difficulty(n: float, epsilon: float, sigma: float = 1.0) -> float:
    """``delta = sqrt(n / 2) * epsilon / sigma``."""
    return math.sqrt(n / 2.0) * epsilon / sigma
