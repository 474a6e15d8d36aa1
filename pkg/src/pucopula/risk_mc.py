"""Monte Carlo aggregation of copula samples into portfolio quantiles."""

from __future__ import annotations

import csv
import enum
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .sharding import run_blocks

__all__ = [
    "MarginalKind",
    "MarginalModel",
    "QuantileCurve",
    "bootstrap_quantile_se",
    "empirical_quantiles",
    "fit_marginal",
    "order_statistic_rank",
    "simulate_portfolio",
    "tail_levels",
]


class MarginalKind(str, enum.Enum):
    EMPIRICAL = "empirical"
    LOGNORMAL = "lognormal"


@dataclass(frozen=True, eq=False)
class MarginalModel:
    """Marginal quantile function used to map copula samples to losses.

    ``empirical`` interpolates linearly between order statistics placed at
    plotting positions ``i / (n + 1)`` and is flat beyond the first and last
    position. ``lognormal`` holds the maximum-likelihood ``(mu, sigma)``.
    """

    kind: MarginalKind
    params: np.ndarray

    @property
    def mu(self) -> float:
        return float(self.params[0])

    @property
    def sigma(self) -> float:
        return float(self.params[1])

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind is MarginalKind.EMPIRICAL:
            x = self.params
            pos = np.arange(1, len(x) + 1) / (len(x) + 1.0)
            return np.interp(p, pos, x)
        if self.sigma == 0.0:
            return np.full(p.shape, math.exp(self.mu))
        return np.exp(self.mu + self.sigma * ndtri(p))

    def mean(self) -> float:
        """Mean of the distribution whose quantile function is ``quantile``."""
        if self.kind is MarginalKind.LOGNORMAL:
            return math.exp(self.mu + 0.5 * self.sigma**2)
        x = self.params
        n = len(x)
        if n == 1:
            return float(x[0])
        w = 1.0 / (n + 1.0)
        # flat ends plus trapezoids between plotting positions
        return float(w * x[0] + w * x[-1] + w * np.sum((x[1:] + x[:-1]) / 2.0))


def fit_marginal(kind, data) -> MarginalModel:
    kind = MarginalKind(kind)
    x = np.asarray(data, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("cannot fit a marginal to empty data")
    if kind is MarginalKind.EMPIRICAL:
        params = np.sort(x)
    else:
        if np.any(x <= 0):
            raise ValueError("lognormal fit needs strictly positive data")
        logs = np.log(x)
        mu = logs.mean()
        params = np.array([mu, math.sqrt(np.mean((logs - mu) ** 2))])
    params.setflags(write=False)
    return MarginalModel(kind, params)


@dataclass(frozen=True, eq=False)
class QuantileCurve:
    levels: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if lv.shape != vals.shape:
            raise ValueError("levels and values differ in length")
        order = np.argsort(lv, kind="stable")
        object.__setattr__(self, "levels", lv[order])
        object.__setattr__(self, "values", vals[order])

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0))

    def to_csv(self, target) -> None:
        if isinstance(target, (str, os.PathLike)):
            with open(target, "w", newline="") as fh:
                return self.to_csv(fh)
        target.write("level,quantile\n")
        for p, q in zip(self.levels.tolist(), self.values.tolist()):
            target.write(f"{p:.17g},{q:.17g}\n")

    @classmethod
    def from_csv(cls, source) -> "QuantileCurve":
        if isinstance(source, (str, os.PathLike)):
            with open(source, newline="") as fh:
                return cls.from_csv(fh)
        rows = list(csv.reader(source))[1:]
        arr = np.array(rows, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])


def order_statistic_rank(n: int, p) -> np.ndarray:
    """1-based rank ``ceil(n p)`` clipped to ``1..n``."""
    x = n * np.asarray(p, dtype=float)
    # guard against products like 100 * 0.07 = 7.000000000000001
    k = np.ceil(x - 1e-12 * np.maximum(x, 1.0)).astype(np.int64)
    return np.clip(k, 1, n)


def empirical_quantiles(sums, levels) -> QuantileCurve:
    """Order-statistic quantiles: the ``ceil(n p)``-th smallest value."""
    s = np.sort(np.asarray(sums, dtype=float).ravel())
    if s.size == 0:
        raise ValueError("no observations")
    lv = np.asarray(levels, dtype=float)
    if np.any((lv <= 0) | (lv >= 1)):
        raise ValueError("levels must lie in (0, 1)")
    k = order_statistic_rank(s.size, lv)
    return QuantileCurve(lv, s[k - 1])


def tail_levels(n: int, fraction: float = 0.1) -> np.ndarray:
    """Levels whose ``ceil(n p)`` ranks are the largest ``fraction`` of ``n`` draws."""
    m = int(round(n * fraction))
    k = np.arange(n - m + 1, n + 1)
    return (k - 0.5) / n


def simulate_portfolio(cop, margins, n_sims: int, seed: int, workers=None,
                       return_components: bool = False):
    """Portfolio sums ``sum_k Q_k(u_k)`` over seeded copula draws.

    ``cop`` is anything with ``sample(size, rng)`` returning ``(size, d)``
    points; ``margins`` supplies one :class:`MarginalModel` per coordinate.
    """
    margins = list(margins)

    def block(m, rng):
        u = cop.sample(m, rng)
        if u.shape[1] != len(margins):
            raise ValueError(f"{len(margins)} margins for {u.shape[1]}-dimensional samples")
        return np.column_stack([q.quantile(u[:, k]) for k, q in enumerate(margins)])

    comps = run_blocks(block, int(n_sims), seed, workers)
    comps = comps.reshape(-1, len(margins))
    sums = comps.sum(axis=1)
    return (sums, comps) if return_components else sums


def bootstrap_quantile_se(sums, level: float, n_boot: int = 200, seed: int = 0) -> float:
    """Bootstrap standard error of the ``level`` order-statistic quantile."""
    s = np.asarray(sums, dtype=float)
    rng = np.random.default_rng(seed)
    k = int(order_statistic_rank(s.size, level)) - 1
    est = np.empty(n_boot)
    for b in range(n_boot):
        res = s[rng.integers(0, s.size, s.size)]
        est[b] = np.partition(res, k)[k]
    return float(est.std(ddof=1))
