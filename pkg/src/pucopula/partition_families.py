"""Discrete partition-of-unity families and their continuous components.

Each family is a sequence of probability mass functions ``phi_i(u)`` over the
non-negative integers, indexed by ``u`` in (0, 1). Integrating over ``u`` gives
the mixture weights ``alpha_i``; ``f_i = phi_i / alpha_i`` is a Lebesgue
density on (0, 1). All indices are 0-based ``phi``-indices.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = ["FamilyKind", "PartitionFamily", "open_unit"]

# Below this index the closed forms are evaluated directly; above it in log space.
_LOG_SWITCH = 64

_TINY = np.finfo(float).tiny
_ONE_MINUS = np.nextafter(1.0, 0.0)


class FamilyKind(str, enum.Enum):
    BERNSTEIN = "bernstein"
    NEGBINOMIAL = "negbinomial"
    POISSON = "poisson"


def open_unit(x):
    """Clip values into the open unit interval (float-representable)."""
    return np.clip(x, _TINY, _ONE_MINUS)


def _check_unit(u):
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise ValueError("u must lie strictly inside (0, 1)")
    return u


def _check_index(i):
    i = np.asarray(i)
    if i.dtype.kind not in "iu":
        if np.any(i != np.floor(i)):
            raise ValueError("indices must be integers")
        i = i.astype(np.int64)
    if np.any(i < 0):
        raise ValueError("indices must be non-negative")
    return i


def _scalar(x):
    x = np.asarray(x)
    return x.item() if x.ndim == 0 else x


@dataclass(frozen=True)
class PartitionFamily:
    """One of the Bernstein, negative binomial or Poisson families.

    Args:
        kind: Family kind (or its string value).
        a: Family parameter. Bernstein needs an integer ``a >= 2``; the other
            two accept any ``a > 0``.
    """

    kind: FamilyKind
    a: float

    def __post_init__(self):
        kind = FamilyKind(self.kind)
        object.__setattr__(self, "kind", kind)
        a = float(self.a)
        if not math.isfinite(a) or a <= 0:
            raise ValueError(f"{kind.value}: parameter a must be positive, got {self.a!r}")
        if kind is FamilyKind.BERNSTEIN:
            if a != math.floor(a) or a < 2:
                raise ValueError(f"bernstein: a must be an integer >= 2, got {self.a!r}")
            object.__setattr__(self, "a", int(a))
        else:
            object.__setattr__(self, "a", int(a) if a == math.floor(a) else a)

    @classmethod
    def bernstein(cls, a: int) -> "PartitionFamily":
        return cls(FamilyKind.BERNSTEIN, a)

    @classmethod
    def negbinomial(cls, a: float) -> "PartitionFamily":
        return cls(FamilyKind.NEGBINOMIAL, a)

    @classmethod
    def poisson(cls, a: float) -> "PartitionFamily":
        return cls(FamilyKind.POISSON, a)

    def __str__(self) -> str:
        return f"{self.kind.value}({self.a})"

    @property
    def is_finite(self) -> bool:
        return self.kind is FamilyKind.BERNSTEIN

    def _check_support(self, i):
        if self.is_finite and np.any(i >= self.a):
            raise IndexError(f"{self}: index outside support 0..{self.a - 1}")

    # -- discrete probabilities ------------------------------------------------

    def log_phi(self, i, u):
        """Natural log of ``phi_i(u)``; ``-inf`` outside a finite support."""
        i = _check_index(i)
        u = _check_unit(u)
        a = self.a
        if self.kind is FamilyKind.BERNSTEIN:
            inside = i < a
            ii = np.where(inside, i, 0)
            out = (
                special.gammaln(a)
                - special.gammaln(ii + 1)
                - special.gammaln(a - ii)
                + ii * np.log(u)
                + (a - 1 - ii) * np.log1p(-u)
            )
            out = np.where(inside, out, -np.inf)
        elif self.kind is FamilyKind.NEGBINOMIAL:
            out = (
                special.gammaln(a + i)
                - special.gammaln(i + 1)
                - special.gammaln(a)
                + i * np.log(u)
                + a * np.log1p(-u)
            )
        else:
            big_l = -np.log1p(-u)
            out = a * np.log1p(-u) + special.xlogy(i, a * big_l) - special.gammaln(i + 1)
        return _scalar(out)

    def _phi_direct(self, i, u):
        a = self.a
        if self.kind is FamilyKind.BERNSTEIN:
            ii = np.minimum(i, a - 1)
            val = special.comb(a - 1, ii) * u**ii * (1.0 - u) ** (a - 1 - ii)
            return np.where(i < a, val, 0.0)
        if self.kind is FamilyKind.NEGBINOMIAL:
            return special.binom(a + i - 1, i) * u**i * (1.0 - u) ** a
        big_l = -np.log1p(-u)
        return (1.0 - u) ** a * (a * big_l) ** i / special.factorial(i)

    def phi(self, i, u):
        """Probability ``phi_i(u)``; exactly 0 for Bernstein indices ``i >= a``."""
        i = _check_index(i)
        u = _check_unit(u)
        # i and u stay unbroadcast so index-only factors cost O(len(i))
        small = i < _LOG_SWITCH
        if np.all(small):
            out = self._phi_direct(i, u)
        elif not np.any(small):
            out = np.exp(self.log_phi(i, u))
        else:
            out = np.where(
                small,
                self._phi_direct(np.minimum(i, _LOG_SWITCH - 1), u),
                np.exp(self.log_phi(np.maximum(i, _LOG_SWITCH), u)),
            )
        return _scalar(np.asarray(out, dtype=float))

    def phi_sum(self, u, upto: int, chunk: int = 4096):
        """``sum_{i <= upto} phi_i(u)`` for an array of ``u``.

        Summation stops early once every remaining term has underflowed to
        zero, so ``upto`` may be astronomically large.
        """
        u = _check_unit(u)
        flat = np.atleast_1d(u).ravel()
        upto = int(min(upto, self.a - 1)) if self.is_finite else int(upto)
        total = np.zeros_like(flat)
        # index of the pmf mode, past which terms only decrease
        if self.kind is FamilyKind.BERNSTEIN:
            mode = np.full_like(flat, self.a - 1)
        elif self.kind is FamilyKind.NEGBINOMIAL:
            mode = (self.a - 1) * flat / (1 - flat)
        else:
            mode = -self.a * np.log1p(-flat)
        start = 0
        while start <= upto:
            idx = np.arange(start, min(start + chunk, upto + 1))
            terms = self.phi(idx[None, :], flat[:, None])
            total += terms.sum(axis=1)
            start = idx[-1] + 1
            if np.all(idx[0] > mode) and not np.any(terms):
                break
        return total.reshape(np.shape(u)) if np.ndim(u) else total.item()

    # -- mixture weights -------------------------------------------------------

    def alpha(self, i):
        """Mixture weight ``alpha_i``: the integral of ``phi_i`` over (0, 1)."""
        i = _check_index(i)
        self._check_support(i)
        a = self.a
        if self.kind is FamilyKind.BERNSTEIN:
            out = np.full(i.shape, 1.0 / a)
        elif self.kind is FamilyKind.NEGBINOMIAL:
            out = a / ((a + i) * (a + i + 1.0))
        else:
            out = np.exp(i * math.log(a) - (i + 1) * math.log1p(a))
        return _scalar(out)

    def log_alpha(self, i):
        i = _check_index(i)
        self._check_support(i)
        a = self.a
        if self.kind is FamilyKind.BERNSTEIN:
            out = np.full(i.shape, -math.log(a))
        elif self.kind is FamilyKind.NEGBINOMIAL:
            out = math.log(a) - np.log(a + i) - np.log(a + i + 1.0)
        else:
            out = i * math.log(a) - (i + 1) * math.log1p(a)
        return _scalar(out)

    def scaled_cumulative(self, m, n: float = 1.0):
        """``n * sum_{j <= m} alpha_j`` for integer ``m >= -1``.

        Evaluated so that Bernstein cell edges ``n (m + 1) / a`` are exact
        whenever they are integers.
        """
        m = np.asarray(m)
        if np.any(m < -1):
            raise ValueError("m must be >= -1")
        a = self.a
        if self.kind is FamilyKind.BERNSTEIN:
            out = n * (np.minimum(m, a - 1) + 1) / a
        elif self.kind is FamilyKind.NEGBINOMIAL:
            out = n * (m + 1) / (a + m + 1.0)
        else:
            out = -n * np.expm1((m + 1) * math.log(a / (a + 1.0)))
        return _scalar(out)

    def cumulative(self, m):
        return self.scaled_cumulative(m, 1.0)

    def survival(self, m):
        """Mass ``sum_{j > m} alpha_j`` not covered by indices ``0..m``."""
        m = np.asarray(m)
        a = self.a
        if self.kind is FamilyKind.BERNSTEIN:
            out = np.maximum(a - 1 - m, 0) / a
        elif self.kind is FamilyKind.NEGBINOMIAL:
            out = a / (a + m + 1.0)
        else:
            out = np.exp((m + 1) * math.log(a / (a + 1.0)))
        return _scalar(out)

    def truncation_index(self, eps: float) -> int:
        """Smallest ``m`` whose tail mass ``survival(m)`` is at most ``eps``."""
        if not 0 < eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        a = self.a
        if self.kind is FamilyKind.BERNSTEIN:
            return a - 1
        if self.kind is FamilyKind.NEGBINOMIAL:
            m = max(math.ceil(a / eps - a - 1), 0)
        else:
            m = max(math.ceil(math.log(eps) / math.log(a / (a + 1.0))) - 1, 0)
        while m > 0 and self.survival(m - 1) <= eps:
            m -= 1
        while self.survival(m) > eps:
            m += 1
        return int(m)

    # -- component densities ---------------------------------------------------

    def log_component_density(self, i, u):
        i = _check_index(i)
        self._check_support(i)
        return self.log_phi(i, u) - self.log_alpha(i)

    def component_density(self, i, u):
        """Density ``f_i(u) = phi_i(u) / alpha_i`` of the i-th component."""
        i = _check_index(i)
        self._check_support(i)
        u = _check_unit(u)
        i, u = np.broadcast_arrays(i, u)
        small = i < _LOG_SWITCH
        out = np.empty(i.shape, dtype=float)
        if np.any(small):
            out[small] = self._phi_direct(i[small], u[small]) / self.alpha(i[small])
        if np.any(~small):
            out[~small] = np.exp(self.log_component_density(i[~small], u[~small]))
        return _scalar(out)

    def component_cdf(self, i, u):
        """Distribution function of the i-th component, on the closed interval."""
        i = _check_index(i)
        self._check_support(i)
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        a = self.a
        if self.kind is FamilyKind.BERNSTEIN:
            out = special.betainc(i + 1.0, a - i, u)
        elif self.kind is FamilyKind.NEGBINOMIAL:
            out = special.betainc(i + 1.0, a + 1.0, u)
        else:
            with np.errstate(divide="ignore"):
                big_l = -np.log1p(-u)
            out = special.gammainc(i + 1.0, (a + 1.0) * big_l)
        return _scalar(out)

    def sample_component(self, i, rng: np.random.Generator, size=None):
        """Draw from ``f_i``; ``i`` may be an array of indices."""
        i = _check_index(i)
        self._check_support(i)
        a = self.a
        if self.kind is FamilyKind.BERNSTEIN:
            x = rng.beta(i + 1.0, a - i, size=size)
        elif self.kind is FamilyKind.NEGBINOMIAL:
            x = rng.beta(i + 1.0, a + 1.0, size=size)
        else:
            y = rng.gamma(i + 1.0, 1.0 / (a + 1.0), size=size)
            x = -np.expm1(-y)
        return open_unit(x)

    # -- discretizer ----------------------------------------------------------

    def discretize(self, u):
        """Index of the ``alpha``-cell containing ``u``.

        Bernstein cells are ``((k-1)/a, k/a]`` labelled ``k = 1..a`` and
        returned as ``k - 1``; negative binomial cells are
        ``[k/(a+k), (k+1)/(a+k+1))`` and Poisson cells
        ``[1 - q**k, 1 - q**(k+1))`` with ``q = a/(a+1)``.
        """
        u = _check_unit(u)
        a = self.a
        if self.kind is FamilyKind.BERNSTEIN:
            out = np.clip(np.ceil(a * u) - 1, 0, a - 1)
        elif self.kind is FamilyKind.NEGBINOMIAL:
            out = np.floor(a * u / (1.0 - u))
        else:
            out = np.floor(-np.log1p(-u) / math.log1p(1.0 / a))
        out = out.astype(np.int64)
        return _scalar(out)
