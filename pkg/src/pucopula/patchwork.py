"""Patchwork copulas on the rank grid: Frechet shuffles and rook copulas.

Observation ``k`` with rank vector ``(r_1k, ..., r_dk)`` owns the cell
``prod_j ((r_jk - 1)/n, r_jk/n]``; a rescaled cell copula is placed in each
cell and the cell is chosen uniformly at random.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .empirical_ranks import RankData
from .partition_families import open_unit

__all__ = [
    "CellCopula",
    "CellKind",
    "DimensionError",
    "PatchworkCopula",
    "SingularCopulaError",
    "uniform_open",
]

_CHUNK = 1 << 15


class SingularCopulaError(ValueError):
    """The copula has no Lebesgue density."""


class DimensionError(ValueError):
    """The cell copula does not exist in the requested dimension."""


def uniform_open(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniforms on the open interval (0, 1), symmetric about 1/2."""
    return (rng.integers(0, 1 << 52, size=shape) + 0.5) / float(1 << 52)


class CellCopula:
    """Copula placed inside every patchwork cell."""

    name = "cell"
    singular = True

    def check_dim(self, d: int) -> None:
        pass

    def n_uniforms(self, d: int) -> int:
        return 1

    def local(self, z: np.ndarray, d: int) -> np.ndarray:
        """Map ``(m, n_uniforms)`` standard uniforms to ``(m, d)`` cell points."""
        raise NotImplementedError

    def cdf(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def density(self, x: np.ndarray) -> np.ndarray:
        raise SingularCopulaError(f"{self.name} cell copula is singular and has no density")

    def rect_masses(self, edges: Sequence[np.ndarray]) -> np.ndarray:
        """Masses of the grid rectangles spanned by sorted ``edges`` per axis.

        Inclusion-exclusion over the ``2**d`` corners of each rectangle,
        done as successive differences of the CDF on the edge grid.
        """
        grid = np.stack(np.meshgrid(*edges, indexing="ij"), axis=-1)
        mass = self.cdf(grid)
        for ax in range(len(edges)):
            mass = np.diff(mass, axis=ax)
        return mass


class UpperFrechetCell(CellCopula):
    name = "upper"

    def local(self, z, d):
        return np.repeat(z[:, :1], d, axis=1)

    def cdf(self, x):
        return np.min(x, axis=-1)


class LowerFrechetCell(CellCopula):
    name = "lower"

    def check_dim(self, d):
        if d != 2:
            raise DimensionError(
                f"the lower Frechet bound is a copula only for d = 2 (got d = {d})"
            )

    def local(self, z, d):
        self.check_dim(d)
        return np.column_stack([z[:, 0], 1.0 - z[:, 0]])

    def cdf(self, x):
        return np.maximum(x[..., 0] + x[..., 1] - 1.0, 0.0)


class RookCell(CellCopula):
    name = "rook"
    singular = False

    def n_uniforms(self, d):
        return d

    def local(self, z, d):
        return z

    def cdf(self, x):
        return np.prod(x, axis=-1)

    def density(self, x):
        return np.ones(np.shape(x)[:-1])

    def rect_masses(self, edges):
        # product form of the same inclusion-exclusion, free of cancellation
        out = np.ones(())
        for e in edges:
            out = np.multiply.outer(out, np.diff(e))
        return out


class CellKind(str, enum.Enum):
    UPPER = "upper"
    LOWER = "lower"
    ROOK = "rook"

    @property
    def cell(self) -> CellCopula:
        return _CELLS[self]


_CELLS = {
    CellKind.UPPER: UpperFrechetCell(),
    CellKind.LOWER: LowerFrechetCell(),
    CellKind.ROOK: RookCell(),
}


def _as_points(u, d: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[-1:] != (d,):
        raise ValueError(f"points must have trailing dimension {d}, got shape {u.shape}")
    return u


@dataclass(frozen=True)
class PatchworkCopula:
    """Patchwork of one cell-copula kind over the cells given by ``ranks``."""

    ranks: RankData
    kind: CellKind

    def __post_init__(self):
        object.__setattr__(self, "kind", CellKind(self.kind))
        self.kind.cell.check_dim(self.ranks.d)

    @property
    def n(self) -> int:
        return self.ranks.n

    @property
    def d(self) -> int:
        return self.ranks.d

    @property
    def cell(self) -> CellCopula:
        return self.kind.cell

    @cached_property
    def _owner_by_first_rank(self) -> np.ndarray:
        owner = np.empty(self.n, dtype=np.int64)
        owner[self.ranks.ranks[0] - 1] = np.arange(self.n)
        return owner

    def density(self, u):
        """Density at points in the open cube; zero outside every rank cell.

        Raises:
            SingularCopulaError: for the Frechet shuffles.
        """
        if self.cell.singular:
            self.cell.density(np.zeros((1, self.d)))
        u = _as_points(u, self.d)
        if np.any((u <= 0.0) | (u >= 1.0)):
            raise ValueError("density is defined on the open unit cube only")
        n = self.n
        label = np.clip(np.ceil(n * u).astype(np.int64), 1, n)
        owner = self._owner_by_first_rank[label[..., 0] - 1]
        own_ranks = np.moveaxis(self.ranks.ranks[:, owner], 0, -1)
        inside = np.all(own_ranks == label, axis=-1)
        local = n * u - own_ranks + 1.0
        return np.where(inside, float(n) ** (self.d - 1) * self.cell.density(local), 0.0)

    def cdf(self, u):
        """Distribution function on the closed cube.

        Mean over cells of the cell-copula CDF at the clamped local
        coordinates ``n u - r + 1``.
        """
        u = _as_points(u, self.d)
        if np.any((u < 0.0) | (u > 1.0)):
            raise ValueError("cdf arguments must lie in [0, 1]")
        flat = u.reshape(-1, self.d)
        out = np.empty(len(flat))
        shift = self.ranks.ranks.T - 1.0
        for s in range(0, len(flat), _CHUNK):
            pts = flat[s : s + _CHUNK]
            local = np.clip(self.n * pts[:, None, :] - shift[None], 0.0, 1.0)
            out[s : s + _CHUNK] = self.cell.cdf(local).mean(axis=1)
        return out.reshape(u.shape[:-1]) if u.ndim > 1 else out.item()

    def place(self, cells, local) -> np.ndarray:
        """Rescale cell-local points into the cells of observations ``cells``."""
        cells = np.asarray(cells)
        local = np.asarray(local, dtype=float)
        return open_unit((self.ranks.ranks.T[cells] - 1.0 + local) / self.n)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``size`` points: uniform cell choice, then the cell copula."""
        cells = rng.integers(0, self.n, size=size)
        z = uniform_open(rng, (size, self.cell.n_uniforms(self.d)))
        return self.place(cells, self.cell.local(z, self.d))
