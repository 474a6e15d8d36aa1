"""Data-driven partition-of-unity copulas.

The joint index law ``p`` glues ``d`` partition families together; it is the
patchwork mass of the rectangles whose edges are the cumulative mixture
weights of each family. The copula density is the ``p``-mixture of products
of component densities.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import sparse

from .partition_families import PartitionFamily
from .patchwork import CellKind, DimensionError, PatchworkCopula
from .sharding import run_blocks

__all__ = [
    "DEFAULT_EPS",
    "DEFAULT_MAX_INDEX",
    "DROP_TOL",
    "PuCopula",
    "SparseProbTable",
    "compute_pij",
    "tail_dependence_estimate",
]

DEFAULT_EPS = 1e-10
# Per-coordinate cap on the table index. Negative binomial tails are
# Pareto-like (a/(a+m+1)), so an eps-driven cut alone can need ~1e11 indices.
DEFAULT_MAX_INDEX = 2000
DROP_TOL = 1e-15
_NEG_TOL = -1e-14


@dataclass(frozen=True, eq=False)
class SparseProbTable:
    """Coordinate-format table of joint index probabilities.

    Attributes:
        indices: ``(m, d)`` index tuples, sorted lexicographically.
        probs: Matching probabilities.
        shape: Per-coordinate index bound (largest retained index + 1).
        dropped_mass: Mass of computed entries below the storage threshold.
    """

    indices: np.ndarray
    probs: np.ndarray
    shape: tuple[int, ...]
    dropped_mass: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(len(self.probs), -1)
        p = np.asarray(self.probs, dtype=float)
        if np.any(p < _NEG_TOL):
            raise ValueError(f"negative probability {p.min()!r} in table")
        p = np.maximum(p, 0.0)
        order = np.lexsort(idx.T[::-1]) if len(p) else np.arange(0)
        idx, p = idx[order], p[order]
        idx.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))

    @property
    def d(self) -> int:
        return len(self.shape)

    def __len__(self) -> int:
        return len(self.probs)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.probs))

    @property
    def residual(self) -> float:
        """Mass missing from the table: truncated tails plus dropped entries."""
        return max(1.0 - self.total_mass, 0.0)

    def marginal(self, k: int) -> np.ndarray:
        """Row sums onto coordinate ``k``, as a dense vector over ``0..shape[k]-1``."""
        return np.bincount(self.indices[:, k], weights=self.probs, minlength=self.shape[k])

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(map(int, i)): float(p) for i, p in zip(self.indices, self.probs)}

    def to_matrix(self) -> sparse.csr_matrix:
        if self.d != 2:
            raise ValueError("to_matrix needs a 2-d table")
        return sparse.csr_matrix(
            (self.probs, (self.indices[:, 0], self.indices[:, 1])), shape=self.shape
        )

    def header(self) -> list[str]:
        if self.d == 2:
            return ["i", "j", "p"]
        return [f"i_{k + 1}" for k in range(self.d)] + ["p"]

    def to_csv(self, target) -> None:
        """Write ``i,j,p`` lines (``i_1,...,i_d,p`` for d > 2), 17 significant digits."""
        if isinstance(target, (str, os.PathLike)):
            with open(target, "w", newline="") as fh:
                return self.to_csv(fh)
        target.write(",".join(self.header()) + "\n")
        for idx, p in zip(self.indices.tolist(), self.probs.tolist()):
            target.write(",".join(map(str, idx)) + f",{p:.17g}\n")

    @classmethod
    def from_csv(cls, source) -> "SparseProbTable":
        if isinstance(source, (str, os.PathLike)):
            with open(source, newline="") as fh:
                return cls.from_csv(fh)
        rows = list(csv.reader(source))
        body = rows[1:] if rows and not rows[0][0].lstrip("-").isdigit() else rows
        if not body:
            raise ValueError("empty table")
        idx = np.array([[int(c) for c in r[:-1]] for r in body], dtype=np.int64)
        p = np.array([float(r[-1]) for r in body])
        return cls(idx, p, tuple(idx.max(axis=0) + 1))

    def renormalized(self) -> "SparseProbTable":
        """Copy scaled to unit total mass; the residual is recorded in ``meta``."""
        total = self.total_mass
        if total <= 0:
            raise ValueError("cannot renormalize an empty table")
        meta = dict(self.meta, renormalized_from=total)
        return SparseProbTable(self.indices, self.probs / total, self.shape, 0.0, meta)

    @classmethod
    def from_dense(cls, dense, threshold: float = 0.0) -> "SparseProbTable":
        dense = np.asarray(dense, dtype=float)
        keep = dense > threshold
        idx = np.argwhere(keep)
        return cls(idx, dense[keep], dense.shape, float(dense[~keep & (dense > 0)].sum()))


def _coalesce(chunks_idx, chunks_p, shape):
    idx = np.concatenate(chunks_idx) if chunks_idx else np.zeros((0, len(shape)), np.int64)
    p = np.concatenate(chunks_p) if chunks_p else np.zeros(0)
    lin = np.ravel_multi_index(tuple(idx.T), shape)
    uniq, inv = np.unique(lin, return_inverse=True)
    summed = np.bincount(inv, weights=p, minlength=len(uniq))
    return np.column_stack(np.unravel_index(uniq, shape)), summed


def compute_pij(cop: "PuCopula") -> SparseProbTable:
    """Joint index probabilities by inclusion-exclusion of the patchwork CDF.

    The patchwork CDF is the mean of the cell CDFs, so the mass of each index
    rectangle is accumulated cell by cell, only over the index ranges whose
    rectangles meet that cell.
    """
    drv = cop.driver
    n, d = drv.n, drv.d
    caps = cop.truncation_indices
    # n * cumulative weights at m = -1..cap: rectangle edges in units of 1/n
    edges = [
        fam.scaled_cumulative(np.arange(-1, cap + 1), n) for fam, cap in zip(cop.families, caps)
    ]
    shape = tuple(c + 1 for c in caps)
    chunks_idx, chunks_p = [], []
    dropped = 0.0
    for k in range(n):
        ranges, local = [], []
        for j in range(d):
            r = drv.ranks.ranks[j, k]
            e = edges[j]
            # index m covers (e[m], e[m+1]]; keep those meeting (r-1, r]
            lo = int(np.searchsorted(e, r - 1, side="right")) - 1
            hi = int(np.searchsorted(e, r, side="left")) - 1
            lo, hi = max(lo, 0), min(hi, len(e) - 2)
            if hi < lo:
                break
            ranges.append(np.arange(lo, hi + 1))
            local.append(np.clip(e[lo : hi + 2] - (r - 1), 0.0, 1.0))
        else:
            block = drv.cell.rect_masses(local) / n
            keep = block > DROP_TOL
            dropped += float(block[~keep & (block > 0)].sum())
            pos = np.nonzero(keep)
            chunks_idx.append(np.column_stack([ranges[j][pos[j]] for j in range(d)]))
            chunks_p.append(block[keep])
    idx, p = _coalesce(chunks_idx, chunks_p, shape)
    return SparseProbTable(
        idx,
        p,
        shape,
        dropped,
        meta={
            "truncation_indices": list(caps),
            "truncated_mass": float(max(1.0 - p.sum() - dropped, 0.0)),
        },
    )


@dataclass(frozen=True)
class PuCopula:
    """Partition-of-unity copula driven by a patchwork copula.

    Args:
        families: One partition family per coordinate.
        driver: Patchwork copula supplying the joint index law.
        truncation_eps: Total mass budget. Half is split evenly over the
            coordinate tails; the other half absorbs entries below ``DROP_TOL``.
        max_index: Hard per-coordinate cap on table indices.
        renormalize: Rescale the truncated table to unit mass. Off by default
            so that the missing mass stays visible.
    """

    families: tuple[PartitionFamily, ...]
    driver: PatchworkCopula
    truncation_eps: float = DEFAULT_EPS
    max_index: int = DEFAULT_MAX_INDEX
    renormalize: bool = False

    def __post_init__(self):
        fams = tuple(self.families)
        object.__setattr__(self, "families", fams)
        if len(fams) != self.driver.d:
            raise ValueError(
                f"{len(fams)} families given for a {self.driver.d}-dimensional driver"
            )
        if self.driver.kind is CellKind.LOWER and self.driver.d != 2:
            raise DimensionError("lower Frechet driver requires d = 2")
        if not 0 < self.truncation_eps < 1:
            raise ValueError("truncation_eps must lie in (0, 1)")
        if self.max_index < 1:
            raise ValueError("max_index must be positive")

    @classmethod
    def from_ranks(
        cls,
        ranks,
        families: Sequence[PartitionFamily],
        kind: CellKind | str = CellKind.ROOK,
        **kwargs,
    ) -> "PuCopula":
        return cls(tuple(families), PatchworkCopula(ranks, CellKind(kind)), **kwargs)

    @property
    def d(self) -> int:
        return self.driver.d

    @cached_property
    def truncation_indices(self) -> tuple[int, ...]:
        # half the budget goes to the tails, the rest covers dropped entries
        eps_k = self.truncation_eps / (2 * self.d)
        return tuple(
            min(fam.truncation_index(eps_k), self.max_index) for fam in self.families
        )

    @cached_property
    def table(self) -> SparseProbTable:
        table = compute_pij(self)
        return table.renormalized() if self.renormalize else table

    def pij(self) -> SparseProbTable:
        return self.table

    # -- density ----------------------------------------------------------------

    def _component_matrix(self, k: int, u: np.ndarray, upto: int, cdf: bool = False):
        fam = self.families[k]
        idx = np.arange(upto + 1)
        f = fam.component_cdf if cdf else fam.component_density
        return f(idx[None, :], u[:, None])

    def density(self, u, table: SparseProbTable | None = None):
        """Copula density at points ``u`` of shape ``(..., d)`` in the open cube."""
        return self._mix(u, table, cdf=False)

    def cdf(self, u, table: SparseProbTable | None = None):
        """Copula distribution function from the (truncated) table."""
        return self._mix(u, table, cdf=True)

    def _mix(self, u, table, cdf):
        table = self.table if table is None else table
        u = np.asarray(u, dtype=float)
        if u.shape[-1:] != (self.d,):
            raise ValueError(f"points must have trailing dimension {self.d}")
        if not cdf and np.any((u <= 0.0) | (u >= 1.0)):
            raise ValueError("density is defined on the open unit cube only")
        flat = u.reshape(-1, self.d)
        if cdf:
            flat = np.clip(flat, 0.0, 1.0)
        mats = [
            self._component_matrix(k, flat[:, k], table.shape[k] - 1, cdf)
            for k in range(self.d)
        ]
        if self.d == 2:
            p = table.to_matrix()
            out = np.einsum("mi,mi->m", np.asarray(p.T @ mats[0].T).T, mats[1])
        else:
            out = np.zeros(len(flat))
            step = 4096
            for s in range(0, len(table), step):
                idx = table.indices[s : s + step]
                term = np.tile(table.probs[s : s + step], (len(flat), 1))
                for k in range(self.d):
                    term *= mats[k][:, idx[:, k]]
                out += term.sum(axis=1)
        out = out.reshape(u.shape[:-1])
        return out.item() if out.ndim == 0 else out

    def density_grid(self, u, v, table: SparseProbTable | None = None) -> np.ndarray:
        """Density on the tensor grid ``u x v`` (d = 2), shape ``(len(u), len(v))``."""
        if self.d != 2:
            raise ValueError("density_grid needs d = 2")
        table = self.table if table is None else table
        fu = self._component_matrix(0, np.asarray(u, float), table.shape[0] - 1)
        fv = self._component_matrix(1, np.asarray(v, float), table.shape[1] - 1)
        return np.asarray(fu @ (table.to_matrix() @ fv.T))

    # -- sampling ----------------------------------------------------------------

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Patchwork draw, per-coordinate cell index, then component draw."""
        u = self.driver.sample(size, rng)
        out = np.empty_like(u)
        for k, fam in enumerate(self.families):
            out[:, k] = fam.sample_component(fam.discretize(u[:, k]), rng)
        return out

    def draw(self, n: int, seed: int, workers: int | None = None) -> np.ndarray:
        """``n`` samples from seeded blocks; identical for any worker count."""
        return run_blocks(lambda m, rng: self.sample(m, rng), n, seed, workers)


def tail_dependence_estimate(samples, t: float) -> float:
    """Empirical upper tail ratio ``P(U > t, V > t) / (1 - t)``, clipped to [0, 1]."""
    if not 0 < t < 1:
        raise ValueError("threshold must lie in (0, 1)")
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2 or x.shape[1] != 2 or len(x) == 0:
        raise ValueError("samples must be a non-empty (m, 2) array")
    joint = np.count_nonzero((x[:, 0] > t) & (x[:, 1] > t)) / len(x)
    return float(min(max(joint / (1.0 - t), 0.0), 1.0))
