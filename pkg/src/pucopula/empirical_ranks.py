"""Rank vectors, the empirical copula, and CSV ingestion of raw observations."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DataParseError",
    "RankData",
    "TiesError",
    "compute_ranks",
    "read_data_csv",
    "relative_ranks",
]


class TiesError(ValueError):
    """A data column contains duplicate values."""

    def __init__(self, column: int, value: float):
        self.column = column
        self.value = value
        super().__init__(f"column {column + 1} contains tied value {value!r}")


class DataParseError(ValueError):
    """An input file could not be parsed as numeric CSV."""


@dataclass(frozen=True, eq=False)
class RankData:
    """Rank permutations of ``n`` observations in ``d`` coordinates.

    ``ranks[k]`` is a permutation of ``1..n`` giving the ranks of coordinate
    ``k``; column ``i`` of ``ranks`` is the rank vector of observation ``i``.
    """

    ranks: np.ndarray

    def __post_init__(self):
        r = np.array(self.ranks, dtype=np.int64, copy=True)
        if r.ndim != 2:
            raise ValueError("ranks must be a (d, n) array")
        d, n = r.shape
        if d < 2 or n < 1:
            raise ValueError(f"need d >= 2 and n >= 1, got d={d}, n={n}")
        expected = np.arange(1, n + 1)
        for k in range(d):
            if not np.array_equal(np.sort(r[k]), expected):
                raise ValueError(f"rank vector {k + 1} is not a permutation of 1..{n}")
        r.setflags(write=False)
        object.__setattr__(self, "ranks", r)

    @property
    def d(self) -> int:
        return self.ranks.shape[0]

    @property
    def n(self) -> int:
        return self.ranks.shape[1]

    def __eq__(self, other):
        if not isinstance(other, RankData):
            return NotImplemented
        return np.array_equal(self.ranks, other.ranks)

    def __hash__(self):
        return hash(self.ranks.tobytes())

    def permuted(self, order) -> "RankData":
        """Same rank pairs with observations reordered."""
        return RankData(self.ranks[:, np.asarray(order)])

    def to_csv(self, fh) -> None:
        if isinstance(fh, (str, os.PathLike)):
            with open(fh, "w", newline="") as out:
                return self.to_csv(out)
        header = ["i"] + [f"r_{k + 1}" for k in range(self.d)]
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(self.n):
            w.writerow([i + 1, *self.ranks[:, i].tolist()])

    @classmethod
    def from_csv(cls, fh) -> "RankData":
        if isinstance(fh, (str, os.PathLike)):
            with open(fh, newline="") as src:
                return cls.from_csv(src)
        rows = list(csv.reader(fh))
        body = np.array(rows[1:], dtype=np.int64)
        return cls(body[:, 1:].T)


def compute_ranks(data, ties: str = "error") -> RankData:
    """Rank each column of an ``(n, d)`` data matrix; smallest value gets 1.

    Args:
        data: Observations, one row per observation.
        ties: ``"error"`` raises :class:`TiesError` on duplicates within a
            column. ``"order"`` breaks ties by input order, which yields valid
            permutations but is not a rank transform of continuous data.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise ValueError("data must be a 2-d (n, d) array")
    if ties not in ("error", "order"):
        raise ValueError(f"unknown ties policy {ties!r}")
    n, d = x.shape
    order = np.argsort(x, axis=0, kind="stable")
    if ties == "error" and n > 1:
        srt = np.take_along_axis(x, order, axis=0)
        dup = srt[1:] == srt[:-1]
        if dup.any():
            col = int(np.flatnonzero(dup.any(axis=0))[0])
            row = int(np.flatnonzero(dup[:, col])[0])
            raise TiesError(col, float(srt[row, col]))
    ranks = np.empty((d, n), dtype=np.int64)
    cols = np.arange(d)
    ranks[cols[:, None], order.T] = np.arange(1, n + 1)
    return RankData(ranks)


def relative_ranks(rd: RankData) -> np.ndarray:
    """Empirical copula points ``r / (n + 1)`` as an ``(n, d)`` array."""
    return rd.ranks.T / (rd.n + 1.0)


def _parse_rows(lines):
    rows = []
    header = None
    for lineno, row in enumerate(csv.reader(lines), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            rows.append([float(c) for c in row])
        except ValueError:
            if lineno == 1 and header is None and not rows:
                header = [c.strip() for c in row]
                continue
            raise DataParseError(f"line {lineno}: non-numeric field in {row!r}") from None
    if not rows:
        raise DataParseError("no data rows")
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise DataParseError(f"ragged rows: column counts {sorted(width)}")
    if header is not None and len(header) != len(rows[0]):
        raise DataParseError("header and data have different column counts")
    data = np.array(rows, dtype=float)
    if not np.isfinite(data).all():
        raise DataParseError("non-finite value in data")
    return header, data


def read_data_csv(source) -> tuple[list[str] | None, np.ndarray]:
    """Read comma-separated numeric columns with an optional header line.

    ``source`` is a path or an open text stream. Returns ``(header, data)``
    where ``header`` is ``None`` if the first line is numeric.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return _parse_rows(fh)
    return _parse_rows(source)
