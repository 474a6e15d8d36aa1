"""Command-line front end.

Every command writes one CSV artifact (``--output``, default stdout) and a
one-line JSON provenance record (``--provenance``; defaults to
``<output>.json`` for file output and to stderr otherwise).
"""

from __future__ import annotations

import argparse
import io
import json
import sys

import numpy as np

from . import __version__
from .datasets import FIXTURES
from .empirical_ranks import DataParseError, TiesError, compute_ranks, read_data_csv
from .partition_families import PartitionFamily
from .patchwork import CellKind, DimensionError
from .pu_copula import DEFAULT_EPS, DEFAULT_MAX_INDEX, PuCopula, tail_dependence_estimate
from .risk_mc import (
    empirical_quantiles,
    fit_marginal,
    simulate_portfolio,
    tail_levels,
)
from .sharding import THREADS_ENV

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_TIES = 4
EXIT_INVALID = 5
EXIT_IO = 6

_FAMILY_ALIASES = {
    "bernstein": "bernstein",
    "binomial": "bernstein",
    "negbinomial": "negbinomial",
    "negbin": "negbinomial",
    "poisson": "poisson",
}

PRESET_SIMS = 10**6
PRESET_TAIL_FRACTION = 0.1


class InvalidConfig(ValueError):
    """Flags that parse individually but do not fit together."""


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _seed(text: str) -> int:
    s = int(text)
    if not 0 <= s < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return s


def _count(text: str) -> int:
    n = int(float(text)) if "e" in text.lower() else int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("count must be positive")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pucopula",
        description="Data-driven partition-of-unity copulas from ranked observations.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="CSV of observations, one column per coordinate")
    src.add_argument("--fixture", choices=sorted(FIXTURES), help="bundled data set")
    common.add_argument("--ties", choices=["error", "order"], default="error",
                        help="'order' breaks ties by input order (not a true rank transform)")
    common.add_argument("--output", default="-", help="CSV destination (default stdout)")
    common.add_argument("--provenance", help="path of the JSON provenance record")

    cop = argparse.ArgumentParser(add_help=False)
    cop.add_argument("--family", required=True,
                     help="bernstein | negbinomial | poisson, or a comma list per coordinate")
    cop.add_argument("--a", type=float, help="parameter of coordinate 1")
    cop.add_argument("--b", type=float, help="parameter of coordinate 2")
    cop.add_argument("--params", type=_floats, help="comma list of parameters, one per coordinate")
    cop.add_argument("--shuffle", choices=[k.value for k in CellKind], default="rook",
                     help="cell copula of the rank patchwork")
    cop.add_argument("--eps", type=float, default=DEFAULT_EPS, help="truncation budget")
    cop.add_argument("--max-index", type=int, default=DEFAULT_MAX_INDEX,
                     help="per-coordinate cap on table indices")

    stoch = argparse.ArgumentParser(add_help=False)
    stoch.add_argument("--seed", type=_seed, required=True, help="64-bit unsigned seed")
    stoch.add_argument("--workers", type=int,
                       help=f"worker threads (default ${THREADS_ENV} or CPU count)")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ranks", parents=[common], help="rank vectors of the data")
    sub.add_parser("pij", parents=[common, cop], help="joint index probabilities (i,j,p)")
    p = sub.add_parser("density", parents=[common, cop], help="copula density on a grid")
    p.add_argument("--grid", type=_count, default=101, help="interior points per axis (d = 2)")
    p.add_argument("--points", help="CSV of evaluation points instead of a grid")
    p = sub.add_parser("sample", parents=[common, cop, stoch], help="copula samples")
    p.add_argument("--n", type=_count, default=5000)
    p = sub.add_parser(
        "var",
        parents=[common, cop, stoch],
        help="portfolio quantiles (Value-at-Risk)",
        description="Quantiles use the ceil(n p)-th order statistic of simulated sums.",
    )
    p.add_argument("--n", type=_count, default=None)
    p.add_argument("--marginal", choices=["empirical", "lognormal"], default="empirical")
    p.add_argument("--levels", type=_floats, default=[0.9, 0.95, 0.99, 0.995, 0.999])
    p.add_argument("--preset", choices=["paper-s4"],
                   help="10^6 simulations, curve over the largest 10%% of sums")
    p.add_argument("--write-sums", help="also write raw portfolio sums to this path")
    p = sub.add_parser("taildep", parents=[common, cop, stoch],
                       help="empirical upper tail-dependence ratios")
    p.add_argument("--n", type=_count, default=10**6)
    p.add_argument("--threshold", type=_floats, default=[0.9, 0.95, 0.99, 0.999])
    p.add_argument("--pair", default="1,2", help="1-based coordinates to compare")
    return parser


def _load(args):
    if args.fixture:
        return np.array(FIXTURES[args.fixture])
    _, data = read_data_csv(args.input)
    return data


def _families(args, d: int) -> list[PartitionFamily]:
    names = [s.strip().lower() for s in args.family.split(",")]
    try:
        names = [_FAMILY_ALIASES[s] for s in names]
    except KeyError as e:
        raise InvalidConfig(f"unknown family {e.args[0]!r}") from None
    if len(names) == 1:
        names = names * d
    if args.params is not None:
        params = list(args.params)
    else:
        params = [x for x in (args.a, args.b) if x is not None]
        if d != 2 and params:
            raise InvalidConfig("use --params for data with d != 2")
    if len(names) != d or len(params) != d:
        raise InvalidConfig(
            f"data has {d} columns but {len(names)} families and {len(params)} parameters given"
        )
    return [PartitionFamily(nm, a) for nm, a in zip(names, params)]


def _copula(args, ranks) -> PuCopula:
    fams = _families(args, ranks.d)
    return PuCopula.from_ranks(
        ranks, fams, args.shuffle, truncation_eps=args.eps, max_index=args.max_index
    )


def _write_rows(buf, header, rows):
    buf.write(",".join(header) + "\n")
    for row in np.asarray(rows, dtype=float).tolist():
        buf.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _config(args) -> dict:
    skip = {"output", "provenance"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def run(args) -> tuple[str, dict]:
    """Execute one parsed command; returns the CSV text and provenance extras."""
    data = _load(args)
    ranks = compute_ranks(data, ties=args.ties)
    buf = io.StringIO()
    extra: dict = {"n_obs": ranks.n, "d": ranks.d}
    if args.command == "ranks":
        ranks.to_csv(buf)
        return buf.getvalue(), extra

    cop = _copula(args, ranks)
    if args.command == "pij":
        table = cop.table
        table.to_csv(buf)
        extra.update(entries=len(table), total_mass=table.total_mass,
                     truncated_mass=table.residual, dropped_mass=table.dropped_mass,
                     truncation_indices=list(cop.truncation_indices))
    elif args.command == "density":
        table = cop.table
        if args.points:
            _, pts = read_data_csv(args.points)
            if pts.shape[1] != ranks.d:
                raise InvalidConfig(f"points have {pts.shape[1]} columns, data has {ranks.d}")
            vals = cop.density(pts)
            names = ["u", "v"] if ranks.d == 2 else [f"u_{k + 1}" for k in range(ranks.d)]
            _write_rows(buf, names + ["c"], np.column_stack([pts, vals]))
        else:
            if ranks.d != 2:
                raise InvalidConfig("grid output needs d = 2; pass --points for d > 2")
            g = np.arange(1, args.grid + 1) / (args.grid + 1.0)
            c = cop.density_grid(g, g)
            uu, vv = np.meshgrid(g, g, indexing="ij")
            _write_rows(buf, ["u", "v", "c"], np.column_stack([uu.ravel(), vv.ravel(), c.ravel()]))
        extra.update(truncated_mass=table.residual)
    elif args.command == "sample":
        x = cop.draw(args.n, args.seed, args.workers)
        names = ["u", "v"] if ranks.d == 2 else [f"u_{k + 1}" for k in range(ranks.d)]
        _write_rows(buf, names, x)
        extra.update(rows=len(x))
    elif args.command == "var":
        n = args.n or (PRESET_SIMS if args.preset else 10**5)
        levels = tail_levels(n, PRESET_TAIL_FRACTION) if args.preset else np.array(args.levels)
        margins = [fit_marginal(args.marginal, data[:, k]) for k in range(ranks.d)]
        sums = simulate_portfolio(cop, margins, n, args.seed, args.workers)
        curve = empirical_quantiles(sums, levels)
        curve.to_csv(buf)
        if args.write_sums:
            with open(args.write_sums, "w") as fh:
                _write_rows(fh, ["sum"], sums[:, None])
        extra.update(n_sims=n, rows=len(levels))
    elif args.command == "taildep":
        try:
            pair = [int(t) - 1 for t in args.pair.split(",")]
        except ValueError:
            raise InvalidConfig(f"bad --pair {args.pair!r}") from None
        if len(pair) != 2 or not all(0 <= k < ranks.d for k in pair) or pair[0] == pair[1]:
            raise InvalidConfig(f"--pair must name two distinct coordinates of 1..{ranks.d}")
        x = cop.draw(args.n, args.seed, args.workers)[:, pair]
        rows = [[t, tail_dependence_estimate(x, t)] for t in args.threshold]
        _write_rows(buf, ["t", "lambda"], rows)
        extra.update(n_sims=args.n)
    return buf.getvalue(), extra


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text, extra = run(args)
    except DataParseError as e:
        print(f"pucopula: parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except TiesError as e:
        print(f"pucopula: ties in data: {e}", file=sys.stderr)
        return EXIT_TIES
    except (InvalidConfig, DimensionError, ValueError, IndexError) as e:
        print(f"pucopula: invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"pucopula: {e}", file=sys.stderr)
        return EXIT_IO

    record = {"command": args.command, "version": __version__, "config": _config(args),
              "seed": getattr(args, "seed", None), **extra}
    line = json.dumps(record, sort_keys=True, default=str) + "\n"
    try:
        if args.output == "-":
            sys.stdout.write(text)
        else:
            with open(args.output, "w", newline="") as fh:
                fh.write(text)
        prov = args.provenance or (None if args.output == "-" else args.output + ".json")
        if prov:
            with open(prov, "w") as fh:
                fh.write(line)
        else:
            sys.stderr.write(line)
    except OSError as e:
        print(f"pucopula: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
