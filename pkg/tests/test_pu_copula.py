import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pucopula import (
    CellKind,
    DimensionError,
    PartitionFamily,
    PatchworkCopula,
    PuCopula,
    RankData,
    SparseProbTable,
    compute_pij,
    tail_dependence_estimate,
)

from .oracles import CONFIGS, case_copula, density_integral, summed_edges

B20 = PartitionFamily.bernstein(20)


def global_pij(cop):
    """Dense table from 2^d-corner inclusion-exclusion of the driver CDF."""
    caps = cop.truncation_indices
    edges = [summed_edges(f, c) for f, c in zip(cop.families, caps)]
    edges = [np.minimum(e, 1.0) for e in edges]
    grid = np.stack(np.meshgrid(*edges, indexing="ij"), -1)
    mass = cop.driver.cdf(grid)
    for ax in range(cop.d):
        mass = np.diff(mass, axis=ax)
    return mass


def dense(table):
    out = np.zeros(table.shape)
    out[tuple(table.indices.T)] = table.probs
    return out


# -- alignment oracle ------------------------------------------------------------------


@pytest.mark.parametrize("kind", [CellKind.ROOK, CellKind.UPPER, CellKind.LOWER])
def test_bernstein_aligned_cells(case_ranks, kind):
    tb = PuCopula.from_ranks(case_ranks, [B20, B20], kind).table
    want = {(int(r1) - 1, int(r2) - 1) for r1, r2 in case_ranks.ranks.T}
    assert set(tb.as_dict()) == want
    assert np.all(tb.probs == 0.05)
    assert tb.residual == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 9).flatmap(
    lambda n: st.tuples(st.just(n), st.permutations(range(1, n + 1)), st.permutations(range(1, n + 1)))
))
def test_bernstein_alignment_any_ranks(args):
    n, p1, p2 = args
    fam = PartitionFamily.bernstein(n)
    tb = PuCopula.from_ranks(RankData([p1, p2]), [fam, fam], "rook").table
    assert tb.as_dict() == {(a - 1, b - 1): pytest.approx(1 / n, abs=1e-15) for a, b in zip(p1, p2)}


# -- table invariants ------------------------------------------------------------------


@pytest.mark.parametrize("family,kind", CONFIGS)
def test_total_mass_and_marginals(family, kind):
    cop = case_copula(family, kind)
    tb = cop.table
    assert tb.total_mass == pytest.approx(tb.probs.sum(), abs=0)
    assert np.all(tb.probs > 0)
    assert tb.total_mass <= 1 + 1e-12
    if family != "negbinomial":
        assert tb.total_mass >= 1 - cop.truncation_eps
    for k, fam in enumerate(cop.families):
        alpha = np.array([fam.alpha(i) for i in range(tb.shape[k])])
        gap = np.abs(tb.marginal(k) - alpha)
        assert gap.max() <= 1e-9 + tb.residual
        if family == "bernstein":
            assert gap.max() <= 1e-15


def test_negbinomial_residual_is_reported():
    tb = case_copula("negbinomial", "rook").table
    assert tb.meta["truncation_indices"] == [2000, 2000]
    assert tb.meta["truncated_mass"] == pytest.approx(tb.residual, abs=1e-15)
    assert 0.01 < tb.residual < 0.02


def test_renormalize_flag(case_ranks):
    fams = [PartitionFamily.negbinomial(17), PartitionFamily.negbinomial(22)]
    cop = PuCopula.from_ranks(case_ranks, fams, "rook", max_index=200, renormalize=True)
    tb = cop.table
    assert tb.total_mass == pytest.approx(1.0, abs=1e-12)
    plain = PuCopula.from_ranks(case_ranks, fams, "rook", max_index=200).table
    assert tb.meta["renormalized_from"] == plain.total_mass < 0.95
    np.testing.assert_allclose(tb.probs * plain.total_mass, plain.probs, rtol=1e-15)


@pytest.mark.parametrize("kind", list(CellKind))
@pytest.mark.parametrize(
    "fams",
    [
        (PartitionFamily.bernstein(7), PartitionFamily.bernstein(4)),
        (PartitionFamily.negbinomial(3), PartitionFamily.poisson(2.5)),
        (PartitionFamily.poisson(4), PartitionFamily.negbinomial(1.5)),
    ],
    ids=["bern", "nb-pois", "pois-nb"],
)
def test_cellwise_equals_global_inclusion_exclusion(kind, fams):
    rd = RankData([[3, 1, 5, 2, 4], [2, 5, 4, 1, 3]])
    cop = PuCopula.from_ranks(rd, fams, kind, max_index=60)
    got = dense(cop.table)
    want = global_pij(cop)
    np.testing.assert_allclose(got, want[: got.shape[0], : got.shape[1]], atol=1e-14)


@pytest.mark.parametrize("kind", [CellKind.ROOK, CellKind.UPPER])
def test_cellwise_equals_global_d3(kind):
    rd = RankData([[1, 3, 2, 4], [4, 2, 1, 3], [2, 1, 4, 3]])
    fams = (PartitionFamily.bernstein(5), PartitionFamily.poisson(2), PartitionFamily.negbinomial(2))
    cop = PuCopula.from_ranks(rd, fams, kind, max_index=25)
    got = dense(cop.table)
    want = global_pij(cop)
    np.testing.assert_allclose(got, want[tuple(slice(0, s) for s in got.shape)], atol=1e-14)
    assert cop.table.header() == ["i_1", "i_2", "i_3", "p"]


@settings(max_examples=30, deadline=None)
@given(order=st.permutations(range(6)), kind=st.sampled_from(list(CellKind)))
def test_row_permutation_equivariance(order, kind):
    rd = RankData([[4, 1, 6, 2, 5, 3], [2, 6, 5, 1, 3, 4]])
    fams = (PartitionFamily.poisson(3), PartitionFamily.negbinomial(2))
    a = PuCopula.from_ranks(rd, fams, kind, max_index=80).table
    b = PuCopula.from_ranks(rd.permuted(list(order)), fams, kind, max_index=80).table
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_allclose(a.probs, b.probs, rtol=1e-13, atol=1e-18)


def test_negbinomial_support_follows_rank_pairs(case_ranks):
    cop = case_copula("negbinomial", "rook")
    mat = cop.table.to_matrix()
    f1, f2 = cop.families
    for r1, r2 in case_ranks.ranks.T:
        i = f1.discretize((r1 - 0.5) / 20)
        j = f2.discretize((r2 - 0.5) / 20)
        assert mat[i, j] > 0


def test_lower_driver_rejected_for_d3():
    drv = PatchworkCopula(RankData([[1, 2], [2, 1], [1, 2]]), "rook")
    object.__setattr__(drv, "kind", CellKind.LOWER)
    with pytest.raises(DimensionError):
        PuCopula((PartitionFamily.poisson(1),) * 3, drv)


def test_family_count_must_match(case_ranks):
    with pytest.raises(ValueError):
        PuCopula.from_ranks(case_ranks, [B20], "rook")


# -- density ------------------------------------------------------------------------------


def test_independence_table_gives_unit_density(case_ranks):
    f, g = PartitionFamily.bernstein(22), PartitionFamily.bernstein(27)
    alpha = np.array([f.alpha(i) for i in range(22)])
    beta = np.array([g.alpha(j) for j in range(27)])
    table = SparseProbTable.from_dense(np.outer(alpha, beta))
    cop = PuCopula.from_ranks(case_ranks, [f, g], "rook")
    grid = np.arange(1, 100) / 100
    np.testing.assert_allclose(cop.density_grid(grid, grid, table), 1.0, atol=1e-9)
    pts = np.stack(np.meshgrid(grid, grid, indexing="ij"), -1)
    np.testing.assert_allclose(cop.density(pts, table), 1.0, atol=1e-9)


def brute_force_density(cop, u, v):
    """Double sum of p phi(u) psi(v) / (alpha beta) over the table."""
    f, g = cop.families
    i, j = cop.table.indices.T
    terms = cop.table.probs * f.phi(i, u) * g.phi(j, v) / (f.alpha(i) * g.alpha(j))
    return float(np.sum(terms))


def test_bernstein_density_by_hand():
    n = 3
    fam = PartitionFamily.bernstein(n)
    cop = PuCopula.from_ranks(RankData([[1, 2, 3], [1, 2, 3]]), [fam, fam], "rook")
    u = 0.5 / n
    # diagonal table with 1/3 at (i, i); component density 3 * C(2,i) u^i (1-u)^(2-i)
    comp = [3 * (1 - u) ** 2, 3 * 2 * u * (1 - u), 3 * u**2]
    want = sum(c * c for c in comp) / 3
    assert cop.density(np.array([u, u])) == pytest.approx(want, rel=1e-14)
    assert brute_force_density(cop, u, u) == pytest.approx(want, rel=1e-14)


@pytest.mark.parametrize("family", ["bernstein", "poisson"])
@pytest.mark.parametrize("kind", ["rook", "upper"])
def test_density_matches_brute_force(family, kind):
    cop = case_copula(family, kind)
    for u, v in [(0.2, 0.45), (0.73, 0.81), (0.05, 0.97)]:
        assert cop.density(np.array([u, v])) == pytest.approx(
            brute_force_density(cop, u, v), rel=1e-10
        )


@pytest.mark.parametrize("family,kind", CONFIGS)
def test_density_integrates_to_total_mass(family, kind):
    cop = case_copula(family, kind)
    integral = density_integral(cop)
    assert integral == pytest.approx(cop.table.total_mass, abs=1e-6)
    if family != "negbinomial":
        assert 1 - 2 * cop.truncation_eps <= integral <= 1 + 1e-6


def test_density_nonnegative_and_domain(case_ranks):
    cop = case_copula("poisson", "lower")
    g = np.arange(1, 50) / 50
    assert np.all(cop.density_grid(g, g) >= 0)
    with pytest.raises(ValueError):
        cop.density(np.array([1.0, 0.5]))


def test_cdf_margins():
    cop = case_copula("bernstein", "upper")
    u = np.linspace(0, 1, 11)
    np.testing.assert_allclose(cop.cdf(np.column_stack([u, np.ones(11)])), u, atol=1e-13)


def test_density_d3_brute_force():
    rd = RankData([[1, 3, 2, 4], [4, 2, 1, 3], [2, 1, 4, 3]])
    fams = (PartitionFamily.bernstein(4), PartitionFamily.poisson(2), PartitionFamily.negbinomial(3))
    cop = PuCopula.from_ranks(rd, fams, "upper", max_index=120)
    x = np.array([0.3, 0.6, 0.8])
    want = sum(
        p * np.prod([f.component_density(i, t) for f, i, t in zip(fams, idx, x)])
        for idx, p in cop.table.as_dict().items()
    )
    assert cop.density(x) == pytest.approx(want, rel=1e-12)


# -- sampling ------------------------------------------------------------------------------


def test_sampler_marginals_small_bernstein():
    from scipy import stats

    fam = PartitionFamily.bernstein(2)
    cop = PuCopula.from_ranks(RankData([[1], [1]]), [fam, fam], "rook")
    x = cop.sample(10**5, np.random.default_rng(8))
    for k in range(2):
        assert stats.kstest(x[:, k], "uniform").pvalue > 1e-3


def test_seed_determinism_and_worker_independence():
    cop = case_copula("negbinomial", "rook")
    a = cop.draw(150_000, seed=42, workers=1)
    b = cop.draw(150_000, seed=42, workers=3)
    c = cop.draw(150_000, seed=43, workers=1)
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() != c.tobytes()
    assert np.all((a > 0) & (a < 1))


def test_draw_requires_seed():
    with pytest.raises((TypeError, ValueError)):
        case_copula("poisson", "rook").draw(10, seed=None)


# -- tail dependence --------------------------------------------------------------------------


def test_tail_dependence_comonotone():
    u = (np.arange(1000) + 0.5) / 1000
    assert tail_dependence_estimate(np.column_stack([u, u]), 0.9) == 1.0


def test_tail_dependence_independent(rng):
    x = rng.random((10**6, 2))
    t = 0.99
    est = tail_dependence_estimate(x, t)
    p = (1 - t) ** 2
    se = np.sqrt(p * (1 - p) / 10**6) / (1 - t)
    assert abs(est - 0.01) < 4 * se


@pytest.mark.parametrize("t", [0.0, 1.0, 1.5])
def test_tail_dependence_threshold_domain(t):
    with pytest.raises(ValueError):
        tail_dependence_estimate(np.full((3, 2), 0.5), t)


# -- serialization ----------------------------------------------------------------------------


def test_table_csv_round_trip():
    tb = case_copula("poisson", "rook").table
    buf = io.StringIO()
    tb.to_csv(buf)
    assert buf.getvalue().splitlines()[0] == "i,j,p"
    buf.seek(0)
    back = SparseProbTable.from_csv(buf)
    np.testing.assert_array_equal(back.indices, tb.indices)
    assert back.probs.tobytes() == tb.probs.tobytes()


def test_table_rejects_negative_and_clamps_roundoff():
    with pytest.raises(ValueError):
        SparseProbTable(np.array([[0, 0]]), np.array([-1e-10]), (1, 1))
    tb = SparseProbTable(np.array([[1, 0], [0, 1]]), np.array([0.5, -1e-16]), (2, 2))
    assert tb.probs.tolist() == [0.0, 0.5]
    assert tb.indices.tolist() == [[0, 1], [1, 0]]


def test_compute_pij_function_matches_property():
    cop = case_copula("bernstein", "rook")
    assert compute_pij(cop).as_dict() == cop.pij().as_dict()
