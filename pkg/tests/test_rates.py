import itertools
import random
from fractions import Fraction

import pytest

from codedcache import (
    ABOVE,
    BOUNDARY,
    VERTEX,
    LimitExceededError,
    RateCurve,
    RatePoint,
    ValidationError,
    alpha_expected_rate,
    alpha_points,
    beta_points,
    classic_rate,
    compare_strategies,
    exhaustive_schedule,
    expected_rate_exact,
    expected_rate_mc,
    lower_envelope,
    make_config,
    memory_rate_table,
    memory_share,
    place_beta,
    rate_alpha_closed,
    rate_beta_closed,
    toy_config,
    toy_schedule,
    write_curves_csv,
)

EXHAUSTIVE = lambda cache, demand: exhaustive_schedule(cache, demand)
TOY = lambda cache, demand: toy_schedule(demand)

P_GRID_21 = [Fraction(1, 2) + Fraction(k, 40) for k in range(21)]


# ---------------------------------------------------------------------------
# exact expectation
# ---------------------------------------------------------------------------


def test_degenerate_distribution_forces_single_demand():
    cfg = toy_config(Fraction(1))
    assert expected_rate_exact(cfg, TOY) == Fraction(1, 3)


def test_toy_scheduler_matches_closed_form_exactly():
    for p in P_GRID_21:
        cfg = toy_config(p)
        assert expected_rate_exact(cfg, TOY) == Fraction(2, 3) - p**3 / 3


def test_symmetric_and_full_enumeration_agree():
    cfg = toy_config(Fraction(3, 5))
    fast = expected_rate_exact(cfg, TOY, symmetric=True)
    slow = expected_rate_exact(cfg, TOY, symmetric=False)
    assert fast == slow


def test_single_level_row_matches_its_closed_form():
    for p in (Fraction(1, 2), Fraction(4, 5)):
        q = 1 - p
        cfg = make_config(3, [1, 1], [1, 0], [p, q])
        got = expected_rate_exact(cfg, EXHAUSTIVE)
        assert got == Fraction(5, 3) - p**3 - Fraction(2, 3) * q**3


def test_enumeration_limit_points_to_monte_carlo():
    cfg = make_config(3, [2, 2], [1, 0], [Fraction(1, 4)] * 4)
    with pytest.raises(LimitExceededError, match="expected_rate_mc"):
        expected_rate_exact(cfg, EXHAUSTIVE, limit=10)


def test_float_popularity_gives_float_rate():
    got = expected_rate_exact(toy_config(0.765), TOY)
    assert isinstance(got, float)
    assert got == pytest.approx(2 / 3 - 0.765**3 / 3, abs=1e-12)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def test_mc_degenerate_distribution_has_zero_stderr():
    est = expected_rate_mc(toy_config(Fraction(1)), TOY, samples=1000, seed=1)
    assert est.value == pytest.approx(1 / 3)
    assert est.stderr == 0.0


def test_mc_close_to_closed_form():
    est = expected_rate_mc(toy_config(0.765), TOY, samples=1_000_000, seed=42)
    closed = rate_beta_closed(0.765)
    assert abs(est.value - closed) <= 3 * est.stderr


def test_mc_seed_determinism():
    a = expected_rate_mc(toy_config(0.7), TOY, samples=10_000, seed=7)
    b = expected_rate_mc(toy_config(0.7), TOY, samples=10_000, seed=7)
    assert (a.value, a.stderr) == (b.value, b.stderr)
    c = expected_rate_mc(toy_config(0.7), TOY, samples=10_000, seed=8)
    assert (a.value, a.stderr) != (c.value, c.stderr)


def test_mc_stderr_shrinks_like_root_n():
    small = expected_rate_mc(toy_config(0.7), TOY, samples=10_000, seed=3)
    large = expected_rate_mc(toy_config(0.7), TOY, samples=160_000, seed=3)
    ratio = large.stderr / small.stderr
    assert 0.15 <= ratio <= 0.35  # ideal 1/4 at 16x the samples


def test_mc_rejects_bad_sample_count():
    with pytest.raises(ValidationError):
        expected_rate_mc(toy_config(0.7), TOY, samples=0, seed=1)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def test_closed_forms_at_endpoints():
    assert rate_beta_closed(1.0) == 0
    assert rate_alpha_closed(1.0) == 0
    assert rate_beta_closed(Fraction(1, 2)) == Fraction(5, 8)
    assert rate_alpha_closed(Fraction(1, 2)) == Fraction(5, 8)
    assert rate_beta_closed(0.5) == pytest.approx(0.625)


def test_closed_form_branches():
    # below the cube-root-of-a-half point the coded branch wins
    p = Fraction(3, 4)
    assert rate_beta_closed(p) == Fraction(2, 3) - p**3 / 3
    p = Fraction(9, 10)
    assert rate_beta_closed(p) == 1 - p**3


def test_closed_forms_reject_out_of_range():
    for bad in (0.3, 1.2, Fraction(1, 4)):
        with pytest.raises(ValidationError):
            rate_beta_closed(bad)
        with pytest.raises(ValidationError):
            rate_alpha_closed(bad)


def test_memory_rate_table_rows():
    p = Fraction(153, 200)
    q = 1 - p
    table = {pt.params: (pt.m, pt.rate) for pt in memory_rate_table(p)}
    assert table[(0, 0)] == (0, 2 - p**3 - q**3)
    assert table[(2, 2)] == (Fraction(4, 3), Fraction(1, 3))
    assert table[(3, 3)] == (2, 0)
    assert table[(2, 1)] == (1, Fraction(2, 3) - p**3 / 3)


def test_memory_rate_table_certified_by_search():
    for p in (Fraction(1, 2), Fraction(1)):
        for pt in memory_rate_table(p):
            cfg = make_config(3, [1, 1], list(pt.params), [p, 1 - p])
            assert expected_rate_exact(cfg, EXHAUSTIVE) == pt.rate


# ---------------------------------------------------------------------------
# envelope
# ---------------------------------------------------------------------------


def test_envelope_single_point():
    env = lower_envelope([RatePoint(Fraction(1), Fraction(1, 2), "x")])
    assert env.vertices == ((Fraction(1), Fraction(1, 2)),)
    assert env.labels == (VERTEX,)
    assert env.value(1) == Fraction(1, 2)


def test_envelope_excludes_interior_point_at_degenerate_popularity():
    env = lower_envelope(memory_rate_table(Fraction(1)))
    by_params = {pt.params: lab for pt, lab in zip(env.points, env.labels)}
    assert by_params[(2, 2)] == ABOVE
    assert by_params[(3, 0)] == VERTEX
    assert by_params[(0, 0)] == VERTEX
    # collinear point: stays on the curve but is not a vertex
    assert by_params[(1, 0)] == BOUNDARY
    assert (Fraction(4, 3), Fraction(1, 3)) not in env.vertices


def test_envelope_collinear_points_flagged_boundary():
    pts = [
        RatePoint(Fraction(0), Fraction(2), "a"),
        RatePoint(Fraction(1), Fraction(1), "b"),
        RatePoint(Fraction(2), Fraction(0), "c"),
    ]
    env = lower_envelope(pts)
    assert env.labels == (VERTEX, BOUNDARY, VERTEX)
    assert env.value(Fraction(1, 2)) == Fraction(3, 2)


def test_envelope_interpolates():
    env = lower_envelope(memory_rate_table(Fraction(3, 4)))
    assert env.value(Fraction(0)) == 2 - Fraction(3, 4) ** 3 - Fraction(1, 4) ** 3
    assert env.value(2) == 0
    with pytest.raises(ValidationError):
        env.value(Fraction(5, 2))


def test_envelope_rate_non_increasing_for_achievable_points():
    rng = random.Random(123)
    for _ in range(200):
        p = Fraction(rng.randint(100, 200), 200)
        env = lower_envelope(memory_rate_table(p))
        rates = [r for _, r in env.vertices]
        assert all(a >= b for a, b in zip(rates, rates[1:]))
        assert env.vertices[-1][1] == 0


def test_envelope_requires_points():
    with pytest.raises(ValidationError):
        lower_envelope([])


# ---------------------------------------------------------------------------
# grouping baseline machinery
# ---------------------------------------------------------------------------


def test_classic_rate_kernel_values():
    assert classic_rate(3, 0, 2) == 2
    assert classic_rate(3, 1, 1) == Fraction(2, 3)
    assert classic_rate(3, 1, 2) == 1
    assert classic_rate(3, 2, 1) == Fraction(1, 3)
    assert classic_rate(3, 3, 2) == 0
    assert classic_rate(3, 1, 0) == 0


def test_classic_rate_certified_by_search():
    # one group of two files: the kernel matches the exhaustive solver
    for t in (0, 1, 2, 3):
        cfg = make_config(3, [2], [t], [Fraction(1, 2), Fraction(1, 2)])
        cache = place_beta(cfg)
        for demand in itertools.product((1, 2), repeat=3):
            got = exhaustive_schedule(cache, demand).rate
            assert got == classic_rate(3, t, len(set(demand)))


def test_memory_share_integer_and_fractional():
    assert memory_share(3, 2, Fraction(2, 3)) == ((Fraction(1), 1),)
    assert memory_share(3, 2, 1) == ((Fraction(1, 2), 1), (Fraction(1, 2), 2))
    assert memory_share(3, 1, Fraction(1, 3)) == ((Fraction(1), 1),)
    with pytest.raises(ValidationError):
        memory_share(3, 1, 2)  # more memory than the group holds


@pytest.mark.parametrize(
    "p", [Fraction(1, 2), Fraction(3, 5), Fraction(7, 10), Fraction(153, 200), Fraction(1)]
)
def test_alpha_machinery_reproduces_closed_forms(p):
    q = 1 - p
    one_group = alpha_expected_rate(3, [2], [Fraction(1)], [p, q], scheduler=EXHAUSTIVE)
    assert one_group == Fraction(2, 3) - (p**3 + q**3) / 6
    two_groups = alpha_expected_rate(
        3, [1, 1], [Fraction(1), Fraction(0)], [p, q], scheduler=EXHAUSTIVE
    )
    assert two_groups == 1 - p**3


def test_alpha_closed_kernel_agrees_with_scheduler_path():
    p = Fraction(3, 4)
    for memories in ([Fraction(1, 2), Fraction(1, 2)], [Fraction(1), Fraction(1, 3)]):
        closed = alpha_expected_rate(3, [1, 1], memories, [p, 1 - p])
        searched = alpha_expected_rate(3, [1, 1], memories, [p, 1 - p], scheduler=EXHAUSTIVE)
        assert closed == searched


def test_alpha_validates_shapes():
    with pytest.raises(ValidationError):
        alpha_expected_rate(3, [1], [Fraction(1)], [Fraction(1, 2), Fraction(1, 2)])
    with pytest.raises(ValidationError):
        alpha_expected_rate(3, [2], [Fraction(1), Fraction(0)], [Fraction(1, 2), Fraction(1, 2)])


# ---------------------------------------------------------------------------
# achievable point sweeps
# ---------------------------------------------------------------------------


def test_beta_points_cover_the_table_and_one_extra():
    p = Fraction(153, 200)
    pts = beta_points(3, [1, 1], [p, 1 - p])
    by_params = {pt.params: pt for pt in pts}
    assert len(pts) == 10  # nine table rows plus the dominated (2, 0) pair
    for row in memory_rate_table(p):
        assert by_params[row.params].rate == row.rate
        assert by_params[row.params].m == row.m
    extra = by_params[(2, 0)]
    assert extra.m == Fraction(2, 3)
    assert extra.rate == Fraction(4, 3) - p**3 - Fraction(1, 3) * (1 - p) ** 3


def test_strategy_envelopes_at_unit_cache_match_closed_forms():
    p = Fraction(153, 200)
    beta_env = lower_envelope(beta_points(3, [1, 1], [p, 1 - p]))
    alpha_env = lower_envelope(alpha_points(3, [p, 1 - p]))
    assert beta_env.value(1) == rate_beta_closed(p)
    assert alpha_env.value(1) == rate_alpha_closed(p)


def test_alpha_points_guard():
    with pytest.raises(LimitExceededError):
        alpha_points(3, [Fraction(1, 8)] * 8, max_points=10)


# ---------------------------------------------------------------------------
# strategy comparison
# ---------------------------------------------------------------------------


def test_thresholds_match_reported_values():
    cmp = compare_strategies()
    assert cmp.alpha_branch_threshold == pytest.approx(0.739, abs=1e-3)
    assert cmp.equal_threshold == pytest.approx(0.794, abs=1e-3)
    assert cmp.equal_threshold == pytest.approx(0.5 ** (1 / 3), abs=1e-8)


def test_max_gain_location_and_size():
    cmp = compare_strategies()
    assert 0.72 < cmp.max_gain_p < 0.76
    assert cmp.max_gain_ratio <= 0.90


def test_curves_equal_at_degenerate_popularity():
    cmp = compare_strategies([1.0])
    assert cmp.alpha.ys == (0,)
    assert cmp.beta.ys == (0,)


def test_beta_never_above_alpha_and_strictly_below_in_gain_window():
    cmp = compare_strategies()
    for (p, a), (_, b) in zip(cmp.alpha.samples, cmp.beta.samples):
        assert b <= a + 1e-15
        if 0.5 < p < cmp.equal_threshold - 1e-9:
            assert b < a


def test_empty_grid_rejected():
    with pytest.raises(ValidationError):
        compare_strategies([])


# ---------------------------------------------------------------------------
# curve output
# ---------------------------------------------------------------------------


def test_curve_requires_increasing_abscissa():
    with pytest.raises(ValidationError):
        RateCurve("x", "p", ((0.7, 0.1), (0.6, 0.2)))


def test_write_curves_csv(tmp_path):
    cmp = compare_strategies([0.5, 0.75, 1.0])
    out = tmp_path / "curves.csv"
    write_curves_csv(out, [cmp.alpha, cmp.beta])
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "p,R_alpha,R_beta"
    assert lines[1].startswith("0.5,0.625,0.625")
    with pytest.raises(ValidationError):
        write_curves_csv(out, [])
