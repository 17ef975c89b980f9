"""Study statistics: tests, screening, selection.

Hand-derived values carry their derivation in a comment; scipy serves as an
independent second route where it offers the same quantity.
"""
import numpy as np
import pytest
import scipy.stats as sps
from hypothesis import given, settings
from hypothesis import strategies as st

from drillsim import (
    Tails,
    iqr_outliers,
    learning_gain,
    normality,
    one_way_anova,
    paired_ttest,
    pearson,
    uniform_coverage_select,
    welch_ttest,
)


def test_tails_parsing():
    assert Tails.parse("two") is Tails.TWO
    assert Tails.parse("less") is Tails.LESS
    assert Tails.parse("greater") is Tails.GREATER
    # a single-tailed request without a direction means "improvement",
    # i.e. the negative tail
    assert Tails.parse("one") is Tails.LESS
    with pytest.raises(ValueError):
        Tails.parse("both")


def test_learning_gain_is_post_minus_pre():
    assert learning_gain(10.0, 8.5) == -1.5
    out = learning_gain(np.array([3.0, 4.0]), np.array([5.0, 1.0]))
    assert out.tolist() == [2.0, -3.0]


# --- paired t --------------------------------------------------------------

def test_paired_t_hand_value():
    # diffs [1, 2, 3]: mean 2, sd 1, t = 2 / (1 / sqrt(3)) = 2 sqrt(3)
    r = paired_ttest([1.0, 2.0, 3.0])
    assert r.statistic == pytest.approx(2.0 * np.sqrt(3.0), abs=1e-12)
    assert r.dof == 2
    assert r.n == 3
    assert r.mean == 2.0


@pytest.mark.parametrize("tails,alternative", [
    (Tails.TWO, "two-sided"), (Tails.LESS, "less"), (Tails.GREATER, "greater")])
def test_paired_t_matches_scipy_one_sample(tails, alternative):
    rng = np.random.default_rng(8)
    diffs = rng.normal(-0.4, 1.2, size=23)
    mine = paired_ttest(diffs, tails=tails)
    ref = sps.ttest_1samp(diffs, 0.0, alternative=alternative)
    assert mine.statistic == pytest.approx(ref.statistic, rel=1e-12)
    assert mine.p_value == pytest.approx(ref.pvalue, rel=1e-12)


def test_paired_t_all_zero_diffs_is_t_zero():
    r = paired_ttest([0.0, 0.0, 0.0, 0.0])
    assert r.statistic == 0.0
    assert r.p_value == 1.0


def test_paired_t_constant_nonzero_diffs_raises():
    with pytest.raises(ValueError):
        paired_ttest([2.0, 2.0, 2.0])


def test_paired_t_scale_invariance():
    diffs = np.array([0.3, -1.2, 0.7, 0.1, -0.4])
    a = paired_ttest(diffs)
    b = paired_ttest(diffs * 37.0)
    assert a.statistic == pytest.approx(b.statistic, rel=1e-12)
    assert a.p_value == pytest.approx(b.p_value, rel=1e-12)


# --- Welch -----------------------------------------------------------------

def test_welch_matches_scipy():
    rng = np.random.default_rng(15)
    a = rng.normal(0.0, 1.0, size=12)
    b = rng.normal(0.8, 2.0, size=17)
    mine = welch_ttest(a, b)
    ref = sps.ttest_ind(a, b, equal_var=False)
    assert mine.statistic == pytest.approx(ref.statistic, rel=1e-12)
    assert mine.p_value == pytest.approx(ref.pvalue, rel=1e-12)
    assert mine.dof == pytest.approx(ref.df, rel=1e-12)


def test_welch_one_sided_direction():
    a = [1.0, 2.0, 3.0]
    b = [4.0, 5.0, 6.0]
    less = welch_ttest(a, b, tails=Tails.LESS)
    greater = welch_ttest(a, b, tails=Tails.GREATER)
    assert less.statistic < 0
    assert less.p_value < 0.5 < greater.p_value
    assert less.p_value + greater.p_value == pytest.approx(1.0, abs=1e-12)


# --- ANOVA -----------------------------------------------------------------

def test_anova_two_groups_equals_squared_t():
    # [1,2,3] vs [4,5,6]: between SS = 13.5, within SS = 4 over 4 dof,
    # so F = 13.5, which is the square of the pooled t (variances equal)
    r = one_way_anova([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    assert r.f_statistic == pytest.approx(13.5, abs=1e-12)
    assert (r.dof_between, r.dof_within) == (1, 4)
    t = welch_ttest([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
    assert r.f_statistic == pytest.approx(t.statistic ** 2, rel=1e-12)


def test_anova_matches_scipy():
    rng = np.random.default_rng(44)
    groups = [rng.normal(m, 1.0, size=10) for m in (0.0, 0.3, 0.9, 0.2)]
    mine = one_way_anova(groups)
    ref = sps.f_oneway(*groups)
    assert mine.f_statistic == pytest.approx(ref.statistic, rel=1e-12)
    assert mine.p_value == pytest.approx(ref.pvalue, rel=1e-12)
    assert (mine.dof_between, mine.dof_within) == (3, 36)


def test_anova_identical_everything_is_f_zero():
    # no variance anywhere: no group effect either, reported as F = 0
    r = one_way_anova([[5.0, 5.0, 5.0], [5.0, 5.0], [5.0, 5.0, 5.0]])
    assert r.f_statistic == 0.0
    assert r.p_value == 1.0


def test_anova_separated_constant_groups_raise():
    with pytest.raises(ValueError, match="zero within-group variance"):
        one_way_anova([[1.0, 1.0], [2.0, 2.0]])


def test_anova_needs_two_groups():
    with pytest.raises(ValueError):
        one_way_anova([[1.0, 2.0, 3.0]])


def test_anova_affine_invariance():
    groups = [[1.0, 2.0], [4.0, 3.0], [0.5, 2.5, 2.0]]
    a = one_way_anova(groups)
    b = one_way_anova([[3.0 * v - 7.0 for v in g] for g in groups])
    assert a.f_statistic == pytest.approx(b.f_statistic, rel=1e-12)
    assert a.p_value == pytest.approx(b.p_value, rel=1e-12)


# --- correlation -----------------------------------------------------------

def test_pearson_hand_value():
    # x = [1,2,3,4], y = [1,3,2,4]: cov sum 4, variances 5 and 5, r = 0.8
    r = pearson([1.0, 2.0, 3.0, 4.0], [1.0, 3.0, 2.0, 4.0])
    assert r.r == pytest.approx(0.8, abs=1e-12)
    ref = sps.pearsonr([1.0, 2.0, 3.0, 4.0], [1.0, 3.0, 2.0, 4.0])
    assert r.p_value == pytest.approx(ref.pvalue, rel=1e-10)
    assert r.n == 4


def test_pearson_matches_scipy_on_random_data():
    rng = np.random.default_rng(3)
    x = rng.normal(size=40)
    y = 0.6 * x + rng.normal(scale=0.8, size=40)
    mine = pearson(x, y)
    ref = sps.pearsonr(x, y)
    assert mine.r == pytest.approx(ref.statistic, rel=1e-12)
    assert mine.p_value == pytest.approx(ref.pvalue, rel=1e-9)


def test_pearson_perfect_line():
    # deviations (-1,-1,1,1) have an exactly representable norm, so the
    # ratio collapses to exactly 1 and the p value to 0
    exact = pearson([0.0, 0.0, 2.0, 2.0], [0.0, 0.0, 2.0, 2.0])
    assert exact.r == 1.0
    assert exact.p_value == 0.0
    # when the norm is irrational the ratio can land one rounding step
    # below 1; the p value then stays finite but tiny
    r = pearson([1.0, 2.0, 3.0], [2.0, 4.0, 6.0])
    assert abs(r.r - 1.0) < 1e-12
    assert r.p_value < 1e-6
    anti = pearson([1.0, 2.0, 3.0], [6.0, 4.0, 2.0])
    assert abs(anti.r + 1.0) < 1e-12


def test_pearson_validation():
    with pytest.raises(ValueError):
        pearson([1.0, 2.0], [1.0, 2.0])          # too short
    with pytest.raises(ValueError):
        pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])  # zero variance
    with pytest.raises(ValueError):
        pearson([1.0, 2.0, 3.0], [1.0, 2.0])     # length mismatch


# --- IQR screening ---------------------------------------------------------

def test_iqr_single_spike():
    res = iqr_outliers([0.0, 0.0, 0.0, 0.0, 100.0])
    assert res.removed_values.tolist() == [100.0]
    assert res.removed_indices.tolist() == [4]
    assert res.kept_values.tolist() == [0.0, 0.0, 0.0, 0.0]


def test_iqr_fences_follow_numpy_percentiles():
    rng = np.random.default_rng(100)
    vals = rng.normal(size=60)
    res = iqr_outliers(vals)
    q1, q3 = np.percentile(vals, [25, 75])
    assert res.q1 == pytest.approx(q1, rel=1e-12)
    assert res.q3 == pytest.approx(q3, rel=1e-12)
    assert res.lower_fence == pytest.approx(q1 - 1.5 * (q3 - q1), rel=1e-12)
    assert res.upper_fence == pytest.approx(q3 + 1.5 * (q3 - q1), rel=1e-12)
    inside = (vals >= res.lower_fence) & (vals <= res.upper_fence)
    assert np.array_equal(res.kept_indices, np.nonzero(inside)[0])


def test_iqr_factor_widens_the_fences():
    vals = [0.0, 1.0, 2.0, 3.0, 10.0]
    assert iqr_outliers(vals, factor=1.5).removed_values.tolist() == [10.0]
    assert iqr_outliers(vals, factor=10.0).removed_values.size == 0


def test_iqr_needs_at_least_four_values():
    with pytest.raises(ValueError):
        iqr_outliers([1.0, 2.0, 3.0])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=4, max_size=50))
def test_iqr_partition_property(vals):
    res = iqr_outliers(vals)
    n = len(vals)
    both = np.concatenate([res.kept_indices, res.removed_indices])
    assert sorted(both.tolist()) == list(range(n))
    for v in res.removed_values:
        assert v < res.lower_fence or v > res.upper_fence


# --- normality -------------------------------------------------------------

def test_normality_on_a_normal_sample():
    rng = np.random.default_rng(2)
    res = normality(rng.normal(size=50))
    assert res.n == 50
    assert 0.0 < res.statistic <= 1.0
    assert res.p_value > 0.01


def test_normality_validation():
    with pytest.raises(ValueError):
        normality([1.0, 2.0])
    with pytest.raises(ValueError, match="constant"):
        normality([3.0, 3.0, 3.0, 3.0])


# --- coverage selection ----------------------------------------------------

def test_coverage_selection_known_sequence():
    # over 0..99: min, then max, then the midpoint, then the two quarter
    # points; ties on distance resolve to the lower index
    out = uniform_coverage_select(np.arange(100.0), 5)
    assert out.tolist() == [0, 99, 49, 74, 24]


def test_coverage_always_includes_min_and_max():
    rng = np.random.default_rng(9)
    for _ in range(20):
        vals = rng.normal(size=30)
        out = uniform_coverage_select(vals, int(rng.integers(2, 10)))
        assert int(np.argmin(vals)) in out.tolist()
        assert int(np.argmax(vals)) in out.tolist()


def test_coverage_k_equal_n_is_a_permutation():
    vals = np.array([3.0, 1.0, 4.0, 1.5, 9.0])
    out = uniform_coverage_select(vals, 5)
    assert sorted(out.tolist()) == [0, 1, 2, 3, 4]


def test_coverage_k_one_is_the_minimum():
    assert uniform_coverage_select([5.0, -2.0, 3.0], 1).tolist() == [1]


def test_coverage_prefers_distinct_values_over_duplicates():
    vals = np.array([0.0, 0.0, 0.0, 5.0, 10.0])
    out = uniform_coverage_select(vals, 3)
    assert out.tolist() == [0, 4, 3]


def test_coverage_selection_indices_are_unique():
    rng = np.random.default_rng(77)
    vals = rng.integers(0, 5, size=40).astype(float)  # heavy duplication
    out = uniform_coverage_select(vals, 40)
    assert len(set(out.tolist())) == 40


def test_coverage_k_out_of_range():
    with pytest.raises(ValueError):
        uniform_coverage_select([1.0, 2.0], 3)
    with pytest.raises(ValueError):
        uniform_coverage_select([1.0, 2.0], 0)
