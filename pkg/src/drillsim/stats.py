"""Study statistics: learning gains, outlier screening, hypothesis tests,
correlation, inter-rater agreement, and uniform-coverage sampling.

Test statistics, degrees of freedom, and agreement coefficients are computed
here explicitly; distribution tail areas come from scipy's special-function
machinery (series / continued-fraction accuracy, no table lookups).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _sps

__all__ = [
    "Tails",
    "TTestResult",
    "AnovaResult",
    "CorrelationResult",
    "NormalityResult",
    "IqrOutlierResult",
    "learning_gain",
    "iqr_outliers",
    "paired_ttest",
    "welch_ttest",
    "one_way_anova",
    "pearson",
    "cohen_kappa",
    "icc_agreement",
    "ibmd",
    "normality",
    "uniform_coverage_select",
]


class Tails(enum.Enum):
    TWO = "two"
    LESS = "less"        # alternative: mean below zero (improvement on error scales)
    GREATER = "greater"

    @classmethod
    def parse(cls, text: str) -> "Tails":
        text = str(text).lower()
        if text in ("two", "2", "two-sided"):
            return cls.TWO
        if text in ("one", "less", "1"):
            # the study hypothesis is a drop in errors, so "one" means "less"
            return cls.LESS
        if text == "greater":
            return cls.GREATER
        raise ValueError(f"unknown tails {text!r}")


def _clean_1d(values, name: str, min_n: int = 1) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size < min_n:
        raise ValueError(f"{name} needs at least {min_n} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def learning_gain(pre_error, post_error):
    """Learning gain = post-test error minus pre-test error (negative is better)."""
    pre = np.asarray(pre_error, dtype=np.float64)
    post = np.asarray(post_error, dtype=np.float64)
    if pre.shape != post.shape:
        raise ValueError("pre and post shapes must match")
    gain = post - pre
    return float(gain) if gain.ndim == 0 else gain


@dataclass(frozen=True)
class IqrOutlierResult:
    kept_indices: np.ndarray
    removed_indices: np.ndarray
    kept_values: np.ndarray
    removed_values: np.ndarray
    q1: float
    q3: float
    lower_fence: float
    upper_fence: float


def iqr_outliers(values, factor: float = 1.5) -> IqrOutlierResult:
    """Tukey fences at factor * IQR; quartiles by linear interpolation."""
    arr = _clean_1d(values, "values", min_n=4)
    q1, q3 = np.percentile(arr, [25.0, 75.0])  # linear-interpolation quartiles
    iqr = q3 - q1
    lo = q1 - factor * iqr
    hi = q3 + factor * iqr
    out = (arr < lo) | (arr > hi)
    return IqrOutlierResult(
        kept_indices=np.nonzero(~out)[0],
        removed_indices=np.nonzero(out)[0],
        kept_values=arr[~out],
        removed_values=arr[out],
        q1=float(q1),
        q3=float(q3),
        lower_fence=float(lo),
        upper_fence=float(hi),
    )


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    dof: float
    p_value: float
    tails: Tails
    mean: float
    n: int


def _t_pvalue(t: float, dof: float, tails: Tails) -> float:
    if tails is Tails.TWO:
        return float(2.0 * _sps.t.sf(abs(t), dof))
    if tails is Tails.LESS:
        return float(_sps.t.cdf(t, dof))
    return float(_sps.t.sf(t, dof))


def paired_ttest(diffs, tails: Tails = Tails.TWO) -> TTestResult:
    """One-sample t test of paired differences against zero.

    t = mean / (sd / sqrt(n)) with n - 1 degrees of freedom.
    """
    arr = _clean_1d(diffs, "diffs", min_n=2)
    n = arr.size
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            t = 0.0
        else:
            raise ValueError("paired differences have zero variance")
    else:
        t = mean / (sd / math.sqrt(n))
    dof = n - 1
    return TTestResult(statistic=float(t), dof=float(dof),
                       p_value=_t_pvalue(t, dof, tails), tails=tails,
                       mean=mean, n=n)


def welch_ttest(a, b, tails: Tails = Tails.TWO) -> TTestResult:
    """Unequal-variance two-sample t test with Welch-Satterthwaite dof."""
    xa = _clean_1d(a, "a", min_n=2)
    xb = _clean_1d(b, "b", min_n=2)
    na, nb = xa.size, xb.size
    va = float(xa.var(ddof=1))
    vb = float(xb.var(ddof=1))
    sea = va / na
    seb = vb / nb
    se2 = sea + seb
    if se2 == 0.0:
        raise ValueError("both samples have zero variance")
    t = (float(xa.mean()) - float(xb.mean())) / math.sqrt(se2)
    dof = se2 * se2 / (sea * sea / (na - 1) + seb * seb / (nb - 1))
    return TTestResult(statistic=float(t), dof=float(dof),
                       p_value=_t_pvalue(t, dof, tails), tails=tails,
                       mean=float(xa.mean() - xb.mean()), n=na + nb)


@dataclass(frozen=True)
class AnovaResult:
    f_statistic: float
    dof_between: int
    dof_within: int
    p_value: float


def one_way_anova(groups) -> AnovaResult:
    """One-way fixed-effects ANOVA over two or more groups.

    Degrees of freedom are (k - 1, N - k).
    """
    gs = [_clean_1d(g, "group", min_n=2) for g in groups]
    k = len(gs)
    if k < 2:
        raise ValueError("ANOVA needs at least two groups")
    ns = np.array([g.size for g in gs], dtype=np.float64)
    n_total = int(ns.sum())
    means = np.array([g.mean() for g in gs])
    grand = float(np.concatenate(gs).mean())
    ss_between = float(np.sum(ns * (means - grand) ** 2))
    ss_within = float(sum(np.sum((g - g.mean()) ** 2) for g in gs))
    dof_b = k - 1
    dof_w = n_total - k
    if ss_within == 0.0:
        if ss_between == 0.0:
            # no variance anywhere: no effect to detect
            return AnovaResult(f_statistic=0.0, dof_between=dof_b,
                               dof_within=dof_w, p_value=1.0)
        raise ValueError("zero within-group variance")
    f = (ss_between / dof_b) / (ss_within / dof_w)
    return AnovaResult(f_statistic=float(f), dof_between=dof_b, dof_within=dof_w,
                       p_value=float(_sps.f.sf(f, dof_b, dof_w)))


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    p_value: float
    n: int


def pearson(x, y) -> CorrelationResult:
    """Pearson correlation with a two-sided p value via the t transform."""
    xa = _clean_1d(x, "x", min_n=3)
    ya = _clean_1d(y, "y", min_n=3)
    if xa.size != ya.size:
        raise ValueError("x and y must have equal length")
    n = xa.size
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("correlation undefined for a zero-variance input")
    r = float(np.sum(dx * dy) / (sx * sy))
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        p = 0.0
    else:
        t = r * math.sqrt((n - 2) / (1.0 - r * r))
        p = float(2.0 * _sps.t.sf(abs(t), n - 2))
    return CorrelationResult(r=r, p_value=p, n=n)


_KAPPA_WEIGHTINGS = ("none", "linear", "quadratic")


def cohen_kappa(rater_a, rater_b, weighting: str = "linear") -> float:
    """Weighted Cohen's kappa over integer-rounded scores.

    Scores are rounded to integers; categories span the combined observed
    min..max so ordinal distances are meaningful. Weights measure agreement:
    identity (none), 1 - |i-j|/(k-1) (linear), or 1 - ((i-j)/(k-1))^2
    (quadratic). kappa = (po - pe) / (1 - pe).
    """
    if weighting not in _KAPPA_WEIGHTINGS:
        raise ValueError(f"weighting must be one of {_KAPPA_WEIGHTINGS}")
    a = np.rint(_clean_1d(rater_a, "rater_a", min_n=1)).astype(np.int64)
    b = np.rint(_clean_1d(rater_b, "rater_b", min_n=1)).astype(np.int64)
    if a.size != b.size:
        raise ValueError("raters must score the same items")
    cmin = int(min(a.min(), b.min()))
    cmax = int(max(a.max(), b.max()))
    k = cmax - cmin + 1
    if k == 1:
        raise ValueError("kappa undefined: a single category gives expected agreement 1")
    n = a.size
    observed = np.zeros((k, k), dtype=np.float64)
    np.add.at(observed, (a - cmin, b - cmin), 1.0)
    observed /= n
    ii, jj = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    if weighting == "none":
        weights = (ii == jj).astype(np.float64)
    elif weighting == "linear":
        weights = 1.0 - np.abs(ii - jj) / (k - 1)
    else:
        weights = 1.0 - ((ii - jj) / (k - 1)) ** 2
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0))
    po = float(np.sum(weights * observed))
    pe = float(np.sum(weights * expected))
    if pe == 1.0:
        raise ValueError("kappa undefined: expected agreement is 1")
    return (po - pe) / (1.0 - pe)


def icc_agreement(ratings) -> float:
    """Intraclass correlation: two-way random effects, absolute agreement,
    single measure (the (2,1) convention).

    ratings is an (n subjects, k raters) table.
    """
    table = np.asarray(ratings, dtype=np.float64)
    if table.ndim != 2:
        raise ValueError("ratings must be a 2-d table (subjects x raters)")
    n, k = table.shape
    if n < 2 or k < 2:
        raise ValueError("ICC needs at least 2 subjects and 2 raters")
    if not np.all(np.isfinite(table)):
        raise ValueError("ratings must be finite")
    grand = table.mean()
    row_means = table.mean(axis=1)
    col_means = table.mean(axis=0)
    msr = k * np.sum((row_means - grand) ** 2) / (n - 1)
    msc = n * np.sum((col_means - grand) ** 2) / (k - 1)
    resid = table - row_means[:, None] - col_means[None, :] + grand
    mse = np.sum(resid ** 2) / ((n - 1) * (k - 1))
    den = msr + (k - 1) * mse + (k / n) * (msc - mse)
    if den == 0.0:
        raise ValueError("ICC undefined: no variance anywhere in the table")
    return float((msr - mse) / den)


def ibmd(rater_a, rater_b) -> float:
    """Information-based measure of disagreement.

    Mean over pairs of log2(|a - b| / max(a, b) + 1); a pair of zeros
    contributes zero. Zero when the raters agree exactly on every item.
    """
    a = _clean_1d(rater_a, "rater_a", min_n=1)
    b = _clean_1d(rater_b, "rater_b", min_n=1)
    if a.size != b.size:
        raise ValueError("raters must score the same items")
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("IBMD requires nonnegative ratings")
    m = np.maximum(a, b)
    terms = np.zeros(a.size, dtype=np.float64)
    nz = m > 0
    terms[nz] = np.log2(np.abs(a[nz] - b[nz]) / m[nz] + 1.0)
    return float(terms.mean())


@dataclass(frozen=True)
class NormalityResult:
    statistic: float
    p_value: float
    n: int


def normality(values) -> NormalityResult:
    """Shapiro-Wilk normality check (3 <= n <= 5000)."""
    arr = _clean_1d(values, "values", min_n=3)
    if arr.size > 5000:
        raise ValueError("normality check supports at most 5000 values")
    if float(arr.max()) == float(arr.min()):
        raise ValueError("normality undefined for a constant sample")
    w, p = _sps.shapiro(arr)
    return NormalityResult(statistic=float(w), p_value=float(p), n=arr.size)


def uniform_coverage_select(values, k: int) -> np.ndarray:
    """Greedy farthest-point subset of k indices, uniform over the value range.

    Seeds with the minimum (then, by construction of the greedy step, the
    maximum); each step adds the value farthest from the chosen set, ties
    broken by lower index. While distinct values remain, a duplicate of a
    chosen value is never picked.
    """
    arr = _clean_1d(values, "values", min_n=1)
    n = arr.size
    k = int(k)
    if not (1 <= k <= n):
        raise ValueError(f"k must be between 1 and {n}")
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = int(np.argmin(arr))
    dist = np.abs(arr - arr[chosen[0]])
    dist[chosen[0]] = -1.0  # selected markers never win again
    for i in range(1, k):
        nxt = int(np.argmax(dist))
        chosen[i] = nxt
        np.minimum(dist, np.abs(arr - arr[nxt]), out=dist)
        dist[nxt] = -1.0
    return chosen
