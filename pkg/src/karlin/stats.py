"""Comparison of simulated samples with exact laws."""

from __future__ import annotations

import math
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import stats as sps

from .special_functions import DomainError


class EcfEstimate(NamedTuple):
    real_part: float
    std_error: float
    count: int
    imag_part: float
    imag_std_error: float

    def z_score(self, target: float) -> float:
        if self.std_error == 0.0:
            return 0.0 if self.real_part == target else math.inf
        return (self.real_part - target) / self.std_error


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    # fsum is correctly rounded, so the result does not depend on sample order
    n = values.size
    mean = math.fsum(values) / n
    var = math.fsum((values - mean) ** 2) / n
    return mean, math.sqrt(var / n)


def ecf_estimate(samples, thetas) -> EcfEstimate:
    """Empirical CF ``mean exp(i <theta, v>)`` with its standard error.

    ``samples`` is ``R x d`` (or a length-``R`` vector when ``d = 1``). The
    standard error uses the ``1/R`` variance, so it never exceeds ``1/sqrt(R)``.
    """
    x = np.asarray(samples, dtype=np.float64)
    theta = np.atleast_1d(np.asarray(thetas, dtype=np.float64))
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] != theta.size:
        raise DomainError(f"samples of shape {x.shape} do not match {theta.size} thetas")
    if x.shape[0] < 2:
        raise DomainError("need at least two samples")
    phase = (x * theta).sum(axis=1)  # no BLAS, so rows are reduced identically in any layout
    re, se = _mean_se(np.cos(phase))
    im, se_im = _mean_se(np.sin(phase))
    return EcfEstimate(re, se, x.shape[0], im, se_im)


class KsResult(NamedTuple):
    statistic: float
    pvalue: float
    degenerate: bool


def kolmogorov_sf(lam: float, eps: float = 1e-12) -> float:
    """``P(K > lam)`` for the Kolmogorov distribution."""
    if lam <= 0:
        return 1.0
    if lam < 0.3:
        # the alternating series converges slowly here; the theta-function form does not
        s = 0.0
        k = 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * math.pi ** 2 / (8 * lam * lam))
            s += term
            if term < eps:
                break
            k += 1
        return max(0.0, 1.0 - math.sqrt(2 * math.pi) / lam * s)
    total = 0.0
    k = 1
    while True:
        term = 2.0 * math.exp(-2.0 * k * k * lam * lam)
        total += term if k % 2 else -term
        if term < eps:
            break
        k += 1
    return min(1.0, max(0.0, total))


def ks_test(sample: Sequence[float], cdf: Callable) -> KsResult:
    """Two-sided one-sample KS statistic with the asymptotic Kolmogorov p-value."""
    x = np.sort(np.asarray(sample, dtype=np.float64))
    n = x.size
    if n < 10:
        raise DomainError("KS test needs at least 10 observations")
    f = np.asarray(cdf(x), dtype=np.float64)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    return KsResult(d, kolmogorov_sf(math.sqrt(n) * d), bool(x[0] == x[-1]))


def ks_2sample(a: Sequence[float], b: Sequence[float]) -> KsResult:
    res = sps.ks_2samp(a, b, method="asymp")
    return KsResult(float(res.statistic), float(res.pvalue), bool(np.ptp(a) == 0 or np.ptp(b) == 0))


class ChisqResult(NamedTuple):
    statistic: float
    pvalue: float
    dof: int


def merge_cells(expected: np.ndarray, minimum: float = 5.0) -> list[list[int]]:
    """Group consecutive cells left to right until each group expects at least ``minimum``.

    A short final group is folded into the previous one.
    """
    groups, cur, acc = [], [], 0.0
    for i, e in enumerate(expected):
        cur.append(i)
        acc += e
        if acc >= minimum:
            groups.append(cur)
            cur, acc = [], 0.0
    if cur:
        if not groups:
            groups.append(cur)
        else:
            groups[-1].extend(cur)
    return groups


def pmf_chisq(observed: Sequence[int], probabilities: Sequence[float], total: int | None = None,
              minimum: float = 5.0) -> ChisqResult:
    """Pearson chi-square of counts against cell probabilities.

    Mass ``1 - sum(probabilities)`` goes to a remainder cell whose count is
    ``total - sum(observed)``. Cells are merged so that every expected count
    is at least ``minimum``.
    """
    obs = np.asarray(observed, dtype=np.float64)
    p = np.asarray(probabilities, dtype=np.float64)
    if obs.shape != p.shape:
        raise DomainError("observed and probabilities must have the same length")
    if np.any(p < 0) or p.sum() > 1 + 1e-12:
        raise DomainError("probabilities must be nonnegative and sum to at most 1")
    n = float(obs.sum() if total is None else total)
    rest_p = max(0.0, 1.0 - p.sum())
    rest_o = n - obs.sum()
    if rest_o < 0:
        raise DomainError("total is smaller than the observed counts")
    if rest_p > 0 or rest_o > 0:
        obs = np.append(obs, rest_o)
        p = np.append(p, rest_p)
    exp = n * p
    groups = merge_cells(exp, minimum)
    e = np.array([exp[g].sum() for g in groups])
    o = np.array([obs[g].sum() for g in groups])
    if len(groups) < 2 or np.any(e < minimum):
        raise DomainError("too few expected counts after merging cells")
    with np.errstate(divide="ignore"):
        stat = float(np.sum(np.where(e > 0, (o - e) ** 2 / e, np.where(o > 0, np.inf, 0.0))))
    dof = len(groups) - 1
    return ChisqResult(stat, float(sps.chi2.sf(stat, dof)), dof)


def two_sample_chisq(a: Sequence[int], b: Sequence[int]) -> ChisqResult:
    """Homogeneity chi-square of two count vectors over the same categories."""
    table = np.vstack([np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)])
    keep = table.sum(axis=0) > 0
    table = table[:, keep]
    # merge sparse categories by pooled expected count
    pooled = table.sum(axis=0)
    groups = merge_cells(pooled * min(table.sum(axis=1)) / pooled.sum(), 5.0)
    merged = np.array([[row[g].sum() for g in groups] for row in table])
    stat, p, dof, _ = sps.chi2_contingency(merged, correction=False)
    return ChisqResult(float(stat), float(p), int(dof))


class Estimate(NamedTuple):
    value: float
    std_error: float

    def z_score(self, target: float) -> float:
        if self.std_error == 0.0:
            return 0.0 if self.value == target else math.inf
        return (self.value - target) / self.std_error


def mean_estimate(values) -> Estimate:
    x = np.asarray(values, dtype=np.float64)
    m, se = _mean_se(x)
    return Estimate(m, se * math.sqrt(x.size / max(x.size - 1, 1)))


def proportion_estimate(flags) -> Estimate:
    x = np.asarray(flags, dtype=bool)
    p = float(np.count_nonzero(x)) / x.size
    return Estimate(p, math.sqrt(p * (1 - p) / x.size))


def correlation_estimate(x, y) -> Estimate:
    """Sample correlation with the delta-method standard error (no normality assumption)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    xc = (x - x.mean()) / x.std()
    yc = (y - y.mean()) / y.std()
    r = float(np.mean(xc * yc))
    # influence function of the correlation coefficient
    infl = xc * yc - 0.5 * r * (xc ** 2 + yc ** 2)
    return Estimate(r, float(infl.std() / math.sqrt(n)))


def covariance_estimate(x, y) -> Estimate:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    prod = (x - x.mean()) * (y - y.mean())
    return Estimate(float(prod.mean()), float(prod.std() / math.sqrt(x.size)))
