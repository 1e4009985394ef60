import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from karlin.samplers import RandomStream
from karlin.special_functions import DomainError
from karlin.stats import (
    correlation_estimate,
    ecf_estimate,
    kolmogorov_sf,
    ks_2sample,
    ks_test,
    mean_estimate,
    merge_cells,
    pmf_chisq,
    proportion_estimate,
    two_sample_chisq,
)


def test_ecf_of_constant():
    est = ecf_estimate(np.zeros(10), [3.0])
    assert est.real_part == 1.0 and est.std_error == 0.0
    assert est.imag_part == 0.0


def test_ecf_normal_sample():
    x = RandomStream(1).generator.standard_normal(50_000)
    est = ecf_estimate(x, [1.0])
    assert abs(est.z_score(math.exp(-0.5))) < 4
    assert est.std_error <= 1 / math.sqrt(50_000)


def test_ecf_order_invariant():
    x = RandomStream(2).generator.standard_cauchy((1000, 2))
    a = ecf_estimate(x, [0.3, -0.7])
    b = ecf_estimate(x[::-1], [0.3, -0.7])
    assert a == b


def test_ecf_shape_mismatch():
    with pytest.raises(DomainError):
        ecf_estimate(np.zeros((5, 2)), [1.0])


@given(st.floats(0.05, 3.0))
def test_kolmogorov_sf_matches_scipy(lam):
    assert kolmogorov_sf(lam) == pytest.approx(sps.kstwobign.sf(lam), abs=1e-10)


def test_ks_uniform():
    u = RandomStream(3).uniform(5000)
    res = ks_test(u, lambda x: x)
    ref = sps.kstest(u, "uniform", method="asymp")
    assert res.statistic == pytest.approx(ref.statistic, rel=1e-12)
    assert res.pvalue == pytest.approx(ref.pvalue, rel=1e-6)


def test_ks_detects_shift():
    u = RandomStream(3).uniform(5000) * 0.9
    assert ks_test(u, lambda x: x).pvalue < 1e-6


def test_ks_degenerate_flag():
    assert ks_test(np.ones(20), lambda x: np.clip(x, 0, 1)).degenerate


def test_ks_2sample():
    g = RandomStream(4).generator
    assert ks_2sample(g.normal(size=2000), g.normal(size=3000)).pvalue > 0.001
    assert ks_2sample(g.normal(size=2000), g.normal(0.3, size=3000)).pvalue < 1e-6


def test_merge_cells():
    assert merge_cells(np.array([10.0, 2.0, 2.0, 2.0, 1.0])) == [[0], [1, 2, 3, 4]]
    assert merge_cells(np.array([1.0, 1.0])) == [[0, 1]]


def test_pmf_chisq_remainder_cell():
    counts = np.array([500, 250, 125])
    res = pmf_chisq(counts, [0.5, 0.25, 0.125], total=1000)
    assert res.statistic == pytest.approx(0.0)
    assert res.dof == 3


def test_pmf_chisq_errors():
    with pytest.raises(DomainError):
        pmf_chisq([1, 2], [0.7, 0.7])
    with pytest.raises(DomainError):
        pmf_chisq([10, 10], [0.5, 0.5], total=5)


def test_two_sample_chisq_identical():
    a = np.array([30, 40, 50, 2, 1])
    res = two_sample_chisq(a, a)
    assert res.statistic == pytest.approx(0.0)
    assert res.pvalue == pytest.approx(1.0)


def test_estimates():
    est = proportion_estimate([True, False, False, True])
    assert est == (0.5, 0.25)
    m = mean_estimate([1.0, 2.0, 3.0])
    assert m.value == 2.0 and m.std_error == pytest.approx(math.sqrt(1 / 3))


def test_correlation_standard_error_normal():
    # for bivariate normal data the delta-method s.e. is (1 - r^2) / sqrt(n)
    g = RandomStream(5).generator
    r, n = 0.6, 100_000
    x = g.standard_normal(n)
    y = r * x + math.sqrt(1 - r * r) * g.standard_normal(n)
    est = correlation_estimate(x, y)
    assert abs(est.value - r) < 4 * est.std_error
    assert est.std_error == pytest.approx((1 - r * r) / math.sqrt(n), rel=0.05)
