import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from karlin.experiments import random_lemma_cases
from karlin.samplers import RandomStream
from karlin.special_functions import DomainError, ParityPattern, c_alpha
from karlin.theory import (
    FddSpec,
    IntervalQuery,
    cf_exponent,
    cf_theoretical,
    lemma1_lhs,
    lemma1_rhs,
    m_coeff,
    poisson_parity_bruteforce,
    supmeasure_expected_max,
    supmeasure_fdd_prob,
    union_measure,
)
from karlin.limit import fbm_cov


def test_m_coeff_single_time_closed_form():
    assert m_coeff(1.5, 0.5, ParityPattern([1.0], [1])) == pytest.approx(1.7724538509055163, rel=1e-7)
    assert m_coeff(2.0, 0.5, ParityPattern([1.0], [1])) == pytest.approx(2 ** -1.5, rel=1e-7)


@pytest.mark.parametrize("alpha,beta", [(0.7, 0.3), (1.2, 0.8), (1.9, 0.5)])
def test_m_coeff_single_time_general(alpha, beta):
    assert m_coeff(alpha, beta, ParityPattern([1.0], [1])) == pytest.approx(
        2 ** (beta - 1) / c_alpha(alpha), rel=1e-7)


def test_m_coeff_self_similar():
    # a single odd cell [0, t] scales like t^beta
    beta = 0.4
    a = m_coeff(1.5, beta, ParityPattern([0.3], [1]))
    b = m_coeff(1.5, beta, ParityPattern([0.6], [1]))
    assert b / a == pytest.approx(2 ** beta, rel=1e-7)


def test_m_coeff_zero_pattern_is_nonnegative():
    assert m_coeff(1.5, 0.5, ParityPattern([0.5, 1.0], [0, 1])) > 0


def test_cf_gaussian_case_is_fbm_quadratic_form():
    t = [0.5, 1.0]
    th = np.array([0.7, -1.3])
    cov = np.array([[fbm_cov(0.5, a, b) for b in t] for a in t])
    # the CF is exp(-theta' cov theta): a Gaussian vector with covariance 2 * fbm_cov
    assert cf_exponent(2.0, 0.5, FddSpec(t, th)) == pytest.approx(th @ cov @ th, rel=1e-7)


def test_cf_scaling():
    # zeta(c t) has the law of c^(beta/alpha) zeta(t)
    alpha, beta = 1.5, 0.5
    a = cf_theoretical(alpha, beta, FddSpec([0.5], [1.0]))
    b = cf_theoretical(alpha, beta, FddSpec([1.0], [2 ** (-beta / alpha)]))
    assert a == pytest.approx(b, rel=1e-7)


def test_fdd_spec_validation():
    with pytest.raises(DomainError):
        FddSpec([0.5, 0.4], [1, 1])
    with pytest.raises(DomainError):
        FddSpec([0.5], [1, 1])


def test_lemma1_headline_case():
    spec = FddSpec([0.5, 1.0], [1.0, -1.0])
    assert lemma1_rhs(1.5, 0.5, spec) == pytest.approx(lemma1_lhs(1.5, 0.5, spec), rel=1e-5)


def test_lemma1_random_cases():
    for times, thetas in random_lemma_cases(RandomStream(7).child("lemma1"), 6):
        spec = FddSpec(times, thetas)
        assert lemma1_rhs(1.3, 0.6, spec) == pytest.approx(lemma1_lhs(1.3, 0.6, spec), rel=1e-5)


def test_lemma1_remainder_bound_reported():
    res = lemma1_rhs(1.5, 0.5, FddSpec([0.3, 0.9], [1.0, 0.5]), tol=1e-10, full_output=True)
    assert res.tail_bound < 1e-10
    assert res.cutoff >= 64


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 20.0))
def test_bruteforce_parity_two_times(q):
    p = ParityPattern([0.4, 1.0], [1, 1])
    # odd on (0, 0.4], even on (0.4, 1]
    a = math.exp(-0.4 * q)
    b = math.exp(-0.6 * q)
    ref = (1 - a * a) / 2 * (1 + b * b) / 2
    assert poisson_parity_bruteforce(p, q) == pytest.approx(ref, abs=1e-12)


def test_union_measure_exact():
    from fractions import Fraction as F
    assert union_measure([(F(0), F(1, 4)), (F(1, 8), F(1, 2)), (F(3, 4), F(1))]) == F(3, 4)
    assert union_measure([]) == 0


def test_supmeasure_probabilities():
    q = IntervalQuery([(0.0, 0.25), (0.5, 0.75)], [1.0, 1.0])
    assert supmeasure_fdd_prob(1.5, 0.5, q) == pytest.approx(0.4930686913952398, rel=1e-12)
    assert supmeasure_fdd_prob(1.5, 0.5, IntervalQuery([(0, 1)], [2.0])) == pytest.approx(
        math.exp(-2 ** -1.5), rel=1e-14)


def test_supmeasure_nested_intervals():
    # thresholds on nested intervals: the inner one only matters if its weight is larger
    q = IntervalQuery([(0.0, 1.0), (0.2, 0.4)], [1.0, 2.0])
    assert supmeasure_expected_max(1.5, 0.5, q) == pytest.approx(1.0, rel=1e-14)
    q = IntervalQuery([(0.0, 1.0), (0.2, 0.4)], [2.0, 1.0])
    w1, w2 = 2 ** -1.5, 1.0
    assert supmeasure_expected_max(1.5, 0.5, q) == pytest.approx(w2 * 0.2 ** 0.5 + w1 * (1 - 0.2 ** 0.5))


def test_interval_query_validation():
    with pytest.raises(DomainError):
        IntervalQuery([(0.5, 0.5)], [1.0])
    with pytest.raises(DomainError):
        IntervalQuery([(0.0, 0.5)], [0.0])
