import math

import numpy as np
import pytest

from karlin.model import (
    BudgetError,
    ModelParams,
    PlanWarning,
    PointMeasureSample,
    SimulationPlan,
    aggregate_fdd,
    conditional_exceedance_samples,
    discrete_sup_measure,
    exceedance_probability,
    extract_extremal_points,
    extremal_points_one,
    grid_indices,
    norm_const,
    replica_fdd,
    replica_parity_gaps,
    replica_parity_naive,
    site_values,
)
from karlin.samplers import Gaussian, RandomStream, Rademacher, SymmetrizedPareto
from karlin.special_functions import DomainError, bernoulli_odd_probability
from karlin.stats import proportion_estimate, two_sample_chisq

PARAMS = ModelParams(alpha=1.5, alpha_prime=1.5, rho=0.5)


def test_params_derived():
    assert PARAMS.gamma == 1.0
    assert PARAMS.beta == 0.5
    assert isinstance(PARAMS.innovation, SymmetrizedPareto)
    assert isinstance(ModelParams(2.0, 2.0, 0.75).innovation, Gaussian)


def test_params_validation():
    with pytest.raises(DomainError):
        ModelParams(1.5, 1.5, 1.0)
    with pytest.raises(DomainError):
        ModelParams(1.5, 0.5, 0.5)  # beta = 3.5
    with pytest.raises(DomainError):
        ModelParams(1.5, 1.5, 0.5, innovation=Rademacher())
    with pytest.raises(DomainError):
        ModelParams(2.0, 2.0, 0.5, c_x=2.0, innovation=Rademacher())
    with pytest.raises(DomainError):
        ModelParams(1.5, 1.5, 0.5, innovation=SymmetrizedPareto(1.2))


def test_enriquez_preset():
    p = ModelParams.enriquez(0.375)
    assert (p.alpha, p.alpha_prime, p.rho, p.beta) == (2.0, 2.0, 0.75, 0.75)
    assert isinstance(p.innovation, Rademacher)


def test_norm_const():
    # (Gamma(1/2) / (1/2) * 100^(1/2) * 10 * (1/2))^(2/3) with c_x = 1
    ref = (math.sqrt(math.pi) * 2 * 10 * 10 * 0.5) ** (2 / 3)
    assert norm_const(PARAMS, 100, 10) == pytest.approx(ref, rel=1e-14)
    assert norm_const(ModelParams(2.0, 2.0, 0.5), 100, 100) == pytest.approx(
        math.sqrt(math.sqrt(math.pi) * 2 * 10 * 100 * 0.5), rel=1e-14)


def test_plan_validation_and_growth():
    plan = SimulationPlan.with_growth(5000, 0.8, R=10)
    assert plan.m_n == 911
    with pytest.raises(DomainError):
        SimulationPlan(10, 10, times=(0.5, 0.5))
    with pytest.raises(DomainError):
        SimulationPlan(10, 10, epsilon=0.0)
    with pytest.warns(PlanWarning):
        SimulationPlan(10_000, 5).validate(PARAMS)


def test_grid_indices_floor():
    assert list(grid_indices(2000, [0.25, 0.5, 1.0])) == [500, 1000, 2000]
    assert list(grid_indices(10, [0.3, 0.7])) == [3, 7]


def test_replica_fdd_values():
    out = replica_fdd(0.25, 2.0, 2.0, 100, [0.5, 1.0], RandomStream(1))
    assert set(np.unique(out)) <= {0.0, 4.0}
    with pytest.raises(DomainError):
        replica_fdd(1.0, 1.0, 1.0, 10, [1.0], RandomStream(1))


def test_parity_gaps_match_naive_in_law():
    n, q, runs = 50, 0.3, 20_000
    s1, s2 = RandomStream(1).child("naive"), RandomStream(1).child("gaps")
    a = np.bincount([replica_parity_naive(q, n, s1)[1] for _ in range(runs)], minlength=51)
    b = np.bincount([replica_parity_gaps(q, n, s2)[1] for _ in range(runs)], minlength=51)
    assert two_sample_chisq(a, b).pvalue > 1e-3
    odd = sum(a[1::2]) / runs
    assert abs(odd - bernoulli_odd_probability(q, n)) < 4 * 0.5 / math.sqrt(runs)


def test_aggregate_fdd_thread_invariant():
    plan = SimulationPlan(200, 30, R=40, times=(0.5, 1.0), seed=3)
    a = aggregate_fdd(PARAMS, plan, threads=1)
    b = aggregate_fdd(PARAMS, plan, threads=3)
    assert a.shape == (40, 2)
    assert np.array_equal(a, b)


def test_aggregate_budget():
    plan = SimulationPlan(1000, 1000, R=1000)
    with pytest.raises(BudgetError):
        aggregate_fdd(PARAMS, plan, budget=1e8)


def test_point_measure_validation():
    with pytest.raises(DomainError):
        PointMeasureSample([1.0], [1.5], 0.5)
    with pytest.raises(DomainError):
        PointMeasureSample([0.0], [0.5], 0.5)
    s = PointMeasureSample([2.0, -3.0], [0.1, 0.6], 1.0)
    assert s.count_above(2.5) == 1
    assert s.max_abs() == 3.0
    assert list(s.cluster) == [-1, -1]


def test_discrete_sup_measure_intervals():
    vals = np.array([1.0, -5.0, 2.0, 3.0])  # sites 1/4, 2/4, 3/4, 1
    assert discrete_sup_measure(vals, (0.0, 1.0)) == 5.0
    assert discrete_sup_measure(vals, (0.5, 1.0)) == 3.0
    assert discrete_sup_measure(vals, (0.0, 0.5)) == 1.0
    assert discrete_sup_measure(vals, (0.3, 0.45)) == 0.0


def test_sites_agree_with_dense_values():
    n, m_n, R = 400, 60, 3000
    dense = np.array([np.abs(site_values(PARAMS, n, m_n, RandomStream(2).child("d", r))).max()
                      for r in range(R)])
    sparse = np.array([extremal_points_one(PARAMS, n, m_n, 1.0, RandomStream(2).child("s", r)).max_abs()
                       for r in range(R)])
    for x in (1.0, 2.0):
        a = proportion_estimate(dense <= x)
        b = proportion_estimate(sparse <= x)
        assert abs(a.value - b.value) < 4 * math.hypot(a.std_error, b.std_error)


def test_extract_thread_invariant():
    plan = SimulationPlan(300, 50, R=30, seed=5)
    a = extract_extremal_points(PARAMS, plan, threads=1)
    b = extract_extremal_points(PARAMS, plan, threads=4)
    for x, y in zip(a, b):
        assert np.array_equal(x.values, y.values) and np.array_equal(x.locations, y.locations)


def test_signed_points_alternate():
    s = extremal_points_one(PARAMS, 500, 100, 0.3, RandomStream(8), signed=True)
    for i, v in enumerate(s.cluster_values):
        pts = s.values[s.cluster == i]
        assert np.all(pts[0::2] == -v) and np.all(pts[1::2] == v)


def test_exceedance_probability_limit():
    p = exceedance_probability(PARAMS, 10**6, 10**6, 1.0)
    assert 10**6 * p == pytest.approx(1.0, abs=0.01)


def test_conditional_acceptance_matches_exact():
    n, m_n = 10_000, 200
    batch = conditional_exceedance_samples(PARAMS, n, m_n, 1.0, 3000, RandomStream(4))
    exact = exceedance_probability(PARAMS, n, m_n, 1.0)
    se = math.sqrt(exact * (1 - exact) / batch.attempts)
    assert abs(batch.acceptance_rate - exact) < 4 * se
    assert np.all(batch.tau >= 1)
    assert np.all(np.abs(batch.magnitude) > 1.0)


def test_conditional_budget():
    with pytest.raises(BudgetError) as info:
        conditional_exceedance_samples(PARAMS, 10_000, 200, 1.0, 1000, RandomStream(4), budget=5000)
    assert info.value.attempts == 5000
