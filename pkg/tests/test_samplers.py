import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from karlin.samplers import (
    CustomQ,
    Gaussian,
    PowerLawQ,
    RandomStream,
    Rademacher,
    SymmetrizedPareto,
    geometric_gap,
    pareto_magnitude,
    poisson_arrivals,
    sample_innovation,
    sample_q,
    sample_sibuya,
    sibuya_from_uniform,
    success_positions,
)
from karlin.special_functions import DomainError, sibuya_pmf, sibuya_survival
from karlin.stats import ks_test, pmf_chisq


def test_stream_is_pure_function_of_path():
    a = RandomStream(5).child("x", 3).uniform(10)
    b = RandomStream(5, ("x", 3)).uniform(10)
    c = RandomStream(5).child("x", 4).uniform(10)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_stream_uniform_open_interval():
    u = RandomStream(1).uniform(100_000)
    assert np.all((u > 0) & (u < 1))


@given(st.floats(0.2, 0.95), st.floats(1e-8, 1.0, exclude_max=True))
def test_sibuya_inversion_definition(beta, u):
    assume(sibuya_survival(beta, 2 ** 62) < u)
    n = sibuya_from_uniform(beta, u)
    assert sibuya_survival(beta, n) < u
    assert n == 1 or sibuya_survival(beta, n - 1) >= u


def test_sibuya_inversion_far_tail():
    beta = 0.5
    u = np.array([1e-5, 1e-9])
    n = sibuya_from_uniform(beta, u)
    for ni, ui in zip(n, u):
        assert sibuya_survival(beta, int(ni)) < ui <= sibuya_survival(beta, int(ni) - 1)


def test_sibuya_inversion_clips_with_warning():
    with pytest.warns(RuntimeWarning, match="clipped"):
        n = sibuya_from_uniform(0.1, 1e-12)
    assert n == 2 ** 62


def test_sibuya_sampler_chisq():
    beta = 0.5
    draws = sample_sibuya(beta, RandomStream(11), 100_000)
    cells = np.arange(1, 60)
    counts = np.array([(draws == k).sum() for k in cells])
    res = pmf_chisq(counts, sibuya_pmf(beta, cells), total=draws.size)
    assert res.pvalue > 1e-3


def test_q_sampler_ks():
    rho = 0.5
    q = sample_q(rho, RandomStream(3), 20_000)
    assert np.all((q > 0) & (q < 1))
    assert ks_test(q, lambda x: np.power(x, 1 - rho)).pvalue > 0.01


def test_power_law_q():
    law = PowerLawQ(0.25)
    assert law.slowly_varying(1e6) == 0.75
    with pytest.raises(DomainError):
        PowerLawQ(1.0)


def test_custom_q_warns():
    with pytest.warns(UserWarning, match="experimental"):
        law = CustomQ(0.5, lambda s, n: sample_q(0.5, s, n), lambda x: 0.5)
    assert law.slowly_varying(10.0) == 0.5


def test_pareto_tail_ks():
    law = SymmetrizedPareto(1.5, 2.0)
    x = sample_innovation(law, RandomStream(4), 20_000)
    assert ks_test(np.abs(x), lambda v: 1 - law.tail(v)).pvalue > 0.01
    assert abs(np.mean(x > 0) - 0.5) < 4 * 0.5 / math.sqrt(x.size)


def test_pareto_magnitude_inverse():
    assert pareto_magnitude(2.0, 4.0, 0.25) == pytest.approx(4.0)


def test_pareto_finite_variance_flag():
    assert SymmetrizedPareto(3.0).finite_variance
    assert not SymmetrizedPareto(1.5).finite_variance


def test_rademacher_and_gaussian():
    s = RandomStream(8)
    r = sample_innovation(Rademacher(), s, 1000)
    assert set(np.unique(r)) <= {-1.0, 1.0}
    g = sample_innovation(Gaussian(4.0), s, 50_000)
    assert g.var() == pytest.approx(4.0, rel=0.05)


def test_poisson_arrivals_increase():
    g = poisson_arrivals(1000, RandomStream(2))
    assert np.all(np.diff(g) > 0)
    assert g[-1] == pytest.approx(1000, rel=0.15)


def test_geometric_gap_values():
    assert geometric_gap(1 - 1e-16, 0.3) == 1
    # P(gap > k) = (1 - q)^k, so u = (1 - q)^k sits exactly on the boundary
    assert geometric_gap(0.5, 0.25) == 2
    assert geometric_gap(0.5, 0.2) == 3


def test_success_positions_extreme_q():
    pos = success_positions(1 - 1e-16, 20, RandomStream(1))
    assert np.array_equal(pos, np.arange(1, 21))
    assert success_positions(1e-12, 100, RandomStream(1)).size == 0
