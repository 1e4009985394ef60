"""Simulation and limit theory of Karlin-type aggregated random walks."""

from .limit import (
    KarlinParams,
    fbm_cov,
    gaussian_karlin_fdd,
    limit_point_process_sample,
    limit_supmeasure_sample,
    truncation_level,
    zeta_series_fdd,
)
from .model import (
    BudgetError,
    ModelParams,
    PointMeasureSample,
    SimulationPlan,
    aggregate_fdd,
    conditional_exceedance_sample,
    discrete_sup_measure,
    extract_extremal_points,
    norm_const,
    replica_fdd,
)
from .samplers import DEFAULT_SEED, RandomStream
from .special_functions import DomainError, ParityPattern, c_alpha
from .stats import ecf_estimate, ks_test, pmf_chisq
from .theory import (
    FddSpec,
    IntervalQuery,
    cf_theoretical,
    lemma1_rhs,
    m_coeff,
    supmeasure_fdd_prob,
)

__version__ = "0.1.0"
