"""Simulation of the aggregated model.

Each replica carries a random rate ``q``, an innovation ``X`` and a
Bernoulli(q) path; its partial sum at step ``j`` is ``X q^(-1/alpha')`` times
the parity of the number of successes up to ``j``.  Aggregates sum ``m_n``
independent replicas and are normalized by ``a_n``.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .samplers import (
    DEFAULT_SEED,
    CustomQ,
    Gaussian,
    InnovationLaw,
    PowerLawQ,
    RandomStream,
    Rademacher,
    SymmetrizedPareto,
    sample_innovation,
    success_positions,
)
from .special_functions import DomainError, bernoulli_odd_probability

DEFAULT_BUDGET = 10**12


class BudgetError(RuntimeError):
    """Simulation would exceed the configured work budget."""

    def __init__(self, message: str, attempts: Optional[int] = None):
        super().__init__(message)
        self.attempts = attempts


class PlanWarning(UserWarning):
    pass


def resolve_budget(budget: Optional[float] = None) -> float:
    if budget is not None:
        return float(budget)
    env = os.environ.get("KARLIN_BUDGET")
    return float(env) if env else float(DEFAULT_BUDGET)


def check_budget(steps: float, budget: Optional[float] = None) -> None:
    cap = resolve_budget(budget)
    if steps > cap:
        raise BudgetError(f"{steps:.3g} Bernoulli steps exceed the budget {cap:.3g}")


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    alpha_prime: float
    rho: float
    c_x: float = 1.0
    innovation: Optional[InnovationLaw] = None
    q_law: Union[PowerLawQ, CustomQ, None] = None

    def __post_init__(self):
        if self.alpha <= 0 or self.alpha_prime <= 0:
            raise DomainError("alpha and alpha_prime must be positive")
        if not self.rho < 1:
            raise DomainError(f"rho must be < 1, got {self.rho}")
        if self.c_x <= 0:
            raise DomainError("c_x must be positive")
        if self.innovation is None:
            law = (SymmetrizedPareto(self.alpha, self.c_x) if self.alpha != 2.0
                   else Gaussian(self.c_x))
            object.__setattr__(self, "innovation", law)
        if self.q_law is None:
            object.__setattr__(self, "q_law", PowerLawQ(self.rho))
        law = self.innovation
        if isinstance(law, SymmetrizedPareto):
            if not (math.isclose(law.alpha, self.alpha) and math.isclose(law.c_x, self.c_x)):
                raise DomainError("Pareto innovation must share the model's alpha and c_x")
        elif isinstance(law, (Rademacher, Gaussian)):
            if self.alpha != 2.0:
                raise DomainError("finite-variance innovations require alpha = 2")
            if not math.isclose(self.c_x, law.second_moment):
                raise DomainError(f"c_x must equal E X^2 = {law.second_moment} for {law}")
        if not (0.0 < self.beta < 1.0):
            raise DomainError(f"beta = gamma - 1 + rho = {self.beta:.6g} must lie in (0, 1)")

    @property
    def gamma(self) -> float:
        return self.alpha / self.alpha_prime

    @property
    def beta(self) -> float:
        return self.gamma - 1.0 + self.rho

    def slowly_varying(self, x: float) -> float:
        return self.q_law.slowly_varying(x)

    @classmethod
    def enriquez(cls, hurst: float) -> "ModelParams":
        """alpha = alpha' = 2, rho = 2H with Rademacher innovations, so beta = 2H."""
        return cls(alpha=2.0, alpha_prime=2.0, rho=2.0 * hurst, c_x=1.0, innovation=Rademacher())

    def to_dict(self) -> dict:
        law = self.innovation
        return {
            "alpha": self.alpha,
            "alpha_prime": self.alpha_prime,
            "rho": self.rho,
            "c_x": self.c_x,
            "beta": self.beta,
            "gamma": self.gamma,
            "innovation": type(law).__name__,
        }


def grid_indices(n: int, times: Sequence[float]) -> np.ndarray:
    """``floor(n t)`` with a small guard against representation error in ``n t``."""
    return np.array([int(math.floor(n * t + 1e-9)) for t in times], dtype=np.int64)


@dataclass(frozen=True)
class SimulationPlan:
    n: int
    m_n: int
    R: int = 1000
    times: tuple[float, ...] = (1.0,)
    seed: int = DEFAULT_SEED
    epsilon: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        if self.n < 1 or self.m_n < 1 or self.R < 1:
            raise DomainError("n, m_n and R must be >= 1")
        if self.epsilon <= 0:
            raise DomainError("epsilon must be positive")
        t = self.times
        if not t or t[0] <= 0 or t[-1] > 1 or any(b <= a for a, b in zip(t, t[1:])):
            raise DomainError("times must be strictly increasing in (0, 1]")

    @classmethod
    def with_growth(cls, n: int, kappa: float, scale: float = 1.0, **kw) -> "SimulationPlan":
        """Plan with ``m_n = ceil(scale * n^kappa)``."""
        return cls(n=n, m_n=int(math.ceil(scale * n ** kappa)), **kw)

    def validate(self, params: ModelParams) -> list[str]:
        """Warn when the asymptotic growth conditions on ``m_n`` look violated."""
        notes = []
        ratio = self.m_n * params.slowly_varying(self.n) / self.n ** (1.0 - params.rho)
        if ratio < 1.0:
            notes.append(f"m_n L(n) / n^(1-rho) = {ratio:.3g} < 1; the CLT regime needs it large")
        if params.alpha > 2.0:
            kappa_max = 2.0 * params.beta / (params.alpha - 2.0)
            kappa = math.log(self.m_n) / math.log(self.n) if self.n > 1 else 0.0
            if kappa >= kappa_max:
                notes.append(f"m_n ~ n^{kappa:.3g} violates m_n <= n^kappa with kappa < {kappa_max:.3g}")
        for note in notes:
            warnings.warn(note, PlanWarning, stacklevel=2)
        return notes


def norm_const(params: ModelParams, n: int, m_n: int) -> float:
    """``a_n = (C_X Gamma(1-beta)/beta n^beta m_n L(n))^(1/alpha)``."""
    beta = params.beta
    inner = params.c_x * math.gamma(1.0 - beta) / beta * n ** beta * m_n * params.slowly_varying(n)
    return inner ** (1.0 / params.alpha)


# -- single replica ----------------------------------------------------------

def replica_fdd(q: float, x: float, alpha_prime: float, n: int, times: Sequence[float],
                stream: RandomStream) -> np.ndarray:
    """``S_{floor(n t_k)}`` of one replica, with successes drawn by geometric gaps."""
    if not (0.0 < q < 1.0):
        raise DomainError("q must lie in (0, 1)")
    idx = grid_indices(n, times)
    succ = success_positions(q, int(idx[-1]), stream)
    tau = np.searchsorted(succ, idx, side="right")
    return (x / q ** (1.0 / alpha_prime)) * (tau % 2).astype(np.float64)


def replica_parity_naive(q: float, n: int, stream: RandomStream) -> tuple[int, int]:
    """``(tau_n mod 2, tau_n)`` from ``n`` explicit Bernoulli trials."""
    tau = int(np.count_nonzero(stream.uniform(n) < q))
    return tau % 2, tau


def replica_parity_gaps(q: float, n: int, stream: RandomStream) -> tuple[int, int]:
    """``(tau_n mod 2, tau_n)`` from geometric gaps."""
    tau = int(success_positions(q, n, stream).size)
    return tau % 2, tau


# -- aggregates --------------------------------------------------------------

def _aggregate_one(params: ModelParams, a_n: float, m_n: int, cells: np.ndarray,
                   stream: RandomStream) -> np.ndarray:
    q = params.q_law.sample(stream, m_n)
    x = sample_innovation(params.innovation, stream, m_n)
    coef = x / (a_n * np.power(q, 1.0 / params.alpha_prime))
    # parity of Binomial(cell length, q) per cell, then running xor across cells
    odd = stream.uniform((m_n, cells.size)) < bernoulli_odd_probability(q[:, None], cells[None, :])
    parity = np.logical_xor.accumulate(odd, axis=1)
    return (coef[:, None] * parity).sum(axis=0)


def _run_indexed(fn, count: int, threads: int):
    if threads <= 1:
        return [fn(r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count), chunksize=max(1, count // (8 * threads))))


def aggregate_fdd(params: ModelParams, plan: SimulationPlan, budget: Optional[float] = None,
                  threads: int = 1, tag: str = "fdd") -> np.ndarray:
    """``R x d`` array of ``S_hat_n(t_k) / a_n``.

    Sample ``r`` draws all of its replicas from the stream ``(seed, tag, r)``, so
    results do not depend on ``threads``. Cell parities are drawn directly from
    ``P(Binomial(m, q) odd)``, which has the law of the parity of the success
    count on each cell of the grid.
    """
    check_budget(float(plan.n) * plan.m_n * plan.R, budget)
    a_n = norm_const(params, plan.n, plan.m_n)
    idx = grid_indices(plan.n, plan.times)
    cells = np.diff(np.concatenate(([0], idx))).astype(np.float64)
    root = RandomStream(plan.seed)

    def one(r: int) -> np.ndarray:
        return _aggregate_one(params, a_n, plan.m_n, cells, root.child(tag, r))

    return np.vstack(_run_indexed(one, plan.R, threads))


# -- point measures ----------------------------------------------------------

@dataclass
class PointMeasureSample:
    """Finite point measure on (R minus {0}) x [0, 1], restricted to ``|value| > threshold``.

    ``cluster_values``/``cluster_sizes`` describe the replicas (or limit
    clusters) whose magnitude exceeds the threshold and which have at least one
    point; ``cluster`` maps each point to its cluster, or -1 when a point is a
    site aggregate of several replicas.
    """

    values: np.ndarray
    locations: np.ndarray
    threshold: float
    cluster: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    cluster_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cluster_sizes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    truncated: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.locations = np.asarray(self.locations, dtype=np.float64)
        if self.values.shape != self.locations.shape:
            raise DomainError("values and locations must have the same length")
        if not np.all(np.isfinite(self.values)) or np.any(self.values == 0):
            raise DomainError("point values must be finite and nonzero")
        if np.any((self.locations < 0) | (self.locations > 1)):
            raise DomainError("locations must lie in [0, 1]")
        if self.cluster.size == 0 and self.values.size:
            self.cluster = np.full(self.values.size, -1, dtype=np.int64)

    def __len__(self) -> int:
        return self.values.size

    def count_above(self, x: float) -> int:
        return int(np.count_nonzero(np.abs(self.values) > x))

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0


def _replica_draws(params: ModelParams, a_n: float, m_n: int, stream: RandomStream):
    q = params.q_law.sample(stream, m_n)
    x = sample_innovation(params.innovation, stream, m_n)
    coef = x / (a_n * np.power(q, 1.0 / params.alpha_prime))
    return q, coef


def _positions(n: int, tau: int, stream: RandomStream) -> np.ndarray:
    # given tau successes among n exchangeable trials, the success set is a uniform subset
    pos = stream.generator.choice(n, size=tau, replace=False) + 1
    pos.sort()
    return pos


def site_values(params: ModelParams, n: int, m_n: int, stream: RandomStream,
                budget: Optional[float] = None) -> np.ndarray:
    """Dense ``(sum_i X_i eta_ij / (a_n q_i^(1/alpha')))_{j=1..n}`` from explicit Bernoulli trials."""
    check_budget(float(n) * m_n, budget)
    a_n = norm_const(params, n, m_n)
    q, coef = _replica_draws(params, a_n, m_n, stream)
    out = np.zeros(n)
    block = max(1, 2_000_000 // n)
    for start in range(0, m_n, block):
        stop = min(m_n, start + block)
        eta = stream.uniform((stop - start, n)) < q[start:stop, None]
        out += coef[start:stop] @ eta
    return out


def extremal_sites(params: ModelParams, n: int, m_n: int, level: float, stream: RandomStream,
                   split: float = 0.05, margin: float = 0.5, exact_sites: int = 4096) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Sites ``j`` whose aggregate ``sum_i X_i eta_ij / (a_n q_i^(1/alpha'))`` exceeds ``level``.

    Replicas with ``|coef| > split * level`` get explicit success sets. Sites
    where their sum is within ``margin * level`` of the level are completed
    with the remaining replicas, whose Bernoulli indicators at those sites are
    drawn exactly. A site reached by none of them would need at least
    ``margin / split`` aligned small contributions to cross the level; such
    sites are not searched. When more than ``exact_sites`` sites are candidates
    (a replica with ``q`` near 1 and a large coefficient), the small-replica
    sums there are drawn from the normal law with their exact conditional mean
    and variance instead.

    Returns ``(sites, values, cluster_coef, cluster_tau)`` where the cluster
    arrays list replicas with ``|coef| > level`` and ``tau_n >= 1``.
    """
    a_n = norm_const(params, n, m_n)
    q, coef = _replica_draws(params, a_n, m_n, stream)
    big = np.flatnonzero(np.abs(coef) > split * level)
    tau_big = stream.generator.binomial(n, q[big])
    acc = np.zeros(n + 1)
    for i, tau in zip(big, tau_big):
        if tau:
            acc[_positions(n, int(tau), stream)] += coef[i]
    cand = np.flatnonzero(np.abs(acc) > (1.0 - margin) * level)
    small = np.ones(m_n, dtype=bool)
    small[big] = False
    qs, cs = q[small], coef[small]
    vals = acc[cand].copy()
    if cand.size > exact_sites:
        # given the replicas the small sums are iid across sites; many bounded summands
        mean = float(cs @ qs)
        sd = math.sqrt(float((cs * cs) @ (qs * (1.0 - qs))))
        vals += mean + sd * stream.generator.standard_normal(cand.size)
    elif cand.size:
        block = max(1, 4_000_000 // max(qs.size, 1))
        for start in range(0, cand.size, block):
            stop = min(cand.size, start + block)
            eta = stream.uniform((qs.size, stop - start)) < qs[:, None]
            vals[start:stop] += cs @ eta
    keep = np.abs(vals) > level
    is_cluster = (np.abs(coef[big]) > level) & (tau_big > 0)
    return cand[keep], vals[keep], coef[big][is_cluster], tau_big[is_cluster]


def _signed_points(params: ModelParams, n: int, m_n: int, level: float, stream: RandomStream):
    a_n = norm_const(params, n, m_n)
    q, coef = _replica_draws(params, a_n, m_n, stream)
    big = np.flatnonzero(np.abs(coef) > level)
    tau_big = stream.generator.binomial(n, q[big])
    vals, locs, owner = [], [], []
    c_vals, c_sizes = [], []
    for i, tau in zip(big, tau_big):
        if not tau:
            continue
        pos = _positions(n, int(tau), stream)
        k = np.arange(1, tau + 1)
        # (-1)^{tau_ij}: tau_ij = k at the k-th success
        vals.append(np.where(k % 2 == 0, 1.0, -1.0) * coef[i])
        locs.append(pos / n)
        owner.append(np.full(tau, len(c_vals)))
        c_vals.append(coef[i])
        c_sizes.append(tau)
    cat = (lambda xs, dt=np.float64: np.concatenate(xs) if xs else np.zeros(0, dtype=dt))
    return PointMeasureSample(cat(vals), cat(locs), level, cat(owner, np.int64),
                              np.asarray(c_vals), np.asarray(c_sizes, dtype=np.int64))


def extremal_points_one(params: ModelParams, n: int, m_n: int, epsilon: float, stream: RandomStream,
                        signed: bool = False, **split_kw) -> PointMeasureSample:
    if signed:
        return _signed_points(params, n, m_n, epsilon, stream)
    sites, vals, c_coef, c_tau = extremal_sites(params, n, m_n, epsilon, stream, **split_kw)
    return PointMeasureSample(vals, sites / n, epsilon, cluster_values=c_coef,
                              cluster_sizes=c_tau.astype(np.int64))


def extract_extremal_points(params: ModelParams, plan: SimulationPlan, signed: bool = False,
                            budget: Optional[float] = None, threads: int = 1,
                            tag: str = "ppp", **split_kw) -> list[PointMeasureSample]:
    """Realizations of the extremal point process restricted to ``|value| > plan.epsilon``.

    Unsigned mode gives the site aggregates; signed mode gives every replica
    point with its alternating sign ``(-1)^{tau_ij}``.
    """
    check_budget(float(plan.n) * plan.m_n * plan.R, budget)
    root = RandomStream(plan.seed)

    def one(r: int) -> PointMeasureSample:
        return extremal_points_one(params, plan.n, plan.m_n, plan.epsilon, root.child(tag, r),
                                   signed=signed, **split_kw)

    return _run_indexed(one, plan.R, threads)


def _in_interval(loc: np.ndarray, interval: tuple[float, float]) -> np.ndarray:
    # intervals are open relative to [0, 1]: an endpoint at 0 or 1 is included
    a, b = interval
    lower = loc > a if a > 0 else loc >= 0
    upper = loc < b if b < 1 else loc <= 1
    return lower & upper


def discrete_sup_measure(sample: Union[PointMeasureSample, np.ndarray], interval: tuple[float, float]) -> float:
    """``M_n(I)``: largest ``|value|`` over sites ``j/n`` in ``I`` (0 if there are none).

    ``sample`` is either a point sample (exact for levels above its threshold)
    or the dense vector of site values for ``j = 1..n``.
    """
    if isinstance(sample, PointMeasureSample):
        vals, locs = sample.values, sample.locations
    else:
        vals = np.asarray(sample, dtype=np.float64)
        locs = np.arange(1, vals.size + 1) / vals.size
    mask = _in_interval(locs, interval)
    return float(np.abs(vals[mask]).max()) if np.any(mask) else 0.0


# -- conditional exceedances -------------------------------------------------

class ExceedanceBatch(NamedTuple):
    tau: np.ndarray
    nq: np.ndarray
    magnitude: np.ndarray
    attempts: int

    @property
    def acceptance_rate(self) -> float:
        return self.tau.size / self.attempts


def conditional_exceedance_samples(params: ModelParams, n: int, m_n: int, x: float, count: int,
                                   stream: RandomStream, budget: Optional[int] = None,
                                   batch: int = 1 << 16) -> ExceedanceBatch:
    """``count`` draws of ``(tau_n, n q, X / (a_n q^(1/alpha')))`` given ``Omega_n(x)``, by rejection.

    ``Omega_n(x) = {|X| / (a_n q^(1/alpha')) > x, tau_n != 0}``; ``budget`` caps the
    number of candidate replicas.
    """
    if x <= 0:
        raise DomainError("x must be positive")
    cap = int(budget) if budget is not None else int(resolve_budget() // max(n, 1))
    a_n = norm_const(params, n, m_n)
    taus, nqs, mags = [], [], []
    attempts = 0
    got = 0
    while got < count:
        if attempts >= cap:
            raise BudgetError(f"only {got} of {count} exceedances after {attempts} attempts", attempts)
        size = min(batch, cap - attempts)
        q = params.q_law.sample(stream, size)
        xs = sample_innovation(params.innovation, stream, size)
        mag = xs / (a_n * np.power(q, 1.0 / params.alpha_prime))
        cand = np.flatnonzero(np.abs(mag) > x)
        tau = stream.generator.binomial(n, q[cand])
        hit = cand[tau > 0]
        tau = tau[tau > 0]
        need = count - got
        if hit.size >= need:
            attempts += int(hit[need - 1]) + 1
            hit, tau = hit[:need], tau[:need]
        else:
            attempts += size
        taus.append(tau)
        nqs.append(n * q[hit])
        mags.append(mag[hit])
        got += hit.size
    return ExceedanceBatch(np.concatenate(taus), np.concatenate(nqs), np.concatenate(mags), attempts)


def exceedance_probability(params: ModelParams, n: int, m_n: int, x: float) -> float:
    """Exact ``P(Omega_n(x))`` for one replica with Pareto innovations and power-law ``q``.

    ``int_0^1 P(|X| > x a_n q^(1/alpha')) (1 - (1 - q)^n) (1 - rho) q^-rho dq``; the
    limit of ``m_n`` times this is ``x^-alpha``.
    """
    law = params.innovation
    if not isinstance(law, SymmetrizedPareto) or not isinstance(params.q_law, PowerLawQ):
        raise DomainError("exact exceedance probability needs Pareto innovations and power-law q")
    a_n = norm_const(params, n, m_n)
    rho = params.rho

    def f(q: float) -> float:
        hit = -math.expm1(n * math.log1p(-q))
        return float(law.tail(x * a_n * q ** (1.0 / params.alpha_prime))) * hit * (1.0 - rho) * q ** -rho

    # the tail caps at 1 below q0
    q0 = min(1.0, (law.c_x ** (1.0 / law.alpha) / (x * a_n)) ** params.alpha_prime)
    pts = sorted({p for p in (1.0 / n, 10.0 / n, q0) if 0.0 < p < 1.0})
    val, _ = integrate.quad(f, 0.0, 1.0, points=pts, limit=400, epsabs=0.0, epsrel=1e-10)
    return val


def conditional_exceedance_sample(params: ModelParams, n: int, m_n: int, x: float,
                                  stream: RandomStream, budget: Optional[int] = None):
    """One draw ``(tau_n, n q, magnitude)`` given ``Omega_n(x)`` plus the attempts used."""
    b = conditional_exceedance_samples(params, n, m_n, x, 1, stream, budget, batch=4096)
    return int(b.tau[0]), float(b.nq[0]), float(b.magnitude[0]), b.attempts
