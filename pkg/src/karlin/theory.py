"""Closed-form and quadrature evaluation of the limiting laws.

``m_coeff`` integrates Poisson parity probabilities against ``q^(-beta-1)``;
``lemma1_rhs`` evaluates the same moment from the Sibuya side by exact
enumeration over cluster sizes, so the two routes check each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate, special

from .special_functions import (
    DomainError,
    ParityPattern,
    c_alpha,
    poisson_parity_prob,
    sibuya_pmf,
)

MAX_DIM = 20


class QuadratureError(RuntimeError):
    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved relative error {achieved:.3g})")
        self.achieved = achieved


@dataclass(frozen=True)
class FddSpec:
    times: tuple[float, ...]
    thetas: tuple[float, ...]

    def __init__(self, times: Sequence[float], thetas: Sequence[float]):
        times = tuple(float(t) for t in times)
        thetas = tuple(float(x) for x in thetas)
        if len(times) != len(thetas):
            raise DomainError("times and thetas must have the same length")
        ParityPattern(times, [1] * len(times))  # validates the grid
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "thetas", thetas)

    @property
    def d(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class IntervalQuery:
    intervals: tuple[tuple[float, float], ...]
    thresholds: tuple[float, ...]

    def __init__(self, intervals, thresholds):
        intervals = tuple((a, b) for a, b in intervals)
        thresholds = tuple(float(x) for x in thresholds)
        if len(intervals) != len(thresholds):
            raise DomainError("one threshold per interval")
        for a, b in intervals:
            if not (0 <= a < b <= 1):
                raise DomainError(f"interval ({a}, {b}) is not a nonempty subinterval of [0, 1]")
        if any(x <= 0 for x in thresholds):
            raise DomainError("thresholds must be positive")
        object.__setattr__(self, "intervals", intervals)
        object.__setattr__(self, "thresholds", thresholds)


# -- CF coefficients ---------------------------------------------------------

def _parity_integral(pattern: ParityPattern, beta: float, rtol: float) -> tuple[float, float]:
    """``int_0^inf P_q(pattern) q^(-beta-1) dq`` and its absolute error estimate.

    Split at q = 1. On (0, 1) the parity probability is O(q), so ``P(q)/q`` is
    smooth and the algebraic weight ``q^-beta`` is handled by QAWS; on the tail
    ``u = 1/q`` gives a smooth integrand against the weight ``u^(beta-1)``.
    """
    d_limit = 0.5 ** pattern.d

    def head(q: float) -> float:
        if q == 0.0:
            q = 1e-300
        return poisson_parity_prob(pattern, q) / q

    def tail(u: float) -> float:
        if u == 0.0:
            return d_limit
        return poisson_parity_prob(pattern, 1.0 / u)

    opts = dict(epsabs=0.0, epsrel=rtol * 1e-2, limit=200)
    v1, e1 = integrate.quad(head, 0.0, 1.0, weight="alg", wvar=(-beta, 0.0), **opts)
    v2, e2 = integrate.quad(tail, 0.0, 1.0, weight="alg", wvar=(beta - 1.0, 0.0), **opts)
    return v1 + v2, e1 + e2


@lru_cache(maxsize=4096)
def _m_cached(alpha: float, beta: float, times: tuple, delta: tuple, rtol: float) -> float:
    pattern = ParityPattern(times, delta)
    value, err = _parity_integral(pattern, beta, rtol)
    if value <= 0 or err > rtol * value:
        raise QuadratureError("m_coeff quadrature did not converge", err / max(value, 1e-300))
    return beta / (math.gamma(1.0 - beta) * c_alpha(alpha)) * value


def m_coeff(alpha: float, beta: float, pattern: ParityPattern, rtol: float = 1e-8) -> float:
    """CF coefficient for one parity pattern (``delta`` must not be all zeros)."""
    if not (0.0 < beta < 1.0):
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    if pattern.is_zero:
        raise DomainError("m_coeff is defined for nonzero parity patterns only")
    return _m_cached(float(alpha), float(beta), pattern.times, pattern.delta, float(rtol))


def _masks(d: int) -> np.ndarray:
    if d > MAX_DIM:
        raise DomainError(f"d = {d} exceeds the supported maximum {MAX_DIM} (2^d - 1 patterns)")
    masks = np.arange(1, 1 << d, dtype=np.int64)
    return (masks[:, None] >> np.arange(d)) & 1


def cf_exponent(alpha: float, beta: float, spec: FddSpec) -> float:
    """``sum_delta |<theta, delta>|^alpha m(t, delta)``."""
    bits = _masks(spec.d)
    theta = np.asarray(spec.thetas)
    pairings = np.abs(bits @ theta)
    total = 0.0
    for row, pair in zip(bits, pairings):
        if pair == 0.0:
            continue
        pattern = ParityPattern(spec.times, row.tolist())
        total += pair ** alpha * m_coeff(alpha, beta, pattern)
    return total


def cf_theoretical(alpha: float, beta: float, spec: FddSpec) -> float:
    """Characteristic function of the Karlin stable process at ``spec``."""
    return math.exp(-cf_exponent(alpha, beta, spec))


# -- Sibuya enumeration side --------------------------------------------------

class EnumerationResult(NamedTuple):
    value: float
    tail_bound: float
    cutoff: int


def _cell_probabilities(times: Sequence[float]) -> np.ndarray:
    edges = np.concatenate(([0.0], np.asarray(times, dtype=np.float64)))
    return np.diff(edges)


def lemma1_rhs(alpha: float, beta: float, spec: FddSpec, tol: float = 1e-12,
               max_cutoff: int = 1 << 24, full_output: bool = False):
    """``E |sum_j theta_j 1{|C_Q cap [0, t_j]| odd}|^alpha`` by enumeration over ``Q = l``.

    Given ``Q = l`` the cell counts over ``(0,t_1], ..., (t_{d-1}, t_d]`` are
    multinomial; the indicator of a parity pattern on those cells expands into
    evaluations of the multinomial pgf at sign vectors, ``(1 - 2 p_S)^l``. Terms
    are summed up to a cutoff ``L``. The constant part of the summand sums to
    its coefficient over all ``l``, the alternating
    part (present when ``t_d = 1``) gets the half-first-term estimate, and the
    geometric parts are bounded; ``L`` is the smallest power of two at which
    the bound on the neglected remainder is below ``tol``.
    """
    if not (0.0 < beta < 1.0):
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    d = spec.d
    theta = np.asarray(spec.thetas)
    cells = _cell_probabilities(spec.times)  # d cells; the rest of (0,1] is free
    bits = _masks(d)                            # patterns delta (rows)
    weights = np.abs(bits @ theta) ** alpha    # |<theta, delta>|^alpha
    if not np.any(weights > 0):
        res = EnumerationResult(0.0, 0.0, 0)
        return res if full_output else 0.0
    # cell parities: eps_k = delta_k xor delta_{k-1}
    eps = bits ^ np.concatenate((np.zeros((bits.shape[0], 1), dtype=np.int64), bits[:, :-1]), axis=1)
    subsets = np.concatenate((np.zeros((1, d), dtype=np.int64), _masks(d)))  # S over cells
    p_s = subsets @ cells
    ratio = 1.0 - 2.0 * p_s
    # coefficient of (ratio_S)^l: 2^-d sum_delta w_delta (-1)^{<eps_delta, S>}
    signs = 1.0 - 2.0 * ((eps @ subsets.T) & 1)
    coef = (weights @ signs) / 2.0 ** d

    const = np.isclose(ratio, 1.0, rtol=0.0, atol=1e-15)
    alt = np.isclose(ratio, -1.0, rtol=0.0, atol=1e-15)
    geo = ~(const | alt)
    c_const = coef[const].sum()
    c_alt = coef[alt].sum()
    r_geo = np.abs(ratio[geo])
    c_geo = np.abs(coef[geo])

    def remainder_bound(L: int) -> float:
        a1, a2 = sibuya_pmf(beta, [L + 1, L + 2])
        bound = abs(c_alt) * 0.5 * (a1 - a2)
        if c_geo.size:
            bound += float(np.sum(c_geo * a1 * r_geo ** (L + 1) / (1.0 - r_geo)))
        return bound

    L = 64
    while remainder_bound(L) >= tol:
        L *= 2
        if L > max_cutoff:
            raise DomainError(f"tolerance {tol} not reachable within cutoff {max_cutoff}")
    ell = np.arange(1, L + 1, dtype=np.float64)
    pmf = sibuya_pmf(beta, np.arange(1, L + 1))
    # the constant part sums to c_const over all l, beyond the cutoff included
    total = float(c_const)
    if c_alt:
        total += c_alt * float(np.sum(pmf * np.where(ell % 2 == 0, 1.0, -1.0)))
        a1 = sibuya_pmf(beta, L + 1)
        total += c_alt * 0.5 * a1 * (1.0 if (L + 1) % 2 == 0 else -1.0)
    for c, r in zip(coef[geo], ratio[geo]):
        total += c * float(np.sum(pmf * np.power(r, ell)))
    res = EnumerationResult(float(total), remainder_bound(L), L)
    return res if full_output else res.value


def lemma1_lhs(alpha: float, beta: float, spec: FddSpec) -> float:
    """Quadrature side: ``C_alpha sum_delta |<theta, delta>|^alpha m(t, delta)``."""
    return c_alpha(alpha) * cf_exponent(alpha, beta, spec)


# -- sup-measure -------------------------------------------------------------

def union_measure(intervals) -> float | Fraction:
    """Lebesgue measure of a union of intervals by a sort-and-merge sweep."""
    spans = sorted((a, b) for a, b in intervals if b > a)
    total = 0
    cur_a = cur_b = None
    for a, b in spans:
        if cur_b is None or a > cur_b:
            if cur_b is not None:
                total += cur_b - cur_a
            cur_a, cur_b = a, b
        elif b > cur_b:
            cur_b = b
    if cur_b is not None:
        total += cur_b - cur_a
    return total


def supmeasure_expected_max(alpha: float, beta: float, query: IntervalQuery) -> float:
    """``E max_k 1{C_Q hits I_k} / x_k^alpha`` via the pgf identity ``P(miss A) = 1 - |A|^beta``."""
    w = [x ** -alpha for x in query.thresholds]
    order = sorted(range(len(w)), key=lambda k: -w[k])
    total = 0.0
    prev_hit = 0.0
    covered = []
    for k in order:
        covered.append(query.intervals[k])
        hit = float(union_measure(covered)) ** beta
        total += w[k] * (hit - prev_hit)
        prev_hit = hit
    return total


def supmeasure_fdd_prob(alpha: float, beta: float, query: IntervalQuery) -> float:
    """``P(M(I_1) <= x_1, ..., M(I_d) <= x_d)`` for the Karlin random sup-measure."""
    return math.exp(-supmeasure_expected_max(alpha, beta, query))


def poisson_parity_bruteforce(pattern: ParityPattern, q: float, kmax: int = 400) -> float:
    """Parity probability by explicit summation of Poisson pmfs over each increment.

    Independent of ``poisson_parity_prob``; used as a cross-check.
    """
    total = 1.0
    prev_t, prev_bit = 0.0, 0
    k = np.arange(kmax + 1)
    for t, bit in zip(pattern.times, pattern.delta):
        lam = q * (t - prev_t)
        if lam > 0:
            pmf = np.exp(-lam + k * math.log(lam) - special.gammaln(k + 1.0))
        else:
            pmf = (k == 0).astype(np.float64)
        want = bit ^ prev_bit
        total *= math.fsum(pmf[k % 2 == want])
        prev_t, prev_bit = t, bit
    return total
