"""Direct simulation of the limit objects.

The Karlin stable process through its series over Poisson arrivals, the
Gaussian case as a fractional Brownian motion, the limit point process of
extremes and the Karlin random sup-measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .model import PointMeasureSample
from .samplers import RandomStream, sample_sibuya
from .special_functions import DomainError

DEFAULT_LEVEL_CAP = 10**8
DEFAULT_CLUSTER_CAP = 10**5


class TruncationCapError(RuntimeError):
    pass


class ClusterCapError(RuntimeError):
    pass


@dataclass(frozen=True)
class KarlinParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise DomainError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not (0.0 < self.beta < 1.0):
            raise DomainError(f"beta must lie in (0, 1), got {self.beta}")

    def require_stable(self) -> None:
        if self.alpha >= 2.0:
            raise DomainError("series representation requires alpha < 2")

    def require_gaussian(self) -> None:
        if self.alpha != 2.0:
            raise DomainError("Gaussian operations require alpha = 2")


# -- truncation of the series ------------------------------------------------

_HEAD_TERMS = 1000


def gamma_ratio_tail(a: float, L: int) -> float:
    """``sum_{l > L} Gamma(l - a) / Gamma(l)`` for ``a > 1``, ``L > a``.

    The first terms come from the ratio recursion ``r_{l+1} = r_l (l - a) / l``;
    the remainder from ``M`` on uses the telescoping identity
    ``sum_{l >= M} Gamma(l - a)/Gamma(l) = Gamma(M - a) / ((a - 1) Gamma(M - 1))``.
    """
    if a <= 1:
        raise DomainError("the tail sum converges only for a > 1")
    if L <= a:
        raise DomainError("L must exceed a")
    M = L + 1 + _HEAD_TERMS
    ell = np.arange(L + 1, M - 1, dtype=np.float64)
    first = 1.0 / special.poch(L + 1.0 - a, a)
    terms = first * np.concatenate(([1.0], np.cumprod((ell - a) / ell)))
    rest = 1.0 / ((a - 1.0) * special.poch(M - a, a - 1.0))
    return math.fsum(terms) + rest


def _smallest_level(ok, lo: int, cap: int) -> int:
    """Smallest integer ``L`` in ``[lo, cap]`` with ``ok(L)``, for monotone ``ok``."""
    if ok(lo):
        return lo
    hi = lo
    while not ok(hi):
        if hi >= cap:
            raise TruncationCapError(f"truncation level would exceed the cap {cap}")
        lo, hi = hi, min(2 * hi, cap)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def truncation_level(alpha: float, tol: float, cap: int = DEFAULT_LEVEL_CAP) -> int:
    """Smallest ``L > 2/alpha`` with ``sqrt(sum_{l>L} Gamma(l - 2/alpha)/Gamma(l)) < tol``."""
    if not (0.0 < alpha < 2.0):
        raise DomainError("truncation_level requires alpha in (0, 2)")
    if tol <= 0:
        raise DomainError("tol must be positive")
    a = 2.0 / alpha
    return _smallest_level(lambda L: gamma_ratio_tail(a, L) < tol * tol, math.floor(a) + 1, cap)


def compensated_level(alpha: float, tol: float, theta_scale: float = 2.0,
                      cap: int = DEFAULT_LEVEL_CAP, minimum: int = 16) -> int:
    """Cutoff for the series with a Gaussian remainder.

    The CF error of replacing the remainder by a Gaussian with matched
    covariance is of the order of its fourth cumulant, bounded by
    ``theta_scale^4 sum_{l>L} Gamma(l - 4/alpha)/Gamma(l) / 24``.
    """
    if not (0.0 < alpha < 2.0):
        raise DomainError("compensated_level requires alpha in (0, 2)")
    a = 4.0 / alpha
    bound = lambda L: theta_scale ** 4 * gamma_ratio_tail(a, L) / 24.0 < tol
    return max(minimum, _smallest_level(bound, math.floor(a) + 1, cap))


# -- series representation ---------------------------------------------------

def _cells(times: Sequence[float]) -> np.ndarray:
    edges = np.concatenate(([0.0], np.asarray(times, dtype=np.float64), [1.0]))
    return np.diff(edges)


def parity_second_moment(beta: float, times: Sequence[float]) -> np.ndarray:
    """``E[Y_s Y_t]`` for ``Y_t = 1{|C_Q cap [0, t]| odd}``.

    ``Y_s Y_t = (Y_s + Y_t - (Y_s xor Y_t)) / 2`` and ``P(odd count on a set of
    measure u) = (2u)^beta / 2``.
    """
    t = np.asarray(times, dtype=np.float64)
    s, u = np.meshgrid(t, t, indexing="ij")
    odd = lambda x: 0.5 * np.power(2.0 * x, beta)
    return 0.5 * (odd(s) + odd(u) - odd(np.abs(u - s)))


def _psd_factor(cov: np.ndarray, max_jitter: float = 1e-12) -> np.ndarray:
    jitter = 0.0
    eye = np.eye(cov.shape[0])
    while True:
        try:
            return np.linalg.cholesky(cov + jitter * eye)
        except np.linalg.LinAlgError:
            if jitter >= max_jitter:
                raise np.linalg.LinAlgError(
                    f"covariance not positive definite even with jitter {max_jitter:g}") from None
            jitter = 1e-15 if jitter == 0.0 else min(10.0 * jitter, max_jitter)


def zeta_series_fdd(params: KarlinParams, times: Sequence[float], tol: float, stream: RandomStream,
                    compensate: bool = True, theta_scale: float = 2.0, flip_signs: bool = False,
                    level: Optional[int] = None) -> np.ndarray:
    """One draw of ``(zeta(t_1), ..., zeta(t_d))`` from the truncated series.

    ``sum_{l<=L} eps_l Gamma_l^(-1/alpha) 1{|C_{Q_l} cap [0, t]| odd}``. With
    ``compensate`` the discarded terms are replaced by a centered Gaussian
    whose covariance matches theirs given ``Gamma_L``; ``L`` then comes from
    ``compensated_level``. Without it ``L = truncation_level(alpha, tol)``.
    ``flip_signs`` negates every sign, which negates the output exactly.
    """
    params.require_stable()
    times = np.asarray(times, dtype=np.float64)
    if times.size == 0 or times[0] <= 0 or times[-1] > 1 or np.any(np.diff(times) <= 0):
        raise DomainError("times must be strictly increasing in (0, 1]")
    alpha, beta = params.alpha, params.beta
    if level is None:
        level = (compensated_level(alpha, tol, theta_scale) if compensate
                 else truncation_level(alpha, tol))
    gammas = np.cumsum(stream.generator.standard_exponential(level))
    signs = stream.signs(level)
    if flip_signs:
        signs = -signs
    sizes = sample_sibuya(beta, stream, level)
    counts = stream.generator.multinomial(sizes, _cells(times))[:, :-1]
    parity = np.logical_xor.accumulate(counts % 2 == 1, axis=1)
    weights = signs * np.power(gammas, -1.0 / alpha)
    out = (weights[:, None] * parity).sum(axis=0)
    if compensate:
        a = 2.0 / alpha
        scale = gammas[-1] ** (1.0 - a) / (a - 1.0)
        chol = _psd_factor(parity_second_moment(beta, times) * scale)
        z = stream.generator.standard_normal(times.size)
        out = out + (-1.0 if flip_signs else 1.0) * (chol @ z)
    return out


def zeta_series_samples(params: KarlinParams, times: Sequence[float], tol: float, R: int,
                        seed: int, tag: str = "series", **kw) -> np.ndarray:
    """``R x d`` draws; sample ``r`` uses the stream ``(seed, tag, r)``."""
    params.require_stable()
    if kw.get("level") is None:
        if kw.get("compensate", True):
            kw["level"] = compensated_level(params.alpha, tol, kw.get("theta_scale", 2.0))
        else:
            kw["level"] = truncation_level(params.alpha, tol)
    root = RandomStream(seed)
    return np.vstack([zeta_series_fdd(params, times, tol, root.child(tag, r), **kw) for r in range(R)])


# -- Gaussian case -----------------------------------------------------------

def fbm_cov(beta: float, s, t):
    """``2^(beta-3) (s^beta + t^beta - |t - s|^beta)``."""
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(s < 0) or np.any(t < 0):
        raise DomainError("times must be nonnegative")
    out = 2.0 ** (beta - 3.0) * (s ** beta + t ** beta - np.abs(t - s) ** beta)
    return float(out) if out.ndim == 0 else out


def fbm_corr(beta: float, s: float, t: float) -> float:
    return 0.5 * (s ** beta + t ** beta - abs(t - s) ** beta) / math.sqrt(s ** beta * t ** beta)


def gaussian_karlin_fdd(beta: float, times: Sequence[float], stream: RandomStream,
                        size: Optional[int] = None) -> np.ndarray:
    """Centered Gaussian vector(s) with covariance ``fbm_cov`` on ``times``."""
    t = np.asarray(times, dtype=np.float64)
    if np.unique(t).size != t.size:
        raise DomainError("times must be distinct")
    cov = fbm_cov(beta, t[:, None], t[None, :])
    chol = _psd_factor(np.atleast_2d(cov))
    shape = (t.size,) if size is None else (size, t.size)
    z = stream.generator.standard_normal(shape)
    return z @ chol.T


# -- limit point process and sup-measure ----------------------------------------

def limit_point_process_sample(params: KarlinParams, epsilon: float, stream: RandomStream,
                               signed: bool = False, location_cap: int = 1 << 20) -> PointMeasureSample:
    """Points ``(eps_l Gamma_l^(-1/alpha), U_{l,j})`` of clusters with ``Gamma_l^(-1/alpha) > epsilon``.

    Signed mode uses ``eps_l Gamma_l^(-1/alpha) (-1)^j`` over the ordered
    locations. Cluster sizes are kept exactly; at most ``location_cap``
    locations are materialized in total and ``truncated`` records whether any
    were dropped.
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    horizon = epsilon ** -params.alpha
    gen = stream.generator
    gammas = []
    g = gen.standard_exponential()
    while g < horizon:
        gammas.append(g)
        g += gen.standard_exponential()
    k = len(gammas)
    mags = np.power(np.asarray(gammas), -1.0 / params.alpha) if k else np.zeros(0)
    signs = stream.signs(k) if k else np.zeros(0)
    sizes = np.asarray(sample_sibuya(params.beta, stream, k), dtype=np.int64) if k else np.zeros(0, np.int64)
    values, locs, owner = [], [], []
    room = location_cap
    truncated = False
    for i in range(k):
        take = int(min(sizes[i], room))
        truncated |= take < sizes[i]
        room -= take
        if take == 0:
            continue
        u = stream.uniform(take)
        if signed:
            u.sort()
            alt = np.where(np.arange(1, take + 1) % 2 == 0, 1.0, -1.0)
            values.append(signs[i] * mags[i] * alt)
        else:
            values.append(np.full(take, signs[i] * mags[i]))
        locs.append(u)
        owner.append(np.full(take, i, dtype=np.int64))
    cat = lambda xs, dt=np.float64: np.concatenate(xs) if xs else np.zeros(0, dtype=dt)
    return PointMeasureSample(cat(values), cat(locs), epsilon, cat(owner, np.int64),
                              signs * mags, sizes, truncated)


def limit_supmeasure_sample(params: KarlinParams, intervals: Sequence[tuple[float, float]],
                            stream: RandomStream, cluster_cap: int = DEFAULT_CLUSTER_CAP) -> np.ndarray:
    """``(M(I_1), ..., M(I_d))`` with ``M(I) = max`` of ``Gamma_l^(-1/alpha)`` over clusters hitting ``I``.

    Clusters arrive in decreasing magnitude, so the first cluster to hit an
    interval sets its value and generation stops once all are hit. Hits are
    decided from multinomial counts on the cells cut out by the endpoints.
    """
    ivs = [(float(a), float(b)) for a, b in intervals]
    for a, b in ivs:
        if not (0 <= a < b <= 1):
            raise DomainError(f"interval ({a}, {b}) is not a nonempty subinterval of [0, 1]")
    edges = np.unique(np.array([0.0, 1.0] + [x for iv in ivs for x in iv]))
    probs = np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    inside = np.array([(mids > a) & (mids < b) for a, b in ivs])  # (d, cells)
    out = np.zeros(len(ivs))
    open_ = np.ones(len(ivs), dtype=bool)
    gen = stream.generator
    g = 0.0
    for _ in range(cluster_cap):
        g += gen.standard_exponential()
        size = sample_sibuya(params.beta, stream)
        counts = gen.multinomial(size, probs)
        hit = open_ & np.any(inside & (counts > 0), axis=1)
        if np.any(hit):
            out[hit] = g ** (-1.0 / params.alpha)
            open_ &= ~hit
            if not open_.any():
                return out
    raise ClusterCapError(f"intervals not all hit within {cluster_cap} clusters")
