"""Deterministic scalar functions used as exact oracles across the package.

Gamma-related constants, the Sibuya law (pmf, survival, pgf), parity
probabilities of a Poisson process on a time grid, and the Gamma-mixture
density that appears as the limit of ``n q`` under extremal conditioning.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special


class DomainError(ValueError):
    """Argument outside the domain of a function."""


@dataclass(frozen=True)
class ParityPattern:
    """Sorted times ``t_1 < ... < t_d`` in (0, 1] with a parity bit per time."""

    times: tuple[float, ...]
    delta: tuple[int, ...]

    def __init__(self, times: Sequence[float], delta: Sequence[int]):
        times = tuple(float(t) for t in times)
        delta = tuple(int(b) for b in delta)
        if not times:
            raise DomainError("pattern needs at least one time")
        if len(delta) != len(times):
            raise DomainError(f"delta has length {len(delta)}, expected {len(times)}")
        if any(b not in (0, 1) for b in delta):
            raise DomainError("delta entries must be 0 or 1")
        if times[0] <= 0.0 or times[-1] > 1.0:
            raise DomainError("times must lie in (0, 1]")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DomainError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "delta", delta)

    @property
    def d(self) -> int:
        return len(self.times)

    @property
    def is_zero(self) -> bool:
        return not any(self.delta)

    @classmethod
    def from_mask(cls, times: Sequence[float], mask: int) -> "ParityPattern":
        """Pattern whose bit ``j`` is bit ``j`` of ``mask`` (least significant first)."""
        d = len(times)
        return cls(times, [(mask >> j) & 1 for j in range(d)])


def _check_beta(beta: float, *, allow_one: bool = False) -> None:
    upper_ok = beta <= 1.0 if allow_one else beta < 1.0
    if not (beta > 0.0 and upper_ok):
        raise DomainError(f"beta must lie in (0, 1{']' if allow_one else ')'}, got {beta}")


def c_alpha(alpha: float) -> float:
    """Constant ``1 / int_0^inf x^-alpha sin x dx`` (2 at alpha = 2).

    Evaluated as ``2 Gamma(alpha) sin(pi alpha / 2) / pi``, the reflection form
    of ``1 / (Gamma(1 - alpha) cos(pi alpha / 2))``, which is smooth through the
    removable singularity at alpha = 1.
    """
    if not (0.0 < alpha <= 2.0):
        raise DomainError(f"alpha must lie in (0, 2], got {alpha}")
    if alpha == 2.0:
        return 2.0
    if alpha == 1.0:
        return 2.0 / math.pi
    return 2.0 * math.gamma(alpha) * math.sin(0.5 * math.pi * alpha) / math.pi


# -- Sibuya law ---------------------------------------------------------------

_TABLE_CAP = 1 << 22


class SibuyaTable:
    """Growable table of ``P(Q > k)`` for ``k = 0..size-1``.

    Entries are built by the multiplicative recursion
    ``S(k) = S(k-1) * (1 - beta / k)``. Growth is serialized by a lock;
    readers take a reference to the current array, which is never mutated.
    """

    def __init__(self, beta: float, initial: int = 1024):
        _check_beta(beta, allow_one=True)
        self.beta = float(beta)
        self._lock = threading.Lock()
        self._set(self._build(np.ones(1), initial))

    def _set(self, arr: np.ndarray) -> None:
        # one tuple so readers never see a survival array paired with a stale negation
        self._arrays = (arr, -arr)

    def _build(self, current: np.ndarray, size: int) -> np.ndarray:
        start = current.size
        k = np.arange(start, size, dtype=np.float64)
        factors = 1.0 - self.beta / k
        tail = np.cumprod(np.concatenate(([current[-1]], factors)))[1:]
        return np.concatenate((current, tail))

    @property
    def survival(self) -> np.ndarray:
        return self._arrays[0]

    @property
    def negated(self) -> np.ndarray:
        """``-survival``, increasing; kept for ``searchsorted``."""
        return self._arrays[1]

    def ensure(self, size: int) -> np.ndarray:
        size = min(int(size), _TABLE_CAP)
        arr = self._arrays[0]
        if arr.size >= size:
            return arr
        with self._lock:
            arr = self._arrays[0]
            if arr.size < size:
                new_size = max(size, 2 * arr.size)
                arr = self._build(arr, min(new_size, _TABLE_CAP))
                self._set(arr)
        return arr


_tables: dict[float, SibuyaTable] = {}
_tables_lock = threading.Lock()


def sibuya_table(beta: float) -> SibuyaTable:
    """Process-wide shared survival table for ``beta``."""
    beta = float(beta)
    table = _tables.get(beta)
    if table is None:
        with _tables_lock:
            table = _tables.get(beta)
            if table is None:
                table = SibuyaTable(beta)
                _tables[beta] = table
    return table


def _survival_far(beta: float, n: np.ndarray) -> np.ndarray:
    # Gamma(n+1-beta) / (Gamma(1-beta) Gamma(n+1)); poch keeps it accurate for huge n.
    n = np.asarray(n, dtype=np.float64)
    return 1.0 / (special.gamma(1.0 - beta) * special.poch(n + 1.0 - beta, beta))


def sibuya_survival(beta: float, n):
    """``P(Q_beta > n)`` for integer ``n >= 0`` (scalar or array)."""
    _check_beta(beta, allow_one=True)
    arr = np.asarray(n)
    if np.any(arr < 0):
        raise DomainError("n must be nonnegative")
    if beta == 1.0:
        out = np.where(arr == 0, 1.0, 0.0)
        return float(out) if out.ndim == 0 else out
    idx = arr.astype(np.int64)
    table = sibuya_table(beta).ensure(int(idx.max(initial=0)) + 1)
    inside = idx < table.size
    out = np.empty(idx.shape, dtype=np.float64)
    out[inside] = table[idx[inside]]
    if not np.all(inside):
        out[~inside] = _survival_far(beta, idx[~inside])
    return float(out) if out.ndim == 0 else out


def sibuya_pmf(beta: float, ell):
    """``P(Q_beta = ell) = beta Gamma(ell - beta) / (Gamma(1 - beta) Gamma(ell + 1))``."""
    _check_beta(beta)
    arr = np.asarray(ell)
    if np.any(arr < 1):
        raise DomainError("ell must be a positive integer")
    idx = arr.astype(np.int64)
    table = sibuya_table(beta).ensure(int(idx.max(initial=1)) + 1)
    out = np.empty(idx.shape, dtype=np.float64)
    inside = idx < table.size
    # P(Q = l) = S(l-1) * beta / l, the same recursion as the survival table.
    out[inside] = table[idx[inside] - 1] * (beta / idx[inside])
    if not np.all(inside):
        far = idx[~inside].astype(np.float64)
        out[~inside] = _survival_far(beta, far - 1.0) * (beta / far)
    return float(out) if out.ndim == 0 else out


def sibuya_pgf(beta: float, z):
    """``E z^Q = 1 - (1 - z)^beta`` for ``|z| <= 1``."""
    _check_beta(beta, allow_one=True)
    z = np.asarray(z, dtype=np.float64)
    if np.any(np.abs(z) > 1.0):
        raise DomainError("pgf requires |z| <= 1")
    out = 1.0 - np.power(1.0 - z, beta)
    return float(out) if out.ndim == 0 else out


def sibuya_odd_probability(beta: float) -> float:
    """``P(Q_beta odd) = (1 - pgf(-1)) / 2``."""
    return 0.5 * (1.0 - sibuya_pgf(beta, -1.0))


# -- Poisson parity -----------------------------------------------------------

def poisson_parity_prob(pattern: ParityPattern, q):
    """``P(N(q t_j) = delta_j mod 2 for all j)`` for a unit-rate Poisson process.

    ``q`` may be an array; the product over increments is evaluated elementwise.
    """
    q = np.asarray(q, dtype=np.float64)
    if np.any(q < 0):
        raise DomainError("q must be nonnegative")
    out = np.ones_like(q)
    prev_t, prev_bit = 0.0, 0
    for t, bit in zip(pattern.times, pattern.delta):
        x = -2.0 * q * (t - prev_t)
        if bit == prev_bit:
            factor = 0.5 * (1.0 + np.exp(x))
        else:
            # (1 - e^x) / 2 without cancellation for small q
            factor = -0.5 * np.expm1(x)
        out = out * factor
        prev_t, prev_bit = t, bit
    return float(out) if out.ndim == 0 else out


def bernoulli_odd_probability(q, m):
    """``P(Binomial(m, q) odd) = (1 - (1 - 2q)^m) / 2``."""
    q = np.asarray(q, dtype=np.float64)
    return 0.5 * (1.0 - np.power(1.0 - 2.0 * q, m))


# -- Gamma mixture G(Q_beta - beta) ------------------------------------------

def gamma_mixture_pdf(beta: float, x):
    """Density ``(1 - e^-x) beta x^(-beta-1) / Gamma(1 - beta)`` of ``G(Q_beta - beta)``."""
    _check_beta(beta)
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise DomainError("x must be positive")
    out = -np.expm1(-x) * beta * np.power(x, -beta - 1.0) / math.gamma(1.0 - beta)
    return float(out) if out.ndim == 0 else out


def gamma_mixture_cdf(beta: float, x: float, tol: float = 1e-10) -> float:
    """CDF of the Gamma mixture by quadrature.

    The substitution ``x = u^(1/(1-beta))`` turns the ``x^-beta`` singularity at
    zero into a bounded integrand.
    """
    _check_beta(beta)
    if x <= 0:
        return 0.0
    expo = 1.0 / (1.0 - beta)
    norm = beta / math.gamma(1.0 - beta)

    def integrand(u: float) -> float:
        if u == 0.0:
            return norm * expo
        y = u ** expo
        # pdf(y) dy/du with pdf(y) y^(beta+1) = norm (1 - e^-y)
        return norm * expo * (-math.expm1(-y)) / y

    if x <= 50.0:
        val, _ = integrate.quad(integrand, 0.0, x ** (1.0 - beta), epsabs=tol, epsrel=0.0, limit=200)
        return min(val, 1.0)
    # beyond 50 the factor 1 - e^-y equals 1 to double precision, so the tail is
    # int_x^inf beta y^(-beta-1) dy / Gamma(1 - beta)
    return 1.0 - x ** -beta / math.gamma(1.0 - beta)


def gamma_mixture_laplace(beta: float, theta: float, tol: float = 1e-10) -> float:
    """``E exp(-theta G)`` by quadrature of the density."""
    _check_beta(beta)
    expo = 1.0 / (1.0 - beta)
    norm = beta / math.gamma(1.0 - beta)

    def integrand(u: float) -> float:
        if u == 0.0:
            return norm * expo
        y = u ** expo
        return norm * expo * (-math.expm1(-y)) / y * math.exp(-theta * y)

    val, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=tol, epsrel=1e-12, limit=400)
    return val
