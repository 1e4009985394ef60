"""Random-variate generation on top of reproducible, splittable streams.

A :class:`RandomStream` is a counter-based Philox generator keyed on a seed and
a derivation path.  Deriving a child stream is a pure function of
``(seed, path)``, so any repetition or replica can be regenerated without
replaying the others.
"""

from __future__ import annotations

import math
import warnings
import zlib
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .special_functions import DomainError, _survival_far, sibuya_table

DEFAULT_SEED = 20240611

_INT_CAP = np.int64(1) << np.int64(62)


def _key(part: Union[int, str]) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    part = int(part)
    if part < 0:
        raise ValueError("stream path indices must be nonnegative")
    return part


class RandomStream:
    """Single-owner uniform stream derived from ``(seed, path)``."""

    __slots__ = ("seed", "path", "generator")

    def __init__(self, seed: int = DEFAULT_SEED, path: tuple = ()):
        self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
        self.path = tuple(path)
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(_key(p) for p in self.path))
        self.generator = np.random.Generator(np.random.Philox(ss))

    def child(self, *keys: Union[int, str]) -> "RandomStream":
        return RandomStream(self.seed, self.path + keys)

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, path={self.path!r})"

    def uniform(self, size=None):
        """Uniforms on the open interval (0, 1); exact zeros are redrawn."""
        gen = self.generator
        if size is None:
            u = gen.random()
            while u == 0.0:
                u = gen.random()
            return u
        u = gen.random(size)
        bad = u == 0.0
        while np.any(bad):
            u[bad] = gen.random(int(bad.sum()))
            bad = u == 0.0
        return u

    def signs(self, size=None):
        """Fair +-1 signs."""
        if size is None:
            return 1.0 if self.generator.random() < 0.5 else -1.0
        return np.where(self.generator.random(size) < 0.5, 1.0, -1.0)


# -- Sibuya ------------------------------------------------------------------

def sibuya_from_uniform(beta: float, u):
    """Smallest ``n`` with ``P(Q_beta > n) < u``.

    Uses the shared survival table; uniforms below the table's last entry are
    resolved by bisection on the log-gamma form of the survival function.
    Values are clipped at 2**62.
    """
    u = np.asarray(u, dtype=np.float64)
    if beta == 1.0:
        return np.ones(u.shape, dtype=np.int64) if u.ndim else 1
    scalar = u.ndim == 0
    u = np.atleast_1d(u)
    table = sibuya_table(beta)
    surv = table.survival
    # grow the table while it is cheap to reach the smallest uniform
    umin = float(u.min()) if u.size else 1.0
    while surv[-1] >= umin and surv.size < (1 << 22):
        surv = table.ensure(2 * surv.size)
    neg = table.negated
    if neg.size < surv.size:
        neg = -surv
    out = np.searchsorted(neg, -u, side="right").astype(np.int64)
    far = out >= surv.size
    if np.any(far):
        out[far] = _invert_far(beta, u[far], surv.size)
    return int(out[0]) if scalar else out


def _invert_far(beta: float, u: np.ndarray, start: int) -> np.ndarray:
    lo = np.full(u.shape, start - 1, dtype=np.int64)  # S(lo) >= u
    hi = np.full(u.shape, int(_INT_CAP), dtype=np.int64)
    capped = _survival_far(beta, hi.astype(np.float64)) >= u
    for _ in range(70):
        active = hi - lo > 1
        if not np.any(active):
            break
        mid = lo + (hi - lo) // 2
        ok = _survival_far(beta, mid.astype(np.float64)) < u
        hi = np.where(active & ok, mid, hi)
        lo = np.where(active & ~ok, mid, lo)
    if np.any(capped):
        warnings.warn("Sibuya draw exceeded 2**62 and was clipped", RuntimeWarning, stacklevel=3)
    return hi


def sample_sibuya(beta: float, stream: RandomStream, size=None):
    """Exact Sibuya(beta) draws by inversion of the survival function."""
    if not (0.0 < beta <= 1.0):
        raise DomainError(f"beta must lie in (0, 1], got {beta}")
    return sibuya_from_uniform(beta, stream.uniform(size))


# -- random parameter q ------------------------------------------------------

def q_from_uniform(rho: float, u):
    return np.power(u, 1.0 / (1.0 - rho))


def sample_q(rho: float, stream: RandomStream, size=None):
    """Draws from the density ``(1 - rho) x^-rho`` on (0, 1); boundary values are redrawn."""
    if not rho < 1.0:
        raise DomainError(f"rho must be < 1, got {rho}")
    q = q_from_uniform(rho, stream.uniform(size))
    if size is None:
        while q <= 0.0 or q >= 1.0:
            q = q_from_uniform(rho, stream.uniform())
        return float(q)
    bad = (q <= 0.0) | (q >= 1.0)
    while np.any(bad):
        q[bad] = q_from_uniform(rho, stream.uniform(int(bad.sum())))
        bad = (q <= 0.0) | (q >= 1.0)
    return q


@dataclass(frozen=True)
class PowerLawQ:
    """Law of ``q`` with density ``x^-rho L(1/x)`` and constant ``L = 1 - rho``."""

    rho: float

    def __post_init__(self):
        if not self.rho < 1.0:
            raise DomainError(f"rho must be < 1, got {self.rho}")

    def slowly_varying(self, x: float) -> float:
        return 1.0 - self.rho

    def sample(self, stream: RandomStream, size=None):
        return sample_q(self.rho, stream, size)


@dataclass(frozen=True)
class CustomQ:
    """Experimental: user-supplied law of ``q`` with its own slowly varying part.

    ``sampler(stream, size)`` must return draws in (0, 1) whose density is
    ``x^-rho L(1/x)``; ``slowly_varying(x)`` evaluates ``L``.
    """

    rho: float
    sampler: Callable[[RandomStream, object], object]
    slowly_varying_fn: Callable[[float], float]

    def __post_init__(self):
        warnings.warn("CustomQ is experimental; limit constants assume L is slowly varying",
                      UserWarning, stacklevel=3)

    def slowly_varying(self, x: float) -> float:
        return float(self.slowly_varying_fn(x))

    def sample(self, stream: RandomStream, size=None):
        return self.sampler(stream, size)


# -- innovations -------------------------------------------------------------

@dataclass(frozen=True)
class SymmetrizedPareto:
    alpha: float
    c_x: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.c_x <= 0:
            raise DomainError("SymmetrizedPareto needs alpha > 0 and c_x > 0")

    @property
    def finite_variance(self) -> bool:
        return self.alpha > 2.0

    def tail(self, x):
        """``P(|X| > x)``."""
        x = np.asarray(x, dtype=np.float64)
        lower = self.c_x ** (1.0 / self.alpha)
        return np.where(x < lower, 1.0, self.c_x * np.power(np.maximum(x, lower), -self.alpha))


@dataclass(frozen=True)
class Rademacher:
    @property
    def second_moment(self) -> float:
        return 1.0


@dataclass(frozen=True)
class Gaussian:
    variance: float = 1.0

    def __post_init__(self):
        if self.variance <= 0:
            raise DomainError("Gaussian variance must be positive")

    @property
    def second_moment(self) -> float:
        return self.variance


InnovationLaw = Union[SymmetrizedPareto, Rademacher, Gaussian]


def pareto_magnitude(alpha: float, c_x: float, u):
    """Inverse tail: ``|X| = (c_x / u)^(1/alpha)``."""
    return np.power(c_x / np.asarray(u, dtype=np.float64), 1.0 / alpha)


def sample_innovation(law: InnovationLaw, stream: RandomStream, size=None):
    if isinstance(law, SymmetrizedPareto):
        mag = pareto_magnitude(law.alpha, law.c_x, stream.uniform(size))
        return mag * stream.signs(size) if size is not None else float(mag) * stream.signs()
    if isinstance(law, Rademacher):
        return stream.signs(size)
    if isinstance(law, Gaussian):
        return stream.generator.normal(0.0, math.sqrt(law.variance), size)
    raise TypeError(f"unknown innovation law {law!r}")


# -- Poisson arrivals and Bernoulli paths -----------------------------------

def poisson_arrivals(count: int, stream: RandomStream) -> np.ndarray:
    """First ``count`` arrival times of a unit-rate Poisson process."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return np.cumsum(stream.generator.standard_exponential(count))


def geometric_gap(q: float, u: float) -> int:
    """Trials up to and including the next success: ``ceil(ln u / ln(1 - q))``."""
    if q >= 1.0:
        return 1
    gap = math.ceil(math.log(u) / math.log1p(-q))
    return max(gap, 1)


def success_positions(q: float, n: int, stream: RandomStream) -> np.ndarray:
    """Indices ``1..n`` of Bernoulli(q) successes, generated by geometric gaps."""
    out = []
    pos = 0
    # batch the uniforms: expected number of successes is n q
    batch = max(8, int(n * q * 1.2) + 8)
    while True:
        for u in stream.uniform(batch):
            pos += geometric_gap(q, float(u))
            if pos > n:
                return np.asarray(out, dtype=np.int64)
            out.append(pos)
