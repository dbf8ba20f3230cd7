"""Memoryless source primitives.

All quantities are in nats unless a name says otherwise. The Gallager source
function and its relatives are evaluated in the log domain so that sources
with very skewed symbol probabilities stay well conditioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._numerics import BISECT_MAXITER

LN2 = math.log(2.0)


@dataclass(frozen=True)
class DiscreteSource:
    """Symbol distribution of a discrete memoryless source."""

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if len(probs) < 2:
            raise ValueError("a source needs at least 2 symbols")
        if any(not p > 0.0 for p in probs):
            raise ValueError("all symbol probabilities must be strictly positive")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {math.fsum(probs)!r}, not 1")

    @classmethod
    def bms(cls, p: float) -> "DiscreteSource":
        """Binary memoryless source with Pr{1} = p."""
        return cls((1.0 - p, p))

    @property
    def size(self) -> int:
        return len(self.probs)

    @property
    def log_probs(self) -> np.ndarray:
        return np.log(np.array(self.probs))

    @property
    def is_binary(self) -> bool:
        return self.size == 2

    @property
    def p(self) -> float:
        """Pr{symbol 1}; only meaningful for binary sources."""
        if not self.is_binary:
            raise ValueError("p is only defined for binary sources")
        return self.probs[1]


def check_ratio(t: float) -> float:
    """Validate a source-channel ratio t = k/n (source symbols per channel use)."""
    t = float(t)
    if not (t > 0.0 and math.isfinite(t)):
        raise ValueError(f"source-channel ratio must be positive, got {t!r}")
    return t


def _logsumexp(x: np.ndarray) -> float:
    m = float(np.max(x))
    return m + math.log(float(np.sum(np.exp(x - m))))


def _tilted_log(src: DiscreteSource, sigma: float) -> np.ndarray:
    lp = sigma * src.log_probs
    return lp - _logsumexp(lp)


def entropy(src: DiscreteSource) -> float:
    p = np.array(src.probs)
    return float(-np.sum(p * np.log(p)))


def binary_entropy_bits(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log2(p) + (1.0 - p) * math.log2(1.0 - p))


def gallager_source_fn(src: DiscreteSource, rho: float) -> float:
    """Es(rho) = (1 + rho) log sum_v p(v)^(1/(1+rho))."""
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho!r}")
    if math.isinf(rho):
        return math.inf
    if rho == 0.0:
        return 0.0
    return (1.0 + rho) * _logsumexp(src.log_probs / (1.0 + rho))


def gallager_source_fn_deriv(src: DiscreteSource, rho: float) -> float:
    """Es'(rho), the entropy of the tilt with exponent 1/(1+rho)."""
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho!r}")
    if math.isinf(rho):
        return math.log(src.size)
    lq = _tilted_log(src, 1.0 / (1.0 + rho))
    return float(-np.sum(np.exp(lq) * lq))


def tilted_distribution(src: DiscreteSource, sigma: float) -> DiscreteSource:
    """p_sigma(v) proportional to p(v)^sigma."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    q = np.exp(_tilted_log(src, sigma))
    if np.any(q <= 0.0):
        raise FloatingPointError(f"tilted distribution underflows at sigma={sigma!r}")
    q = q / math.fsum(q)
    return DiscreteSource(tuple(q))


def _tilt_stats(src: DiscreteSource, sigma: float) -> tuple[float, float]:
    """(entropy of p_sigma, divergence D(p_sigma || p)) for sigma in (0, 1]."""
    lq = _tilted_log(src, sigma)
    q = np.exp(lq)
    h = float(-np.sum(q * lq))
    d = float(np.sum(q * (lq - src.log_probs)))
    return h, max(d, 0.0)


def divergence_uniform(src: DiscreteSource) -> float:
    """D(uniform || p) = e(log|V|), the largest finite value of e(R)."""
    return float(-math.log(src.size) - np.mean(src.log_probs))


def _sigma_for_entropy(src: DiscreteSource, h: float) -> float:
    # H(p_sigma) decreases from log|V| (sigma -> 0) to H(p) (sigma = 1)
    lo, hi = 0.0, 1.0
    for _ in range(BISECT_MAXITER):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _tilt_stats(src, mid)[0] > h:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def source_reliability(src: DiscreteSource, R: float) -> float:
    """e(R) = sup_{rho >= 0} rho R - Es(rho), in nats per source symbol.

    Zero up to the entropy, ``math.inf`` above log|V|. In between the supremum
    sits where Es'(rho) = R; the value is returned as the divergence of the
    matching tilt, which avoids the cancellation in rho R - Es(rho) at large rho.
    """
    if R < 0:
        raise ValueError(f"rate must be nonnegative, got {R!r}")
    h = entropy(src)
    logv = math.log(src.size)
    if R <= h:
        return 0.0
    # rates within rounding of log|V| count as log|V|
    if R > logv * (1.0 + 1e-12):
        return math.inf
    if R >= logv:
        return divergence_uniform(src)
    sigma = _sigma_for_entropy(src, R)
    return _tilt_stats(src, sigma)[1]


def source_rate_for_exponent(src: DiscreteSource, E: float) -> float:
    """Smallest R with e(R) >= E.

    Returns ``math.inf`` when E exceeds D(uniform || p): only rates above
    log|V| (where e is infinite) achieve it.
    """
    if E <= 0.0:
        return 0.0
    dmax = divergence_uniform(src)
    if E > dmax:
        return math.inf
    # D(p_sigma || p) decreases from dmax (sigma -> 0) to 0 (sigma = 1)
    lo, hi = 0.0, 1.0
    for _ in range(BISECT_MAXITER):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _tilt_stats(src, mid)[1] >= E:
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        return math.log(src.size)
    return _tilt_stats(src, lo)[0]


def ebn0_to_esn0(ebn0_db: float, t: float, src: DiscreteSource) -> float:
    """Linear Es/N0 for a per-source-bit SNR, Es/N0 = t h2(p) Eb/N0."""
    if not src.is_binary:
        raise ValueError("the per-source-bit SNR is only defined for binary sources")
    t = check_ratio(t)
    return t * binary_entropy_bits(src.p) * 10.0 ** (ebn0_db / 10.0)


def esn0_to_ebn0_db(es_n0: float, t: float, src: DiscreteSource) -> float:
    if not src.is_binary:
        raise ValueError("the per-source-bit SNR is only defined for binary sources")
    return 10.0 * math.log10(es_n0 / (check_ratio(t) * binary_entropy_bits(src.p)))


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)
