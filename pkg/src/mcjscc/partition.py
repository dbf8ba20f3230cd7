"""Probability-threshold partitions of the source message set.

Messages are split into classes by their probability,
``A_i = {v : gamma_i < P(v) <= gamma_{i+1}}``, class 0 being the declared
error class. Thresholds are stored per symbol, ``g_i = (1/k) log gamma_i``,
so that the asymptotic quantities (tilt parameters rho*_i, class rates R_i,
class source functions and class probability exponents) are direct formulas
in the single-letter distribution.

``rho* = math.inf`` is the uniform-tilt end of the band (g at the mean of
log p); ``rho* = 0`` is the untilted end (g = sum p log p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._numerics import BISECT_MAXITER, log_binom
from .source_core import (
    DiscreteSource,
    _tilted_log,
    check_ratio,
    divergence_uniform,
    entropy,
    gallager_source_fn,
    gallager_source_fn_deriv,
    source_reliability,
)

RHO_INF = math.inf
_TIE_RTOL = 1e-12


def threshold_band(src: DiscreteSource) -> tuple[float, float]:
    """Admissible per-symbol thresholds: (mean of log p, sum p log p)."""
    lp = src.log_probs
    return float(np.mean(lp)), float(np.sum(np.array(src.probs) * lp))


def _tilted_mean_log(src: DiscreteSource, sigma: float) -> float:
    lq = _tilted_log(src, sigma)
    return float(np.sum(np.exp(lq) * src.log_probs))


def rho_star_from_threshold(src: DiscreteSource, g: float) -> float:
    """Solve sum_v p_{1/(1+rho)}(v) log p(v) = g for rho >= 0.

    Above the band returns 0, below it returns ``RHO_INF``.
    """
    lo_g, hi_g = threshold_band(src)
    if g >= hi_g:
        return 0.0
    if g <= lo_g:
        return RHO_INF
    # tilted mean of log p is increasing in sigma
    lo, hi = 0.0, 1.0
    for _ in range(BISECT_MAXITER):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        val = _tilted_mean_log(src, mid)
        if val < g:
            lo = mid
        else:
            hi = mid
    sigma = lo if abs(_tilted_mean_log(src, lo) - g) <= abs(_tilted_mean_log(src, hi) - g) else hi
    return 1.0 / sigma - 1.0


def rate_from_rho_star(src: DiscreteSource, t: float, rho_star: float) -> float:
    """Class rate R = t Es'(rho*) in nats per channel use."""
    t = check_ratio(t)
    if rho_star < 0:
        raise ValueError(f"rho* must be nonnegative, got {rho_star!r}")
    return t * gallager_source_fn_deriv(src, rho_star)


def threshold_from_rate(src: DiscreteSource, t: float, R: float) -> float:
    """Inverse of the threshold -> rate map; R must lie in [t H, t log|V|]."""
    t = check_ratio(t)
    h = entropy(src)
    logv = math.log(src.size)
    r = R / t
    if r < h - 1e-12 or r > logv + 1e-12:
        raise ValueError(f"rate {R!r} outside [{t * h!r}, {t * logv!r}]")
    if r <= h:
        return threshold_band(src)[1]
    if r >= logv:
        return threshold_band(src)[0]
    # entropy of the tilt decreases in sigma
    lo, hi = 0.0, 1.0
    for _ in range(BISECT_MAXITER):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        lq = _tilted_log(src, mid)
        if -float(np.sum(np.exp(lq) * lq)) > r:
            lo = mid
        else:
            hi = mid
    return _tilted_mean_log(src, 0.5 * (lo + hi))


@dataclass(frozen=True)
class PartitionSpec:
    """N coded classes given by strictly increasing per-symbol thresholds.

    ``rates[i-1]`` and ``rho_stars[i-1]`` belong to threshold ``g_i``; rates
    are nonincreasing in i (class 1 sits just above the error class and is
    the largest). With ``check_band=False`` thresholds outside the band are
    accepted; their tilt parameters saturate at 0 or ``RHO_INF``.
    """

    src: DiscreteSource
    t: float
    thresholds: tuple[float, ...]
    check_band: bool = True
    rho_stars: tuple[float, ...] = field(init=False)
    rates: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        g = tuple(float(x) for x in self.thresholds)
        object.__setattr__(self, "thresholds", g)
        object.__setattr__(self, "t", check_ratio(self.t))
        if len(g) < 1:
            raise ValueError("a partition needs at least one threshold")
        if any(b <= a for a, b in zip(g, g[1:])):
            raise ValueError("thresholds must be strictly increasing")
        if any(x > 0 for x in g):
            raise ValueError("per-symbol log-thresholds must be <= 0")
        if self.check_band:
            lo, hi = threshold_band(self.src)
            for x in g:
                if not lo - 1e-12 <= x <= hi + 1e-12:
                    raise ValueError(f"threshold {x!r} outside the admissible band [{lo!r}, {hi!r}]")
        rs = tuple(rho_star_from_threshold(self.src, x) for x in g)
        object.__setattr__(self, "rho_stars", rs)
        object.__setattr__(self, "rates", tuple(rate_from_rho_star(self.src, self.t, r) for r in rs))

    @classmethod
    def from_rates(cls, src: DiscreteSource, t: float, rates: Sequence[float]) -> "PartitionSpec":
        """Build from class rates R_1 > ... > R_N (nats per channel use)."""
        rates = [float(r) for r in rates]
        if any(b >= a for a, b in zip(rates, rates[1:])):
            raise ValueError("class rates must be strictly decreasing")
        return cls(src, t, tuple(threshold_from_rate(src, t, r) for r in rates))

    @property
    def N(self) -> int:
        return len(self.thresholds)

    def boundary_rho_stars(self, i: int) -> tuple[float, float]:
        """(rho*_{i+1}, rho*_i) with rho*_0 = inf and rho*_{N+1} = 0."""
        if not 0 <= i <= self.N:
            raise IndexError(f"class index {i} outside 0..{self.N}")
        hi = RHO_INF if i == 0 else self.rho_stars[i - 1]
        lo = 0.0 if i == self.N else self.rho_stars[i]
        return lo, hi

    def rate(self, i: int) -> float:
        """R_i with R_{N+1} = 0; R_0 is not defined."""
        if i == self.N + 1:
            return 0.0
        if not 1 <= i <= self.N:
            raise IndexError(f"class rate index {i} outside 1..{self.N + 1}")
        return self.rates[i - 1]


@dataclass(frozen=True)
class ClassInfo:
    index: int
    rate: float | None
    rho_star_lo: float
    rho_star_hi: float
    weight_range: tuple[int, int] | None = None

    @property
    def is_empty(self) -> bool:
        return self.weight_range is None


def _tangent(src: DiscreteSource, rho_star: float, rho: float) -> float:
    # tangent line to Es at rho*; at rho* = inf the analytic limit
    # (1 + rho) log|V| + mean(log p)
    if math.isinf(rho_star):
        logv = math.log(src.size)
        return logv + float(np.mean(src.log_probs)) + rho * logv
    return gallager_source_fn(src, rho_star) + (rho - rho_star) * gallager_source_fn_deriv(src, rho_star)


def class_source_fn_from_rho_stars(src: DiscreteSource, rho_lo: float, rho_hi: float, rho: float) -> float:
    """Es_i(rho) for a class with boundary tilts rho_lo = rho*_{i+1} <= rho_hi = rho*_i.

    Es on [rho_lo, rho_hi], tangent lines outside; ``-inf`` for an empty
    window (rho_lo > rho_hi).
    """
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho!r}")
    if rho_lo > rho_hi:
        return -math.inf
    if rho > rho_hi:
        return _tangent(src, rho_hi, rho)
    if rho < rho_lo:
        return _tangent(src, rho_lo, rho)
    return gallager_source_fn(src, rho)


def class_source_fn(src: DiscreteSource, part: PartitionSpec, i: int, rho: float) -> float:
    """Asymptotic class source function Es_i(rho), i = 0..N."""
    lo, hi = part.boundary_rho_stars(i)
    return class_source_fn_from_rho_stars(src, lo, hi, rho)


def class_prob_exponent(src: DiscreteSource, t: float, part: PartitionSpec, i: int,
                        per: str = "symbol") -> float:
    """lim (1/k) log Pr{A_i} = -e(R_{i+1}/t).

    ``per="symbol"`` returns the per-source-symbol value, ``per="channel"``
    the per-channel-use value (times t).
    """
    t = check_ratio(t)
    if per not in ("symbol", "channel"):
        raise ValueError("per must be 'symbol' or 'channel'")
    if not 0 <= i <= part.N:
        raise IndexError(f"class index {i} outside 0..{part.N}")
    r_next = part.rate(i + 1)
    lo, _ = part.boundary_rho_stars(i)
    if math.isinf(lo):
        val = -divergence_uniform(src)
    else:
        val = -source_reliability(src, min(r_next / t, math.log(src.size)))
    return val if per == "symbol" else t * val


def bms_log_prob(p: float, k: int, w) -> np.ndarray:
    """log P(v) of a weight-w binary sequence of length k."""
    w = np.asarray(w, dtype=float)
    return w * math.log(p) + (k - w) * math.log1p(-p)


def realize_partition_bms(src: DiscreteSource, k: int, part: PartitionSpec) -> list[ClassInfo]:
    """Weight intervals of each class for a length-k binary source.

    P(v) depends only on the Hamming weight and decreases with it (p < 1/2),
    so every class is a contiguous weight interval. Membership follows
    gamma_i < P(v) <= gamma_{i+1}; a log-probability within a relative 1e-12
    of a threshold counts as equal to it.
    """
    if not src.is_binary:
        raise ValueError("finite-k realization is implemented for binary sources only")
    p = src.p
    if p > 0.5:
        raise ValueError("expected p = Pr{1} <= 1/2")
    lp = bms_log_prob(p, k, np.arange(k + 1))
    bounds = [-math.inf] + [k * g for g in part.thresholds] + [0.0]

    def above(x: float, thr: float) -> bool:
        # strict: x > thr, with near-ties resolved as equality
        if math.isinf(thr):
            return True
        return x > thr and not math.isclose(x, thr, rel_tol=_TIE_RTOL, abs_tol=_TIE_RTOL)

    def at_most(x: float, thr: float) -> bool:
        return x <= thr or math.isclose(x, thr, rel_tol=_TIE_RTOL, abs_tol=_TIE_RTOL)

    out = []
    for i in range(part.N + 1):
        members = [w for w in range(k + 1) if above(lp[w], bounds[i]) and at_most(lp[w], bounds[i + 1])]
        lo, hi = part.boundary_rho_stars(i)
        rate = part.rate(i) if i >= 1 else None
        wr = (min(members), max(members)) if members else None
        out.append(ClassInfo(i, rate, lo, hi, wr))
    return out


def class_log_size(k: int, weight_range: tuple[int, int] | None) -> float:
    """log |A| for a class made of all sequences with weights in the range."""
    if weight_range is None:
        return -math.inf
    w1, w2 = weight_range
    terms = [log_binom(k, w) for w in range(w1, w2 + 1)]
    m = max(terms)
    return m + math.log(math.fsum(math.exp(x - m) for x in terms))


def finite_k_class_source_fn(src: DiscreteSource, k: int, weight_range: tuple[int, int] | None,
                             rho: float) -> float:
    """(1/k) log (sum_{v in A} P(v)^(1/(1+rho)))^(1+rho) by exact enumeration over weights."""
    if weight_range is None:
        return -math.inf
    p = src.p
    w = np.arange(weight_range[0], weight_range[1] + 1)
    terms = np.array([log_binom(k, int(x)) for x in w]) + bms_log_prob(p, k, w) / (1.0 + rho)
    m = float(np.max(terms))
    return (1.0 + rho) * (m + math.log(math.fsum(np.exp(terms - m)))) / k
