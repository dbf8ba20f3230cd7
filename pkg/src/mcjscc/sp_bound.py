"""Sphere-packing lower bound for two-class schemes over the AWGN channel.

Rates here are in bits per channel use. A code of rate R in dimension n is
compared with a cone whose solid angle is a 2^{-nR} fraction of the sphere;
Q(theta) is the probability that white Gaussian noise pushes the transmitted
point out of that cone.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy import integrate
from scipy.special import betainc, log_ndtr
from scipy.stats import chi

from ._numerics import BISECT_MAXITER, log_binom, logsumexp_fsum

CONE_TOL = 1e-12
QUAD_RTOL = 1e-10


class IntegrationError(RuntimeError):
    pass


def solid_angle_fraction(n: int, theta: float) -> float:
    """F(theta) = int_0^theta sin^{n-2} / int_0^pi sin^{n-2}."""
    if theta <= 0.0:
        return 0.0
    if theta >= math.pi:
        return 1.0
    a = 0.5 * (n - 1)
    half = 0.5 * float(betainc(a, 0.5, math.sin(theta) ** 2))
    return half if theta <= 0.5 * math.pi else 1.0 - half


def cone_half_angle(n: int, R_bits: float) -> float:
    """theta with F(theta) = 2^{-n R}."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if R_bits < 0:
        raise ValueError("rate must be nonnegative")
    return _half_angle_for_power(n, n * R_bits)


@functools.lru_cache(maxsize=4096)
def _half_angle_for_power(n: int, nr: float) -> float:
    if nr == 0.0:
        return math.pi
    target = 2.0 ** (-nr)
    lo, hi = 0.0, math.pi
    for _ in range(BISECT_MAXITER):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        f = solid_angle_fraction(n, mid)
        if abs(f - target) <= CONE_TOL * target:
            return mid
        if f < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ConeGeometry:
    n: int
    theta: float
    rate_bits: float

    @classmethod
    def from_rate(cls, n: int, R_bits: float) -> "ConeGeometry":
        return cls(n, cone_half_angle(n, R_bits), R_bits)

    @property
    def fraction(self) -> float:
        return solid_angle_fraction(self.n, self.theta)


def cone_error_prob(n: int, theta: float, es_n0: float, rtol: float = QUAD_RTOL) -> float:
    """Probability that the noisy point leaves the cone of half-angle theta.

    In noise-normalized coordinates the signal sits at distance
    A = sqrt(2 n Es/N0) on the cone axis; with g the axial noise and u the
    norm of the n-1 orthogonal components, the angle exceeds theta iff
    A + g < u cot(theta). Integrating over u ~ chi_{n-1} gives
    Q = E[Phi(u cot(theta) - A)], done in the log domain.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0.0 < theta <= math.pi:
        raise ValueError("theta must lie in (0, pi]")
    if es_n0 < 0:
        raise ValueError("Es/N0 must be nonnegative")
    if theta >= math.pi:
        return 0.0
    return math.exp(log_cone_error_prob(n, theta, es_n0, rtol))


def log_cone_error_prob(n: int, theta: float, es_n0: float, rtol: float = QUAD_RTOL) -> float:
    if theta >= math.pi:
        return -math.inf
    A = math.sqrt(2.0 * n * es_n0)
    cot = math.cos(theta) / math.sin(theta)
    dof = n - 1
    dist = chi(dof)
    hi = math.sqrt(dof) + 40.0

    def log_f(u):
        return dist.logpdf(u) + log_ndtr(u * cot - A)

    grid = np.linspace(1e-9, hi, 2001)
    lg = log_f(grid)
    m = float(np.max(lg))
    if not math.isfinite(m):
        return -math.inf
    peak = float(grid[int(np.argmax(lg))])
    pts = sorted({max(peak - 3.0, 0.0), peak, min(peak + 3.0, hi)})
    val, err = integrate.quad(lambda u: math.exp(float(log_f(u)) - m), 0.0, hi, points=pts,
                              epsabs=0.0, epsrel=rtol, limit=500)
    if not val > 0 or err > max(10 * rtol, 1e-8) * val:
        raise IntegrationError(f"cone probability quadrature did not converge (n={n}, theta={theta})")
    return m + math.log(val)


def binomial_tail(k: int, p: float, w1: int, w2: int) -> float:
    """sum_{w=w1}^{w2} C(k,w) p^w (1-p)^(k-w); zero for an empty range."""
    w1, w2 = max(int(w1), 0), min(int(w2), k)
    if w1 > w2:
        return 0.0
    lp, lq = math.log(p), math.log1p(-p)
    return math.exp(logsumexp_fsum(log_binom(k, w) + w * lp + (k - w) * lq for w in range(w1, w2 + 1)))


def _bits_numerator(k: int, w1: int, w2: int) -> int:
    s = sum(comb(k, w) for w in range(w1, w2 + 1))
    return (s - 1).bit_length() if s > 0 else 0


def class_rate_bits(n: int, k: int, w1: int, w2: int) -> float:
    """(1/n) ceil(log2 sum_{w=w1}^{w2} C(k, w)), exact via integers."""
    return _bits_numerator(k, w1, w2) / n


@functools.lru_cache(maxsize=1 << 14)
def _q_for_bits(n: int, m: int, es_q: float, rtol: float) -> float:
    # Q(theta_{n, m/n}); es_q is Es/N0 rounded for the memo key
    if m == 0:
        return 0.0
    return cone_error_prob(n, _half_angle_for_power(n, float(m)), es_q, rtol)


def _memo_key(es_n0: float) -> float:
    return float(f"{es_n0:.12e}")


def two_class_lower_bound(k: int, n: int, p: float, es_n0: float,
                          rtol: float = QUAD_RTOL) -> tuple[float, tuple[int, int]]:
    """min over 0 <= w1 < w2 <= k of the two-class sphere-packing bound.

    Class 1 holds weights 0..w1, class 2 weights w1+1..w2, heavier blocks
    are declared errors.
    """
    es = _memo_key(es_n0)
    lp, lq = math.log(p), math.log1p(-p)
    pmf = [math.exp(log_binom(k, w) + w * lp + (k - w) * lq) for w in range(k + 1)]
    sizes = [comb(k, w) for w in range(k + 1)]
    best, arg = math.inf, (0, 1)
    for w1 in range(k):
        s1 = sum(sizes[: w1 + 1])
        q1 = _q_for_bits(n, (s1 - 1).bit_length(), es, rtol)
        b1 = math.fsum(pmf[: w1 + 1])
        s2 = 0
        for w2 in range(w1 + 1, k + 1):
            s2 += sizes[w2]
            q2 = _q_for_bits(n, (s2 - 1).bit_length(), es, rtol)
            val = b1 * q1 + math.fsum(pmf[w1 + 1: w2 + 1]) * q2 + math.fsum(pmf[w2 + 1:])
            if val < best:
                best, arg = val, (w1, w2)
    return min(best, 1.0), arg


def bound_row(k: int, n: int, p: float, es_n0: float, ebn0_db: float) -> dict:
    value, (w1, w2) = two_class_lower_bound(k, n, p, es_n0)
    return {"ebn0_db": ebn0_db, "bound": value, "w1_opt": w1, "w2_opt": w2,
            "r1_bits": class_rate_bits(n, k, 0, w1), "r2_bits": class_rate_bits(n, k, w1 + 1, w2)}
