"""Scalar root finding, line searches and envelope helpers shared by the
exponent evaluators."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

BISECT_TOL = 1e-10
BISECT_MAXITER = 200
GOLDEN_TOL = 1e-10

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def bisect_increasing(f: Callable[[float], float], target: float, lo: float, hi: float,
                      tol: float = BISECT_TOL, maxiter: int = BISECT_MAXITER) -> float:
    """Solve f(x) = target for a nondecreasing f on [lo, hi].

    Returns the endpoint when the target lies outside [f(lo), f(hi)].
    """
    if f(lo) >= target:
        return lo
    if f(hi) <= target:
        return hi
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def golden_max(f: Callable[[float], float], a: float, b: float,
               tol: float = GOLDEN_TOL) -> tuple[float, float]:
    """Maximize a unimodal function on [a, b]; endpoints are always checked.

    Returns ``(x, f(x))``.
    """
    fa, fb = f(a), f(b)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    lo, hi = a, b
    while hi - lo > tol:
        if fc < fd:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = f(d)
        else:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = f(c)
    x = 0.5 * (lo + hi)
    best = max([(f(x), x), (fc, c), (fd, d), (fa, a), (fb, b)])
    return best[1], best[0]


def golden_min(f: Callable[[float], float], a: float, b: float,
               tol: float = GOLDEN_TOL) -> tuple[float, float]:
    x, v = golden_max(lambda z: -f(z), a, b, tol)
    return x, -v


def upper_concave_envelope(xs, ys) -> np.ndarray:
    """Upper concave envelope of the points (xs, ys), evaluated at xs.

    ``xs`` must be strictly increasing. Monotone-chain pass, then linear
    interpolation between the hull vertices.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    hull: list[int] = []
    for i in range(len(xs)):
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            # drop i1 if it lies on or below the chord i0 -> i
            cross = (xs[i1] - xs[i0]) * (ys[i] - ys[i0]) - (ys[i1] - ys[i0]) * (xs[i] - xs[i0])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    idx = np.array(hull)
    return np.interp(xs, xs[idx], ys[idx])


def log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def logsumexp_fsum(logs) -> float:
    """log(sum(exp(logs))) with compensated (fsum) accumulation."""
    logs = [x for x in logs if x != -math.inf]
    if not logs:
        return -math.inf
    m = max(logs)
    return m + math.log(math.fsum(math.exp(x - m) for x in logs))


class Chebyshev:
    """Chebyshev interpolant on [a, b] with value and first derivative.

    Evaluation uses Clenshaw recurrences on plain floats; the optimizers call
    this in tight scalar loops.
    """

    def __init__(self, f_vec: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                 tol: float = 1e-14, max_degree: int = 256):
        self.a, self.b = float(a), float(b)
        deg = 16
        while True:
            k = np.arange(deg + 1)
            x = np.cos(np.pi * k / deg)  # Chebyshev extreme points
            vals = np.asarray(f_vec(self._to_interval(x)), dtype=float)
            coef = _cheb_coefficients(vals)
            scale = max(1.0, float(np.max(np.abs(coef))))
            if np.max(np.abs(coef[-4:])) <= tol * scale or deg >= max_degree:
                break
            deg *= 2
        cut = len(coef)
        while cut > 1 and abs(coef[cut - 1]) <= 0.01 * tol * scale:
            cut -= 1
        self.coef = [float(c) for c in coef[:cut]]
        dcoef = np.polynomial.chebyshev.chebder(np.array(self.coef)) * (2.0 / (self.b - self.a))
        self.dcoef = [float(c) for c in dcoef] if len(dcoef) else [0.0]
        self.degree = cut - 1
        self.tail = float(np.max(np.abs(coef[-4:])))

    def _to_interval(self, x):
        return 0.5 * (self.a + self.b) + 0.5 * (self.b - self.a) * x

    def _clenshaw(self, coef, t):
        x = (2.0 * t - self.a - self.b) / (self.b - self.a)
        b1 = b2 = 0.0
        x2 = 2.0 * x
        for c in reversed(coef[1:]):
            b1, b2 = c + x2 * b1 - b2, b1
        return coef[0] + x * b1 - b2

    def __call__(self, t: float) -> float:
        return self._clenshaw(self.coef, t)

    def deriv(self, t: float) -> float:
        return self._clenshaw(self.dcoef, t)


def _cheb_coefficients(vals: np.ndarray) -> np.ndarray:
    # vals sampled at cos(pi k / deg), k = 0..deg; type-I DCT via FFT of the even extension
    deg = len(vals) - 1
    ext = np.concatenate([vals, vals[-2:0:-1]])
    c = np.real(np.fft.fft(ext))[: deg + 1] / deg
    c[0] /= 2.0
    c[-1] /= 2.0
    return c
