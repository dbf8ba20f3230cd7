"""Achievable error exponents for multi-class source-channel coding.

Every evaluator returns an :class:`ExponentResult` in nats per channel use.
Rates are in nats per channel use as well; ``t`` is source symbols per
channel use.

The channel enters only through rho -> E0(rho) on [0, 1] (maximized over the
input distribution). It is sampled once per channel into a Chebyshev
interpolant, which gives both E0 and its derivative to near machine accuracy
and makes the nested optimizations cheap. For symmetric channels E0 is
concave in rho and the one-dimensional maximizations are golden-section
searches; otherwise a grid scan brackets the maximizer first.

The optimizers work on level sets of the exponent: for a target value E the
smallest admissible rates are obtained by inverting the monotone pieces
(source reliability, random-coding exponent), and E is bisected until the
constraints become infeasible.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._numerics import BISECT_MAXITER, GOLDEN_TOL, Chebyshev, golden_max, golden_min
from .channel_core import (
    ChannelSpec,
    e0_concave_hull,
    e0_max_many,
    is_symmetric,
    random_coding_exponent,
)
from .source_core import (
    DiscreteSource,
    check_ratio,
    divergence_uniform,
    entropy,
    gallager_source_fn,
    source_rate_for_exponent,
    source_reliability,
)

HULL_AGREEMENT_TOL = 1e-5
LEVEL_TOL = 1e-12
SCAN_POINTS = 257
# relative step past t log|V| where the source term becomes infinite
BEYOND = 1e-12


class ExponentMismatchError(ArithmeticError):
    """The two dual forms of the concave-hull exponent disagree."""


@dataclass
class ExponentResult:
    """A bound value with the parameters that produced it.

    ``terms`` lists the value of each competing error event, ``active`` is
    the index of the smallest one.
    """

    value: float
    argmax: dict = field(default_factory=dict)
    terms: tuple = ()
    active: int | None = None
    diagnostics: dict = field(default_factory=dict)


class _E0Model:
    """E0(rho) = max_Q E0(rho, Q) on [0, 1] as a Chebyshev interpolant."""

    def __init__(self, ch: ChannelSpec):
        self.ch = ch
        self.concave = is_symmetric(ch)
        self.cheb = Chebyshev(lambda r: e0_max_many(ch, r), 0.0, 1.0)
        self.grid = np.linspace(0.0, 1.0, SCAN_POINTS)
        self.grid_vals = np.asarray(self.cheb(self.grid), dtype=float)
        self.grid_vals[0] = 0.0
        self.e0_one = self.value(1.0)
        self.slope_one = self.deriv(1.0)
        self.slope_zero = self.deriv(0.0)

    def value(self, rho: float) -> float:
        return 0.0 if rho == 0.0 else self.cheb(rho)

    def deriv(self, rho: float) -> float:
        return self.cheb.deriv(rho)


@functools.lru_cache(maxsize=64)
def _model(ch: ChannelSpec) -> _E0Model:
    return _E0Model(ch)


def _maximize_unit(f, concave: bool) -> tuple[float, float]:
    """max of f on [0, 1]; golden section, after a grid bracket if needed."""
    if concave:
        return golden_max(f, 0.0, 1.0, GOLDEN_TOL)
    grid = np.linspace(0.0, 1.0, SCAN_POINTS)
    vals = [f(x) for x in grid]
    j = int(np.argmax(vals))
    a, b = grid[max(j - 1, 0)], grid[min(j + 1, SCAN_POINTS - 1)]
    x, v = golden_max(f, a, b, GOLDEN_TOL)
    if vals[j] > v:
        return float(grid[j]), float(vals[j])
    return x, v


# channel side


def _channel_exponent(m: _E0Model, R: float) -> tuple[float, float]:
    """(Er(R), maximizing rho) from the E0 model."""
    if m.concave:
        if R >= m.slope_zero:
            return 0.0, 0.0
        if R <= m.slope_one:
            return m.e0_one - R, 1.0
        # E0' decreasing: solve E0'(rho) = R
        lo, hi = 0.0, 1.0
        for _ in range(BISECT_MAXITER):
            mid = 0.5 * (lo + hi)
            if m.deriv(mid) > R:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-14:
                break
        rho = 0.5 * (lo + hi)
        return max(m.value(rho) - rho * R, 0.0), rho
    rho, val = _maximize_unit(lambda r: m.value(r) - r * R, False)
    return max(val, 0.0), rho


def _channel_rate_for_exponent(m: _E0Model, E: float) -> float | None:
    """Largest R with Er(R) >= E; None when E > E0(1)."""
    if E > m.e0_one:
        return None
    if m.concave:
        if E <= 0.0:
            return m.slope_zero
        if E >= m.e0_one - m.slope_one:
            return m.e0_one - E
        # E0(rho) - rho E0'(rho) increases in rho from 0 to E0(1) - E0'(1)
        lo, hi = 0.0, 1.0
        for _ in range(BISECT_MAXITER):
            mid = 0.5 * (lo + hi)
            if m.value(mid) - mid * m.deriv(mid) < E:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-14:
                break
        return m.deriv(0.5 * (lo + hi))
    # Er is convex nonincreasing; bisect on R
    top = max(m.slope_zero, float(np.max(m.grid_vals[1:] / m.grid[1:])))
    lo, hi = 0.0, top
    for _ in range(BISECT_MAXITER):
        mid = 0.5 * (lo + hi)
        if _channel_exponent(m, mid)[0] >= E:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14:
            break
    return lo


def channel_term(ch: ChannelSpec, R: float) -> float:
    """Er(R) with the input distribution optimized for each rho."""
    if R < 0:
        raise ValueError(f"rate must be nonnegative, got {R!r}")
    return _channel_exponent(_model(ch), R)[0]


# source side


def _beyond_rate(src: DiscreteSource, t: float) -> float:
    return t * math.log(src.size) * (1.0 + BEYOND)


def source_term(src: DiscreteSource, t: float, R: float) -> float:
    """t e(R/t): exponent of the probability that the source rate exceeds R."""
    return t * source_reliability(src, R / t)


def _source_rate_for_exponent(src: DiscreteSource, t: float, E: float) -> float:
    """Smallest R with t e(R/t) >= E (a rate just above t log|V| if none is finite)."""
    r = source_rate_for_exponent(src, E / t)
    if math.isinf(r):
        return _beyond_rate(src, t)
    return t * r


def _rate_penalized_term(src, t, m: _E0Model, slope: float) -> tuple[float, float]:
    """max_{rho in [0,1]} E0(rho) - t Es(rho) - rho slope, and its argmax."""
    rho, val = _maximize_unit(lambda r: m.value(r) - t * gallager_source_fn(src, r) - r * slope, m.concave)
    return max(val, 0.0), rho


def _min_term(terms: Sequence[float]) -> tuple[float, int]:
    j = int(np.argmin(terms))
    return float(terms[j]), j


# exponents


def thm1_exponent(src: DiscreteSource, ch: ChannelSpec, t: float, rates: Sequence[float],
                  dists: Sequence[Sequence[float]] | None = None) -> ExponentResult:
    """min over classes i = 0..N of Er(R_i, Q_i) + t e(R_{i+1}/t).

    Class 0 contributes only its source term; the top class has no source
    term. Without ``dists`` each class uses the best input for every rho.
    """
    t = check_ratio(t)
    rates = [float(r) for r in rates]
    if not rates:
        raise ValueError("need at least one class rate")
    if any(r < 0 for r in rates):
        raise ValueError("rates must be nonnegative")
    if any(b > a for a, b in zip(rates, rates[1:])):
        raise ValueError("class rates must be nonincreasing")
    if dists is not None and len(dists) != len(rates):
        raise ValueError("need one input distribution per class")
    m = _model(ch)
    n = len(rates)
    src_terms = [source_term(src, t, r) for r in rates] + [0.0]
    chan = []
    for i, r in enumerate(rates):
        if dists is None:
            chan.append(_channel_exponent(m, r)[0])
        else:
            chan.append(random_coding_exponent(ch, dists[i], r))
    terms = [src_terms[0]] + [chan[i] + src_terms[i + 1] for i in range(n)]
    value, j = _min_term(terms)
    return ExponentResult(value, {"rates": tuple(rates)}, tuple(terms), j,
                          {"channel_terms": tuple(chan), "source_terms": tuple(src_terms)})


def _thm1_chain(src, t, m: _E0Model, N: int, E: float) -> list[float] | None:
    # smallest rates meeting every constraint at level E, or None
    r = _source_rate_for_exponent(src, t, E)
    rates = []
    for i in range(N):
        rates.append(r)
        er = _channel_exponent(m, r)[0]
        if i == N - 1:
            return rates if er >= E else None
        nxt = 0.0 if er >= E else _source_rate_for_exponent(src, t, E - er)
        if nxt > r:
            return None
        r = nxt
    return None


def _bisect_level(feasible, top: float) -> tuple[float, object, int]:
    lo, hi = 0.0, top
    best = feasible(0.0)
    it = 0
    if feasible(hi) is not None:
        return hi, feasible(hi), 0
    while hi - lo > LEVEL_TOL and it < BISECT_MAXITER:
        it += 1
        mid = 0.5 * (lo + hi)
        sol = feasible(mid)
        if sol is not None:
            lo, best = mid, sol
        else:
            hi = mid
    return lo, best, it


def optimize_thm1(src: DiscreteSource, ch: ChannelSpec, t: float, N: int) -> ExponentResult:
    """Best multi-class exponent over nonincreasing rate vectors R_1 >= ... >= R_N."""
    t = check_ratio(t)
    if N < 1:
        raise ValueError("N must be at least 1")
    m = _model(ch)
    level, rates, it = _bisect_level(lambda E: _thm1_chain(src, t, m, N, E), m.e0_one)
    res = thm1_exponent(src, ch, t, rates)
    res.argmax["thresholds"] = tuple(_threshold_or_none(src, t, r) for r in rates)
    res.diagnostics.update(iterations=it, level=level, gap=abs(level - res.value))
    return res


def _threshold_or_none(src, t, R):
    from .partition import threshold_from_rate

    if t * entropy(src) <= R <= t * math.log(src.size):
        return threshold_from_rate(src, t, R)
    return None


def thm2_exponent(src: DiscreteSource, ch: ChannelSpec, t: float, N: int, R: float, Rp: float) -> ExponentResult:
    """Exponent of the N-class scheme with rates spread evenly over [R, Rp].

    Three events compete: the source leaving the coded classes (rate Rp),
    a neighbouring-class confusion penalized by the rate step (Rp-R)/(N-1),
    and a channel error in the lowest-rate class (rate R).
    """
    t = check_ratio(t)
    if N < 2:
        raise ValueError("N must be at least 2")
    if not 0.0 <= R <= Rp:
        raise ValueError(f"need 0 <= R <= Rp, got R={R!r}, Rp={Rp!r}")
    m = _model(ch)
    t1 = source_term(src, t, Rp)
    t2, rho2 = _rate_penalized_term(src, t, m, (Rp - R) / (N - 1))
    t3, rho3 = _channel_exponent(m, R)
    terms = (t1, t2, t3)
    value, j = _min_term(terms)
    schedule = tuple(R + i * (Rp - R) / (N - 1) for i in range(N))
    return ExponentResult(value, {"R": R, "Rp": Rp, "schedule": schedule, "rho2": rho2, "rho3": rho3},
                          terms, j)


def optimize_thm2(src: DiscreteSource, ch: ChannelSpec, t: float, N: int) -> ExponentResult:
    """Maximize the N-class exponent over R' >= R >= 0."""
    t = check_ratio(t)
    if N < 2:
        raise ValueError("N must be at least 2")
    m = _model(ch)

    def feasible(E):
        rp = _source_rate_for_exponent(src, t, E)
        r = _channel_rate_for_exponent(m, E)
        if r is None:
            return None
        gap = max(0.0, rp - r)
        if _rate_penalized_term(src, t, m, gap / (N - 1))[0] < E:
            return None
        return min(r, rp), rp

    level, (R, Rp), it = _bisect_level(feasible, m.e0_one)
    res = thm2_exponent(src, ch, t, N, R, Rp)
    res.diagnostics.update(iterations=it, level=level, gap=abs(level - res.value))
    return res


def separate_exponent(src: DiscreteSource, ch: ChannelSpec, t: float) -> ExponentResult:
    """max_R min{Er(R), t e(R/t)}: a source code followed by a channel code."""
    t = check_ratio(t)
    m = _model(ch)
    lo = t * entropy(src)
    hi = t * math.log(src.size)

    def diff(r):
        return _channel_exponent(m, r)[0] - source_term(src, t, r)

    if diff(lo) <= 0.0:
        R = lo
    elif diff(hi) >= 0.0:
        # the source term jumps to infinity just above t log|V|
        R = _beyond_rate(src, t)
    else:
        for _ in range(BISECT_MAXITER):
            mid = 0.5 * (lo + hi)
            if diff(mid) > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-14:
                break
        # keep the endpoint with the larger min
        R = max((lo, hi), key=lambda r: min(_channel_exponent(m, r)[0], source_term(src, t, r)))
    er, rho = _channel_exponent(m, R)
    terms = (er, source_term(src, t, R))
    value, j = _min_term(terms)
    return ExponentResult(value, {"R": R, "rho": rho}, terms, j)


def joint_exponent(src: DiscreteSource, ch: ChannelSpec, t: float) -> ExponentResult:
    """max_{rho in [0,1]} E0(rho) - t Es(rho)."""
    t = check_ratio(t)
    m = _model(ch)
    rho, val = _maximize_unit(lambda r: m.value(r) - t * gallager_source_fn(src, r), m.concave)
    if val <= 0.0:
        rho, val = 0.0, 0.0
    return ExponentResult(val, {"rho": rho}, (val,), 0)


def joint_hull_exponent(src: DiscreteSource, ch: ChannelSpec, t: float,
                        tol: float = HULL_AGREEMENT_TOL) -> ExponentResult:
    """Exponent with E0 replaced by its concave hull, checked against its dual form.

    The dual form min_R {Er(R) + t e(R/t)} is computed independently; the
    two must agree within ``tol``.
    """
    t = check_ratio(t)
    m = _model(ch)
    rho, right = golden_max(lambda r: e0_concave_hull(ch, r) - t * gallager_source_fn(src, r), 0.0, 1.0,
                            GOLDEN_TOL)
    right = max(right, 0.0)
    lo = t * entropy(src)
    hi = t * math.log(src.size)
    R, left = golden_min(lambda r: _channel_exponent(m, r)[0] + source_term(src, t, r), lo, hi, GOLDEN_TOL)
    if abs(left - right) > tol:
        raise ExponentMismatchError(f"hull exponent {right!r} disagrees with its dual form {left!r}")
    return ExponentResult(right, {"rho": rho, "R": R}, (right,), 0, {"dual_value": left})


def capacity(ch: ChannelSpec) -> float:
    """Slope of E0 at rho = 0."""
    return _model(ch).slope_zero


def source_rate_ceiling(src: DiscreteSource, t: float) -> float:
    return t * math.log(src.size)


def divergence_ceiling(src: DiscreteSource, t: float) -> float:
    return t * divergence_uniform(src)
