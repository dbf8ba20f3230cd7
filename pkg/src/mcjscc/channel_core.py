"""Channel primitives: Gallager's E0, the random-coding exponent and friends.

Two channel families are supported: finite-alphabet DMCs given by a
row-stochastic transition matrix, and the binary-input AWGN channel with
antipodal inputs +-sqrt(Es) (input 0 -> +sqrt(Es), input 1 -> -sqrt(Es)).
Rates and exponents are in nats per channel use.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import roots_hermitenorm

from ._numerics import GOLDEN_TOL, golden_max, upper_concave_envelope

GH_START = 64
GH_CAP = 4096
GH_TOL = 1e-10
HULL_POINTS = 2001


class QuadratureError(RuntimeError):
    """Gauss-Hermite node doubling hit the cap without converging."""


@dataclass(frozen=True)
class DMC:
    """Discrete memoryless channel; ``transition[x][y] = W(y|x)``."""

    transition: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(float(w) for w in row) for row in self.transition)
        object.__setattr__(self, "transition", rows)
        if len(rows) < 1 or len({len(r) for r in rows}) != 1:
            raise ValueError("transition matrix must be a nonempty rectangle")
        for r in rows:
            if any(w < 0 for w in r):
                raise ValueError("transition probabilities must be nonnegative")
            if abs(math.fsum(r) - 1.0) > 1e-12:
                raise ValueError("each transition row must sum to 1")

    @classmethod
    def bsc(cls, delta: float) -> "DMC":
        return cls(((1.0 - delta, delta), (delta, 1.0 - delta)))

    @property
    def n_inputs(self) -> int:
        return len(self.transition)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.transition)


@dataclass(frozen=True)
class BiAwgn:
    """Binary-input AWGN channel at linear Es/N0 (noise variance N0/2, Es = 1)."""

    es_n0: float

    def __post_init__(self):
        object.__setattr__(self, "es_n0", float(self.es_n0))
        if not self.es_n0 > 0:
            raise ValueError(f"es_n0 must be positive, got {self.es_n0!r}")

    @property
    def n_inputs(self) -> int:
        return 2

    @property
    def noise_var(self) -> float:
        return 1.0 / (2.0 * self.es_n0)


ChannelSpec = Union[DMC, BiAwgn]


def uniform_input(ch: ChannelSpec) -> tuple[float, ...]:
    m = ch.n_inputs
    return tuple([1.0 / m] * m)


def _check_input(ch: ChannelSpec, q: Sequence[float] | None) -> tuple[float, ...]:
    if q is None:
        return uniform_input(ch)
    q = tuple(float(x) for x in q)
    if len(q) != ch.n_inputs:
        raise ValueError(f"input distribution has {len(q)} entries, channel has {ch.n_inputs} inputs")
    if any(x < 0 for x in q) or abs(math.fsum(q) - 1.0) > 1e-9:
        raise ValueError("input distribution must be a probability vector")
    return q


def is_symmetric(ch: ChannelSpec) -> bool:
    """Uniform input maximizes E0 for every rho.

    BiAwgn always qualifies. A DMC qualifies when every row is a permutation
    of the first row and every column a permutation of the first column.
    """
    if isinstance(ch, BiAwgn):
        return True
    w = ch.matrix
    r0 = np.sort(w[0])
    c0 = np.sort(w[:, 0])
    rows_ok = all(np.allclose(np.sort(r), r0, atol=1e-12) for r in w)
    cols_ok = all(np.allclose(np.sort(c), c0, atol=1e-12) for c in w.T)
    return rows_ok and cols_ok


@functools.lru_cache(maxsize=None)
def _gh_nodes(m: int) -> tuple[np.ndarray, np.ndarray]:
    u, w = roots_hermitenorm(m)
    return u, w / math.sqrt(2.0 * math.pi)


def _awgn_e0_sum(ch: BiAwgn, q: tuple[float, ...], rhos: np.ndarray, m: int) -> np.ndarray:
    """Output integral of E0 for each rho, by m-node Gauss-Hermite.

    The integrand (sum_x q W^s)^(1+rho) is divided by the output density
    sum_x q W, leaving a bounded smooth function integrated against the two
    Gaussian components.
    """
    u, w = _gh_nodes(m)
    sig2 = ch.noise_var
    sig = math.sqrt(sig2)
    with np.errstate(divide="ignore"):
        lq0, lq1 = math.log(q[0]) if q[0] > 0 else -np.inf, math.log(q[1]) if q[1] > 0 else -np.inf
    s = 1.0 / (1.0 + rhos[:, None])
    total = np.zeros(len(rhos))
    for mean, weight in ((1.0, q[0]), (-1.0, q[1])):
        if weight == 0.0:
            continue
        y = mean + sig * u
        llr = -2.0 * y / sig2  # log W(y|1) - log W(y|0)
        log_h = (1.0 + rhos[:, None]) * np.logaddexp(lq0, lq1 + s * llr) - np.logaddexp(lq0, lq1 + llr)
        total += weight * (np.exp(log_h) @ w)
    return total


def _awgn_e0_many(ch: BiAwgn, q: tuple[float, ...], rhos: np.ndarray) -> np.ndarray:
    m = GH_START
    prev = _awgn_e0_sum(ch, q, rhos, m)
    while True:
        m *= 2
        cur = _awgn_e0_sum(ch, q, rhos, m)
        if np.max(np.abs(np.log(cur) - np.log(prev))) < GH_TOL:
            return -np.log(cur)
        if m >= GH_CAP:
            raise QuadratureError(f"E0 quadrature did not converge at {m} nodes for {ch}")
        prev = cur


def _dmc_e0_many(ch: DMC, q: tuple[float, ...], rhos: np.ndarray) -> np.ndarray:
    w = ch.matrix
    qa = np.array(q)
    out = np.empty(len(rhos))
    with np.errstate(divide="ignore"):
        lw = np.log(w)
        lq = np.log(qa)
    for j, rho in enumerate(rhos):
        s = 1.0 / (1.0 + rho)
        a = lq[:, None] + s * lw  # |X| x |Y|
        inner = np.logaddexp.reduce(a, axis=0)
        terms = (1.0 + rho) * inner
        terms = terms[np.isfinite(terms)]
        mx = np.max(terms)
        out[j] = -(mx + math.log(np.sum(np.exp(terms - mx))))
    return out


def e0_many(ch: ChannelSpec, q: Sequence[float] | None, rhos) -> np.ndarray:
    """Vectorized E0(rho, Q) over an array of rho values."""
    q = _check_input(ch, q)
    rhos = np.atleast_1d(np.asarray(rhos, dtype=float))
    if np.any(rhos < 0):
        raise ValueError("rho must be nonnegative")
    if isinstance(ch, BiAwgn):
        vals = _awgn_e0_many(ch, q, rhos)
    else:
        vals = _dmc_e0_many(ch, q, rhos)
    vals[rhos == 0.0] = 0.0
    return vals


@functools.lru_cache(maxsize=1 << 16)
def _e0_cached(ch: ChannelSpec, q: tuple[float, ...], rho: float) -> float:
    return float(e0_many(ch, q, [rho])[0])


def e0(ch: ChannelSpec, q: Sequence[float] | None, rho: float) -> float:
    """Gallager's E0(rho, Q) = -log sum_y (sum_x Q(x) W(y|x)^(1/(1+rho)))^(1+rho)."""
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho!r}")
    if rho == 0:
        return 0.0
    return _e0_cached(ch, _check_input(ch, q), float(rho))


def mutual_information(ch: ChannelSpec, q: Sequence[float] | None = None) -> float:
    """I(Q) in nats; equals the slope of E0(rho, Q) at rho = 0."""
    q = _check_input(ch, q)
    if isinstance(ch, DMC):
        w = ch.matrix
        qa = np.array(q)
        py = qa @ w
        mask = (w > 0) & (qa[:, None] > 0)
        ratio = np.where(mask, w, 1.0) / np.where(py > 0, py, 1.0)[None, :]
        return float(np.sum(np.where(mask, qa[:, None] * w * np.log(ratio), 0.0)))
    with np.errstate(divide="ignore"):
        lq = np.log(np.array(q))
    sig2 = ch.noise_var
    prev = None
    m = GH_START
    while m <= GH_CAP:
        u, wts = _gh_nodes(m)
        total = 0.0
        for x, mean in enumerate((1.0, -1.0)):
            if q[x] == 0.0:
                continue
            y = mean + math.sqrt(sig2) * u
            llr = -2.0 * y / sig2
            # log W(y|x) - log sum_x' Q(x') W(y|x'), written relative to input x
            rel = llr if x == 0 else -llr
            other = lq[1 - x]
            total += q[x] * float(-np.logaddexp(lq[x], other + rel) @ wts)
        if prev is not None and abs(total - prev) < GH_TOL:
            return total
        prev = total
        m *= 2
    raise QuadratureError("mutual information quadrature did not converge")


def random_coding_exponent(ch: ChannelSpec, q: Sequence[float] | None, R: float) -> float:
    """Er(R, Q) = max_{rho in [0,1]} E0(rho, Q) - rho R."""
    if R < 0:
        raise ValueError(f"rate must be nonnegative, got {R!r}")
    q = _check_input(ch, q)
    _, val = golden_max(lambda r: e0(ch, q, r) - r * R, 0.0, 1.0, GOLDEN_TOL)
    return max(val, 0.0)


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, len(v) + 1)
    cond = u - (css - 1.0) / k > 0
    r = k[cond][-1]
    theta = (css[cond][-1] - 1.0) / r
    return np.maximum(v - theta, 0.0)


def _dmc_f_and_grad(w: np.ndarray, q: np.ndarray, rho: float) -> tuple[float, np.ndarray]:
    # F(Q) = sum_y (sum_x Q W^s)^(1+rho) is convex in Q; E0 = -log F
    s = 1.0 / (1.0 + rho)
    ws = w ** s
    a = q @ ws
    f = float(np.sum(a ** (1.0 + rho)))
    grad = (1.0 + rho) * (ws @ (a ** rho))
    return f, grad


def optimal_input(ch: ChannelSpec, rho: float, tol: float = 1e-9, maxiter: int = 20000) -> tuple[float, ...]:
    """Input distribution maximizing E0(rho, Q).

    Symmetric channels return the uniform distribution; other DMCs run
    projected-gradient descent on the convex F(Q) = exp(-E0) from the
    uniform start, with backtracking steps.
    """
    if is_symmetric(ch) or rho == 0:
        return uniform_input(ch)
    w = ch.matrix
    q = np.full(ch.n_inputs, 1.0 / ch.n_inputs)
    f, g = _dmc_f_and_grad(w, q, rho)
    step = 1.0
    for _ in range(maxiter):
        while True:
            cand = _project_simplex(q - step * g)
            fc, gc = _dmc_f_and_grad(w, cand, rho)
            if fc <= f - 1e-4 * float(g @ (q - cand)) or step < 1e-16:
                break
            step *= 0.5
        moved = float(np.max(np.abs(cand - q)))
        q, f, g = cand, fc, gc
        step = min(step * 2.0, 1e3)
        if moved < tol:
            break
    return tuple(float(x) for x in q / q.sum())


@functools.lru_cache(maxsize=1 << 16)
def _e0_max_cached(ch: ChannelSpec, rho: float) -> float:
    return e0(ch, optimal_input(ch, rho), rho)


def e0_max(ch: ChannelSpec, rho: float) -> float:
    """E0(rho) = max_Q E0(rho, Q)."""
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho!r}")
    if rho == 0:
        return 0.0
    return _e0_max_cached(ch, float(rho))


def e0_max_many(ch: ChannelSpec, rhos) -> np.ndarray:
    rhos = np.asarray(rhos, dtype=float)
    if is_symmetric(ch):
        return e0_many(ch, None, rhos)
    return np.array([e0_max(ch, float(r)) for r in rhos])


@functools.lru_cache(maxsize=64)
def _hull_table(ch: ChannelSpec) -> tuple[np.ndarray, np.ndarray]:
    grid = np.linspace(0.0, 1.0, HULL_POINTS)
    return grid, upper_concave_envelope(grid, e0_max_many(ch, grid))


def e0_concave_hull(ch: ChannelSpec, rho: float) -> float:
    """Concave hull of rho -> E0(rho) on [0, 1], linear between grid vertices."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho!r}")
    grid, hull = _hull_table(ch)
    return float(np.interp(rho, grid, hull))


def quantized_biawgn(ch: BiAwgn, levels: int = 1024) -> DMC:
    """Hard-quantize the BiAwgn output into ``levels`` cells.

    Cell edges follow the cube root of the output density (Panter-Dite
    companding), with two unbounded outer cells.
    """
    from scipy.stats import norm

    sig = math.sqrt(ch.noise_var)
    y = np.linspace(-1.0 - 12.0 * sig, 1.0 + 12.0 * sig, 200 * levels + 1)
    dens = (0.5 * norm.pdf((y - 1.0) / sig) + 0.5 * norm.pdf((y + 1.0) / sig)) ** (1.0 / 3.0)
    cdf = np.cumsum(dens)
    cdf /= cdf[-1]
    inner = np.interp(np.linspace(0.0, 1.0, levels + 1)[1:-1], cdf, y)
    edges = np.concatenate([[-np.inf], inner, [np.inf]])
    rows = []
    for mean in (1.0, -1.0):
        r = np.diff(norm.cdf((edges - mean) / sig))
        rows.append(tuple(r / math.fsum(r)))
    return DMC(tuple(rows))
