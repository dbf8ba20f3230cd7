"""Desk-scale multi-class source-channel codec over the binary-input AWGN channel.

A length-k binary source block is mapped to its enumerative index I (all
sequences sorted by weight, then lexicographically). Its description length
is L = bit_length(I), and the block goes to the first class whose code
dimension is at least L. The information word is I written in k_dim bits
(leading zeros). Blocks that fit no code form the declared-error class 0
and are sent as the all-zero codeword.

The receiver runs an exhaustive soft ML decoder per class, restricted to the
information words that belong to that class, then picks the candidate with
the largest prior times likelihood.
"""

from __future__ import annotations

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import binomtest

from .source_core import DiscreteSource, ebn0_to_esn0

MAX_KDIM = 22
MAX_K_SIM = 62
CHUNK = 1000

ERROR_TYPES = ("e_s", "e_ml", "e_map")


# enumerative source coding


def enumerative_index(v) -> int:
    """Index of a binary sequence: sum_{w' < w} C(k, w') + rank within weight.

    Within a weight the order is lexicographic with v[0] most significant.
    """
    bits = [int(b) for b in v]
    if any(b not in (0, 1) for b in bits):
        raise ValueError("sequence must be binary")
    k = len(bits)
    w = sum(bits)
    idx = sum(comb(k, j) for j in range(w))
    left = w
    for j, b in enumerate(bits):
        if b:
            idx += comb(k - j - 1, left)
            left -= 1
    return idx


def enumerative_invert(index: int, k: int) -> np.ndarray:
    """Sequence with the given enumerative index."""
    index = int(index)
    if not 0 <= index < 2 ** k:
        raise ValueError(f"index {index} outside [0, 2^{k})")
    w = 0
    while index >= comb(k, w):
        index -= comb(k, w)
        w += 1
    out = np.zeros(k, dtype=np.uint8)
    left = w
    for j in range(k):
        if left == 0:
            break
        c = comb(k - j - 1, left)
        if index >= c:
            out[j] = 1
            index -= c
            left -= 1
    return out


def codeword_length(index: int) -> int:
    """L = ceil(log2(I + 1)), 0 for the all-zero block."""
    return int(index).bit_length()


@functools.lru_cache(maxsize=None)
def _binom_table(k: int) -> np.ndarray:
    # C(n, r) for n, r <= k as int64 (k <= 62 keeps everything exact)
    t = np.zeros((k + 1, k + 2), dtype=np.int64)
    for n in range(k + 1):
        for r in range(n + 1):
            t[n, r] = comb(n, r)
    return t


@functools.lru_cache(maxsize=None)
def _weight_offsets(k: int) -> np.ndarray:
    return np.array([sum(comb(k, j) for j in range(w)) for w in range(k + 2)], dtype=np.int64)


def _index_many(v: np.ndarray) -> np.ndarray:
    """Vectorized enumerative index of the rows of a (T, k) 0/1 array."""
    v = np.asarray(v, dtype=np.int64)
    k = v.shape[1]
    if k > MAX_K_SIM:
        raise ValueError(f"vectorized indexing supports k <= {MAX_K_SIM}")
    tab = _binom_table(k)
    w = v.sum(axis=1)
    # ones remaining at positions >= j
    left = np.cumsum(v[:, ::-1], axis=1)[:, ::-1]
    pos = np.arange(k)
    contrib = np.where(v == 1, tab[(k - pos - 1)[None, :], left], 0)
    return _weight_offsets(k)[w] + contrib.sum(axis=1)


def _index_weights(k: int, idx: np.ndarray) -> np.ndarray:
    """Hamming weight of the sequence behind each index."""
    return np.searchsorted(_weight_offsets(k), idx, side="right") - 1


def _invert_many(idx: np.ndarray, k: int) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64).copy()
    tab = _binom_table(k)
    w = _index_weights(k, idx)
    idx -= _weight_offsets(k)[w]
    left = w.copy()
    out = np.zeros((len(idx), k), dtype=np.uint8)
    for j in range(k):
        c = tab[k - j - 1, left]
        one = (left > 0) & (idx >= c)
        out[one, j] = 1
        idx[one] -= c[one]
        left[one] -= 1
    return out


# channel codes


def _gf2_rank(m: np.ndarray) -> int:
    m = (np.array(m, dtype=np.uint8) & 1).copy()
    rank = 0
    rows, cols = m.shape
    for c in range(cols):
        piv = np.nonzero(m[rank:, c])[0]
        if len(piv) == 0:
            continue
        p = rank + piv[0]
        m[[rank, p]] = m[[p, rank]]
        others = np.nonzero(m[:, c])[0]
        others = others[others != rank]
        m[others] ^= m[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def _int_to_bits(vals: np.ndarray, width: int) -> np.ndarray:
    # MSB first
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((np.asarray(vals, dtype=np.int64)[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


@dataclass(frozen=True)
class LinearCode:
    """Binary linear (n, k_dim) block code given by a full-rank generator."""

    generator: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        g = tuple(tuple(int(b) for b in row) for row in self.generator)
        object.__setattr__(self, "generator", g)
        if not g or not g[0]:
            raise ValueError("empty generator matrix")
        if any(len(r) != len(g[0]) for r in g):
            raise ValueError("generator rows differ in length")
        if any(b not in (0, 1) for r in g for b in r):
            raise ValueError("generator entries must be 0 or 1")
        if len(g) > len(g[0]):
            raise ValueError("k_dim exceeds n")
        if _gf2_rank(self.matrix) != len(g):
            raise ValueError("generator matrix is not full rank over GF(2)")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.generator, dtype=np.uint8)

    @property
    def n(self) -> int:
        return len(self.generator[0])

    @property
    def k_dim(self) -> int:
        return len(self.generator)

    @property
    def rate(self) -> float:
        return self.k_dim / self.n

    def encode(self, info: np.ndarray) -> np.ndarray:
        """Codeword bits for info bits of shape (..., k_dim)."""
        info = np.asarray(info, dtype=np.int64)
        return ((info @ self.matrix.astype(np.int64)) & 1).astype(np.uint8)

    @classmethod
    def random(cls, n: int, k_dim: int, rng: np.random.Generator) -> "LinearCode":
        """Random systematic-free full-rank code; redraws until full rank."""
        if not 1 <= k_dim <= n:
            raise ValueError("need 1 <= k_dim <= n")
        while True:
            g = rng.integers(0, 2, size=(k_dim, n), dtype=np.uint8)
            if _gf2_rank(g) == k_dim:
                return cls(tuple(map(tuple, g.tolist())))

    @classmethod
    def random_nested(cls, n: int, dims: Sequence[int], rng: np.random.Generator) -> tuple["LinearCode", ...]:
        """Random codes whose generators are the bottom rows of one full-rank matrix.

        With the class ranges of the codec (information words of class i have
        a nonzero bit above the previous dimension), codewords of different
        classes never coincide.
        """
        dims = sorted(int(d) for d in dims)
        top = cls.random(n, dims[-1], rng).matrix
        return tuple(cls(tuple(map(tuple, top[dims[-1] - d:].tolist()))) for d in dims)

    @classmethod
    def identity(cls, n: int) -> "LinearCode":
        return cls(tuple(map(tuple, np.eye(n, dtype=np.uint8).tolist())))

    @classmethod
    def from_file(cls, path) -> "LinearCode":
        """Read 'n k_dim' then k_dim rows of n space-separated bits."""
        lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
        if not lines or len(lines[0]) != 2:
            raise ValueError(f"{path}: first line must be 'n k_dim'")
        n, kd = int(lines[0][0]), int(lines[0][1])
        rows = lines[1:]
        if len(rows) != kd or any(len(r) != n for r in rows):
            raise ValueError(f"{path}: expected {kd} rows of {n} bits")
        return cls(tuple(tuple(int(b) for b in r) for r in rows))

    def to_file(self, path) -> None:
        body = "\n".join(" ".join(str(b) for b in r) for r in self.generator)
        Path(path).write_text(f"{self.n} {self.k_dim}\n{body}\n")


@dataclass(frozen=True)
class CodecConfig:
    """Binary source of length k protected by codes ordered by increasing dimension.

    ``restrict`` limits each class decoder to the information words that
    belong to the class (leading bits zero, index inside the class range);
    without it every information word of the code is searched.
    """

    src: DiscreteSource
    k: int
    codes: tuple[LinearCode, ...]
    es_n0: float | None = None
    restrict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "codes", tuple(self.codes))
        if not self.src.is_binary:
            raise ValueError("the codec needs a binary source")
        if self.k < 1:
            raise ValueError("k must be positive")
        if not self.codes:
            raise ValueError("need at least one channel code")
        n = self.codes[0].n
        if any(c.n != n for c in self.codes):
            raise ValueError("all codes must share the block length")
        dims = [c.k_dim for c in self.codes]
        if any(b <= a for a, b in zip(dims, dims[1:])):
            raise ValueError("code dimensions must strictly increase across classes")
        if dims[-1] > MAX_KDIM:
            raise ValueError(f"k_dim {dims[-1]} exceeds the exhaustive-decoding cap {MAX_KDIM}")

    @property
    def n(self) -> int:
        return self.codes[0].n

    @property
    def N(self) -> int:
        return len(self.codes)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(c.k_dim for c in self.codes)

    def class_range(self, i: int) -> tuple[int, int]:
        """Half-open range of source indices sent with code i (1-based)."""
        if not 1 <= i <= self.N:
            raise IndexError(f"class {i} outside 1..{self.N}")
        lo = 0 if i == 1 else 2 ** self.dims[i - 2]
        hi = min(2 ** self.dims[i - 1], 2 ** self.k)
        return lo, max(lo, hi)


def class_of_index(cfg: CodecConfig, index: int) -> int:
    ell = codeword_length(index)
    for i, d in enumerate(cfg.dims, start=1):
        if ell <= d:
            return i
    return 0


def assign_class(cfg: CodecConfig, v) -> int:
    """Smallest class whose code dimension fits L(v); 0 if none does."""
    return class_of_index(cfg, enumerative_index(v))


def _log_prior(cfg: CodecConfig, weights) -> np.ndarray:
    p = cfg.src.p
    w = np.asarray(weights, dtype=float)
    return w * math.log(p) + (cfg.k - w) * math.log1p(-p)


def encode(cfg: CodecConfig, v) -> np.ndarray:
    """Antipodal channel input (+1 for bit 0) for a source block."""
    idx = enumerative_index(v)
    i = class_of_index(cfg, idx)
    code = cfg.codes[0] if i == 0 else cfg.codes[i - 1]
    info = np.zeros(code.k_dim, dtype=np.uint8) if i == 0 else _int_to_bits(np.array([idx]), code.k_dim)[0]
    return 1.0 - 2.0 * code.encode(info).astype(float)


@dataclass
class _ClassTable:
    indices: np.ndarray  # source index per candidate (-1 when not a source block)
    signal: np.ndarray  # (n, M) antipodal codewords
    log_prior: np.ndarray


@functools.lru_cache(maxsize=16)
def _tables(cfg: CodecConfig) -> tuple[_ClassTable, ...]:
    out = []
    for i, code in enumerate(cfg.codes, start=1):
        if cfg.restrict:
            lo, hi = cfg.class_range(i)
            idx = np.arange(lo, hi, dtype=np.int64)
        else:
            idx = np.arange(2 ** code.k_dim, dtype=np.int64)
        bits = code.encode(_int_to_bits(idx, code.k_dim))
        lo, hi = cfg.class_range(i)
        valid = (idx >= lo) & (idx < hi)
        src_idx = np.where(valid, idx, -1)
        lp = np.where(valid, _log_prior(cfg, _index_weights(cfg.k, np.where(valid, idx, 0))), -np.inf)
        out.append(_ClassTable(src_idx, (1.0 - 2.0 * bits.astype(float)).T.copy(), lp))
    return tuple(out)


def _noise_var(es_n0: float) -> float:
    if not es_n0 > 0:
        raise ValueError(f"Es/N0 must be positive, got {es_n0!r}")
    return 1.0 / (2.0 * es_n0)


@dataclass
class BankEntry:
    """Output of one class decoder; ``failed`` when it has no admissible candidate."""

    v_hat: np.ndarray | None
    index: int | None
    metric: float
    failed: bool


def _resolve_es_n0(cfg: CodecConfig, es_n0: float | None) -> float:
    es = cfg.es_n0 if es_n0 is None else es_n0
    if es is None:
        raise ValueError("Es/N0 not given")
    return float(es)


def ml_decode_bank(cfg: CodecConfig, y, es_n0: float | None = None) -> list[BankEntry]:
    """Exhaustive ML decoding in every class; metric is the Gaussian log-likelihood."""
    es = _resolve_es_n0(cfg, es_n0)
    s2 = _noise_var(es)
    y = np.asarray(y, dtype=float)
    const = -0.5 * cfg.n * math.log(2 * math.pi * s2) - (float(y @ y) + cfg.n) / (2 * s2)
    out = []
    for tab in _tables(cfg):
        if len(tab.indices) == 0:
            out.append(BankEntry(None, None, -math.inf, True))
            continue
        corr = y @ tab.signal
        j = int(np.argmax(corr))
        idx = int(tab.indices[j])
        ll = const + float(corr[j]) / s2
        if idx < 0:
            # unrestricted search landed outside the class
            out.append(BankEntry(None, None, ll, True))
        else:
            out.append(BankEntry(enumerative_invert(idx, cfg.k), idx, ll, False))
    return out


def map_select(cfg: CodecConfig, bank: Sequence[BankEntry], y=None) -> tuple[np.ndarray, int]:
    """Candidate with the largest log prior + log-likelihood; ties go to the lower class.

    Returns ``(v_hat, class)``, class 0 meaning every decoder failed and the
    all-zero block is output.
    """
    best, best_i = -math.inf, 0
    for i, e in enumerate(bank, start=1):
        if e.failed:
            continue
        q = float(_log_prior(cfg, int(e.v_hat.sum()))) + e.metric
        if q > best:
            best, best_i = q, i
    if best_i == 0:
        return np.zeros(cfg.k, dtype=np.uint8), 0
    return bank[best_i - 1].v_hat, best_i


# Monte Carlo


def _chunk_draws(cfg: CodecConfig, seed: int, chunk: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(chunk)]))
    bits = (rng.random((CHUNK, cfg.k)) < cfg.src.p).astype(np.uint8)
    noise = rng.standard_normal((CHUNK, cfg.n))
    return bits, noise


def _transmit(cfg: CodecConfig, idx: np.ndarray, cls: np.ndarray) -> np.ndarray:
    x = np.ones((len(idx), cfg.n))
    for i, code in enumerate(cfg.codes, start=1):
        sel = cls == i
        if np.any(sel):
            x[sel] = 1.0 - 2.0 * code.encode(_int_to_bits(idx[sel], code.k_dim)).astype(float)
    return x


def _classes(cfg: CodecConfig, idx: np.ndarray) -> np.ndarray:
    # L(v) <= d  <=>  I < 2^d
    cls = np.zeros(len(idx), dtype=np.int64)
    for i in range(cfg.N, 0, -1):
        cls[idx < (1 << cfg.dims[i - 1])] = i
    return cls


def decode_batch(cfg: CodecConfig, y: np.ndarray, es_n0: float) -> dict:
    """Bank + MAP decoding of a (T, n) batch; returns per-trial arrays."""
    s2 = _noise_var(es_n0)
    T = y.shape[0]
    tabs = _tables(cfg)
    ml_idx = np.full((T, cfg.N), -1, dtype=np.int64)
    q = np.full((T, cfg.N), -np.inf)
    for i, tab in enumerate(tabs):
        if len(tab.indices) == 0:
            continue
        corr = y @ tab.signal
        j = np.argmax(corr, axis=1)
        ml_idx[:, i] = tab.indices[j]
        ok = ml_idx[:, i] >= 0
        q[ok, i] = tab.log_prior[j[ok]] + corr[np.arange(T), j][ok] / s2
    any_ok = np.any(np.isfinite(q), axis=1)
    pick = np.argmax(q, axis=1)
    final_cls = np.where(any_ok, pick + 1, 0)
    final_idx = np.where(any_ok, ml_idx[np.arange(T), pick], 0)
    return {"ml_idx": ml_idx, "final_cls": final_cls, "final_idx": final_idx}


def simulate_trials(cfg: CodecConfig, es_n0: float, trials: int, seed: int, first_chunk: int = 0) -> dict:
    """Per-trial record for ``trials`` consecutive trials starting at a chunk boundary."""
    if trials < 1:
        raise ValueError("trials must be positive")
    if cfg.k > MAX_K_SIM:
        raise ValueError(f"simulation supports k <= {MAX_K_SIM}")
    sig = math.sqrt(_noise_var(es_n0))
    parts = []
    left = trials
    c = first_chunk
    while left > 0:
        bits, noise = _chunk_draws(cfg, seed, c)
        m = min(left, CHUNK)
        bits, noise = bits[:m], noise[:m]
        idx = _index_many(bits)
        cls = _classes(cfg, idx)
        x = _transmit(cfg, idx, cls)
        y = x + sig * noise
        dec = decode_batch(cfg, y, es_n0)
        own = np.where(cls > 0, dec["ml_idx"][np.arange(m), np.maximum(cls, 1) - 1], -1)
        err = np.zeros(m, dtype=np.int8)  # 0 ok, 1 source, 2 ml, 3 map
        err[cls == 0] = 1
        coded = cls > 0
        err[coded & (own != idx)] = 2
        err[coded & (own == idx) & (dec["final_cls"] != cls)] = 3
        parts.append({"bits": bits, "index": idx, "cls": cls, "y": y, "error": err, **dec})
        left -= m
        c += 1
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}


def _chunk_counts(cfg: CodecConfig, es_n0: float, seed: int, chunk: int, m: int) -> np.ndarray:
    err = simulate_trials(cfg, es_n0, m, seed, first_chunk=chunk)["error"]
    return np.bincount(err, minlength=4)


@dataclass
class SimResult:
    snr_db: float
    es_n0: float
    trials: int
    errors_total: int
    errors_by_type: dict
    fer: float
    fer_ci95: tuple[float, float]
    seed: int
    insufficient_errors: bool = False
    extra: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {
            "snr_db": self.snr_db, "trials": self.trials, "fer": self.fer,
            "ci_lo": self.fer_ci95[0], "ci_hi": self.fer_ci95[1],
            "e_s": self.errors_by_type["e_s"], "e_ml": self.errors_by_type["e_ml"],
            "e_map": self.errors_by_type["e_map"], "seed": self.seed,
        }


def wilson_interval(errors: int, trials: int) -> tuple[float, float]:
    ci = binomtest(int(errors), int(trials)).proportion_ci(0.95, method="wilson")
    return float(ci.low), float(ci.high)


def _run_point(cfg, es_n0, trials, seed, threads, target_errors, max_trials):
    counts = np.zeros(4, dtype=np.int64)
    done = 0
    chunk = 0
    cap = trials if target_errors is None else max_trials
    insufficient = False
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        while done < cap:
            batch = []
            for _ in range(max(1, threads)):
                if done + len(batch) * CHUNK >= cap:
                    break
                m = min(CHUNK, cap - done - len(batch) * CHUNK)
                batch.append((chunk + len(batch), m))
            results = list(pool.map(lambda a: _chunk_counts(cfg, es_n0, seed, *a), batch))
            stop = False
            # accumulate in chunk order so the stopping point is worker-independent
            for (c, m), r in zip(batch, results):
                counts += r
                done += m
                chunk = c + 1
                if target_errors is not None and counts[1:].sum() >= target_errors:
                    stop = True
                    break
            if stop:
                break
    if target_errors is not None and counts[1:].sum() < target_errors:
        insufficient = True
    return counts, done, insufficient


def simulate_fer(cfg: CodecConfig, snr_list: Sequence[float], trials: int, seed: int, *,
                 convention: str = "channel", threads: int = 1, target_errors: int | None = None,
                 max_trials: int | None = None) -> list[SimResult]:
    """Frame error rate at each SNR (dB).

    ``convention="channel"`` reads SNRs as Es/N0, ``"source-bit"`` as the
    per-source-bit SNR. Randomness is keyed by (seed, chunk), so every point
    uses the same source blocks and noise shapes, and results do not depend
    on ``threads`` or on the other SNRs requested. With ``target_errors`` the
    run stops after the first chunk reaching that many errors, or at
    ``max_trials`` with ``insufficient_errors`` set.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if convention not in ("channel", "source-bit"):
        raise ValueError("convention must be 'channel' or 'source-bit'")
    if target_errors is not None and max_trials is None:
        max_trials = trials
    out = []
    for db in snr_list:
        if convention == "channel":
            es = 10.0 ** (db / 10.0)
        else:
            es = ebn0_to_esn0(db, cfg.k / cfg.n, cfg.src)
        counts, done, insufficient = _run_point(cfg, es, trials, seed, threads, target_errors, max_trials)
        by_type = {name: int(c) for name, c in zip(ERROR_TYPES, counts[1:])}
        total = int(counts[1:].sum())
        out.append(SimResult(float(db), es, done, total, by_type, total / done, wilson_interval(total, done),
                             int(seed), insufficient))
    return out


def overflow_probability(cfg: CodecConfig) -> float:
    """Exact probability that a source block lands in class 0."""
    k = cfg.k
    limit = 2 ** cfg.dims[-1]
    p = cfg.src.p
    total = []
    off = 0
    for w in range(k + 1):
        c = comb(k, w)
        over = max(0, min(c, off + c - limit))
        if over:
            total.append(over * p ** w * (1 - p) ** (k - w))
        off += c
    return math.fsum(total)


def uncoded_wer(n: int, es_n0: float) -> float:
    """Word error rate of uncoded antipodal signalling with hard decisions."""
    from scipy.stats import norm

    pb = norm.sf(math.sqrt(2.0 * es_n0))
    return -math.expm1(n * math.log1p(-pb))
