"""Command-line entry point: ``mcjscc {exponents,rates,simulate,bound}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .channel_core import DMC, BiAwgn
from .config import ConfigError, ExperimentConfig
from .exponent_bounds import (
    joint_exponent,
    joint_hull_exponent,
    optimize_thm1,
    optimize_thm2,
    separate_exponent,
    thm1_exponent,
)
from .mc_codec import MAX_KDIM, CodecConfig, LinearCode, simulate_fer
from .partition import PartitionSpec
from .source_core import LN2, DiscreteSource, db_to_linear, ebn0_to_esn0
from .sp_bound import bound_row

EXIT_CONFIG = 2
EXIT_VIOLATION = 3


# helpers


def _es_n0(cfg: ExperimentConfig, db: float) -> float:
    if cfg.channel.snr_convention == "per-source-bit":
        return ebn0_to_esn0(db, cfg.t, DiscreteSource.bms(cfg.source.p))
    return db_to_linear(db)


def _channel(cfg: ExperimentConfig, db: float):
    es = _es_n0(cfg, db)
    if cfg.channel.type == "biawgn":
        return BiAwgn(es)
    from scipy.stats import norm

    return DMC.bsc(float(norm.sf(math.sqrt(2.0 * es))))


def _map_rows(fn, points, threads: int) -> list:
    # rows come back in input order whatever the completion order
    if threads <= 1:
        return [fn(x) for x in points]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, points))


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def render(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    buf = io.StringIO()
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(rows[0]))
        for r in rows:
            w.writerow([_fmt(r[c]) for c in rows[0]])
    return buf.getvalue()


def write_atomic(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# commands


def _fixed_rates(cfg: ExperimentConfig, src: DiscreteSource) -> list[float] | None:
    s = cfg.scheme
    if s is None:
        return None
    if s.rates is not None:
        return [float(r) for r in s.rates]
    if s.thresholds is not None:
        try:
            return list(PartitionSpec(src, cfg.t, tuple(s.thresholds)).rates)
        except ValueError as exc:
            raise ConfigError(f"scheme.thresholds: {exc}") from None
    return None


def cmd_exponents(cfg: ExperimentConfig, threads: int = 1) -> list[dict]:
    src = DiscreteSource.bms(cfg.source.p)
    t = cfg.t
    Ns = cfg.scheme.N if cfg.scheme is not None else [2, 3, 5, 12]
    fixed = _fixed_rates(cfg, src)

    def point(db):
        ch = _channel(cfg, db)
        sep = separate_exponent(src, ch, t)
        row = {"ebn0_db": db, "e_sep": sep.value, "e_joint": joint_exponent(src, ch, t).value,
               "e_hull": joint_hull_exponent(src, ch, t).value}
        extra = {"r_sep": sep.argmax["R"]}
        for N in Ns:
            r1 = optimize_thm1(src, ch, t, N)
            row[f"e_thm1_N{N}"] = r1.value
            for i, r in enumerate(r1.argmax["rates"], start=1):
                extra[f"thm1_N{N}_r{i}"] = r
        for N in Ns:
            if N < 2:
                continue
            r2 = optimize_thm2(src, ch, t, N)
            row[f"e_thm2_N{N}"] = r2.value
            extra[f"thm2_N{N}_R"] = r2.argmax["R"]
            extra[f"thm2_N{N}_Rp"] = r2.argmax["Rp"]
        if fixed is not None:
            row["e_thm1_fixed"] = thm1_exponent(src, ch, t, fixed).value
        row.update(extra)
        return row

    return _map_rows(point, cfg.channel.sweep(), threads)


def cmd_rates(cfg: ExperimentConfig, threads: int = 1) -> list[dict]:
    src = DiscreteSource.bms(cfg.source.p)
    t = cfg.t
    N = cfg.scheme.N[0] if cfg.scheme is not None else 2
    if N < 2:
        raise ConfigError("scheme.N: the rate table needs N >= 2")

    def point(db):
        res = optimize_thm2(src, _channel(cfg, db), t, N)
        R, Rp = res.argmax["R"], res.argmax["Rp"]
        return {"ebn0_db": db, "N": N, "R_bits": round(R / LN2, 3), "Rp_bits": round(Rp / LN2, 3),
                "R_nats": R, "Rp_nats": Rp, "exponent": res.value}

    return _map_rows(point, cfg.channel.sweep(), threads)


def _codec(cfg: ExperimentConfig) -> CodecConfig:
    r = cfg.ratio
    if r.k is None or r.n is None:
        raise ConfigError("ratio: simulation needs integer k and n")
    src = DiscreteSource.bms(cfg.source.p)
    s = cfg.scheme
    if s is not None and s.code_files:
        try:
            codes = tuple(LinearCode.from_file(p) for p in cfg.code_paths())
        except ValueError as exc:
            raise ConfigError(f"scheme.code_files: {exc}") from None
    else:
        dims = (s.code_dims if s is not None and s.code_dims else None) or [r.n // 2, (3 * r.n) // 4]
        if max(dims) > MAX_KDIM:
            raise ConfigError(f"scheme.code_dims: exhaustive decoding is capped at k_dim <= {MAX_KDIM}")
        if max(dims) > r.n:
            raise ConfigError("scheme.code_dims: dimension exceeds n")
        rng = np.random.default_rng(np.random.SeedSequence([cfg.sim.seed, 0x636F6465]))
        codes = LinearCode.random_nested(r.n, dims, rng)
    try:
        return CodecConfig(src, r.k, codes)
    except ValueError as exc:
        raise ConfigError(f"scheme: {exc}") from None


def cmd_simulate(cfg: ExperimentConfig, threads: int = 1) -> list[dict]:
    codec = _codec(cfg)
    if codec.n != cfg.ratio.n:
        raise ConfigError("scheme.code_files: code length differs from ratio.n")
    conv = "source-bit" if cfg.channel.snr_convention == "per-source-bit" else "channel"
    sim = cfg.sim
    res = simulate_fer(codec, cfg.channel.sweep(), sim.trials, sim.seed, convention=conv, threads=threads,
                       target_errors=sim.target_errors, max_trials=sim.max_trials)
    rows = []
    for r in res:
        row = r.row()
        row.update(k=codec.k, n=codec.n, p=cfg.source.p, flag="insufficient_errors" if r.insufficient_errors else "")
        rows.append(row)
    return rows


def cmd_bound(cfg: ExperimentConfig, threads: int = 1, join: str | None = None) -> tuple[list[dict], int]:
    r = cfg.ratio
    if r.k is None or r.n is None:
        raise ConfigError("ratio: the bound needs integer k and n")
    p = cfg.source.p

    def point(db):
        row = bound_row(r.k, r.n, p, _es_n0(cfg, db), db)
        row["es_n0"] = _es_n0(cfg, db)
        return row

    rows = _map_rows(point, cfg.channel.sweep(), threads)
    if join is None:
        return rows, 0
    sim = _read_csv(join)
    if not sim:
        raise ConfigError(f"{join}: no rows")
    for s in sim:
        if (int(s["k"]), int(s["n"])) != (r.k, r.n) or not math.isclose(float(s["p"]), p, rel_tol=1e-12):
            raise ConfigError(f"{join}: (k, n, p) = ({s['k']}, {s['n']}, {s['p']}) does not match the bound config")
    by_snr = {round(float(s["snr_db"]), 9): s for s in sim}
    joined = []
    violations = 0
    for b in rows:
        s = by_snr.get(round(b["ebn0_db"], 9))
        if s is None:
            continue
        bad = float(s["ci_hi"]) < b["bound"]
        violations += bad
        joined.append({"snr_db": b["ebn0_db"], "fer": float(s["fer"]), "ci_lo": float(s["ci_lo"]),
                       "ci_hi": float(s["ci_hi"]), "bound": b["bound"], "violation": int(bad)})
    if not joined:
        raise ConfigError(f"{join}: no SNR points in common with the bound sweep")
    return joined, violations


def _read_csv(path) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None


# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcjscc", description="Multi-class source-channel coding exponents, "
                                 "simulation and bounds.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("exponents", "error-exponent bounds over an SNR sweep"),
                           ("rates", "optimal two-level class rates over an SNR sweep"),
                           ("simulate", "Monte Carlo frame error rate of the multi-class codec"),
                           ("bound", "two-class sphere-packing lower bound")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", help="output file (default: config output.path, else stdout)")
        sp.add_argument("--seed", type=int, help="override sim.seed")
        sp.add_argument("--threads", type=int, default=1, help="worker threads")
        sp.add_argument("--format", choices=("csv", "json"), help="override output.format")
        if name == "bound":
            sp.add_argument("--join", help="simulate CSV to compare against the bound")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            cfg.sim.seed = args.seed
        if args.format is not None:
            cfg.output.format = args.format
        if args.out is not None:
            cfg.output.path = args.out
        cfg.validate()
        if args.threads < 1:
            raise ConfigError("--threads: must be at least 1")
        status = 0
        if args.command == "exponents":
            rows = cmd_exponents(cfg, args.threads)
        elif args.command == "rates":
            rows = cmd_rates(cfg, args.threads)
        elif args.command == "simulate":
            rows = cmd_simulate(cfg, args.threads)
        else:
            rows, violations = cmd_bound(cfg, args.threads, args.join)
            status = EXIT_VIOLATION if violations else 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = render(rows, cfg.output.format)
    if cfg.output.path:
        write_atomic(Path(cfg.base_dir if not args.out else ".", cfg.output.path), text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
