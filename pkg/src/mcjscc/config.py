"""Experiment configuration: JSON file <-> dataclasses.

Schema (all rates in nats per channel use, SNRs in dB)::

    {
      "source":  {"p": 0.1},
      "ratio":   {"t": 0.8}            or {"k": 16, "n": 16},
      "channel": {"type": "biawgn", "start_db": 1, "stop_db": 4, "step_db": 1,
                  "snr_convention": "per-source-bit"},
      "scheme":  {"N": [2, 3], "rates": [...] | "thresholds": [...],
                  "code_files": [...], "code_dims": [8, 12]},
      "sim":     {"trials": 10000, "seed": 1, "target_errors": null, "max_trials": null},
      "output":  {"path": null, "format": "csv"}
    }

``scheme``, ``sim`` and ``output`` are optional.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

CONVENTIONS = ("per-source-bit", "per-channel-symbol")
CHANNEL_TYPES = ("biawgn", "bsc-hard")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class SourceConfig:
    p: float


@dataclass
class RatioConfig:
    t: float | None = None
    k: int | None = None
    n: int | None = None

    @property
    def value(self) -> float:
        return self.t if self.t is not None else self.k / self.n


@dataclass
class ChannelConfig:
    start_db: float
    stop_db: float
    step_db: float = 1.0
    type: str = "biawgn"
    snr_convention: str = "per-source-bit"

    def sweep(self) -> list[float]:
        if self.step_db <= 0:
            return [float(self.start_db)]
        count = int(math.floor((self.stop_db - self.start_db) / self.step_db + 1e-9)) + 1
        return [float(round(self.start_db + i * self.step_db, 10)) for i in range(count)]


@dataclass
class SchemeConfig:
    N: list[int] = field(default_factory=lambda: [2])
    rates: list[float] | None = None
    thresholds: list[float] | None = None
    code_files: list[str] | None = None
    code_dims: list[int] | None = None


@dataclass
class SimConfig:
    trials: int = 10000
    seed: int = 0
    target_errors: int | None = None
    max_trials: int | None = None


@dataclass
class OutputConfig:
    path: str | None = None
    format: str = "csv"


@dataclass
class ExperimentConfig:
    source: SourceConfig
    ratio: RatioConfig
    channel: ChannelConfig
    scheme: SchemeConfig | None = None
    sim: SimConfig = field(default_factory=SimConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    base_dir: str = field(default=".", compare=False, repr=False)

    @property
    def t(self) -> float:
        return self.ratio.value

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        if d["scheme"] is None:
            d.pop("scheme")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict, base_dir: str = ".") -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: top level must be an object")
        _no_extra(d, "config", {"source", "ratio", "channel", "scheme", "sim", "output"})
        for key in ("source", "ratio", "channel"):
            if key not in d:
                raise ConfigError(f"config: missing section '{key}'")
        scheme = d.get("scheme")
        if scheme is not None:
            scheme = dict(scheme)
            if isinstance(scheme.get("N"), int):
                scheme["N"] = [scheme["N"]]
        cfg = cls(
            source=_build(SourceConfig, d["source"], "source"),
            ratio=_build(RatioConfig, d["ratio"], "ratio"),
            channel=_build(ChannelConfig, d["channel"], "channel"),
            scheme=None if scheme is None else _build(SchemeConfig, scheme, "scheme"),
            sim=_build(SimConfig, d.get("sim", {}), "sim"),
            output=_build(OutputConfig, d.get("output", {}), "output"),
            base_dir=base_dir,
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str, base_dir: str = ".") -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(d, base_dir)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
        return cls.from_json(text, str(path.parent))

    def code_paths(self) -> list[Path]:
        if self.scheme is None or not self.scheme.code_files:
            return []
        return [Path(self.base_dir, f) for f in self.scheme.code_files]

    def validate(self) -> None:
        p = self.source.p
        if not (isinstance(p, (int, float)) and 0.0 < p <= 0.5):
            raise ConfigError(f"source.p: must lie in (0, 1/2], got {p!r}")
        r = self.ratio
        if r.t is not None:
            if r.k is not None or r.n is not None:
                raise ConfigError("ratio: give either t or (k, n), not both")
            if not r.t > 0:
                raise ConfigError(f"ratio.t: must be positive, got {r.t!r}")
        else:
            if r.k is None or r.n is None:
                raise ConfigError("ratio: need t or both k and n")
            if not (isinstance(r.k, int) and isinstance(r.n, int) and r.k > 0 and r.n > 0):
                raise ConfigError("ratio.k, ratio.n: must be positive integers")
        c = self.channel
        if c.type not in CHANNEL_TYPES:
            raise ConfigError(f"channel.type: must be one of {CHANNEL_TYPES}, got {c.type!r}")
        if c.snr_convention not in CONVENTIONS:
            raise ConfigError(f"channel.snr_convention: must be one of {CONVENTIONS}, got {c.snr_convention!r}")
        if c.stop_db < c.start_db:
            raise ConfigError("channel: empty sweep (stop_db < start_db)")
        if c.step_db < 0:
            raise ConfigError("channel.step_db: must be nonnegative")
        s = self.scheme
        if s is not None:
            if not s.N or any(not isinstance(x, int) or x < 1 for x in s.N):
                raise ConfigError("scheme.N: must be a positive integer or a list of them")
            if s.rates is not None and s.thresholds is not None:
                raise ConfigError("scheme: give rates or thresholds, not both")
            for path in self.code_paths():
                if not path.is_file():
                    raise ConfigError(f"scheme.code_files: {path} does not exist")
            if s.code_files and s.code_dims:
                raise ConfigError("scheme: give code_files or code_dims, not both")
        if self.sim.trials < 1:
            raise ConfigError("sim.trials: must be positive")
        if not 0 <= self.sim.seed < 2 ** 64:
            raise ConfigError("sim.seed: must be an unsigned 64-bit integer")
        if self.output.format not in FORMATS:
            raise ConfigError(f"output.format: must be one of {FORMATS}")


def _no_extra(d: dict, where: str, allowed) -> None:
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {sorted(extra)}")


def _build(cls, d, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    _no_extra(d, where, names)
    try:
        return cls(**d)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None
