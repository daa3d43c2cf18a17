"""Experiment configuration: plain key=value files with flag overrides."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from decimal import Decimal, InvalidOperation
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    a_plus: str = "2"
    a_minus: str = "1.2"
    # "golden" loads the stored slope, "solve" recomputes it at prefix_depth_k
    lambda_source: str = "golden"
    solve_method: str = "newton"
    prefix_depth_k: int = 16
    k_max: int = 14
    comb_k_max: int = 12
    depth: int = 987  # S(14)
    N_empirical: int = 100_000
    target_bits: int = 64
    max_precision: int = 1 << 15
    unresolved_cap: float = 1e-3
    output_dir: str = "fibolab_out"
    seed: int = 0

    def __post_init__(self):
        for name in ("a_plus", "a_minus"):
            try:
                v = Decimal(getattr(self, name))
            except InvalidOperation as exc:
                raise ConfigError(f"{name} is not a decimal: {getattr(self, name)!r}") from exc
            if not v > 1:
                raise ConfigError(f"{name} must exceed 1")
        for f in fields(self):
            if f.type == "int" and f.name != "seed" and getattr(self, f.name) <= 0:
                raise ConfigError(f"{f.name} must be positive")
        if self.k_max > self.prefix_depth_k - 2:
            raise ConfigError("k_max must be <= prefix_depth_k - 2")
        if self.lambda_source not in ("golden", "solve"):
            raise ConfigError("lambda_source is 'golden' or 'solve'")
        if self.solve_method not in ("newton", "bisect"):
            raise ConfigError("solve_method is 'newton' or 'bisect'")

    def replace(self, **changes) -> "ExperimentConfig":
        d = asdict(self)
        d.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig(**d)

    def hash(self) -> str:
        """sha256 over the canonical JSON of everything except the output location."""
        d = asdict(self)
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _convert(key: str, raw: str):
    t = _TYPES[key]
    try:
        if t == "int":
            return int(raw.replace("_", ""))
        if t == "float":
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from exc
    return raw


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _convert(key, raw)
    return out


def load_config(path: str | Path | None = None, **overrides) -> ExperimentConfig:
    base = parse_config_text(Path(path).read_text()) if path else {}
    base.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**base)
