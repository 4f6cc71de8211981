"""Runtime configuration with flag > environment > default precedence.

Every knob has an ``INTEREST_MINER_*`` environment variable; CLI flags win
over the environment, which wins over the built-in default.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

ENV_PREFIX = "INTEREST_MINER_"

DEFAULTS = {
    "data_dir": "./data",
    "port": 8080,
    "host": "127.0.0.1",
    "scale": 1,
    "threshold_mode": "mean",
    "output_dir": "./out",
    "batch_cap": 500,
    "cors_origins": "",
    "fsync": True,
}


def parse_threshold_mode(mode: str) -> float | None:
    """"mean" -> None (per-map average); "fixed:v" -> the fixed cutoff."""
    if mode == "mean":
        return None
    if mode.startswith("fixed:"):
        value = float(mode[len("fixed:") :])
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"fixed threshold {value} outside [0, 1]")
        return value
    raise ValueError(f"unknown threshold mode {mode!r} (want 'mean' or 'fixed:<v>')")


def _env(name: str) -> str | None:
    return os.environ.get(ENV_PREFIX + name.upper())


@dataclass
class CliConfig:
    data_dir: Path = Path(DEFAULTS["data_dir"])
    port: int = DEFAULTS["port"]
    host: str = DEFAULTS["host"]
    scale: int = DEFAULTS["scale"]
    threshold_mode: str = DEFAULTS["threshold_mode"]
    output_dir: Path = Path(DEFAULTS["output_dir"])
    batch_cap: int = DEFAULTS["batch_cap"]
    cors_origins: list[str] = field(default_factory=list)
    fsync: bool = DEFAULTS["fsync"]

    def __post_init__(self) -> None:
        if self.scale < 1:
            raise ValueError(f"scale must be >= 1, got {self.scale}")
        parse_threshold_mode(self.threshold_mode)  # validate eagerly
        if self.batch_cap < 1:
            raise ValueError("batch cap must be >= 1")

    @property
    def threshold(self) -> float | None:
        return parse_threshold_mode(self.threshold_mode)

    @classmethod
    def resolve(cls, **flags) -> "CliConfig":
        """Merge explicit flag values over environment values over defaults."""

        def pick(name, convert):
            flag = flags.get(name)
            if flag is not None:
                return convert(flag)
            env = _env(name)
            if env is not None:
                return convert(env)
            return convert(DEFAULTS[name])

        return cls(
            data_dir=pick("data_dir", Path),
            port=pick("port", int),
            host=pick("host", str),
            scale=pick("scale", int),
            threshold_mode=pick("threshold_mode", str),
            output_dir=pick("output_dir", Path),
            batch_cap=pick("batch_cap", int),
            cors_origins=pick(
                "cors_origins",
                lambda v: [o for o in v.split(",") if o] if isinstance(v, str) else list(v),
            ),
            fsync=pick(
                "fsync",
                lambda v: v if isinstance(v, bool) else v.lower() not in ("0", "false", "no"),
            ),
        )
