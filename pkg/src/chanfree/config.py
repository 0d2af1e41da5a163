"""Declarative experiment configuration: flat key set, JSON on disk."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .channels import CHANNEL_KINDS

METHODS = ("alternating", "supervised")
METHOD_CHOICES = METHODS + ("both",)

# Short column keys used in CSV output; "sl" is the supervised baseline,
# "rl" the alternating loss-feedback method.
METHOD_KEYS = {"supervised": "sl", "alternating": "rl"}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass
class ExperimentConfig:
    m: int = 256
    n: int = 4
    channel: str = "awgn"
    method: str = "both"
    train_snr_db: float = 10.0
    main_iterations: int = 500
    rx_steps: int = 1
    tx_steps: int = 1
    batch_rx: int = 64
    batch_tx: int = 64
    lr_rx: float = 1e-3
    lr_tx: float = 1e-3
    policy_var: float = 0.02
    baseline: bool = False
    rbf_est_width: int = 32
    seeds: list[int] = field(default_factory=lambda: list(range(20)))
    eval_snr_db: list[float] = field(default_factory=lambda: [float(s) for s in range(-4, 17, 2)])
    eval_msgs: int = 100_000
    out_dir: str = "out"
    threads: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.m < 2:
            raise ConfigError(f"m: must be at least 2, got {self.m}")
        if self.n < 1:
            raise ConfigError(f"n: must be at least 1, got {self.n}")
        if self.channel not in CHANNEL_KINDS:
            raise ConfigError(f"channel: must be one of {CHANNEL_KINDS}, got {self.channel!r}")
        if self.method not in METHOD_CHOICES:
            raise ConfigError(f"method: must be one of {METHOD_CHOICES}, got {self.method!r}")
        if self.channel == "quantizer" and self.method in ("supervised", "both"):
            raise ConfigError(
                "method: the quantizer channel is non-differentiable; only 'alternating' applies"
            )
        if self.main_iterations < 0:
            raise ConfigError(f"main_iterations: must be nonnegative, got {self.main_iterations}")
        if self.rx_steps < 0 or self.tx_steps < 0:
            raise ConfigError("rx_steps/tx_steps: must be nonnegative")
        if self.batch_rx < 1 or self.batch_tx < 1:
            raise ConfigError("batch_rx/batch_tx: must be at least 1")
        if self.lr_rx <= 0 or self.lr_tx <= 0:
            raise ConfigError("lr_rx/lr_tx: must be positive")
        if not 0.0 < self.policy_var < 1.0:
            raise ConfigError(f"policy_var: must lie in (0, 1), got {self.policy_var}")
        if self.rbf_est_width < 1:
            raise ConfigError(f"rbf_est_width: must be at least 1, got {self.rbf_est_width}")
        if not self.seeds:
            raise ConfigError("seeds: must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds: must be distinct")
        if not self.eval_snr_db:
            raise ConfigError("eval_snr_db: must be nonempty")
        if sorted(self.eval_snr_db) != list(self.eval_snr_db):
            raise ConfigError("eval_snr_db: must be increasing")
        if self.eval_msgs < 1:
            raise ConfigError(f"eval_msgs: must be at least 1, got {self.eval_msgs}")
        if self.threads < 1:
            raise ConfigError(f"threads: must be at least 1, got {self.threads}")
        return self

    @property
    def methods(self) -> tuple[str, ...]:
        return METHODS if self.method == "both" else (self.method,)

    @property
    def rx_variant(self) -> str:
        return "rbf" if self.channel == "rbf" else "awgn"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("ascii")).hexdigest()[:16]

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name: f.type for f in dataclasses.fields(cls)}
        unknown = set(raw) - set(known)
        if unknown:
            raise ConfigError(f"{sorted(unknown)[0]}: unknown config key")
        try:
            cfg = cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        for f in dataclasses.fields(cls):
            value = getattr(cfg, f.name)
            if f.name in ("seeds", "eval_snr_db"):
                if not isinstance(value, list):
                    raise ConfigError(f"{f.name}: expected a list, got {type(value).__name__}")
            elif f.name == "baseline":
                if not isinstance(value, bool):
                    raise ConfigError(f"{f.name}: expected a boolean, got {value!r}")
            elif f.name in ("channel", "method", "out_dir"):
                if not isinstance(value, str):
                    raise ConfigError(f"{f.name}: expected a string, got {value!r}")
            elif isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{f.name}: expected a number, got {value!r}")
        return cfg.validate()

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        return cls.from_dict(raw)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def default_config(channel: str = "awgn") -> ExperimentConfig:
    """Per-channel defaults: training SNR and evaluation grid."""
    if channel == "rbf":
        return ExperimentConfig(
            channel="rbf",
            train_snr_db=20.0,
            eval_snr_db=[float(s) for s in range(0, 21, 2)],
        )
    if channel == "quantizer":
        return ExperimentConfig(
            channel="quantizer",
            method="alternating",
            m=16,
            train_snr_db=10.0,
            eval_snr_db=[float(s) for s in range(0, 17, 2)],
        )
    return ExperimentConfig(channel=channel).validate()
