"""Training configuration: defaults, validation, flat-file parsing, hashing."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

from .errors import ConfigurationError

ABLATION_FLAGS = (
    "no_evolution",
    "no_tension_weighting",
    "no_conflict",
    "no_consensus",
    "no_fact_view",
    "no_sentiment_view",
    "no_fact_aux",
    "no_sentiment_aux",
)

TENSION_MODES = ("elementwise", "scalar")


@dataclass
class TrainConfig:
    # dimensions
    d_text: int = 32
    d_image: int = 32
    d: int = 16
    d_v: int = 16
    K: int = 16
    p: int = 4
    # evolution unit
    iterations: int = 4          # number of update iterations (0 only via no_evolution)
    tau: float = 1.5             # softmax temperature on negative tension
    tension_mode: str = "elementwise"
    # objective
    lambda_fact: float = 0.075
    lambda_sent: float = 0.075
    # optimization
    learning_rate: float = 3e-3
    batch_size: int = 32
    max_epochs: int = 50
    early_stop_patience: int = 10
    seed: int = 0
    # ablation switches
    no_evolution: bool = False
    no_tension_weighting: bool = False
    no_conflict: bool = False
    no_consensus: bool = False
    no_fact_view: bool = False
    no_sentiment_view: bool = False
    no_fact_aux: bool = False
    no_sentiment_aux: bool = False

    def validate(self) -> "TrainConfig":
        positive = ("d_text", "d_image", "d", "d_v", "K", "p", "batch_size")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1 (use no_evolution to skip)")
        if self.tau <= 0:
            raise ConfigurationError("tau must be positive")
        if self.tension_mode not in TENSION_MODES:
            raise ConfigurationError(f"tension_mode must be one of {TENSION_MODES}")
        if not (0.0 <= self.lambda_fact < 1.0 and 0.0 <= self.lambda_sent < 1.0):
            raise ConfigurationError("loss weights must lie in [0, 1)")
        if self.lambda_fact + self.lambda_sent >= 1.0:
            raise ConfigurationError("lambda_fact + lambda_sent must be < 1")
        if self.max_epochs < 0 or self.early_stop_patience < 0:
            raise ConfigurationError("epoch counts must be non-negative")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.no_fact_view and self.no_sentiment_view:
            raise ConfigurationError("cannot disable both views at once")
        return self

    # effective loss weights after ablation switches
    @property
    def effective_lambda_fact(self) -> float:
        return 0.0 if self.no_fact_aux else self.lambda_fact

    @property
    def effective_lambda_sent(self) -> float:
        return 0.0 if self.no_sentiment_aux else self.lambda_sent

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(values: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(TrainConfig)}
        unknown = set(values) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return TrainConfig(**values).validate()

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes).validate()


def _coerce(name: str, raw: str):
    fields = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    if name not in fields:
        raise ConfigurationError(f"unknown config key {name!r}")
    ftype = fields[name]
    raw = raw.strip()
    if ftype == "bool" or ftype is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"cannot parse boolean for {name}: {raw!r}")
    if ftype == "int" or ftype is int:
        return int(raw)
    if ftype == "float" or ftype is float:
        return float(raw)
    return raw


def load_config(path: str) -> TrainConfig:
    """Parse a flat `key = value` config file; all keys optional."""
    values: dict = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ConfigurationError(f"{path}:{lineno}: {exc}") from exc
    return TrainConfig.from_dict(values)
