"""JSON experiment configs.

A config file is a JSON object. Missing fields take the kind-specific
defaults in ``KIND_DEFAULTS`` and then the global defaults of
``ExperimentConfig``; unknown fields are rejected. ``schema_version`` must
match ``SCHEMA_VERSION``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from lprec.errors import ConfigError
from lprec.floatsim import FloatFormat, parse_format
from lprec.optim import AdamWConfig, SgdConfig, UpdatePolicy
from lprec.qlinalg import AccumPrecision

__all__ = ["SCHEMA_VERSION", "KINDS", "KIND_DEFAULTS", "ExperimentConfig", "load_config"]

SCHEMA_VERSION = 1

KINDS = ("lsq-theory", "lsq-figure", "mlp-demo", "cancellation", "format-sweep", "bounds-check")

# Overrides of the global defaults, per kind.
KIND_DEFAULTS: dict[str, dict[str, Any]] = {
    "lsq-theory": {"policy": "nearest"},
    "lsq-figure": {},
    "mlp-demo": {
        "policy": "nearest",
        "steps": 2000,
        "n": 512,
        "d": 8,
        "optimizer_config": {"lr": 0.1},
    },
    "cancellation": {"policy": "nearest", "noise_std": 0.0, "steps": 20000},
    "format-sweep": {"steps": 20000},
    "bounds-check": {
        "policy": "nearest",
        "noise_std": 0.0,
        "n": 256,
        "w_range": [50.0, 100.0],
        "seeds": list(range(32)),
        "steps": 2000,
        "lr_times_L": 0.5,
        "formats": ["E8M7", "E8M5", "E8M3"],
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines an experiment's output bits.

    ``lr_times_L``, when set, replaces ``optimizer_config["lr"]`` by
    ``lr_times_L / L`` of each least-squares instance. ``instance_seed``
    pins one problem instance for every seed; by default each seed draws its
    own instance. ``formats``/``policies`` drive sweeps. ``n_probes``,
    ``probe_lr_times_L`` and ``checkpoints`` drive the bounds validators;
    probes get their own step size because the probe ball must be much
    wider than the grid spacing. ``hidden_dim``/``batch_size`` shape the MLP
    demo. Build through ``from_dict``/``for_kind`` to get the per-kind
    defaults.
    """

    kind: str = "lsq-figure"
    schema_version: int = SCHEMA_VERSION
    format: str = "E8M7"
    policy: str = "kahan"
    policy_overrides: dict[str, str] = field(default_factory=dict)
    optimizer: str = "sgd"
    optimizer_config: dict[str, float] = field(default_factory=lambda: {"lr": 0.01})
    lr_times_L: float | None = None
    steps: int = 50000
    seeds: list[int] = field(default_factory=lambda: [0])
    instance_seed: int | None = None
    d: int = 10
    n: int = 2048
    w_range: list[float] = field(default_factory=lambda: [0.0, 100.0])
    noise_std: float = 0.5
    round_forward_backward: bool = True
    accum: str = "wide32"
    log_every: int = 1
    smooth_window: int = 100
    output_path: str = "out"
    formats: list[str] = field(default_factory=lambda: ["E8M7", "E8M5", "E8M3", "E8M1"])
    policies: list[str] = field(default_factory=lambda: ["nearest", "kahan"])
    n_probes: int = 400
    probe_lr_times_L: float = 0.01
    checkpoints: list[int] = field(default_factory=lambda: [10, 100, 1000])
    hidden_dim: int = 16
    batch_size: int = 32

    def __post_init__(self) -> None:
        self.validate()

    # -- construction -------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        kind = data.get("kind", cls.kind)
        if kind not in KINDS:
            raise ConfigError(f"kind must be one of {', '.join(KINDS)}; got {kind!r}")
        merged = {**KIND_DEFAULTS[kind], **data}
        version = merged.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version {version} not supported (expected {SCHEMA_VERSION})")
        try:
            return cls(**merged)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def for_kind(cls, kind: str, **overrides: Any) -> ExperimentConfig:
        return cls.from_dict({"kind": kind, **overrides})

    def with_overrides(self, **overrides: Any) -> ExperimentConfig:
        """Copy with some fields replaced (``None`` values are ignored)."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {', '.join(KINDS)}; got {self.kind!r}")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version {self.schema_version} not supported")
        parse_format(self.format)
        for f in self.formats:
            parse_format(f)
        for p in [self.policy, *self.policies, *self.policy_overrides.values()]:
            _policy(p)
        if self.optimizer not in ("sgd", "adamw"):
            raise ConfigError(f"optimizer must be sgd or adamw, got {self.optimizer!r}")
        self.optimizer_cfg()
        try:
            AccumPrecision(self.accum)
        except ValueError:
            raise ConfigError(f"accum must be wide32 or wide64, got {self.accum!r}") from None
        _check_int("steps", self.steps, 0)
        _check_int("d", self.d, 1)
        _check_int("n", self.n, 1)
        _check_int("log_every", self.log_every, 1)
        _check_int("smooth_window", self.smooth_window, 1)
        _check_int("n_probes", self.n_probes, 1)
        _check_int("hidden_dim", self.hidden_dim, 1)
        _check_int("batch_size", self.batch_size, 1)
        if self.kind != "mlp-demo" and self.n < self.d:
            raise ConfigError(f"need n >= d for least squares, got n={self.n}, d={self.d}")
        if not self.seeds:
            raise ConfigError("seeds must be a non-empty list")
        for s in [*self.seeds, *([self.instance_seed] if self.instance_seed is not None else [])]:
            if not isinstance(s, int) or isinstance(s, bool) or not 0 <= s < 2**64:
                raise ConfigError(f"seeds must be unsigned 64-bit integers, got {s!r}")
        if len(self.w_range) != 2 or not self.w_range[0] < self.w_range[1]:
            raise ConfigError(f"w_range must be [lo, hi) with lo < hi, got {self.w_range!r}")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if self.lr_times_L is not None and not self.lr_times_L > 0:
            raise ConfigError("lr_times_L must be positive")
        if not self.probe_lr_times_L > 0:
            raise ConfigError("probe_lr_times_L must be positive")
        for t in self.checkpoints:
            _check_int("checkpoints", t, 0)

    # -- typed views --------------------------------------------------------

    @property
    def fmt(self) -> FloatFormat:
        return parse_format(self.format)

    @property
    def update_policy(self) -> UpdatePolicy:
        return _policy(self.policy)

    def optimizer_cfg(self, lr: float | None = None) -> SgdConfig | AdamWConfig:
        cls = SgdConfig if self.optimizer == "sgd" else AdamWConfig
        allowed = {f.name for f in fields(cls)}
        bad = sorted(set(self.optimizer_config) - allowed)
        if bad:
            raise ConfigError(f"unknown {self.optimizer} option(s): {', '.join(bad)}")
        opts = dict(self.optimizer_config)
        if lr is not None:
            opts["lr"] = lr
        return cls(**opts)

    def instance_seed_for(self, seed: int) -> int:
        return seed if self.instance_seed is None else self.instance_seed


def _policy(name: str) -> UpdatePolicy:
    try:
        return UpdatePolicy(name)
    except ValueError:
        choices = ", ".join(p.value for p in UpdatePolicy)
        raise ConfigError(f"unknown policy {name!r}; choose from {choices}") from None


def _check_int(name: str, value: Any, minimum: int) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return ExperimentConfig.from_dict(data)
