"""Training configuration and the JSON checkpoint format."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..csvio import atomic_write
from ..errors import ConfigError, IncompatibleCheckpoint, IoFailure
from .mlp import MlpSpec, flatten, unflatten

VARIANTS = ("autoencoder", "gmmn-data", "gmmn-code", "vae", "gan", "gan-ssim", "lsgan", "lsgan-ssim")
GENERATIVE = ("gmmn-data", "gmmn-code", "vae", "gan", "gan-ssim", "lsgan", "lsgan-ssim")
CHECKPOINT_VERSION = "1"


@dataclass(frozen=True)
class TrainConfig:
    variant: str = "gmmn-data"
    epochs: int = 20
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    kernel: str = "ssim"  # ssim | rbf
    gamma: float = 0.05  # rbf bandwidth on unit-scaled pixels or codes
    ssim_mode: str = "eq1"  # distance form inside the SSIM kernel
    recon: str = "ssim"  # ssim | l2 | bce
    window: int = 4
    stride: int = 4
    ssim_center: bool = True  # centre patches in squared-distance losses
    lambda_ssim: float = 1.0
    latent_dim: int = 4
    hidden: tuple[int, ...] = (64,)
    activation: str = "relu"
    output: str = "sigmoid"
    lsgan_a: float = 0.0
    lsgan_b: float = 1.0
    lsgan_c: float = 1.0
    score_center: bool = False  # lsgan-ssim: centre score/target patches
    d_steps: int = 1
    d_warmup: int = 0
    eval_fraction: float = 0.2
    eval_window: int = 8
    eval_stride: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        for name in ("epochs", "batch_size", "latent_dim", "window", "stride", "d_steps"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.lambda_ssim < 0:
            raise ConfigError("lambda_ssim must be >= 0")
        if self.d_warmup < 0:
            raise ConfigError("d_warmup must be >= 0")
        if not self.lr > 0 or not self.gamma > 0:
            raise ConfigError("lr and gamma must be positive")
        if self.kernel not in ("ssim", "rbf"):
            raise ConfigError("kernel must be 'ssim' or 'rbf'")
        if self.ssim_mode not in ("eq1", "eq2"):
            raise ConfigError("ssim_mode must be 'eq1' or 'eq2'")
        if self.recon not in ("ssim", "l2", "bce"):
            raise ConfigError("recon must be 'ssim', 'l2' or 'bce'")
        if not 0 < self.eval_fraction < 1:
            raise ConfigError("eval_fraction must lie in (0, 1)")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ConfigError("hidden widths must be positive")

    def replace(self, **kw) -> "TrainConfig":
        d = self.to_dict()
        d.update(kw)
        return TrainConfig.from_dict(d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class Checkpoint:
    variant: str
    specs: dict[str, MlpSpec]
    params: dict[str, list[np.ndarray]]
    config: TrainConfig
    image: dict  # height, width, range_l
    history: list[dict] = field(default_factory=list)
    initial: dict = field(default_factory=dict)
    rng_state: dict = field(default_factory=dict)
    version: str = CHECKPOINT_VERSION

    def __post_init__(self):
        for name, spec in self.specs.items():
            if name not in self.params:
                raise IncompatibleCheckpoint(f"missing parameters for network {name!r}")
            if sum(p.size for p in self.params[name]) != spec.n_params:
                raise IncompatibleCheckpoint(f"parameter count mismatch for network {name!r}")

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "variant": self.variant,
            "specs": {k: s.to_dict() for k, s in self.specs.items()},
            "config": self.config.to_dict(),
            "image": dict(self.image),
            "params": {k: flatten(p) for k, p in self.params.items()},
            "history": self.history,
            "initial": self.initial,
            "rng_state": self.rng_state,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Checkpoint":
        if d.get("version") != CHECKPOINT_VERSION:
            raise IncompatibleCheckpoint(f"unsupported checkpoint version {d.get('version')!r}")
        try:
            specs = {k: MlpSpec.from_dict(s) for k, s in d["specs"].items()}
            params = {k: unflatten(specs[k], v) for k, v in d["params"].items()}
            return cls(
                variant=d["variant"],
                specs=specs,
                params=params,
                config=TrainConfig.from_dict(d["config"]),
                image=d["image"],
                history=d.get("history", []),
                initial=d.get("initial", {}),
                rng_state=d.get("rng_state", {}),
            )
        except (KeyError, TypeError, ConfigError) as exc:
            raise IncompatibleCheckpoint(f"malformed checkpoint: {exc}") from exc

    def save(self, path) -> None:
        atomic_write(path, self.to_json().encode())

    @classmethod
    def load(cls, path) -> "Checkpoint":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise IoFailure(f"cannot read {path}: {exc}") from exc
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise IncompatibleCheckpoint(f"{path} is not JSON: {exc}") from exc
