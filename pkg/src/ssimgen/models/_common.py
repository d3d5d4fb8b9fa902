from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..errors import ConfigError, NonFiniteLoss, NonFiniteValue
from ..imgio import Dataset
from ..ssim import _components, patch_index
from .config import TrainConfig

log = logging.getLogger("ssimgen.train")


@dataclass
class Prepared:
    train: np.ndarray  # (n_train, pixels), unit range
    eval: np.ndarray  # (n_eval, pixels), unit range
    shape: tuple[int, int]
    range_l: float

    @property
    def dim(self) -> int:
        return self.train.shape[1]

    def image_meta(self) -> dict:
        return {"height": self.shape[0], "width": self.shape[1], "range_l": self.range_l}


def prepare(data: Dataset, cfg: TrainConfig) -> Prepared:
    """Scale to [0, 1] and carve off the fixed, seeded evaluation split."""
    x = data.array().reshape(len(data), -1) / data.range_l
    n = len(x)
    n_eval = max(1, int(round(cfg.eval_fraction * n)))
    if n - n_eval < 1:
        raise ConfigError(f"dataset of {n} images leaves nothing to train on")
    perm = np.random.default_rng([cfg.seed, 7]).permutation(n)
    return Prepared(x[perm[n_eval:]], x[perm[:n_eval]], data.shape, data.range_l)


def minibatches(rng: np.random.Generator, n: int, batch_size: int):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield perm[start : start + batch_size]


def eval_noise(cfg: TrainConfig, n: int, dim: int, gaussian: bool = False) -> np.ndarray:
    rng = np.random.default_rng([cfg.seed, 1])
    return rng.standard_normal((n, dim)) if gaussian else rng.uniform(-1.0, 1.0, (n, dim))


def grads_of(total: ad.Tensor, leaves) -> list[np.ndarray]:
    return ad.backward(total, leaves)


def guard(fn, epoch: int):
    """Run ``fn`` and convert numerical blow-ups into NonFiniteLoss."""
    try:
        out = fn()
    except NonFiniteValue as exc:
        raise NonFiniteLoss(f"non-finite value at epoch {epoch}: {exc}", epoch) from exc
    return out


def check_finite(record: dict, epoch: int) -> None:
    for k, v in record.items():
        if isinstance(v, float) and not math.isfinite(v):
            raise NonFiniteLoss(f"{k} is non-finite at epoch {epoch}", epoch)


def mean_ssim_unit(x: np.ndarray, y: np.ndarray, shape, window: int, stride: int) -> np.ndarray:
    """Per-row mean SSIM between unit-range image rows of ``x`` and ``y``."""
    window = min(window, *shape)
    idx = patch_index(shape, window, stride)
    s1, s2 = _components(x[:, idx], y[:, idx], 1.0)
    return np.mean(s1 * s2, axis=-1)


def epoch_means(records: list[dict]) -> dict:
    keys = records[0].keys()
    return {k: float(np.mean([r[k] for r in records])) for k in keys}


def rng_descriptor(rng: np.random.Generator) -> dict:
    state = rng.bit_generator.state
    return {"bit_generator": state["bit_generator"], "state": {k: int(v) for k, v in state["state"].items()}}
