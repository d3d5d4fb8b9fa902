"""Drawing images from generative checkpoints and scoring them against data."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch, IncompatibleCheckpoint
from ..imgio import Dataset
from ..ssim import _components, patch_index
from .config import GENERATIVE, Checkpoint
from .mlp import predict


def sample(ckpt: Checkpoint, n: int, seed: int) -> Dataset:
    """``n`` images from seeded noise, clamped to ``[0, l]``.

    VAEs decode z ~ N(0, I); the other generators take z ~ U[-1, 1].
    """
    if ckpt.variant not in GENERATIVE:
        raise IncompatibleCheckpoint(f"{ckpt.variant!r} checkpoints cannot generate samples")
    rng = np.random.default_rng(seed)
    L = ckpt.config.latent_dim
    if ckpt.variant == "vae":
        z = rng.standard_normal((n, L))
        x = predict(ckpt.specs["decoder"], ckpt.params["decoder"], z)
    else:
        z = rng.uniform(-1.0, 1.0, (n, L))
        x = predict(ckpt.specs["generator"], ckpt.params["generator"], z)
        if ckpt.variant == "gmmn-code":
            x = predict(ckpt.specs["decoder"], ckpt.params["decoder"], x)
    h, w, l = ckpt.image["height"], ckpt.image["width"], ckpt.image["range_l"]
    if x.shape[1] != h * w:
        raise IncompatibleCheckpoint("generator output does not match the recorded image shape")
    pixels = np.clip(x * l, 0.0, l).reshape(n, h, w)
    return Dataset.from_array(pixels, l, name=f"{ckpt.variant}-samples", seed=seed)


def nn_ssim_matrix(samples: Dataset, heldout: Dataset, window: int = 8, stride: int = 1) -> np.ndarray:
    """mean_ssim between every (sample, held-out) pair."""
    if samples.shape != heldout.shape or samples.range_l != heldout.range_l:
        raise DimensionMismatch("samples and held-out images differ in shape or range")
    idx = patch_index(samples.shape, window, stride)
    a = samples.array().reshape(len(samples), -1)[:, idx]
    b = heldout.array().reshape(len(heldout), -1)[:, idx]
    s1, s2 = _components(a[:, None], b[None, :], samples.range_l)
    return np.mean(s1 * s2, axis=-1)


def evaluate_nn_ssim(samples: Dataset, heldout: Dataset, window: int = 8, stride: int = 1) -> float:
    """Mean over samples of the best mean_ssim against any held-out image."""
    return float(np.mean(np.max(nn_ssim_matrix(samples, heldout, window, stride), axis=1)))
