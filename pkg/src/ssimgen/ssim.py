"""SSIM, its luminance/structure factors, the two SSIM distances and
patchwise distance maps.

Block-level functions take :class:`Block` values; the underscored helpers
work on stacked arrays of shape ``(..., q)`` and back the image-level maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BlockTooSmall,
    DimensionMismatch,
    InvalidParam,
    NegativeRadicand,
    NonCenteredBlock,
    WindowTooLarge,
)
from .imgio import Image

K1, K2 = 0.01, 0.03
RADICAND_TOL = 1e-12
MODES = ("eq1", "eq2")


@dataclass(frozen=True, eq=False)
class Block:
    """Flattened image window of ``q`` intensities in range ``[0, range_l]``."""

    values: np.ndarray
    range_l: float = 255.0

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.size < 2:
            raise BlockTooSmall(f"block needs q >= 2, got q={v.size}")
        if not np.all(np.isfinite(v)):
            raise InvalidParam("block values must be finite")
        if not self.range_l > 0:
            raise InvalidParam("range_l must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def q(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class BlockStats:
    mu: float
    sigma: float
    c1: float
    c2: float
    c3: float
    c: float


@dataclass(frozen=True)
class SsimComponents:
    s1: float
    s2: float

    @property
    def ssim(self) -> float:
        return self.s1 * self.s2


@dataclass(frozen=True)
class DistanceMap:
    values: np.ndarray  # (rows, cols)
    window: int
    stride: int
    mode: str

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def frobenius(self) -> float:
        return float(math.sqrt(np.sum(self.values**2)))


def constants(range_l: float, q: int) -> tuple[float, float, float, float]:
    """(c1, c2, c3, c) for dynamic range ``range_l`` and block length ``q``."""
    c1 = (K1 * range_l) ** 2
    c2 = (K2 * range_l) ** 2
    return c1, c2, c2 / 2, (q - 1) * c2


# ---------------------------------------------------------------- array cores


def _moments(a: np.ndarray, b: np.ndarray):
    q = a.shape[-1]
    mu_a, mu_b = a.mean(axis=-1), b.mean(axis=-1)
    da, db = a - mu_a[..., None], b - mu_b[..., None]
    var_a = np.sum(da * da, axis=-1) / (q - 1)
    var_b = np.sum(db * db, axis=-1) / (q - 1)
    cov = np.sum(da * db, axis=-1) / (q - 1)
    return mu_a, mu_b, var_a, var_b, cov


def _components(a: np.ndarray, b: np.ndarray, range_l: float):
    c1, c2, _, _ = constants(range_l, a.shape[-1])
    mu_a, mu_b, var_a, var_b, cov = _moments(a, b)
    s1 = (2 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1)
    s2 = (2 * cov + c2) / (var_a + var_b + c2)
    return s1, s2


def _center(x: np.ndarray) -> np.ndarray:
    return x - x.mean(axis=-1, keepdims=True)


def _eq1_sq(a: np.ndarray, b: np.ndarray, c: float) -> np.ndarray:
    diff = a - b
    return np.sum(diff * diff, axis=-1) / (np.sum(a * a, axis=-1) + np.sum(b * b, axis=-1) + c)


def _eq2_radicand(a: np.ndarray, b: np.ndarray, range_l: float) -> np.ndarray:
    s1, s2 = _components(a, b, range_l)
    r = 2.0 - s1 - s2
    if np.any(r < -RADICAND_TOL):
        raise NegativeRadicand(f"2 - s1 - s2 = {float(np.min(r))} below -{RADICAND_TOL}")
    return np.maximum(r, 0.0)


# ---------------------------------------------------------------- block API


def _pair(a: Block, b: Block) -> float:
    if a.q != b.q:
        raise DimensionMismatch(f"block lengths differ: {a.q} vs {b.q}")
    if a.range_l != b.range_l:
        raise DimensionMismatch(f"block ranges differ: {a.range_l} vs {b.range_l}")
    return a.range_l


def block_stats(b: Block) -> BlockStats:
    """Mean and (q-1)-normalised standard deviation plus the SSIM constants."""
    v = b.values
    mu = float(v.mean())
    sigma = float(math.sqrt(np.sum((v - mu) ** 2) / (b.q - 1)))
    return BlockStats(mu, sigma, *constants(b.range_l, b.q))


def covariance(a: Block, b: Block) -> float:
    _pair(a, b)
    return float(_moments(a.values, b.values)[4])


def ssim_components(a: Block, b: Block) -> SsimComponents:
    s1, s2 = _components(a.values, b.values, _pair(a, b))
    return SsimComponents(float(s1), float(s2))


def ssim(a: Block, b: Block) -> float:
    return ssim_components(a, b).ssim


def _centered_pair(a: Block, b: Block, auto_center: bool):
    l = _pair(a, b)
    if auto_center:
        return _center(a.values), _center(b.values), l
    tol = 1e-9 * l
    for blk in (a, b):
        mu = float(blk.values.mean())
        if abs(mu) > tol:
            raise NonCenteredBlock(f"block mean {mu:g} exceeds tolerance {tol:g}")
    return a.values, b.values, l


def ssim_zero_mean(a: Block, b: Block, auto_center: bool = True) -> float:
    """(2 a.b + c) / (|a|^2 + |b|^2 + c) on zero-mean blocks, c = (q-1) c2."""
    x, y, l = _centered_pair(a, b, auto_center)
    c = constants(l, a.q)[3]
    return float((2 * np.dot(x, y) + c) / (np.dot(x, x) + np.dot(y, y) + c))


def dist_eq1(a: Block, b: Block, auto_center: bool = True, uncentered: bool = False) -> float:
    """sqrt(|a - b|^2 / (|a|^2 + |b|^2 + c)).

    With ``uncentered=True`` the raw blocks are used as-is (approximation
    that is reasonable when the two block means are close).
    """
    if uncentered:
        x, y, l = a.values, b.values, _pair(a, b)
    else:
        x, y, l = _centered_pair(a, b, auto_center)
    c = constants(l, a.q)[3]
    return float(math.sqrt(_eq1_sq(x, y, c)))


def dist_eq2(a: Block, b: Block) -> float:
    """sqrt(2 - s1 - s2); needs no preprocessing."""
    return float(math.sqrt(_eq2_radicand(a.values, b.values, _pair(a, b))))


# ---------------------------------------------------------------- image API


def window_grid(shape: tuple[int, int], window: int, stride: int) -> tuple[int, int]:
    h, w = shape
    if stride < 1:
        raise InvalidParam("stride must be >= 1")
    if window < 2:
        raise BlockTooSmall("window must be >= 2 so that q >= 2")
    if window > min(h, w):
        raise WindowTooLarge(f"window {window} exceeds image size {w}x{h}")
    return (h - window) // stride + 1, (w - window) // stride + 1


def patch_index(shape: tuple[int, int], window: int, stride: int) -> np.ndarray:
    """Flat pixel indices of every window, shape (rows*cols, window*window)."""
    rows, cols = window_grid(shape, window, stride)
    w = shape[1]
    r0 = np.arange(rows) * stride
    c0 = np.arange(cols) * stride
    dy, dx = np.meshgrid(np.arange(window), np.arange(window), indexing="ij")
    offs = (dy * w + dx).reshape(-1)
    starts = (r0[:, None] * w + c0[None, :]).reshape(-1)
    return starts[:, None] + offs[None, :]


def image_blocks(image: Image, window: int, stride: int) -> np.ndarray:
    """Windows of an image, shape (rows, cols, window*window)."""
    rows, cols = window_grid(image.shape, window, stride)
    idx = patch_index(image.shape, window, stride)
    return image.flat[idx].reshape(rows, cols, -1)


def _check_images(a: Image, b: Image):
    if a.shape != b.shape or a.range_l != b.range_l:
        raise DimensionMismatch(f"{a!r} vs {b!r}")


def distance_map(
    a: Image,
    b: Image,
    window: int = 8,
    stride: int = 1,
    mode: str = "eq1",
    uncentered: bool = False,
) -> DistanceMap:
    """Per-window SSIM distance between two images.

    eq1 centres each patch pair first unless ``uncentered`` is set.
    """
    _check_images(a, b)
    if mode not in MODES:
        raise InvalidParam(f"mode must be one of {MODES}")
    pa, pb = image_blocks(a, window, stride), image_blocks(b, window, stride)
    if mode == "eq1":
        if not uncentered:
            pa, pb = _center(pa), _center(pb)
        d2 = _eq1_sq(pa, pb, constants(a.range_l, pa.shape[-1])[3])
    else:
        d2 = _eq2_radicand(pa, pb, a.range_l)
    return DistanceMap(np.sqrt(d2), window, stride, mode)


def mean_ssim(a: Image, b: Image, window: int = 8, stride: int = 1) -> float:
    _check_images(a, b)
    s1, s2 = _components(image_blocks(a, window, stride), image_blocks(b, window, stride), a.range_l)
    return float(np.mean(s1 * s2))


def mean_distance(a: Image, b: Image, window: int = 8, stride: int = 1, mode: str = "eq1") -> float:
    return float(np.mean(distance_map(a, b, window, stride, mode).values))
