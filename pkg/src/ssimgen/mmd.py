"""Squared MMD estimators over Gram blocks and a permutation two-sample test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidParam, SampleTooSmall
from .kernels import KernelMatrix

CLAMP_TOL = 1e-10
REPORT_HEADER = ("observed_mmd2", "p_value", "B", "seed", "kernel", "n_x", "n_y")


@dataclass(frozen=True, eq=False)
class GramBlocks:
    Kxx: np.ndarray
    Kyy: np.ndarray
    Kxy: np.ndarray
    pooled_provenance: str = "ssim"

    def __post_init__(self):
        kxx, kyy, kxy = (np.asarray(k, dtype=float) for k in (self.Kxx, self.Kyy, self.Kxy))
        nx, ny = kxx.shape[0], kyy.shape[0]
        if kxx.shape != (nx, nx) or kyy.shape != (ny, ny) or kxy.shape != (nx, ny):
            raise DimensionMismatch(f"inconsistent Gram blocks {kxx.shape}, {kyy.shape}, {kxy.shape}")
        object.__setattr__(self, "Kxx", kxx)
        object.__setattr__(self, "Kyy", kyy)
        object.__setattr__(self, "Kxy", kxy)

    @property
    def n_x(self) -> int:
        return self.Kxx.shape[0]

    @property
    def n_y(self) -> int:
        return self.Kyy.shape[0]

    @classmethod
    def from_pooled(cls, K, n_x: int, order=None) -> "GramBlocks":
        """Slice the Gram of the concatenated sample; ``order`` relabels indices first."""
        k = K.entries if isinstance(K, KernelMatrix) else np.asarray(K, dtype=float)
        prov = K.provenance if isinstance(K, KernelMatrix) else "ssim"
        n = k.shape[0]
        if k.shape != (n, n) or not 0 < n_x < n:
            raise DimensionMismatch(f"cannot split a {k.shape} Gram at n_x={n_x}")
        idx = np.arange(n) if order is None else np.asarray(order)
        ix, iy = idx[:n_x], idx[n_x:]
        return cls(k[np.ix_(ix, ix)], k[np.ix_(iy, iy)], k[np.ix_(ix, iy)], prov)


@dataclass(frozen=True)
class MmdResult:
    mmd2: float
    estimator: str
    clamped: bool = False
    raw: float = 0.0


@dataclass(frozen=True)
class PermutationTestResult:
    observed_mmd2: float
    p_value: float
    permutations: int
    seed: int
    kernel: str = "ssim"
    n_x: int = 0
    n_y: int = 0

    def csv_row(self) -> tuple:
        return (self.observed_mmd2, self.p_value, self.permutations, self.seed, self.kernel, self.n_x, self.n_y)


def mmd2_biased(blocks: GramBlocks) -> MmdResult:
    """Mean of Kxx plus mean of Kyy minus twice the mean of Kxy."""
    nx, ny = blocks.n_x, blocks.n_y
    raw = float(
        blocks.Kxx.sum() / (nx * nx) + blocks.Kyy.sum() / (ny * ny) - 2.0 * blocks.Kxy.sum() / (nx * ny)
    )
    if -CLAMP_TOL <= raw < 0:
        return MmdResult(0.0, "biased", True, raw)
    return MmdResult(raw, "biased", False, raw)


def mmd2_unbiased(blocks: GramBlocks) -> MmdResult:
    """U-statistic: diagonals of Kxx and Kyy excluded; may be negative."""
    nx, ny = blocks.n_x, blocks.n_y
    if nx < 2 or ny < 2:
        raise SampleTooSmall("unbiased MMD needs n_x >= 2 and n_y >= 2")
    xx = (blocks.Kxx.sum() - np.trace(blocks.Kxx)) / (nx * (nx - 1))
    yy = (blocks.Kyy.sum() - np.trace(blocks.Kyy)) / (ny * (ny - 1))
    xy = blocks.Kxy.sum() / (nx * ny)
    raw = float(xx + yy - 2.0 * xy)
    return MmdResult(raw, "unbiased", False, raw)


def permutation_stream(seed: int, index: int) -> np.random.Generator:
    """PRNG for permutation ``index``; independent of evaluation order."""
    return np.random.default_rng([seed, index])


def permutation_test(pooled_K, n_x: int, n_y: int, B: int = 99, seed: int = 0) -> PermutationTestResult:
    """Permutation p-value for biased MMD^2 on a fixed pooled Gram.

    Each permutation reslices ``pooled_K``; kernels are never recomputed.
    p = (1 + #{permuted >= observed}) / (B + 1).
    """
    k = pooled_K.entries if isinstance(pooled_K, KernelMatrix) else np.asarray(pooled_K, dtype=float)
    prov = pooled_K.provenance if isinstance(pooled_K, KernelMatrix) else "ssim"
    n = n_x + n_y
    if k.shape != (n, n):
        raise DimensionMismatch(f"pooled Gram {k.shape} does not match n_x + n_y = {n}")
    if B < 19:
        raise InvalidParam("permutation test needs B >= 19")
    if n_x < 1 or n_y < 1:
        raise InvalidParam("both samples must be non-empty")
    observed = mmd2_biased(GramBlocks.from_pooled(k, n_x)).raw
    exceed = 0
    for b in range(B):
        order = permutation_stream(seed, b).permutation(n)
        if mmd2_biased(GramBlocks.from_pooled(k, n_x, order)).raw >= observed:
            exceed += 1
    p = (1 + exceed) / (B + 1)
    return PermutationTestResult(max(observed, 0.0) if observed >= -CLAMP_TOL else observed, p, B, seed, prov, n_x, n_y)
