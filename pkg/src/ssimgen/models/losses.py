"""Differentiable training losses built from autodiff ops.

Images enter as (batch, pixels) tensors scaled to the unit range, so the
SSIM constants use ``l = 1``.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..ssim import constants, patch_index


class PatchLayout:
    """Window geometry shared by every patchwise loss on one image shape."""

    def __init__(self, shape: tuple[int, int], window: int, stride: int, range_l: float = 1.0):
        self.shape = tuple(shape)
        self.index = patch_index(self.shape, window, stride)  # (P, q)
        self.q = self.index.shape[1]
        self.c1, self.c2, _, self.c = constants(range_l, self.q)

    def patches(self, x) -> ad.Tensor:
        return ad.take(x, self.index)  # (N, P, q)


def patch_dist2(x, y, layout: PatchLayout, center: bool = True) -> ad.Tensor:
    """Per-sample sum over patches of the squared centred SSIM distance."""
    return ad.tsum(ad.ssim_dist2_diff(layout.patches(x), layout.patches(y), layout.c, center), axis=-1)


def pairwise_patch_dist2(z, layout: PatchLayout, mode: str = "eq1") -> ad.Tensor:
    """(N, N) matrix of squared SSIM distance-map Frobenius norms.

    eq1 uses centred patches; eq2 sums the radicand 2 - s1 - s2.
    """
    p = ad.transpose(layout.patches(z), (1, 0, 2))  # (P, N, q)
    q = layout.q
    cp = ad.centre(p)
    gram = ad.matmul(cp, ad.transpose(cp, (0, 2, 1)))  # (P, N, N)
    sq = ad.tsum(ad.square(cp), axis=-1)  # (P, N)
    si = ad.reshape(sq, sq.shape + (1,))
    sj = ad.reshape(sq, sq.shape[:1] + (1,) + sq.shape[1:])
    if mode == "eq1":
        num = si + sj - 2.0 * gram
        per_patch = num / (si + sj + layout.c)
    else:
        mu = ad.mean(p, axis=-1)
        mi = ad.reshape(mu, mu.shape + (1,))
        mj = ad.reshape(mu, mu.shape[:1] + (1,) + mu.shape[1:])
        s1 = (2.0 * mi * mj + layout.c1) / (mi * mi + mj * mj + layout.c1)
        vi, vj = si * (1.0 / (q - 1)), sj * (1.0 / (q - 1))
        s2 = (gram * (2.0 / (q - 1)) + layout.c2) / (vi + vj + layout.c2)
        per_patch = 2.0 - s1 - s2
    return ad.tsum(per_patch, axis=0)


def ssim_distance_matrix(z, layout: PatchLayout, mode: str = "eq1") -> ad.Tensor:
    n = z.shape[0]
    off = 1.0 - np.eye(n)
    return ad.sqrt(pairwise_patch_dist2(z, layout, mode) * off)


def double_center(d) -> ad.Tensor:
    """-1/2 H D H."""
    d = ad.as_tensor(d)
    row = ad.mean(d, axis=1, keepdims=True)
    col = ad.mean(d, axis=0, keepdims=True)
    return (d - row - col + ad.mean(d)) * -0.5


def mmd2_from_pooled(k, n_x: int) -> ad.Tensor:
    """Biased MMD^2 from the Gram of the concatenated sample X||Y."""
    kxx = k[:n_x, :n_x]
    kyy = k[n_x:, n_x:]
    kxy = k[:n_x, n_x:]
    return ad.mean(kxx) + ad.mean(kyy) - 2.0 * ad.mean(kxy)


def ssim_kernel_mmd2(x, y, layout: PatchLayout, mode: str = "eq1") -> ad.Tensor:
    """MMD^2 under the SSIM kernel of the pooled sample."""
    z = ad.concat([x, y], axis=0)
    k = double_center(ssim_distance_matrix(z, layout, mode))
    return mmd2_from_pooled(k, x.shape[0])


def rbf_mmd2(x, y, gamma: float) -> ad.Tensor:
    z = ad.concat([x, y], axis=0)
    diff = ad.reshape(z, (z.shape[0], 1, z.shape[1])) - ad.reshape(z, (1,) + z.shape)
    k = ad.exp(ad.tsum(ad.square(diff), axis=-1) * -gamma)
    return mmd2_from_pooled(k, x.shape[0])


def gaussian_kl(mu, logvar) -> ad.Tensor:
    """KL(N(mu, diag exp(logvar)) || N(0, I)) per sample."""
    return ad.tsum(ad.exp(logvar) + ad.square(mu) - 1.0 - logvar, axis=-1) * 0.5
