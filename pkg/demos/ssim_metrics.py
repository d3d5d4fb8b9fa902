"""
SSIM and the two SSIM distances
===============================

Block-level quantities first, then whole images scored window by window.
"""

import numpy as np

from ssimgen import imgio, ssim
from ssimgen.ssim import Block

# two 2-pixel blocks with opposite structure, intensities on [0, 1]
a = Block([1.0, -1.0], 1.0)
b = Block([-1.0, 1.0], 1.0)
print("zero-mean SSIM  ", ssim.ssim_zero_mean(a, b))
print("distance (cent.)", ssim.dist_eq1(a, b))

# a constant block against black: luminance disagrees, structure is trivial
c = ssim.ssim_components(Block([5.0] * 4, 10), Block([0.0] * 4, 10))
print("s1, s2, ssim    ", c.s1, c.s2, c.ssim)

# the centred distance squared and the zero-mean SSIM add up to one
rng = np.random.default_rng(0)
x, y = Block(rng.uniform(0, 255, 16), 255), Block(rng.uniform(0, 255, 16), 255)
print("d^2 + ssim0     ", ssim.dist_eq1(x, y) ** 2 + ssim.ssim_zero_mean(x, y))

# images: a distance per window, summarised by its Frobenius norm
img = imgio.synth("blobs", 32, 1, 3)[0]
noisy = imgio.distort(img, "gauss-noise", 20.0, seed=1)
dmap = ssim.distance_map(img, noisy, 8, 4)
print("map shape       ", dmap.values.shape)
print("frobenius       ", dmap.frobenius())
print("mean SSIM       ", ssim.mean_ssim(img, noisy))
