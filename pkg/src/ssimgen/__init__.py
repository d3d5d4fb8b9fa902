"""SSIM metrics, SSIM kernels and MMD tests, and generative models trained
with SSIM-based losses."""

from .imgio import Dataset, Image, distort, load_idx_images, load_pgm, mse, save_pgm, synth
from .kernels import double_center, eigen_sym, pairwise_distance_matrix, psd_project, rbf_kernel
from .mmd import GramBlocks, mmd2_biased, mmd2_unbiased, permutation_test
from .ssim import Block, dist_eq1, dist_eq2, distance_map, mean_ssim, ssim_components, ssim_zero_mean

__version__ = "0.1.0"
