"""
From SSIM distances to a kernel
===============================

Pairwise distances between images are double-centred into a Gram matrix.
Its spectrum shows how far it is from positive semi-definite.
"""

import numpy as np

from ssimgen import imgio, kernels

# the smallest worked case: two points four apart
K = kernels.double_center(np.array([[0.0, 4.0], [4.0, 0.0]]))
print(K.entries)
print("eigenvalues", kernels.eigen_sym(K).eigenvalues)

data = imgio.synth("bars-stripes", 8, 12, 0)
D = kernels.pairwise_distance_matrix(data, 4, 2)
K = kernels.double_center(D)
print("largest row sum", np.abs(K.entries.sum(axis=1)).max())

spec = kernels.eigen_sym(K)
print("spectrum      ", np.round(spec.eigenvalues, 4))

# negative eigenvalues, if any, are clipped to zero
P = kernels.psd_project(K)
print("clipped mass  ", P.clipped_mass)
print("min eigenvalue", kernels.eigen_sym(P).eigenvalues.min())
