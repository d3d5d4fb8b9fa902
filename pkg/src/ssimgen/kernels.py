"""Pairwise SSIM distance matrices, the double-centred SSIM kernel, the RBF
baseline, a cyclic Jacobi eigensolver and spectral PSD repair."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, InvalidParam, NoConvergence, NotSymmetric, SampleTooSmall
from .imgio import Dataset
from .ssim import MODES, _center, _eq1_sq, _eq2_radicand, constants, image_blocks

JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 100


def workers() -> int:
    """Worker cap from ``SSIMGEN_THREADS`` (default: machine parallelism)."""
    try:
        n = int(os.environ.get("SSIMGEN_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    entries: np.ndarray
    mode: str = "eq1"
    window: int = 8
    stride: int = 1

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    entries: np.ndarray
    provenance: str = "ssim"
    psd_fixed: bool = False
    clipped_mass: float = 0.0

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray = field(repr=False)  # columns match eigenvalues
    clipped_mass: float = 0.0
    sweeps: int = 0


def _as_array(m) -> np.ndarray:
    if isinstance(m, (KernelMatrix, DistanceMatrix)):
        return m.entries
    return np.asarray(m, dtype=float)


# ---------------------------------------------------------------- distances


def pairwise_distance_matrix(
    data: Dataset,
    window: int = 8,
    stride: int = 1,
    mode: str = "eq1",
    uncentered: bool = False,
) -> DistanceMatrix:
    """D(i, j) = Frobenius norm of the SSIM distance map between images i and j."""
    if mode not in MODES:
        raise InvalidParam(f"mode must be one of {MODES}")
    n = len(data)
    if n < 2:
        raise SampleTooSmall("a distance matrix needs at least two images")
    blocks = np.stack([image_blocks(im, window, stride) for im in data])
    blocks = blocks.reshape(n, -1, blocks.shape[-1])  # (n, patches, q)
    l = data.range_l
    if mode == "eq1" and not uncentered:
        blocks = _center(blocks)
    c = constants(l, blocks.shape[-1])[3]

    def row(i: int) -> np.ndarray:
        a = np.broadcast_to(blocks[i], blocks[i + 1 :].shape)
        b = blocks[i + 1 :]
        sq = _eq1_sq(a, b, c) if mode == "eq1" else _eq2_radicand(a, b, l)
        return np.sqrt(np.sum(sq, axis=-1))

    D = np.zeros((n, n))
    nw = min(workers(), n - 1)
    if nw > 1 and n >= 64:
        with ThreadPoolExecutor(nw) as pool:
            rows = list(pool.map(row, range(n - 1)))
    else:
        rows = [row(i) for i in range(n - 1)]
    for i, r in enumerate(rows):
        D[i, i + 1 :] = r
        D[i + 1 :, i] = r
    return DistanceMatrix(D, mode, window, stride)


def double_center(D, squared: bool = False) -> KernelMatrix:
    """K = -1/2 H D H with H = I - (1/n) 11^T.

    ``squared`` squares the distances first (classical MDS convention).
    """
    d = _as_array(D)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise DimensionMismatch(f"distance matrix must be square, got {d.shape}")
    if squared:
        d = d * d
    row = d.mean(axis=1, keepdims=True)
    col = d.mean(axis=0, keepdims=True)
    k = -0.5 * (d - row - col + d.mean())
    k = 0.5 * (k + k.T)
    return KernelMatrix(k, "ssim")


def ssim_kernel(data: Dataset, window: int = 8, stride: int = 1, mode: str = "eq1", squared: bool = False) -> KernelMatrix:
    return double_center(pairwise_distance_matrix(data, window, stride, mode), squared=squared)


def rbf_kernel(data, gamma: float) -> KernelMatrix:
    """exp(-gamma |x_i - x_j|^2) over flattened images or code vectors."""
    if not gamma > 0:
        raise InvalidParam("gamma must be positive")
    if isinstance(data, Dataset):
        x = data.array().reshape(len(data), -1)
    else:
        x = np.asarray(data, dtype=float)
        x = x.reshape(x.shape[0], -1)
    diff = x[:, None, :] - x[None, :, :]
    sq = np.sum(diff * diff, axis=-1)
    return KernelMatrix(np.exp(-gamma * sq), "rbf")


# ---------------------------------------------------------------- spectra


def _check_symmetric(a: np.ndarray, tol: float = 1e-10) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetric(f"matrix must be square, got {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > tol * scale:
        raise NotSymmetric("matrix is not symmetric within tolerance")


def eigen_sym(K, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> Spectrum:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Sweeps rotate every (p, q) pair in row order until the largest
    off-diagonal magnitude falls below ``tol`` (scaled by the largest entry
    when that exceeds 1).
    """
    a = np.array(_as_array(K), dtype=float)
    _check_symmetric(a)
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    thresh = tol * max(1.0, float(np.max(np.abs(a)))) if n else tol

    def off_max() -> float:
        if n < 2:
            return 0.0
        return float(np.max(np.abs(a[np.triu_indices(n, 1)])))

    sweeps = 0
    while off_max() >= thresh:
        if sweeps == max_sweeps:
            raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(tau) > 1e150:  # tau**2 would overflow; t -> 1 / (2 tau)
                    t = 0.5 / tau
                else:
                    t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return Spectrum(w[order], v[:, order], 0.0, sweeps)


def psd_project(K) -> KernelMatrix:
    """Clip negative eigenvalues to zero and rebuild the matrix."""
    spec = eigen_sym(K)
    w = spec.eigenvalues
    clipped = float(np.sum(-w[w < 0]))
    vecs = spec.eigenvectors
    out = (vecs * np.maximum(w, 0.0)) @ vecs.T
    out = 0.5 * (out + out.T)
    if isinstance(K, KernelMatrix):
        return replace(K, entries=out, psd_fixed=True, clipped_mass=clipped)
    return KernelMatrix(out, "ssim", True, clipped)


def spectrum_of(K) -> Spectrum:
    """Spectrum carrying the clipped mass recorded on a repaired kernel."""
    spec = eigen_sym(K)
    mass = K.clipped_mass if isinstance(K, KernelMatrix) else 0.0
    return replace(spec, clipped_mass=mass)
