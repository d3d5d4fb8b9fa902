"""Grayscale images, Netpbm/IDX ingestion, synthetic datasets and distortions.

Random draws use numpy's ``default_rng`` (PCG64) seeded with the caller's
integer seed, so every generator and distortion is a pure function of its
arguments and seed.
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .csvio import atomic_write
from .errors import (
    DimensionMismatch,
    InvalidParam,
    IoFailure,
    MalformedHeader,
    TruncatedData,
    UnsupportedMaxval,
)

SYNTH_KINDS = ("bars-stripes", "blobs", "uniform-noise")
DISTORTIONS = ("gauss-noise", "mean-shift", "contrast-scale", "box-blur", "salt-pepper")


@dataclass(frozen=True, eq=False)
class Image:
    """Grayscale intensity matrix with dynamic range ``[0, range_l]``.

    ``pixels`` is stored as a read-only float64 array of shape (height, width).
    """

    pixels: np.ndarray
    range_l: float = 255.0

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.size == 0:
            raise InvalidParam(f"pixels must be a non-empty 2-D array, got shape {px.shape}")
        if not self.range_l > 0:
            raise InvalidParam("range_l must be positive")
        if not np.all(np.isfinite(px)) or px.min() < 0 or px.max() > self.range_l:
            raise InvalidParam(f"pixels must lie in [0, {self.range_l}]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "range_l", float(self.range_l))

    @classmethod
    def from_flat(cls, width: int, height: int, range_l: float, pixels: Sequence[float]) -> "Image":
        if len(pixels) != width * height:
            raise InvalidParam(f"expected {width * height} pixels, got {len(pixels)}")
        return cls(np.asarray(pixels, dtype=float).reshape(height, width), range_l)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    @property
    def flat(self) -> np.ndarray:
        return self.pixels.reshape(-1)

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.range_l == other.range_l and np.array_equal(self.pixels, other.pixels)

    def __repr__(self):
        return f"Image({self.width}x{self.height}, l={self.range_l:g})"


@dataclass(frozen=True)
class Dataset:
    images: tuple[Image, ...]
    name: str = ""
    seed: int | None = None
    _stack: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        images = tuple(self.images)
        if not images:
            raise InvalidParam("a Dataset needs at least one image")
        first = images[0]
        for im in images[1:]:
            if im.shape != first.shape or im.range_l != first.range_l:
                raise DimensionMismatch(
                    f"heterogeneous dataset: {im!r} vs {first!r}"
                )
        object.__setattr__(self, "images", images)
        stack = np.stack([im.pixels for im in images])
        stack.setflags(write=False)
        object.__setattr__(self, "_stack", stack)

    @classmethod
    def from_array(cls, arr: np.ndarray, range_l: float, name: str = "", seed=None) -> "Dataset":
        return cls(tuple(Image(a, range_l) for a in np.asarray(arr, dtype=float)), name, seed)

    def __len__(self):
        return len(self.images)

    def __getitem__(self, i):
        return self.images[i]

    def __iter__(self):
        return iter(self.images)

    @property
    def shape(self) -> tuple[int, int]:
        return self.images[0].shape

    @property
    def range_l(self) -> float:
        return self.images[0].range_l

    def array(self) -> np.ndarray:
        """Pixel stack of shape (n, height, width)."""
        return self._stack

    def subset(self, indices, name=None) -> "Dataset":
        return Dataset(tuple(self.images[i] for i in indices), name or self.name, self.seed)


# ---------------------------------------------------------------- Netpbm PGM

_WS = b" \t\r\n\v\f"


def _pgm_header(data: bytes):
    """Parse magic, width, height, maxval; return them and the payload offset."""
    pos, tokens = 0, []
    while len(tokens) < 4:
        while pos < len(data) and data[pos] in _WS:
            pos += 1
        if pos < len(data) and data[pos] == ord("#"):
            while pos < len(data) and data[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos] not in _WS and data[pos] != ord("#"):
            pos += 1
        if start == pos:
            raise MalformedHeader("incomplete PGM header")
        tokens.append(data[start:pos])
        if len(tokens) == 1 and tokens[0] not in (b"P2", b"P5"):
            raise MalformedHeader(f"bad PGM magic {tokens[0][:8]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise MalformedHeader("non-integer PGM header field") from exc
    if width <= 0 or height <= 0 or maxval <= 0:
        raise MalformedHeader(f"invalid PGM dimensions {width}x{height}, maxval {maxval}")
    if maxval > 255:
        raise UnsupportedMaxval(f"maxval {maxval} > 255 is not supported")
    return tokens[0], width, height, maxval, pos


def parse_pgm(data: bytes) -> Image:
    magic, width, height, maxval, pos = _pgm_header(data)
    n = width * height
    if magic == b"P5":
        payload = data[pos + 1 : pos + 1 + n]  # exactly one whitespace byte after maxval
        if len(payload) < n:
            raise TruncatedData(f"expected {n} pixel bytes, found {len(payload)}")
        pixels = np.frombuffer(payload, dtype=np.uint8).astype(float)
    else:
        body = re.sub(rb"#[^\r\n]*", b"", data[pos:])
        try:
            values = [int(t) for t in body.split()]
        except ValueError as exc:
            raise MalformedHeader("non-integer pixel in P2 body") from exc
        if len(values) < n:
            raise TruncatedData(f"expected {n} pixels, found {len(values)}")
        pixels = np.array(values[:n], dtype=float)
    if pixels.max(initial=0) > maxval:
        raise MalformedHeader("pixel value exceeds maxval")
    return Image(pixels.reshape(height, width), float(maxval))


def load_pgm(path) -> Image:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return parse_pgm(data)


def _quantize(image: Image) -> tuple[int, np.ndarray]:
    maxval = int(math.floor(image.range_l + 0.5))
    if maxval > 255 or maxval < 1:
        raise UnsupportedMaxval(f"maxval {maxval} outside [1, 255]")
    # round half up, then clamp
    q = np.clip(np.floor(image.pixels + 0.5), 0, maxval).astype(np.uint8)
    return maxval, q


def encode_pgm(image: Image, binary: bool = True) -> bytes:
    maxval, q = _quantize(image)
    h, w = q.shape
    if binary:
        return f"P5\n{w} {h}\n{maxval}\n".encode() + q.tobytes()
    rows = "\n".join(" ".join(str(v) for v in row) for row in q)
    return f"P2\n{w} {h}\n{maxval}\n{rows}\n".encode()


def save_pgm(image: Image, path, binary: bool = True) -> None:
    atomic_write(path, encode_pgm(image, binary))


def load_pgm_dir(directory) -> Dataset:
    """All ``*.pgm`` files of a directory, in sorted filename order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise IoFailure(f"not a directory: {directory}")
    files = sorted(directory.glob("*.pgm"))
    if not files:
        raise IoFailure(f"no .pgm files in {directory}")
    return Dataset(tuple(load_pgm(f) for f in files), name=directory.name)


# ---------------------------------------------------------------- IDX


def load_idx_images(path) -> Dataset:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(data) < 16:
        raise MalformedHeader("IDX header shorter than 16 bytes")
    magic, n, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != 0x00000803:
        raise MalformedHeader(f"IDX magic {magic:#010x} is not 0x00000803")
    if n == 0 or rows == 0 or cols == 0:
        raise MalformedHeader("IDX dimensions must be positive")
    size = n * rows * cols
    payload = data[16 : 16 + size]
    if len(payload) < size:
        raise TruncatedData(f"expected {size} payload bytes, found {len(payload)}")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(n, rows, cols).astype(float)
    return Dataset.from_array(arr, 255.0, name=Path(path).name)


# ---------------------------------------------------------------- synthetic data


def synth(kind: str, side: int, count: int, seed: int, range_l: float = 255.0) -> Dataset:
    """Deterministic synthetic dataset.

    bars-stripes: each image is either column-constant (bars) or row-constant
    (stripes), with every line independently 0 or ``range_l``.
    blobs: one isotropic Gaussian bump, peak ``range_l``, at a random centre,
    rounded to integer levels.
    uniform-noise: i.i.d. uniform pixels on ``[0, range_l]``.
    """
    if kind not in SYNTH_KINDS:
        raise InvalidParam(f"unknown synth kind {kind!r}; expected one of {SYNTH_KINDS}")
    if side < 2 or count < 1:
        raise InvalidParam("synth needs side >= 2 and count >= 1")
    rng = np.random.default_rng(seed)
    if kind == "bars-stripes":
        bits = rng.integers(0, 2, size=(count, side)).astype(float) * range_l
        vertical = rng.integers(0, 2, size=count).astype(bool)
        out = np.empty((count, side, side))
        out[vertical] = bits[vertical][:, None, :]
        out[~vertical] = bits[~vertical][:, :, None]
    elif kind == "blobs":
        centres = rng.uniform(0, side - 1, size=(count, 2))
        widths = rng.uniform(0.15, 0.3, size=count) * side
        yy, xx = np.mgrid[0:side, 0:side].astype(float)
        r2 = (yy[None] - centres[:, 0, None, None]) ** 2 + (xx[None] - centres[:, 1, None, None]) ** 2
        out = range_l * np.exp(-r2 / (2 * widths[:, None, None] ** 2))
        out = np.clip(np.floor(out + 0.5), 0, range_l)
    else:
        out = rng.uniform(0, range_l, size=(count, side, side))
    return Dataset.from_array(out, range_l, name=f"{kind}-{side}", seed=seed)


def parse_synth_spec(text: str) -> Dataset:
    """``kind:side:count:seed``, e.g. ``bars-stripes:8:20:1``."""
    parts = text.split(":")
    if len(parts) != 4:
        raise InvalidParam(f"synth spec {text!r} is not kind:side:count:seed")
    try:
        side, count, seed = (int(p) for p in parts[1:])
    except ValueError as exc:
        raise InvalidParam(f"synth spec {text!r} has non-integer fields") from exc
    return synth(parts[0], side, count, seed)


# ---------------------------------------------------------------- distortions


def box_blur(pixels: np.ndarray) -> np.ndarray:
    """3x3 uniform mean with edge replication."""
    padded = np.pad(pixels, 1, mode="edge")
    h, w = pixels.shape
    acc = np.zeros_like(pixels, dtype=float)
    for dy in range(3):
        for dx in range(3):
            acc += padded[dy : dy + h, dx : dx + w]
    return acc / 9.0


def distort(image: Image, kind: str, param: float, seed: int = 0) -> Image:
    """Apply one distortion family; the result is clamped to ``[0, l]``.

    ``param`` is sigma for gauss-noise, the offset for mean-shift, the gain
    about the image mean for contrast-scale, the blend weight in [0, 1]
    towards the 3x3 box-blurred image for box-blur, and the corrupted
    fraction for salt-pepper.
    """
    x, l = image.pixels, image.range_l
    param = float(param)
    if not math.isfinite(param):
        raise InvalidParam("param must be finite")
    rng = np.random.default_rng(seed)
    if kind == "gauss-noise":
        if param < 0:
            raise InvalidParam("gauss-noise sigma must be >= 0")
        out = x + param * rng.standard_normal(x.shape)
    elif kind == "mean-shift":
        out = x + param
    elif kind == "contrast-scale":
        if param <= 0:
            raise InvalidParam("contrast-scale gamma must be > 0")
        mu = x.mean()
        out = mu + param * (x - mu)
    elif kind == "box-blur":
        if not 0 <= param <= 1:
            raise InvalidParam("box-blur blend weight must be in [0, 1]")
        out = (1 - param) * x + param * box_blur(x)
    elif kind == "salt-pepper":
        if not 0 <= param <= 1:
            raise InvalidParam("salt-pepper fraction must be in [0, 1]")
        hit = rng.uniform(size=x.shape) < param
        salt = rng.uniform(size=x.shape) < 0.5
        out = np.where(hit, np.where(salt, l, 0.0), x)
    else:
        raise InvalidParam(f"unknown distortion {kind!r}; expected one of {DISTORTIONS}")
    return Image(np.clip(out, 0.0, l), l)


def with_headroom(image: Image, fraction: float) -> Image:
    """Affinely compress intensities into ``[f*l, (1-f)*l]``."""
    if not 0 <= fraction < 0.5:
        raise InvalidParam("headroom fraction must lie in [0, 0.5)")
    l = image.range_l
    return Image(fraction * l + (1 - 2 * fraction) * image.pixels, l)


def mse(a: Image, b: Image) -> float:
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a!r} vs {b!r}")
    return float(np.mean((a.pixels - b.pixels) ** 2))


def montage(images: Sequence[Image], cols: int | None = None) -> Image:
    """Row-major tiling with 1-pixel, 0-valued separators between tiles."""
    if not images:
        raise InvalidParam("montage of zero images")
    n = len(images)
    cols = cols or math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    h, w = images[0].shape
    out = np.zeros((rows * h + rows - 1, cols * w + cols - 1))
    for k, im in enumerate(images):
        r, c = divmod(k, cols)
        out[r * (h + 1) : r * (h + 1) + h, c * (w + 1) : c * (w + 1) + w] = im.pixels
    return Image(out, images[0].range_l)
