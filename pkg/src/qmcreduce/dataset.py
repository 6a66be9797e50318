"""Dataset ingestion: MNIST IDX files, CSV round trips, synthetic data.

All randomness goes through :func:`numpy.random.default_rng` (PCG64),
seeded explicitly by the caller.
"""

from __future__ import annotations

import csv
import gzip
import io
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, FormatError, LengthError, RangeError

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049

#: Largest double strictly below one; stored in place of saturated pixels.
ONE_MINUS_EPS = float(np.nextafter(1.0, 0.0))

#: Default variance of :func:`add_noise`.
DEFAULT_NOISE_VAR = 0.02
#: Alternative reading of N(0, 0.02) as a standard deviation; opt-in for experiments.
STD_READING_NOISE_VAR = 0.02**2


@dataclass
class Dataset:
    """N points in ``[0, 1)^s`` with scalar responses."""

    points: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        self.points = np.ascontiguousarray(np.atleast_2d(np.asarray(self.points, dtype=np.float64)))
        self.responses = np.ascontiguousarray(np.asarray(self.responses, dtype=np.float64).reshape(-1))
        if self.points.shape[0] < 1:
            raise RangeError("a dataset needs at least one point")
        if self.points.shape[0] != self.responses.shape[0]:
            raise LengthError(
                f"{self.points.shape[0]} points but {self.responses.shape[0]} responses"
            )
        if self.points.size and (self.points.min() < 0.0 or self.points.max() >= 1.0):
            raise RangeError("point coordinates must lie in [0, 1)")

    @property
    def N(self) -> int:
        return int(self.points.shape[0])

    @property
    def s(self) -> int:
        return int(self.points.shape[1])


@dataclass
class GrayImage:
    """Row-major grey-scale image with intensities in ``[0, 1]``."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.size != self.width * self.height:
            raise DimensionError(
                f"{px.size} pixels do not fill a {self.height}x{self.width} image"
            )
        self.pixels = px.reshape(self.height, self.width)
        if px.size and (px.min() < 0.0 or px.max() > 1.0):
            raise RangeError("pixel intensities must lie in [0, 1]")


def _read_bytes(path) -> bytes:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _parse_idx(raw: bytes, magic: int, ndims: int) -> tuple[tuple[int, ...], memoryview]:
    header = 4 + 4 * ndims
    if len(raw) < 4:
        raise LengthError("IDX file shorter than its magic number")
    found = int.from_bytes(raw[:4], "big")
    if found != magic:
        raise FormatError(f"IDX magic {found} found where {magic} was expected")
    if len(raw) < header:
        raise LengthError("IDX header is truncated")
    dims = tuple(int.from_bytes(raw[4 + 4 * i : 8 + 4 * i], "big") for i in range(ndims))
    expected = int(np.prod(dims)) if dims else 0
    payload = memoryview(raw)[header:]
    if len(payload) < expected:
        raise LengthError(f"IDX payload has {len(payload)} bytes, header announces {expected}")
    if len(payload) > expected:
        raise LengthError(f"IDX payload has {len(payload) - expected} trailing bytes")
    return dims, payload


def read_idx_image_array(path) -> np.ndarray:
    """Read an IDX image file into a float array of shape (n, rows, cols).

    Gzip-compressed files are detected by their magic bytes.
    """
    dims, payload = _parse_idx(_read_bytes(path), IDX_IMAGES_MAGIC, 3)
    data = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    return data.reshape(dims)


def read_idx_images(path) -> list[GrayImage]:
    arr = read_idx_image_array(path)
    n, rows, cols = arr.shape
    return [GrayImage(cols, rows, arr[i]) for i in range(n)]


def read_idx_labels(path) -> list[int]:
    dims, payload = _parse_idx(_read_bytes(path), IDX_LABELS_MAGIC, 1)
    labels = np.frombuffer(payload, dtype=np.uint8)
    if labels.size and labels.max() > 9:
        raise RangeError(f"label byte {int(labels.max())} outside 0..9")
    return labels.astype(int).tolist()


def write_idx_images(path, images: np.ndarray) -> None:
    """Write uint8-representable images (n, rows, cols) with values in [0, 1]."""
    arr = np.asarray(images, dtype=np.float64)
    if arr.ndim != 3:
        raise DimensionError("images must have shape (n, rows, cols)")
    body = np.rint(arr * 255.0).astype(np.uint8).tobytes()
    head = IDX_IMAGES_MAGIC.to_bytes(4, "big") + b"".join(
        int(d).to_bytes(4, "big") for d in arr.shape
    )
    _write_maybe_gz(path, head + body)


def write_idx_labels(path, labels: Sequence[int]) -> None:
    lab = np.asarray(labels, dtype=np.uint8)
    head = IDX_LABELS_MAGIC.to_bytes(4, "big") + int(lab.size).to_bytes(4, "big")
    _write_maybe_gz(path, head + lab.tobytes())


def _write_maybe_gz(path, blob: bytes) -> None:
    path = Path(path)
    if path.suffix == ".gz":
        blob = gzip.compress(blob, mtime=0)
    path.write_bytes(blob)


def pool_average(image: GrayImage, block: int) -> GrayImage:
    """Replace each ``block x block`` tile by its mean intensity."""
    if block < 1:
        raise DimensionError("block size must be positive")
    if image.width % block or image.height % block:
        raise DimensionError(
            f"block {block} does not divide a {image.height}x{image.width} image"
        )
    h, w = image.height // block, image.width // block
    tiles = image.pixels.reshape(h, block, w, block)
    return GrayImage(w, h, tiles.mean(axis=(1, 3)))


def pool_average_array(images: np.ndarray, block: int) -> np.ndarray:
    """Batch version of :func:`pool_average` for arrays of shape (n, rows, cols)."""
    n, rows, cols = images.shape
    if block < 1 or rows % block or cols % block:
        raise DimensionError(f"block {block} does not divide {rows}x{cols} images")
    return images.reshape(n, rows // block, block, cols // block, block).mean(axis=(2, 4))


def to_dataset(images, labels: Sequence[int], limit: int | None = None) -> Dataset:
    """Flatten the first ``limit`` images row-major and pair them with labels.

    Saturated pixels (exactly 1.0) are stored as the largest double below
    one so that every point lies in the half-open unit cube.
    """
    if isinstance(images, np.ndarray):
        arr = images.reshape(images.shape[0], -1)
    else:
        arr = np.stack([np.asarray(im.pixels, dtype=np.float64).reshape(-1) for im in images]) if len(images) else np.empty((0, 0))
    n_avail = arr.shape[0]
    limit = n_avail if limit is None else int(limit)
    if limit > n_avail or limit > len(labels):
        raise RangeError(f"limit {limit} exceeds the {min(n_avail, len(labels))} available images")
    if limit < 1:
        raise RangeError("limit must be at least 1")
    pts = np.array(arr[:limit], dtype=np.float64)
    pts[pts >= 1.0] = ONE_MINUS_EPS
    return Dataset(pts, np.asarray(labels[:limit], dtype=np.float64))


def generate_uniform(N: int, s: int, seed) -> np.ndarray:
    """N i.i.d. uniform points in ``[0, 1)^s``."""
    if N < 1 or s < 1:
        raise RangeError("N and s must both be positive")
    rng = np.random.default_rng(seed)
    return rng.random((N, s))


def add_noise(responses, sigma2: float = DEFAULT_NOISE_VAR, seed=None) -> np.ndarray:
    """Add centred Gaussian noise of variance ``sigma2`` elementwise."""
    y = np.asarray(responses, dtype=np.float64)
    if sigma2 < 0:
        raise RangeError("noise variance must be non-negative")
    if sigma2 == 0:
        return y.copy()
    rng = np.random.default_rng(seed)
    return y + rng.normal(0.0, np.sqrt(sigma2), size=y.shape)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_csv(path, dataset: Dataset) -> None:
    """Write ``x1..xs,y`` rows with shortest round-trip float formatting."""
    header = [f"x{j + 1}" for j in range(dataset.s)] + ["y"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for p, y in zip(dataset.points, dataset.responses):
        w.writerow([_fmt(v) for v in p] + [_fmt(y)])
    atomic_write_text(path, buf.getvalue())


def read_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    if len(header) < 2 or header[-1] != "y":
        raise FormatError(f"{path}: header must list coordinates followed by 'y'")
    try:
        vals = np.array([[float(v) for v in r] for r in body], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if vals.ndim != 2 or vals.shape[1] != len(header):
        raise FormatError(f"{path}: ragged rows")
    return Dataset(vals[:, :-1], vals[:, -1])


def atomic_write_text(path, text: str) -> None:
    """Write via a sibling temp file so a failure never leaves partial output."""
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)
