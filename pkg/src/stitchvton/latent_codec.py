"""Analytic 4-channel latent codec (8x spatial reduction).

Each non-overlapping 8x8 patch of the luma plane is reduced to four
coefficients: the patch mean and the three lowest non-DC orthonormal
2-D DCT-II coefficients, taken at (row,col) frequencies (0,1), (1,0)
and (1,1). The per-channel scale constants were calibrated once on the
reference synthetic corpus so each channel has roughly unit standard
deviation, then rounded to powers of two (the rounding keeps constant
images exactly round-trippable in float32). The map is linear; decode
inverts the truncated transform, clamps to [0,1] and replicates the
result to RGB.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .imaging import Image, PATCH

__all__ = ["Latent", "CODEC_SCALES", "encode", "decode", "latent_shape"]

# Powers of two, calibrated on the reference corpus (see demos).
CODEC_SCALES = (4.0, 16.0, 16.0, 64.0)

# Orthonormal DCT-II basis vectors for N = 8. The u=1 vector is built
# antisymmetric by construction so mean-removed patches give exactly
# zero coefficients for constant inputs.
_B0 = np.full(PATCH, 1.0 / np.sqrt(PATCH), dtype=np.float32)
_half = np.sqrt(2.0 / PATCH) * np.cos(
    np.pi * (2.0 * np.arange(PATCH // 2) + 1.0) / (2.0 * PATCH))
_B1 = np.concatenate([_half, -_half[::-1]]).astype(np.float32)

_BASIS = np.stack([
    np.outer(_B0, _B1),   # (0,1): varies along width
    np.outer(_B1, _B0),   # (1,0): varies along height
    np.outer(_B1, _B1),   # (1,1)
]).astype(np.float32)


@dataclass
class Latent:
    """4 x H/8 x W/8 plane set with a tag naming what it represents."""

    data: np.ndarray
    tag: str = "image"

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3 or arr.shape[0] != 4:
            raise ShapeError("Latent needs (4, h, w), got %s" % (arr.shape,))
        if not np.all(np.isfinite(arr)):
            raise ShapeError("Latent contains non-finite values")
        self.data = arr

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]


def latent_shape(image_size):
    if image_size % PATCH:
        raise ShapeError("image size %d not divisible by %d" % (image_size, PATCH))
    return (4, image_size // PATCH, image_size // PATCH)


def encode(img, tag="image"):
    """Image -> Latent. Linear: encode(a+b) = encode(a) + encode(b)."""
    y = img.luma()
    h, w = y.shape
    patches = y.reshape(h // PATCH, PATCH, w // PATCH, PATCH).transpose(0, 2, 1, 3)
    mean = patches.mean(axis=(2, 3))
    centered = patches - mean[:, :, None, None]
    coeffs = np.einsum("hwij,kij->khw", centered, _BASIS)
    out = np.empty((4, h // PATCH, w // PATCH), dtype=np.float32)
    out[0] = mean * CODEC_SCALES[0]
    for k in range(3):
        out[k + 1] = coeffs[k] * CODEC_SCALES[k + 1]
    return Latent(out, tag)


def decode(lat):
    """Latent -> Image: inverse truncated transform, clamped to [0,1],
    replicated to RGB."""
    data = lat.data if isinstance(lat, Latent) else np.asarray(lat, np.float32)
    if data.ndim != 3 or data.shape[0] != 4:
        raise ShapeError("decode needs (4, h, w), got %s" % (data.shape,))
    mean = data[0] / CODEC_SCALES[0]
    recon = np.repeat(mean[:, :, None, None], PATCH, axis=2).repeat(PATCH, axis=3)
    for k in range(3):
        recon = recon + (data[k + 1] / CODEC_SCALES[k + 1])[:, :, None, None] * _BASIS[k]
    h, w = mean.shape[0] * PATCH, mean.shape[1] * PATCH
    recon = recon.transpose(0, 2, 1, 3).reshape(h, w)
    recon = np.clip(recon, 0.0, 1.0)
    return Image(np.repeat(recon[:, :, None], 3, axis=2))
