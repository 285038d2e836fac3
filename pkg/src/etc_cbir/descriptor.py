"""mCEDD patch descriptors: invariant color/texture histograms per 16x16 patch.

The base descriptor is CEDD-style: each 4x4 sub-block is classified into
one of 6 texture classes by MPEG-7 edge filters on its quadrant means, and
every pixel votes into (texture class, color bin) where the 24 color bins
are 3 achromatic bins plus 21 hue sectors. The mCEDD is the average of the
base descriptor over the 16-element per-block encryption group (8 dihedral
codes x optional negation), which makes it invariant to every operation an
EtC cipher applies inside a block, by construction.

All heavy paths are batched over patch stacks; the scalar operations exist
as the reference contract and for tests.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass

import numpy as np

from .raster import BLOCK, Raster, dihedral_transform, to_blocks

TEXTURE_CLASSES = 6

_LUMA = np.array([0.299, 0.587, 0.114])
_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class DescriptorParams:
    """Thresholds for the color and edge binning.

    Values follow CEDD-family conventions; they are recorded in the
    codebook file so any stored descriptor can be reproduced from it.
    """

    achromatic_v_black: float = 0.15
    achromatic_v_white: float = 0.85
    achromatic_s: float = 0.15
    edge_threshold: float = 14.0  # on the 0..255 luminance scale
    hue_bins: int = 21

    @property
    def color_bins(self) -> int:
        return 3 + self.hue_bins

    @property
    def dim(self) -> int:
        return TEXTURE_CLASSES * self.color_bins


DEFAULT_PARAMS = DescriptorParams()
DIM = DEFAULT_PARAMS.dim  # 144


def rgb_to_hsv(r: int, g: int, b: int) -> tuple[float, float, float]:
    """Hexcone HSV for one 8-bit pixel: h in degrees [0, 360), s and v in [0, 1].

    h is 0 whenever s is 0.
    """
    h, s, v = colorsys.rgb_to_hsv(r / 255.0, g / 255.0, b / 255.0)
    return h * 360.0, s, v


def color_bin(h: float, s: float, v: float, params: DescriptorParams = DEFAULT_PARAMS) -> int:
    """Index in [0, 24): 0 black, 1 white, 2 gray, 3.. hue sectors."""
    if v < params.achromatic_v_black:
        return 0
    if s < params.achromatic_s:
        return 1 if v > params.achromatic_v_white else 2
    sector = int(h // (360.0 / params.hue_bins))
    return 3 + min(max(sector, 0), params.hue_bins - 1)


def texture_class(subblock: np.ndarray, params: DescriptorParams = DEFAULT_PARAMS) -> int:
    """Classify a 4x4 luminance sub-block.

    0 no-edge, 1 non-directional, 2 vertical, 3 horizontal, 4 diagonal-45,
    5 diagonal-135. Quadrant means a0..a3 are row-major 2x2 averages.
    """
    sub = np.asarray(subblock, dtype=np.float64)
    if sub.shape != (4, 4):
        raise ValueError(f"expected 4x4 luminance sub-block, got {sub.shape}")
    q = sub.reshape(2, 2, 2, 2).mean(axis=(1, 3))
    a0, a1, a2, a3 = q[0, 0], q[0, 1], q[1, 0], q[1, 1]
    responses = (
        abs(2 * a0 - 2 * a1 - 2 * a2 + 2 * a3) / 2,  # non-directional
        abs(a0 - a1 + a2 - a3),  # vertical
        abs(a0 + a1 - a2 - a3),  # horizontal
        abs(_SQRT2 * a0 - _SQRT2 * a3),  # diagonal 45
        abs(_SQRT2 * a1 - _SQRT2 * a2),  # diagonal 135
    )
    if max(responses) < params.edge_threshold:
        return 0
    return 1 + int(np.argmax(responses))


def _hsv_batch(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized hexcone HSV over (..., 3) 8-bit samples; h in degrees.

    Replicates the scalar conversion operation for operation (same
    divisions, same subtraction order, same modulus) so both paths agree
    bit for bit even when a hue lands exactly on a sector boundary.
    """
    rgbf = rgb.astype(np.float64) / 255.0
    r, g, b = rgbf[..., 0], rgbf[..., 1], rgbf[..., 2]
    maxc = rgbf.max(axis=-1)
    minc = rgbf.min(axis=-1)
    rangec = maxc - minc
    safe = np.where(rangec > 0, rangec, 1.0)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    # channel-of-maximum tie order: r first, then g, then b
    is_r = r == maxc
    is_g = (g == maxc) & ~is_r
    h6 = np.select(
        [rangec == 0, is_r, is_g],
        [0.0, bc - gc, 2.0 + rc - bc],
        default=4.0 + gc - rc,
    )
    h = ((h6 / 6.0) % 1.0) * 360.0
    s = np.where(rangec > 0, rangec / np.where(maxc > 0, maxc, 1.0), 0.0)
    return h, s, maxc


def _color_bins_batch(rgb: np.ndarray, params: DescriptorParams) -> np.ndarray:
    h, s, v = _hsv_batch(rgb)
    sectors = (h // (360.0 / params.hue_bins)).astype(np.int64)
    hue = 3 + np.clip(sectors, 0, params.hue_bins - 1)
    achromatic = s < params.achromatic_s
    return np.select(
        [v < params.achromatic_v_black, achromatic & (v > params.achromatic_v_white), achromatic],
        [0, 1, 2],
        default=hue,
    )


def _texture_classes_batch(lum: np.ndarray, params: DescriptorParams) -> np.ndarray:
    """(n, 16, 16) luminance -> (n, 4, 4) sub-block texture classes."""
    n = lum.shape[0]
    q = lum.reshape(n, 4, 2, 2, 4, 2, 2).mean(axis=(3, 6))  # (n, sr, qr, sc, qc)
    a0 = q[:, :, 0, :, 0]
    a1 = q[:, :, 0, :, 1]
    a2 = q[:, :, 1, :, 0]
    a3 = q[:, :, 1, :, 1]
    responses = np.stack(
        [
            np.abs(2 * a0 - 2 * a1 - 2 * a2 + 2 * a3) / 2,
            np.abs(a0 - a1 + a2 - a3),
            np.abs(a0 + a1 - a2 - a3),
            np.abs(_SQRT2 * a0 - _SQRT2 * a3),
            np.abs(_SQRT2 * a1 - _SQRT2 * a2),
        ],
        axis=-1,
    )
    classes = 1 + np.argmax(responses, axis=-1)
    return np.where(responses.max(axis=-1) < params.edge_threshold, 0, classes)


def _base_batch(patches: np.ndarray, params: DescriptorParams) -> np.ndarray:
    """(n, 16, 16, 3) patches -> (n, dim) base descriptors, each summing to 1."""
    n = patches.shape[0]
    lum = patches.astype(np.float64) @ _LUMA
    classes = _texture_classes_batch(lum, params)
    classes_px = np.repeat(np.repeat(classes, 4, axis=1), 4, axis=2)  # (n, 16, 16)
    bins_px = _color_bins_batch(patches, params)
    dim = params.dim
    cells = classes_px * params.color_bins + bins_px
    flat = (cells + np.arange(n, dtype=np.int64)[:, None, None] * dim).ravel()
    hist = np.bincount(flat, minlength=n * dim).reshape(n, dim)
    return hist / float(BLOCK * BLOCK)


def base_descriptor(patch: np.ndarray, params: DescriptorParams = DEFAULT_PARAMS) -> np.ndarray:
    """Plain (non-invariant) CEDD-style descriptor of one 16x16x3 patch."""
    if patch.shape != (BLOCK, BLOCK, 3):
        raise ValueError(f"expected ({BLOCK}, {BLOCK}, 3) patch, got {patch.shape}")
    return _base_batch(patch[np.newaxis], params)[0]


def mcedd_batch(patches: np.ndarray, params: DescriptorParams = DEFAULT_PARAMS) -> np.ndarray:
    """mCEDD for a stack of patches, shape (n, 16, 16, 3) -> (n, dim).

    Averages the base descriptor over the fixed group order: dihedral codes
    0..7, each without and then with negation. The accumulation order is
    part of the contract so the invariance tolerance is honest.
    """
    if patches.ndim != 4 or patches.shape[1:] != (BLOCK, BLOCK, 3):
        raise ValueError(f"expected (n, {BLOCK}, {BLOCK}, 3) patches, got {patches.shape}")
    acc = np.zeros((patches.shape[0], params.dim))
    for code in range(8):
        rotated = dihedral_transform(patches, code, axes=(1, 2))
        acc += _base_batch(rotated, params)
        acc += _base_batch(255 - rotated, params)
    return acc / 16.0


def mcedd(patch: np.ndarray, params: DescriptorParams = DEFAULT_PARAMS) -> np.ndarray:
    """Encryption-invariant descriptor of one 16x16x3 patch."""
    if patch.shape != (BLOCK, BLOCK, 3):
        raise ValueError(f"expected ({BLOCK}, {BLOCK}, 3) patch, got {patch.shape}")
    return mcedd_batch(patch[np.newaxis], params)[0]


def patch_descriptors(img: Raster, params: DescriptorParams = DEFAULT_PARAMS) -> np.ndarray:
    """mCEDD for every 16x16 block of a block-aligned image, row-major order."""
    return mcedd_batch(to_blocks(img), params)
