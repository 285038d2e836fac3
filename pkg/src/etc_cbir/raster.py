"""8-bit RGB rasters, the 16x16 block grid, and per-block transforms.

An image is a numpy array of shape (height, width, 3), dtype uint8, row
major. The 8 dihedral codes together with pixel negation form the
16-element group that every per-block encryption operation is drawn from;
descriptors are made invariant to exactly this group.

Dihedral codes: 0 identity, 1 rot90cw, 2 rot180, 3 rot270cw, 4 flipH,
5 flipH after rot90cw, 6 flipH after rot180, 7 flipH after rot270cw.
Rotations are clockwise by convention; the choice is arbitrary but must be
bit-exact everywhere.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import BlockAlignmentError, ImageTooSmallError

BLOCK = 16

# Raster: np.ndarray of shape (H, W, 3), dtype uint8.
Raster = np.ndarray

DIHEDRAL_CODES = tuple(range(8))
# Every flip element of D4 is an involution; rot90 and rot270 invert each other.
DIHEDRAL_INVERSE = (0, 3, 2, 1, 4, 5, 6, 7)


def require_raster(img: np.ndarray) -> None:
    """Raise if ``img`` is not an (H, W, 3) uint8 array."""
    if not isinstance(img, np.ndarray) or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) array, got shape {getattr(img, 'shape', None)}")
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 samples, got {img.dtype}")


def load_image(path) -> Raster:
    """Load a raster file as 8-bit RGB (grayscale is expanded to 3 channels)."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_image(img: Raster, path) -> None:
    """Save as PNG (lossless, keeps descriptor invariance exact)."""
    require_raster(img)
    Image.fromarray(img, mode="RGB").save(path, format="PNG")


def crop_to_block_multiple(img: Raster) -> Raster:
    """Top-left crop to 16*floor(X/16) x 16*floor(Y/16) pixels."""
    require_raster(img)
    h, w = img.shape[:2]
    if h < BLOCK or w < BLOCK:
        raise ImageTooSmallError(f"image {w}x{h} is smaller than one {BLOCK}x{BLOCK} block")
    h2, w2 = (h // BLOCK) * BLOCK, (w // BLOCK) * BLOCK
    if (h2, w2) == (h, w):
        return img
    return img[:h2, :w2].copy()


def block_grid(img: Raster) -> tuple[int, int]:
    """(rows, cols) of the 16x16 grid; image must already be block aligned."""
    require_raster(img)
    h, w = img.shape[:2]
    if h % BLOCK or w % BLOCK:
        raise BlockAlignmentError(f"image {w}x{h} is not a multiple of {BLOCK} (crop first)")
    if h == 0 or w == 0:
        raise ImageTooSmallError("image has no pixels")
    return h // BLOCK, w // BLOCK


def to_blocks(img: Raster) -> np.ndarray:
    """Copy out blocks in row-major grid order, shape (rows*cols, 16, 16, 3)."""
    rows, cols = block_grid(img)
    return (
        img.reshape(rows, BLOCK, cols, BLOCK, 3)
        .swapaxes(1, 2)
        .reshape(rows * cols, BLOCK, BLOCK, 3)
    )


def from_blocks(blocks: np.ndarray, rows: int, cols: int) -> Raster:
    """Reassemble row-major blocks into an image."""
    if blocks.shape != (rows * cols, BLOCK, BLOCK, 3):
        raise ValueError(f"expected ({rows * cols}, {BLOCK}, {BLOCK}, 3) blocks, got {blocks.shape}")
    return (
        blocks.reshape(rows, cols, BLOCK, BLOCK, 3)
        .swapaxes(1, 2)
        .reshape(rows * BLOCK, cols * BLOCK, 3)
    )


def dihedral_transform(arr: np.ndarray, code: int, axes: tuple[int, int] = (0, 1)) -> np.ndarray:
    """Apply a dihedral code to ``arr`` in the plane of ``axes`` (returns a copy).

    Works on a single block (axes (0, 1)) or a stack of blocks (axes (1, 2)).
    """
    if not 0 <= code <= 7:
        raise ValueError(f"dihedral code must be in [0, 7], got {code}")
    out = arr
    k = code & 3
    if k:
        out = np.rot90(out, k=-k, axes=axes)
    if code & 4:
        out = np.flip(out, axis=axes[1])
    return np.ascontiguousarray(out)


def apply_dihedral(block: np.ndarray, code: int) -> np.ndarray:
    """Rotate/flip one 16x16x3 block by the given code."""
    if block.shape != (BLOCK, BLOCK, 3):
        raise ValueError(f"expected ({BLOCK}, {BLOCK}, 3) block, got {block.shape}")
    return dihedral_transform(block, code)


def negate_block(block: np.ndarray) -> np.ndarray:
    """Negative-positive transform: every sample p becomes 255 - p."""
    return 255 - block
