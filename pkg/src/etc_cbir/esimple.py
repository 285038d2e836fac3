"""Image-level E-SIMPLE vectors: word histogram, log weighting, l2 norm.

Because the per-patch descriptors are invariant to every in-block
encryption operation and the histogram ignores patch order, the E-SIMPLE
of an encrypted image equals the E-SIMPLE of its plain original. That is
the whole retrieval scheme.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codebook import Codebook, assign_words
from .descriptor import patch_descriptors
from .raster import Raster


@dataclass(frozen=True)
class ESimpleVector:
    """Weighted, normalized word histogram tagged with its codebook's hash."""

    values: np.ndarray  # (M,) float64
    codebook_id: int

    def __len__(self) -> int:
        return len(self.values)


def histogram(img: Raster, cb: Codebook) -> np.ndarray:
    """Count of patches assigned to each visual word; sums to the patch count."""
    descs = patch_descriptors(img, cb.params)
    return np.bincount(assign_words(cb, descs), minlength=cb.m)


def weight(counts: np.ndarray) -> np.ndarray:
    """1 + ln(count) per bin; empty bins stay 0 (log-tf convention)."""
    counts = np.asarray(counts)
    out = np.zeros(counts.shape, dtype=np.float64)
    nz = counts > 0
    out[nz] = 1.0 + np.log(counts[nz].astype(np.float64))
    return out


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """v / ||v||2; the zero vector maps to itself."""
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v.copy()


def esimple(img: Raster, cb: Codebook) -> ESimpleVector:
    """Full descriptor pipeline for one block-aligned image."""
    return ESimpleVector(
        values=l2_normalize(weight(histogram(img, cb))),
        codebook_id=cb.file_hash(),
    )
