"""EtC image encryption: block permutation, rotation/inversion, negative-positive.

The cipher operates on the 16x16 block grid. Each image gets a key set of
three 64-bit seeds: k1 drives the block permutation, k2 the per-block
dihedral choice (uniform over all 8 elements), k3 the per-block negation
bit (probability 0.5). Encryption is deterministic given (image, keys) and
exactly invertible.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
import secrets

import numpy as np

from .errors import EmptyGridError, FileFormatError
from .prng import MASK64, SplitMix64
from .raster import (
    DIHEDRAL_INVERSE,
    Raster,
    block_grid,
    dihedral_transform,
    from_blocks,
    to_blocks,
)

KEY_MAGIC = "ETC-KEY"
KEY_VERSION = "v1"


@dataclass(frozen=True)
class KeySet:
    """The per-image key triple [K(1), K(2), K(3)]."""

    k1: int  # block permutation
    k2: int  # dihedral choice
    k3: int  # negative-positive mask

    def __post_init__(self):
        for name in ("k1", "k2", "k3"):
            v = getattr(self, name)
            if not 0 <= v <= MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit value, got {v}")


@dataclass(frozen=True)
class EncryptionPlan:
    """Expanded per-block randomness for one grid size.

    ``permutation[j]`` is the output grid position of input block j;
    ``dihedral_codes[j]`` and ``negpos_mask[j]`` apply to input block j
    before it is moved.
    """

    permutation: np.ndarray  # int64, bijection on [0, n)
    dihedral_codes: np.ndarray  # uint8 in [0, 8)
    negpos_mask: np.ndarray  # bool


def keygen(entropy: int | None = None) -> KeySet:
    """Draw a key set from the stream PRNG; system entropy when no seed given."""
    if entropy is None:
        entropy = secrets.randbits(64)
    rng = SplitMix64(entropy)
    return KeySet(rng.next_u64(), rng.next_u64(), rng.next_u64())


def derive_plan(keys: KeySet, rows: int, cols: int) -> EncryptionPlan:
    """Expand a key set into the full per-block plan for a rows x cols grid."""
    n = rows * cols
    if n <= 0:
        raise EmptyGridError(f"grid {rows}x{cols} has no blocks")
    perm = list(range(n))
    SplitMix64(keys.k1).shuffle(perm)
    rng2 = SplitMix64(keys.k2)
    codes = np.fromiter((rng2.next_u64() % 8 for _ in range(n)), dtype=np.uint8, count=n)
    rng3 = SplitMix64(keys.k3)
    mask = np.fromiter((rng3.next_u64() % 2 for _ in range(n)), dtype=np.uint8, count=n)
    return EncryptionPlan(
        permutation=np.asarray(perm, dtype=np.int64),
        dihedral_codes=codes,
        negpos_mask=mask.astype(bool),
    )


def _scramble_blocks(blocks: np.ndarray, plan: EncryptionPlan) -> np.ndarray:
    """Dihedral + negation per source block (no permutation)."""
    out = np.empty_like(blocks)
    for code in range(8):
        sel = plan.dihedral_codes == code
        if sel.any():
            out[sel] = dihedral_transform(blocks[sel], code, axes=(1, 2))
    out[plan.negpos_mask] = 255 - out[plan.negpos_mask]
    return out


def encrypt(img: Raster, keys: KeySet) -> Raster:
    """Produce the EtC image: block j is transformed, then moved to permutation[j]."""
    rows, cols = block_grid(img)
    plan = derive_plan(keys, rows, cols)
    scrambled = _scramble_blocks(to_blocks(img), plan)
    out = np.empty_like(scrambled)
    out[plan.permutation] = scrambled
    return from_blocks(out, rows, cols)


def decrypt(img: Raster, keys: KeySet) -> Raster:
    """Exact inverse of :func:`encrypt` under the same key set."""
    rows, cols = block_grid(img)
    plan = derive_plan(keys, rows, cols)
    gathered = to_blocks(img)[plan.permutation]
    gathered[plan.negpos_mask] = 255 - gathered[plan.negpos_mask]
    out = np.empty_like(gathered)
    for code in range(8):
        sel = plan.dihedral_codes == code
        if sel.any():
            out[sel] = dihedral_transform(gathered[sel], DIHEDRAL_INVERSE[code], axes=(1, 2))
    return from_blocks(out, rows, cols)


def save_keyset(keys: KeySet, path) -> None:
    """Write the single-line key file: ``ETC-KEY v1 <k1> <k2> <k3>``."""
    Path(path).write_text(f"{KEY_MAGIC} {KEY_VERSION} {keys.k1} {keys.k2} {keys.k3}\n")


def load_keyset(path) -> KeySet:
    text = Path(path).read_text()
    fields = text.split()
    if len(fields) != 5 or fields[0] != KEY_MAGIC or fields[1] != KEY_VERSION:
        raise FileFormatError(f"{path}: not a {KEY_MAGIC} {KEY_VERSION} file")
    try:
        k1, k2, k3 = (int(f) for f in fields[2:])
    except ValueError as exc:
        raise FileFormatError(f"{path}: malformed key values") from exc
    return KeySet(k1, k2, k3)
