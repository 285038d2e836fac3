"""Visual-word codebooks: deterministic k-means over patch descriptors.

The codebook is trained once on an independent plain-image dataset and
then reused for every uploaded corpus, so the build must be exactly
reproducible: k-means++ seeded by the stream PRNG, fixed tie-breaking,
fixed summation order, and a text serialization whose bytes identify the
codebook (FNV-1a hash).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .descriptor import DEFAULT_PARAMS, DescriptorParams, patch_descriptors
from .errors import EmptyTrainingSetError, FileFormatError, FormatVersionError, TooFewPointsError
from .prng import MASK64, SplitMix64
from .raster import Raster, crop_to_block_multiple

CODEBOOK_MAGIC = "ESIMPLE-CODEBOOK"
CODEBOOK_VERSION = "v1"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

_ASSIGN_CHUNK = 4096


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash, printed in decimal wherever files reference it."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & MASK64
    return h


@dataclass
class KMeansConfig:
    m: int
    seed: int
    max_iters: int = 100
    tol: float = 1e-6  # relative inertia improvement

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol <= 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")


@dataclass
class KMeansResult:
    """Final centroids plus convergence diagnostics."""

    words: np.ndarray  # (m, d)
    inertia: float
    history: list[float]  # inertia after every assignment, init included
    iterations: int  # Lloyd iterations actually run


def _pairwise_sq(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared l2 distances (n, m), chunked to bound memory."""
    n = points.shape[0]
    out = np.empty((n, centers.shape[0]))
    c_sq = np.einsum("md,md->m", centers, centers)
    for start in range(0, n, _ASSIGN_CHUNK):
        chunk = points[start : start + _ASSIGN_CHUNK]
        p_sq = np.einsum("nd,nd->n", chunk, chunk)
        out[start : start + _ASSIGN_CHUNK] = p_sq[:, None] + c_sq[None, :] - 2.0 * (chunk @ centers.T)
    return out


def _assign(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest center per point (ties to lowest index) and its squared distance."""
    d2 = _pairwise_sq(points, centers)
    labels = np.argmin(d2, axis=1)
    best = np.maximum(d2[np.arange(len(points)), labels], 0.0)
    return labels, best


def _kmeanspp_init(points: np.ndarray, m: int, rng: SplitMix64) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((m, points.shape[1]))
    centers[0] = points[rng.next_below(n)]
    d2 = np.maximum(_pairwise_sq(points, centers[:1])[:, 0], 0.0)
    for k in range(1, m):
        total = float(d2.sum())
        if total > 0.0:
            target = rng.next_float() * total
            idx = int(np.searchsorted(np.cumsum(d2), target, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = rng.next_below(n)  # all remaining mass on duplicates
        centers[k] = points[idx]
        d2 = np.minimum(d2, np.maximum(_pairwise_sq(points, centers[k : k + 1])[:, 0], 0.0))
    return centers


def _update_centers(points, labels, old_centers, d2, m):
    """Means in point-index order; empty clusters reseeded to farthest points."""
    d = points.shape[1]
    sums = np.zeros((m, d))
    np.add.at(sums, labels, points)
    counts = np.bincount(labels, minlength=m)
    centers = np.where(counts[:, None] > 0, sums / np.maximum(counts, 1)[:, None], old_centers)
    if (counts == 0).any():
        spare = d2.copy()
        for k in np.flatnonzero(counts == 0):
            far = int(np.argmax(spare))
            centers[k] = points[far]
            spare[far] = -1.0
    return centers


def kmeans(points: np.ndarray, cfg: KMeansConfig) -> KMeansResult:
    """Lloyd's algorithm with k-means++ init, deterministic for fixed inputs."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"expected (n, d) points, got shape {points.shape}")
    n = points.shape[0]
    if n < cfg.m:
        raise TooFewPointsError(f"{n} points cannot fill {cfg.m} clusters")
    rng = SplitMix64(cfg.seed)
    centers = _kmeanspp_init(points, cfg.m, rng)
    labels, d2 = _assign(points, centers)
    inertia = float(d2.sum())
    history = [inertia]
    iterations = 0
    for _ in range(cfg.max_iters):
        centers = _update_centers(points, labels, centers, d2, cfg.m)
        labels, d2 = _assign(points, centers)
        new_inertia = float(d2.sum())
        history.append(new_inertia)
        iterations += 1
        if inertia <= 0.0 or (inertia - new_inertia) / inertia < cfg.tol:
            inertia = new_inertia
            break
        inertia = new_inertia
    return KMeansResult(words=centers, inertia=inertia, history=history, iterations=iterations)


@dataclass
class TrainMeta:
    dataset_label: str = ""
    image_count: int = 0
    seed: int = 0
    iterations: int = 0


@dataclass
class Codebook:
    """M visual words of dimension D plus the parameters that produced them."""

    words: np.ndarray  # (m, d) float64
    params: DescriptorParams = DEFAULT_PARAMS
    seed: int = 0
    train_meta: TrainMeta = field(default_factory=TrainMeta)

    def __post_init__(self):
        self.words = np.asarray(self.words, dtype=np.float64)
        if self.words.ndim != 2:
            raise ValueError(f"words must be (m, d), got shape {self.words.shape}")
        if not np.isfinite(self.words).all():
            raise ValueError("codebook words contain non-finite values")
        self._hash: int | None = None

    @property
    def m(self) -> int:
        return self.words.shape[0]

    @property
    def d(self) -> int:
        return self.words.shape[1]

    def serialize(self) -> str:
        p = self.params
        lines = [
            f"{CODEBOOK_MAGIC} {CODEBOOK_VERSION} M={self.m} D={self.d} SEED={self.seed}",
            f"PARAMS vb={p.achromatic_v_black!r} vw={p.achromatic_v_white!r}"
            f" s={p.achromatic_s!r} te={p.edge_threshold!r} hb={p.hue_bins}",
        ]
        for word in self.words:
            lines.append(" ".join(repr(float(x)) for x in word))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        data = self.serialize().encode()
        Path(path).write_bytes(data)
        self._hash = fnv1a64(data)

    def file_hash(self) -> int:
        """FNV-1a of the serialized bytes; tags every vector built from this book."""
        if self._hash is None:
            self._hash = fnv1a64(self.serialize().encode())
        return self._hash

    @classmethod
    def parse(cls, text: str) -> "Codebook":
        lines = text.splitlines()
        if not lines:
            raise FormatVersionError("empty codebook file")
        head = lines[0].split()
        if len(head) != 5 or head[0] != CODEBOOK_MAGIC or head[1] != CODEBOOK_VERSION:
            raise FormatVersionError(f"bad codebook header: {lines[0]!r}")
        if not (head[2].startswith("M=") and head[3].startswith("D=") and head[4].startswith("SEED=")):
            raise FileFormatError(f"bad codebook header: {lines[0]!r}")
        try:
            m = int(head[2][2:])
            d = int(head[3][2:])
            seed = int(head[4][5:])
        except ValueError as exc:
            raise FileFormatError(f"bad codebook header: {lines[0]!r}") from exc
        if len(lines) < 2:
            raise FileFormatError("codebook file missing PARAMS line")
        ptok = lines[1].split()
        if len(ptok) != 6 or ptok[0] != "PARAMS":
            raise FileFormatError(f"bad PARAMS line: {lines[1]!r}")
        try:
            kv = dict(t.split("=", 1) for t in ptok[1:])
            params = DescriptorParams(
                achromatic_v_black=float(kv["vb"]),
                achromatic_v_white=float(kv["vw"]),
                achromatic_s=float(kv["s"]),
                edge_threshold=float(kv["te"]),
                hue_bins=int(kv["hb"]),
            )
        except (KeyError, ValueError) as exc:
            raise FileFormatError(f"bad PARAMS line: {lines[1]!r}") from exc
        if params.dim != d:
            raise FileFormatError(f"header D={d} does not match params dimension {params.dim}")
        body = [ln for ln in lines[2:] if ln.strip()]
        if len(body) != m:
            raise FileFormatError(f"header M={m} but file has {len(body)} word lines")
        try:
            words = np.array([[float(x) for x in ln.split()] for ln in body], dtype=np.float64)
        except ValueError as exc:
            raise FileFormatError("malformed word line") from exc
        if words.shape != (m, d):
            raise FileFormatError(f"word lines have dimension {words.shape[1]}, header says D={d}")
        return cls(words=words, params=params, seed=seed)

    @classmethod
    def load(cls, path) -> "Codebook":
        data = Path(path).read_bytes()
        cb = cls.parse(data.decode())
        cb._hash = fnv1a64(data)
        return cb


def nearest_word(cb: Codebook, descriptor: np.ndarray) -> int:
    """Index of the closest word by squared l2; ties to the lowest index."""
    descriptor = np.asarray(descriptor, dtype=np.float64)
    if descriptor.shape != (cb.d,):
        raise ValueError(f"descriptor has shape {descriptor.shape}, codebook D={cb.d}")
    labels, _ = _assign(descriptor[np.newaxis], cb.words)
    return int(labels[0])


def assign_words(cb: Codebook, descriptors: np.ndarray) -> np.ndarray:
    """Nearest-word index for each row of an (n, D) descriptor stack."""
    descriptors = np.asarray(descriptors, dtype=np.float64)
    if descriptors.ndim != 2 or descriptors.shape[1] != cb.d:
        raise ValueError(f"descriptors have shape {descriptors.shape}, codebook D={cb.d}")
    labels, _ = _assign(descriptors, cb.words)
    return labels


def collect_training_descriptors(
    images: list[Raster], params: DescriptorParams = DEFAULT_PARAMS
) -> np.ndarray:
    """One mCEDD per 16x16 patch, concatenated over images in input order."""
    chunks = [patch_descriptors(crop_to_block_multiple(img), params) for img in images]
    if not chunks:
        raise EmptyTrainingSetError("no training images supplied")
    return np.concatenate(chunks, axis=0)


def build_codebook(
    images: list[Raster],
    m: int,
    seed: int,
    params: DescriptorParams = DEFAULT_PARAMS,
    label: str = "",
    max_iters: int = 100,
    tol: float = 1e-6,
) -> Codebook:
    """Train an M-word codebook from plain training images."""
    points = collect_training_descriptors(images, params)
    result = kmeans(points, KMeansConfig(m=m, seed=seed, max_iters=max_iters, tol=tol))
    meta = TrainMeta(dataset_label=label, image_count=len(images), seed=seed,
                     iterations=result.iterations)
    return Codebook(words=result.words, params=params, seed=seed, train_meta=meta)
