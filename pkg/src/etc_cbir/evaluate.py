"""AP/mAP scoring and the retrieval experiment driver.

AP follows the true-positive-at-rank formulation: the query image stays in
the database and inside its own ground-truth group (UKBench convention),
so a perfect query over a group of G scores exactly 1.
"""

from __future__ import annotations

import csv
import json
import re
from collections.abc import Collection, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .codebook import build_codebook
from .crypto import KeySet, encrypt
from .descriptor import DEFAULT_PARAMS, DescriptorParams
from .errors import EmptyTrainingSetError, EmptyTruthSetError, NoQueriesError
from .esimple import esimple
from .index import IndexEntry, RetrievalIndex
from .prng import SplitMix64
from .raster import crop_to_block_multiple, load_image

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")

# user-side query keys must be independent of the owner keys derived from the
# same experiment seed
_USER_KEY_SALT = 0x5DEECE66D1CE4E5B


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    group_id: str


@dataclass
class EvalManifest:
    """Corpus listing: (path, group) rows plus the query image ids.

    An image id is its manifest path. Queries default to the first listed
    member of each group.
    """

    entries: list[ManifestEntry]
    queries: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.queries:
            self.queries = default_queries(self.entries)
        ids = {e.path for e in self.entries}
        for q in self.queries:
            if q not in ids:
                raise ValueError(f"query id not in manifest entries: {q!r}")

    def groups(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for e in self.entries:
            out.setdefault(e.group_id, []).append(e.path)
        return out

    @classmethod
    def load(cls, path) -> "EvalManifest":
        entries = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or (len(row) == 2 and row[0].strip() == "path" and row[1].strip() == "group_id"):
                    continue
                if len(row) != 2:
                    raise ValueError(f"manifest rows must be path,group_id: {row!r}")
                entries.append(ManifestEntry(path=row[0].strip(), group_id=row[1].strip()))
        return cls(entries=entries)


def default_queries(entries: Sequence[ManifestEntry]) -> list[str]:
    """First listed member of each group, in order of group appearance."""
    seen: dict[str, str] = {}
    for e in entries:
        seen.setdefault(e.group_id, e.path)
    return list(seen.values())


def average_precision(ranking: Sequence[str], truth: Collection[str]) -> float:
    """AP of one query: (1/G) * sum over ranks n of (TP@n / n) for hits."""
    truth = set(truth)
    if not truth:
        raise EmptyTruthSetError("ground-truth set is empty")
    missing = truth.difference(ranking)
    if missing:
        raise ValueError(f"ground-truth ids missing from ranking: {sorted(missing)[:3]}")
    tp = 0
    total = 0.0
    for n, image_id in enumerate(ranking, start=1):
        if image_id in truth:
            tp += 1
            total += tp / n
    return total / len(truth)


def mean_average_precision(aps: Sequence[float]) -> float:
    if len(aps) == 0:
        raise NoQueriesError("no AP values to average")
    return sum(aps) / len(aps)


@dataclass
class ApReport:
    """Per-query APs, their mean, and the configuration that produced them."""

    map: float
    per_query: list[tuple[str, float]]
    m: int
    codebook_source: str
    seed: int
    encrypted: bool
    rankings: dict[str, list[str]] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "map": self.map,
            "per_query": [{"id": q, "ap": ap} for q, ap in self.per_query],
            "m": self.m,
            "codebook_source": self.codebook_source,
            "seed": self.seed,
            "encrypted": self.encrypted,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def list_images(directory) -> list[Path]:
    d = Path(directory)
    return sorted(p for p in d.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)


def owner_keys(manifest: EvalManifest, seed: int) -> dict[str, KeySet]:
    """One deterministic key set per manifest entry."""
    rng = SplitMix64(seed)
    return {e.path: KeySet(rng.next_u64(), rng.next_u64(), rng.next_u64()) for e in manifest.entries}


def run_experiment(
    manifest: EvalManifest,
    codebook_source,
    m: int,
    seed: int,
    encrypt_keys: Mapping[str, KeySet] | None = None,
    params: DescriptorParams = DEFAULT_PARAMS,
) -> ApReport:
    """Build codebook, index the corpus, score every query against all of it.

    When ``encrypt_keys`` is given, stored images are encrypted per image
    and each query is re-encrypted with an independent user key before its
    descriptor is computed; nothing downstream ever sees a plain image.
    """
    training = [load_image(p) for p in list_images(codebook_source)]
    if not training:
        raise EmptyTrainingSetError(f"no images in codebook source {codebook_source}")
    cb = build_codebook(training, m=m, seed=seed, params=params, label=str(codebook_source))

    index = RetrievalIndex.for_codebook(cb)
    groups = manifest.groups()
    truth_of = {e.path: set(groups[e.group_id]) for e in manifest.entries}
    for e in manifest.entries:
        img = crop_to_block_multiple(load_image(e.path))
        if encrypt_keys is not None:
            img = encrypt(img, encrypt_keys[e.path])
        index.add(IndexEntry(image_id=e.path, vector=esimple(img, cb), owner_info=e.group_id))

    user_rng = SplitMix64(seed ^ _USER_KEY_SALT)
    per_query: list[tuple[str, float]] = []
    rankings: dict[str, list[str]] = {}
    for q in manifest.queries:
        img = crop_to_block_multiple(load_image(q))
        if encrypt_keys is not None:
            user_key = KeySet(user_rng.next_u64(), user_rng.next_u64(), user_rng.next_u64())
            img = encrypt(img, user_key)
        results = index.query(esimple(img, cb), k=len(index))
        ranking = [r.image_id for r in results]
        rankings[q] = ranking
        per_query.append((q, average_precision(ranking, truth_of[q])))

    return ApReport(
        map=mean_average_precision([ap for _, ap in per_query]),
        per_query=per_query,
        m=m,
        codebook_source=str(codebook_source),
        seed=seed,
        encrypted=encrypt_keys is not None,
        rankings=rankings,
    )


def shuffled_ranking_map(manifest: EvalManifest, seed: int) -> float:
    """mAP of a random ranking over the same corpus; the know-nothing baseline."""
    ids = [e.path for e in manifest.entries]
    groups = manifest.groups()
    truth_of = {e.path: set(groups[e.group_id]) for e in manifest.entries}
    rng = SplitMix64(seed)
    aps = []
    for q in manifest.queries:
        ranking = list(ids)
        rng.shuffle(ranking)
        aps.append(average_precision(ranking, truth_of[q]))
    return mean_average_precision(aps)


def ukbench_manifest(directory, count: int = 1000, group_size: int = 4) -> EvalManifest:
    """Manifest for UKBench-style files (ukbenchNNNNN.*): consecutive groups of 4."""
    pics = [p for p in list_images(directory) if re.fullmatch(r"ukbench\d+", p.stem)]
    pics = sorted(pics, key=lambda p: int(p.stem.removeprefix("ukbench")))[:count]
    if not pics:
        raise FileNotFoundError(f"no ukbench images under {directory}")
    entries = [
        ManifestEntry(path=str(p), group_id=str(int(p.stem.removeprefix("ukbench")) // group_size))
        for p in pics
    ]
    return EvalManifest(entries=entries)
