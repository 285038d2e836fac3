"""Full-scan l2 retrieval index with owner metadata and text persistence.

The index is deliberately an exact scan: distances to every stored
E-SIMPLE, sorted by (distance, image_id). Any future optimization has to
reproduce this ordering bit for bit.

Thread discipline: mutations are serialized behind a lock; queries copy a
consistent snapshot of the entry list and compute outside the lock.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codebook import Codebook
from .errors import (
    CodebookMismatchError,
    DuplicateIdError,
    FileFormatError,
    FormatVersionError,
    TruncatedFileError,
)
from .esimple import ESimpleVector

INDEX_MAGIC = "ESIMPLE-INDEX"
INDEX_VERSION = "v1"

_FORBIDDEN = ("\t", "\n", "\r")


@dataclass(frozen=True)
class IndexEntry:
    image_id: str
    vector: ESimpleVector
    owner_info: str = ""
    stored_path: str = ""


@dataclass(frozen=True)
class RankedResult:
    image_id: str
    distance: float
    rank: int  # 1-based


def _check_text_field(name: str, value: str) -> None:
    if any(c in value for c in _FORBIDDEN):
        raise ValueError(f"{name} must not contain tabs or newlines: {value!r}")


class RetrievalIndex:
    """Stores E-SIMPLE vectors built against one specific codebook."""

    def __init__(self, m: int, codebook_id: int):
        self.m = m
        self.codebook_id = codebook_id
        self._entries: dict[str, IndexEntry] = {}
        self._lock = threading.Lock()

    @classmethod
    def for_codebook(cls, cb: Codebook) -> "RetrievalIndex":
        return cls(m=cb.m, codebook_id=cb.file_hash())

    def _check_vector(self, vec: ESimpleVector) -> None:
        if vec.codebook_id != self.codebook_id:
            raise CodebookMismatchError(
                f"vector codebook {vec.codebook_id} != index codebook {self.codebook_id}"
            )
        if len(vec.values) != self.m:
            raise CodebookMismatchError(f"vector length {len(vec.values)} != index M {self.m}")

    def add(self, entry: IndexEntry) -> None:
        self._check_vector(entry.vector)
        _check_text_field("image_id", entry.image_id)
        _check_text_field("owner_info", entry.owner_info)
        _check_text_field("stored_path", entry.stored_path)
        if not entry.image_id:
            raise ValueError("image_id must be non-empty")
        with self._lock:
            if entry.image_id in self._entries:
                raise DuplicateIdError(f"image_id already indexed: {entry.image_id}")
            self._entries[entry.image_id] = entry

    def get(self, image_id: str) -> IndexEntry:
        with self._lock:
            return self._entries[image_id]

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._entries

    def entries(self) -> list[IndexEntry]:
        """Snapshot of all entries in insertion order."""
        with self._lock:
            return list(self._entries.values())

    def query(self, q: ESimpleVector, k: int) -> list[RankedResult]:
        """The k nearest entries by l2 distance, ties broken by image_id."""
        self._check_vector(q)
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        snapshot = self.entries()
        if not snapshot:
            return []
        mat = np.stack([e.vector.values for e in snapshot])
        dists = np.linalg.norm(mat - q.values, axis=1)
        order = sorted(zip(dists.tolist(), (e.image_id for e in snapshot)))
        return [
            RankedResult(image_id=image_id, distance=dist, rank=i + 1)
            for i, (dist, image_id) in enumerate(order[:k])
        ]

    def save(self, path) -> None:
        """Write the index atomically (temp file + rename)."""
        with self._lock:
            entries = list(self._entries.values())
        lines = [f"{INDEX_MAGIC} {INDEX_VERSION} M={self.m} CB={self.codebook_id} N={len(entries)}"]
        for e in entries:
            vec = " ".join(repr(float(x)) for x in e.vector.values)
            lines.append(f"{e.image_id}\t{e.owner_info}\t{e.stored_path}\t{vec}")
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text("\n".join(lines) + "\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "RetrievalIndex":
        lines = Path(path).read_text().splitlines()
        if not lines:
            raise FormatVersionError(f"{path}: empty index file")
        head = lines[0].split()
        if len(head) != 5 or head[0] != INDEX_MAGIC or head[1] != INDEX_VERSION:
            raise FormatVersionError(f"{path}: bad index header: {lines[0]!r}")
        if not (head[2].startswith("M=") and head[3].startswith("CB=") and head[4].startswith("N=")):
            raise FileFormatError(f"{path}: bad index header: {lines[0]!r}")
        try:
            m = int(head[2][2:])
            cb_id = int(head[3][3:])
            n = int(head[4][2:])
        except ValueError as exc:
            raise FileFormatError(f"{path}: bad index header: {lines[0]!r}") from exc
        body = [ln for ln in lines[1:] if ln]
        if len(body) < n:
            raise TruncatedFileError(f"{path}: header announces {n} entries, found {len(body)}")
        if len(body) > n:
            raise FileFormatError(f"{path}: header announces {n} entries, found {len(body)}")
        index = cls(m=m, codebook_id=cb_id)
        for ln in body:
            fields = ln.split("\t")
            if len(fields) != 4:
                raise TruncatedFileError(f"{path}: malformed entry line: {ln!r}")
            image_id, owner_info, stored_path, vec_text = fields
            try:
                values = np.array([float(x) for x in vec_text.split()], dtype=np.float64)
            except ValueError as exc:
                raise TruncatedFileError(f"{path}: malformed vector for {image_id!r}") from exc
            if values.shape != (m,):
                raise TruncatedFileError(
                    f"{path}: vector for {image_id!r} has {values.shape[0]} values, M={m}"
                )
            index.add(
                IndexEntry(
                    image_id=image_id,
                    vector=ESimpleVector(values=values, codebook_id=cb_id),
                    owner_info=owner_info,
                    stored_path=stored_path,
                )
            )
        return index
