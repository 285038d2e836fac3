import numpy as np
import pytest

from etc_cbir.errors import (
    CodebookMismatchError,
    DuplicateIdError,
    FileFormatError,
    FormatVersionError,
    TruncatedFileError,
)
from etc_cbir.esimple import ESimpleVector, l2_normalize
from etc_cbir.index import IndexEntry, RetrievalIndex

CB_ID = 12345


def vec(values, cb_id=CB_ID):
    return ESimpleVector(values=np.asarray(values, dtype=np.float64), codebook_id=cb_id)


def entry(image_id, values, **kw):
    return IndexEntry(image_id=image_id, vector=vec(values), **kw)


@pytest.fixture
def two_axis_index():
    ix = RetrievalIndex(m=2, codebook_id=CB_ID)
    ix.add(entry("e1", [1.0, 0.0]))
    ix.add(entry("e2", [0.0, 1.0]))
    return ix


def test_add_then_get(two_axis_index):
    e = two_axis_index.get("e1")
    assert e.image_id == "e1"
    assert np.array_equal(e.vector.values, [1.0, 0.0])
    assert len(two_axis_index) == 2
    assert "e2" in two_axis_index


def test_duplicate_id_rejected(two_axis_index):
    with pytest.raises(DuplicateIdError):
        two_axis_index.add(entry("e1", [0.5, 0.5]))


def test_codebook_mismatch_rejected(two_axis_index):
    with pytest.raises(CodebookMismatchError):
        two_axis_index.add(IndexEntry(image_id="x", vector=vec([1.0, 0.0], cb_id=999)))
    with pytest.raises(CodebookMismatchError):
        two_axis_index.add(entry("y", [1.0, 0.0, 0.0]))


def test_query_exact_hit(two_axis_index):
    results = two_axis_index.query(vec([1.0, 0.0]), k=1)
    assert len(results) == 1
    assert results[0].image_id == "e1"
    assert results[0].distance == 0.0
    assert results[0].rank == 1


def test_query_tie_breaks_by_id():
    ix = RetrievalIndex(m=2, codebook_id=CB_ID)
    ix.add(entry("zeta", [1.0, 0.0]))
    ix.add(entry("alpha", [0.0, 1.0]))
    results = ix.query(vec([0.5, 0.5]), k=2)
    assert [r.image_id for r in results] == ["alpha", "zeta"]
    assert results[0].distance == results[1].distance
    assert [r.rank for r in results] == [1, 2]


def test_query_k_exceeds_size(two_axis_index):
    results = two_axis_index.query(vec([0.9, 0.1]), k=10)
    assert [r.image_id for r in results] == ["e1", "e2"]


def test_query_rejects_mismatched_vector(two_axis_index):
    with pytest.raises(CodebookMismatchError):
        two_axis_index.query(vec([1.0, 0.0], cb_id=4), k=1)


def test_query_rejects_bad_k(two_axis_index):
    with pytest.raises(ValueError):
        two_axis_index.query(vec([1.0, 0.0]), k=0)


def test_text_fields_reject_separators():
    ix = RetrievalIndex(m=2, codebook_id=CB_ID)
    with pytest.raises(ValueError):
        ix.add(entry("has\ttab", [1.0, 0.0]))
    with pytest.raises(ValueError):
        ix.add(entry("ok", [1.0, 0.0], owner_info="line\nbreak"))


def _random_index(rng, n=100, m=16):
    ix = RetrievalIndex(m=m, codebook_id=CB_ID)
    for i in range(n):
        v = l2_normalize(rng.random(m))
        ix.add(entry(f"img{i:04d}", v, owner_info=f"owner{i % 7}",
                     stored_path=f"store/img{i:04d}.png"))
    return ix


def test_save_load_round_trip(tmp_path, rng):
    ix = _random_index(rng)
    path = tmp_path / "index.txt"
    ix.save(path)
    back = RetrievalIndex.load(path)
    assert len(back) == len(ix)
    assert back.codebook_id == ix.codebook_id
    for e in ix.entries():
        b = back.get(e.image_id)
        assert np.array_equal(b.vector.values, e.vector.values)
        assert (b.owner_info, b.stored_path) == (e.owner_info, e.stored_path)


def test_load_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("WRONG-MAGIC v1 M=2 CB=1 N=0\n")
    with pytest.raises(FormatVersionError):
        RetrievalIndex.load(path)


def test_load_rejects_wrong_version(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("ESIMPLE-INDEX v9 M=2 CB=1 N=0\n")
    with pytest.raises(FormatVersionError):
        RetrievalIndex.load(path)


def test_load_truncated_file(tmp_path, rng):
    ix = _random_index(rng, n=10)
    path = tmp_path / "index.txt"
    ix.save(path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-3]) + "\n")
    with pytest.raises(TruncatedFileError):
        RetrievalIndex.load(path)


def test_load_truncated_entry_line(tmp_path, rng):
    ix = _random_index(rng, n=3)
    path = tmp_path / "index.txt"
    ix.save(path)
    lines = path.read_text().splitlines()
    lines[-1] = lines[-1].rsplit("\t", 1)[0]  # drop the vector column
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TruncatedFileError):
        RetrievalIndex.load(path)


def test_load_rejects_extra_entries(tmp_path, rng):
    ix = _random_index(rng, n=3)
    path = tmp_path / "index.txt"
    ix.save(path)
    lines = path.read_text().splitlines()
    lines.append(lines[-1].replace("img0002", "img9999"))
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(FileFormatError):
        RetrievalIndex.load(path)


def test_query_matches_brute_force(rng):
    """The index must agree with an independent full-scan sort: the id order
    exactly, the distances to float-summation noise (the oracle accumulates
    in a different order, so the last ulp may differ)."""
    ix = _random_index(rng, n=400, m=12)
    entries = ix.entries()
    for trial in range(5):
        q = vec(l2_normalize(rng.random(12)))
        k = int(rng.integers(1, 30))
        expected = sorted(
            (
                (float(np.linalg.norm(e.vector.values - q.values)), e.image_id)
                for e in entries
            ),
        )[:k]
        got = ix.query(q, k=k)
        assert [r.image_id for r in got] == [image_id for _, image_id in expected]
        assert [r.rank for r in got] == list(range(1, len(got) + 1))
        for r, (dist, _) in zip(got, expected):
            assert abs(r.distance - dist) < 1e-12
        dists = [r.distance for r in got]
        assert dists == sorted(dists)


def test_query_deterministic(rng):
    ix = _random_index(rng, n=50)
    q = vec(l2_normalize(rng.random(16)))
    first = ix.query(q, k=10)
    second = ix.query(q, k=10)
    assert [(r.image_id, r.distance, r.rank) for r in first] == [
        (r.image_id, r.distance, r.rank) for r in second
    ]


def test_self_retrieval(rng):
    ix = _random_index(rng, n=30)
    target = ix.get("img0017")
    results = ix.query(target.vector, k=1)
    assert results[0].image_id == "img0017"
    assert results[0].distance < 1e-9


def test_for_codebook_binds_m_and_id(rng):
    from etc_cbir.codebook import build_codebook
    from tests.conftest import random_image

    cb = build_codebook([random_image(rng, 32, 32) for _ in range(3)], m=4, seed=0)
    ix = RetrievalIndex.for_codebook(cb)
    assert ix.m == 4
    assert ix.codebook_id == cb.file_hash()
