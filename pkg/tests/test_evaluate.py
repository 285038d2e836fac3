import json
import math

import numpy as np
import pytest

from etc_cbir.errors import EmptyTruthSetError, NoQueriesError
from etc_cbir.evaluate import (
    EvalManifest,
    ManifestEntry,
    average_precision,
    default_queries,
    mean_average_precision,
    owner_keys,
    run_experiment,
    shuffled_ranking_map,
    ukbench_manifest,
)
from etc_cbir.prng import SplitMix64
from etc_cbir.raster import save_image
from tests import synth


def test_ap_perfect_ranking():
    ranking = ["a", "b", "c", "d", "e"]
    assert average_precision(ranking, {"a", "b", "c"}) == 1.0


def test_ap_hand_derived_case():
    # G=4 at ranks 1, 2, 5, 7 of N=10: (1/4)(1 + 1 + 3/5 + 4/7)
    ranking = ["t1", "t2", "x3", "x4", "t5", "x6", "t7", "x8", "x9", "x10"]
    truth = {"t1", "t2", "t5", "t7"}
    expected = (1 / 4) * (1 / 1 + 2 / 2 + 3 / 5 + 4 / 7)
    assert average_precision(ranking, truth) == pytest.approx(expected, abs=1e-12)
    assert average_precision(ranking, truth) == pytest.approx(0.7928571428571429, abs=1e-12)


def test_ap_single_truth_at_last_rank():
    ranking = [f"r{i}" for i in range(10)]
    assert average_precision(ranking, {"r9"}) == pytest.approx(1 / 10, abs=1e-15)


def test_ap_empty_truth():
    with pytest.raises(EmptyTruthSetError):
        average_precision(["a"], set())


def test_ap_truth_missing_from_ranking():
    with pytest.raises(ValueError):
        average_precision(["a", "b"], {"a", "zz"})


def test_ap_matches_precision_at_hit_ranks(rng):
    """Algebraic identity: AP equals the mean of precision@rank over the
    ranks where ground truth appears."""
    for _ in range(20):
        n = int(rng.integers(5, 40))
        ranking = [f"i{j}" for j in range(n)]
        g = int(rng.integers(1, n + 1))
        truth = set(rng.choice(ranking, size=g, replace=False).tolist())
        hits = [k for k, image_id in enumerate(ranking, start=1) if image_id in truth]
        expected = math.fsum(
            sum(1 for h in hits if h <= k) / k for k in hits
        ) / len(truth)
        assert average_precision(ranking, truth) == pytest.approx(expected, abs=1e-12)


def test_map_trivial_means():
    assert mean_average_precision([1.0, 1.0]) == 1.0
    assert mean_average_precision([1.0, 0.0]) == 0.5


def test_map_matches_independent_sum(rng):
    aps = rng.random(250).tolist()
    assert mean_average_precision(aps) == pytest.approx(math.fsum(aps) / 250, abs=1e-12)


def test_map_empty_raises():
    with pytest.raises(NoQueriesError):
        mean_average_precision([])


def test_manifest_default_queries():
    entries = [
        ManifestEntry("a1", "g1"),
        ManifestEntry("a2", "g1"),
        ManifestEntry("b1", "g2"),
        ManifestEntry("b2", "g2"),
    ]
    assert default_queries(entries) == ["a1", "b1"]
    m = EvalManifest(entries=entries)
    assert m.queries == ["a1", "b1"]
    assert m.groups() == {"g1": ["a1", "a2"], "g2": ["b1", "b2"]}


def test_manifest_rejects_unknown_query():
    with pytest.raises(ValueError):
        EvalManifest(entries=[ManifestEntry("a", "g")], queries=["nope"])


def test_manifest_csv_load(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("path,group_id\nimg/a.png,g0\nimg/b.png,g0\nimg/c.png,g1\n")
    m = EvalManifest.load(path)
    assert [e.path for e in m.entries] == ["img/a.png", "img/b.png", "img/c.png"]
    assert m.queries == ["img/a.png", "img/c.png"]
    # headerless files parse the same
    path.write_text("img/a.png,g0\nimg/b.png,g0\n")
    assert len(EvalManifest.load(path).entries) == 2


def test_owner_keys_deterministic_and_distinct():
    entries = [ManifestEntry(f"p{i}", "g") for i in range(10)]
    m = EvalManifest(entries=entries)
    keys = owner_keys(m, seed=7)
    again = owner_keys(m, seed=7)
    assert keys == again
    assert len({(k.k1, k.k2, k.k3) for k in keys.values()}) == 10


def _write_corpus(tmp_path, pairs, subdir="corpus"):
    d = tmp_path / subdir
    d.mkdir()
    entries = []
    for i, (img, gid) in enumerate(pairs):
        p = d / f"img{i:03d}.png"
        save_image(img, p)
        entries.append(ManifestEntry(path=str(p), group_id=str(gid)))
    return EvalManifest(entries=entries)


def _write_training(tmp_path, images, subdir="train"):
    d = tmp_path / subdir
    d.mkdir()
    for i, img in enumerate(images):
        save_image(img, d / f"train{i:03d}.png")
    return d


def test_run_experiment_separable_groups(tmp_path):
    """Two obviously distinct color families retrieve perfectly."""
    rng = np.random.default_rng(5)
    reds = [synth.mosaic(rng, [0, 1], 2, 2) for _ in range(2)]
    blues = [synth.mosaic(rng, [13, 14], 2, 2) for _ in range(2)]
    manifest = _write_corpus(tmp_path, [(r, "red") for r in reds] + [(b, "blue") for b in blues])
    train = _write_training(tmp_path, synth.training_images(99, count=16, size=32))
    report = run_experiment(manifest, train, m=8, seed=0)
    assert report.map == 1.0
    assert report.m == 8
    assert report.encrypted is False


def test_run_experiment_single_image_group(tmp_path):
    rng = np.random.default_rng(6)
    manifest = _write_corpus(tmp_path, [(synth.mosaic(rng, [3], 2, 2), "only")])
    train = _write_training(tmp_path, synth.training_images(98, count=6, size=32))
    report = run_experiment(manifest, train, m=3, seed=0)
    assert report.map == 1.0


def test_run_experiment_encrypted_equals_plain(tmp_path):
    rng = np.random.default_rng(7)
    pairs = []
    for gid, sectors in enumerate([(0, 1, 2), (7, 8, 9), (14, 15, 16)]):
        for _ in range(3):
            pairs.append((synth.mosaic(rng, sectors, 3, 3), gid))
    manifest = _write_corpus(tmp_path, pairs)
    train = _write_training(tmp_path, synth.training_images(97, count=10, size=48))

    plain = run_experiment(manifest, train, m=8, seed=1)
    keys = owner_keys(manifest, seed=1)
    enc = run_experiment(manifest, train, m=8, seed=1, encrypt_keys=keys)

    assert enc.encrypted is True
    assert enc.map == pytest.approx(plain.map, abs=1e-9)
    # the whole ranking lists must agree, not just the headline number
    assert enc.rankings == plain.rankings


def test_report_json_shape(tmp_path):
    rng = np.random.default_rng(8)
    manifest = _write_corpus(tmp_path, [(synth.mosaic(rng, [2], 2, 2), "g")])
    train = _write_training(tmp_path, synth.training_images(96, count=5, size=32))
    report = run_experiment(manifest, train, m=2, seed=4)
    data = json.loads(report.to_json())
    assert set(data) == {"map", "per_query", "m", "codebook_source", "seed", "encrypted"}
    assert data["per_query"][0]["ap"] == 1.0
    assert data["seed"] == 4


def test_shuffled_baseline_is_weak():
    entries = [ManifestEntry(f"img{i}", str(i // 4)) for i in range(40)]
    manifest = EvalManifest(entries=entries)
    value = shuffled_ranking_map(manifest, seed=0)
    assert 0.0 < value < 0.3


def test_shuffled_baseline_deterministic():
    entries = [ManifestEntry(f"p{i}", str(i % 5)) for i in range(25)]
    manifest = EvalManifest(entries=entries)
    assert shuffled_ranking_map(manifest, 3) == shuffled_ranking_map(manifest, 3)


def test_ukbench_manifest_grouping(tmp_path):
    rng = np.random.default_rng(9)
    d = tmp_path / "ukb"
    d.mkdir()
    for i in range(8):
        save_image(synth.mosaic(rng, [i % 21], 1, 1), d / f"ukbench{i:05d}.png")
    (d / "notes.txt").write_text("ignored")
    m = ukbench_manifest(d, count=8)
    assert len(m.entries) == 8
    assert [e.group_id for e in m.entries] == ["0", "0", "0", "0", "1", "1", "1", "1"]
    assert len(m.queries) == 2


def test_ukbench_manifest_empty_dir(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(FileNotFoundError):
        ukbench_manifest(empty, count=4)
