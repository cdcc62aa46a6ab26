"""The standalone container writer must produce bytes the engine accepts.

The two packages share no code, only the byte layout — so the strongest test
here writes the same records through both writers and compares files
byte for byte, then loads the exporter's output through the engine's readers.
"""

import struct

import numpy as np
import pytest

import eercf
from eercf_exporter.container import (
    FORMAT_VERSION,
    MAGIC,
    MANIFEST_FILE,
    TEXTS_FILE,
    VIDEOS_FILE,
    write_manifest,
    write_texts,
    write_videos,
)
from eercf_exporter.errors import InvalidParams

DIM = 8


def _rows(rng, *shape):
    rows = rng.standard_normal(shape)
    return (rows / np.linalg.norm(rows, axis=-1, keepdims=True)).astype("<f4")


def _sample_records(seed=0, n=3, frames=4, patches=2):
    rng = np.random.default_rng(seed)
    videos = [
        (f"v{i:03d}", _rows(rng, frames, DIM), _rows(rng, frames, patches, DIM))
        for i in range(n)
    ]
    texts = [(f"t{i:03d}", _rows(rng, DIM)) for i in range(n)]
    pairs = [(f"t{i:03d}", f"v{i:03d}") for i in range(n)]
    return videos, texts, pairs


def _write_all(directory, videos, texts, pairs, dataset="byte-check"):
    write_videos(directory / VIDEOS_FILE, videos, DIM)
    write_texts(directory / TEXTS_FILE, texts, DIM)
    write_manifest(directory / MANIFEST_FILE, dataset, DIM, pairs)


# ---------------------------------------------------------------------------
# engine round trip
# ---------------------------------------------------------------------------

def test_engine_loads_written_dataset_bit_exactly(tmp_path):
    videos, texts, pairs = _sample_records()
    _write_all(tmp_path, videos, texts, pairs)
    gallery, loaded_texts, manifest = eercf.load_dataset(tmp_path)
    assert [v.id for v in gallery] == [record_id for record_id, _, _ in videos]
    for record, (record_id, frames, patches) in zip(gallery.videos, videos):
        assert record.id == record_id
        assert np.array_equal(record.frames, frames)
        assert np.array_equal(record.patches, patches)
    for record, (record_id, feature) in zip(loaded_texts, texts):
        assert record.id == record_id
        assert np.array_equal(record.feature, feature)
    assert manifest.dataset == "byte-check"
    assert manifest.dim == DIM
    assert manifest.pairs == tuple(pairs)


def test_header_fields(tmp_path):
    videos, texts, pairs = _sample_records(n=5)
    _write_all(tmp_path, videos, texts, pairs)
    for name, count in ((VIDEOS_FILE, 5), (TEXTS_FILE, 5)):
        raw = (tmp_path / name).read_bytes()
        magic, version, dim, n = struct.unpack("<6sHIQ", raw[:20])
        assert magic == MAGIC
        assert version == FORMAT_VERSION
        assert dim == DIM
        assert n == count


def test_byte_identical_to_engine_writer(tmp_path):
    videos, texts, pairs = _sample_records(seed=7)
    ours = tmp_path / "ours"
    theirs = tmp_path / "theirs"
    ours.mkdir()
    _write_all(ours, videos, texts, pairs)

    video_records = [
        eercf.VideoRecord(id=record_id, frames=frames, patches=patches)
        for record_id, frames, patches in videos
    ]
    text_records = [eercf.TextRecord(id=record_id, feature=feature) for record_id, feature in texts]
    manifest = eercf.Manifest(dataset="byte-check", dim=DIM, pairs=tuple(pairs))
    eercf.write_gallery(video_records, text_records, manifest, theirs)

    for name in (VIDEOS_FILE, TEXTS_FILE, MANIFEST_FILE):
        assert (ours / name).read_bytes() == (theirs / name).read_bytes(), name


def test_manifest_extra_keys_round_trip(tmp_path):
    videos, texts, pairs = _sample_records(n=1)
    write_manifest(
        tmp_path / MANIFEST_FILE, "named", DIM, pairs,
        extra={"videos": 1, "exporter": {"backend": "codebook/7x7"}},
    )
    manifest = eercf.load_manifest(tmp_path / MANIFEST_FILE)
    assert manifest.extra["videos"] == 1
    assert manifest.extra["exporter"]["backend"] == "codebook/7x7"


# ---------------------------------------------------------------------------
# writer validation
# ---------------------------------------------------------------------------

def test_duplicate_video_id_rejected(tmp_path):
    videos, _, _ = _sample_records(n=1)
    doubled = [videos[0], videos[0]]
    with pytest.raises(InvalidParams, match="duplicate"):
        write_videos(tmp_path / VIDEOS_FILE, doubled, DIM)


def test_empty_id_rejected(tmp_path):
    rng = np.random.default_rng(0)
    with pytest.raises(InvalidParams, match="non-empty"):
        write_texts(tmp_path / TEXTS_FILE, [("", _rows(rng, DIM))], DIM)


def test_dim_mismatch_rejected(tmp_path):
    rng = np.random.default_rng(0)
    with pytest.raises(InvalidParams, match="shape"):
        write_texts(tmp_path / TEXTS_FILE, [("t0", _rows(rng, DIM + 1))], DIM)


def test_non_finite_rejected(tmp_path):
    bad = np.full(DIM, np.nan, dtype="<f4")
    with pytest.raises(InvalidParams, match="non-finite"):
        write_texts(tmp_path / TEXTS_FILE, [("t0", bad)], DIM)


def test_wrong_rank_rejected(tmp_path):
    rng = np.random.default_rng(0)
    flat = _rows(rng, 4, DIM)
    with pytest.raises(InvalidParams):
        write_videos(tmp_path / VIDEOS_FILE, [("v0", flat, flat)], DIM)


def test_failed_write_leaves_no_partial_file(tmp_path):
    rng = np.random.default_rng(0)
    good = ("t0", _rows(rng, DIM))
    bad = ("t1", np.full(DIM, np.inf, dtype="<f4"))
    with pytest.raises(InvalidParams):
        write_texts(tmp_path / TEXTS_FILE, [good, bad], DIM)
    assert not (tmp_path / TEXTS_FILE).exists()
