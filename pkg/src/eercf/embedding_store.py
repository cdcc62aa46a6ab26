"""Multi-granularity embedding data model and its binary container format.

A gallery video carries three granularities of features: per-frame vectors,
per-patch vectors, and a derived text-agnostic coarse vector (the normalized
mean of the frame rows) used by the recall stage.  Frame and patch features
are stored raw (unnormalized): attention pooling and mean pooling consume raw
features, while similarity scoring normalizes on use.

On disk a dataset is a directory with three files:

* ``videos.bin``  — frame and patch tensors, one variable-shape record per video.
* ``texts.bin``   — one feature vector per query/caption.
* ``manifest.json`` — dataset name, dimension, and ground-truth pairs.

Both ``.bin`` files are little-endian with a common header: magic
``45 45 52 43 46 00`` ("EERCF\\0"), version ``u16`` = 1, dimension ``u32``,
record count ``u64``.  Payload floats are 32-bit; loading reproduces every
stored float bit-exactly.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    BadMagic,
    EmptyInput,
    InvalidParams,
    ShapeMismatch,
    Truncated,
    UnknownId,
    VersionUnsupported,
    ZeroNorm,
)

MAGIC = b"EERCF\x00"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<6sHIQ")  # magic, version, dim, record count
_U16 = struct.Struct("<H")

#: Tolerance for "this vector must already be unit length" checks.
UNIT_NORM_ATOL = 1e-5

_VIDEOS_FILE = "videos.bin"
_TEXTS_FILE = "texts.bin"
_MANIFEST_FILE = "manifest.json"


def normalize(v: np.ndarray) -> np.ndarray:
    """Return ``v`` scaled to unit L2 norm (as float64).

    Args:
        v: One-dimensional finite vector.

    Raises:
        ZeroNorm: if ``||v|| < 1e-12``; a zero-length embedding cannot point
            anywhere and would silently corrupt rankings if passed through.
        InvalidParams: if ``v`` contains NaN/inf or is not one-dimensional.
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidParams(f"expected a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParams("vector contains non-finite values")
    norm = float(np.linalg.norm(arr))
    if norm < 1e-12:
        raise ZeroNorm(f"cannot normalize vector with norm {norm!r}")
    return arr / norm


def mean_pool(frames: np.ndarray) -> np.ndarray:
    """Arithmetic mean of the rows of ``frames`` (T x D), as float64.

    The result is *not* normalized; normalization is applied separately when
    the pooled vector is used for similarity.

    Raises:
        EmptyInput: if there are no rows.
        InvalidParams: on non-finite input or wrong rank.
    """
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidParams(f"expected a T x D matrix, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise EmptyInput("mean_pool needs at least one row")
    if not np.all(np.isfinite(arr)):
        raise InvalidParams("frame matrix contains non-finite values")
    return arr.mean(axis=0)


def _frozen_array(arr: np.ndarray, dtype: str = "<f4") -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class VideoRecord:
    """One gallery video: frame features, patch features, derived coarse vector.

    Attributes:
        id: UTF-8 identifier, unique within a gallery.
        frames: T x D float32 matrix of per-frame features.
        patches: T x P x D float32 tensor of per-patch features (P patches
            per frame).
        v_l1: derived unit-norm coarse vector, ``normalize(mean_pool(frames))``;
            computed at construction, never stored on disk.
    """

    id: str
    frames: np.ndarray
    patches: np.ndarray
    v_l1: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        frames = _frozen_array(self.frames)
        patches = _frozen_array(self.patches)
        if frames.ndim != 2:
            raise ShapeMismatch(f"video {self.id!r}: frames must be T x D, got {frames.shape}")
        if patches.ndim != 3:
            raise ShapeMismatch(f"video {self.id!r}: patches must be T x P x D, got {patches.shape}")
        t, dim = frames.shape
        if t == 0:
            raise EmptyInput(f"video {self.id!r} has no frames")
        if patches.shape[1] == 0:
            raise EmptyInput(f"video {self.id!r} has no patches per frame")
        if patches.shape[0] != t or patches.shape[2] != dim:
            raise ShapeMismatch(
                f"video {self.id!r}: patches {patches.shape} inconsistent with frames {frames.shape}"
            )
        if not (np.all(np.isfinite(frames)) and np.all(np.isfinite(patches))):
            raise InvalidParams(f"video {self.id!r} contains non-finite features")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "patches", patches)
        v_l1 = normalize(mean_pool(frames))
        v_l1.setflags(write=False)
        object.__setattr__(self, "v_l1", v_l1)

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def patches_per_frame(self) -> int:
        return int(self.patches.shape[1])

    @property
    def dim(self) -> int:
        return int(self.frames.shape[1])


@dataclass(frozen=True)
class TextRecord:
    """One query/caption: id plus a unit-norm sentence feature."""

    id: str
    feature: np.ndarray
    caption: str | None = None

    def __post_init__(self) -> None:
        feature = _frozen_array(self.feature)
        if feature.ndim != 1:
            raise ShapeMismatch(f"text {self.id!r}: feature must be a vector, got {feature.shape}")
        if not np.all(np.isfinite(feature)):
            raise InvalidParams(f"text {self.id!r} contains non-finite values")
        norm = float(np.linalg.norm(feature.astype(np.float64)))
        if abs(norm - 1.0) > UNIT_NORM_ATOL:
            raise InvalidParams(
                f"text {self.id!r}: feature norm {norm:.6f} is not unit length (tolerance {UNIT_NORM_ATOL})"
            )
        object.__setattr__(self, "feature", feature)

    @classmethod
    def from_vector(cls, id: str, vector: np.ndarray, caption: str | None = None) -> "TextRecord":
        """Build a record from an arbitrary non-zero vector, normalizing it."""
        return cls(id=id, feature=normalize(vector), caption=caption)

    @property
    def dim(self) -> int:
        return int(self.feature.shape[0])


class Gallery:
    """Immutable, ordered collection of :class:`VideoRecord` with id lookup.

    Safe for concurrent reads: construction freezes all arrays and the
    position index, and nothing mutates afterwards.
    """

    def __init__(self, videos: Sequence[VideoRecord]):
        videos = tuple(videos)
        dims = {v.dim for v in videos}
        if len(dims) > 1:
            raise ShapeMismatch(f"gallery mixes dimensions {sorted(dims)}")
        index: dict[str, int] = {}
        for pos, video in enumerate(videos):
            if video.id in index:
                raise InvalidParams(f"duplicate video id {video.id!r}")
            index[video.id] = pos
        self._videos = videos
        self._index = index
        self._dim = dims.pop() if dims else 0
        if videos:
            coarse = np.stack([v.v_l1 for v in videos]).astype(np.float64)
            coarse.setflags(write=False)
        else:
            coarse = np.zeros((0, self._dim), dtype=np.float64)
        self._coarse = coarse

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def videos(self) -> tuple[VideoRecord, ...]:
        return self._videos

    @property
    def coarse_matrix(self) -> np.ndarray:
        """N x D float64 matrix of the coarse vectors, in gallery order."""
        return self._coarse

    def __len__(self) -> int:
        return len(self._videos)

    def __iter__(self) -> Iterator[VideoRecord]:
        return iter(self._videos)

    def __contains__(self, video_id: str) -> bool:
        return video_id in self._index

    def position(self, video_id: str) -> int:
        try:
            return self._index[video_id]
        except KeyError:
            raise UnknownId(f"video id {video_id!r} not in gallery") from None

    def get(self, video_id: str) -> VideoRecord:
        return self._videos[self.position(video_id)]


@dataclass(frozen=True)
class Manifest:
    """Dataset metadata: name, dimension, and ground-truth pairs.

    ``pairs`` maps each text id to its relevant video id, in file order.
    ``extra`` holds auxiliary keys round-tripped through the JSON file
    (e.g. record counts, or the generator config under ``synth_config``).
    """

    dataset: str
    dim: int
    pairs: tuple[tuple[str, str], ...]
    extra: Mapping[str, object] = field(default_factory=dict)

    def ground_truth(self) -> dict[str, str]:
        """text id -> video id mapping (later duplicates win, as in JSON)."""
        return {text_id: video_id for text_id, video_id in self.pairs}

    def to_json(self) -> str:
        payload: dict[str, object] = {
            "dataset": self.dataset,
            "dim": self.dim,
            "pairs": [{"text_id": t, "video_id": v} for t, v in self.pairs],
        }
        for key, value in self.extra.items():
            payload.setdefault(key, value)
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Manifest":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidParams(f"manifest is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise InvalidParams("manifest must be a JSON object")
        missing = {"dataset", "dim", "pairs"} - payload.keys()
        if missing:
            raise InvalidParams(f"manifest missing keys: {sorted(missing)}")
        pairs = []
        for entry in payload["pairs"]:
            if not isinstance(entry, dict) or "text_id" not in entry or "video_id" not in entry:
                raise InvalidParams(f"malformed manifest pair: {entry!r}")
            pairs.append((str(entry["text_id"]), str(entry["video_id"])))
        extra = {k: v for k, v in payload.items() if k not in ("dataset", "dim", "pairs")}
        return cls(dataset=str(payload["dataset"]), dim=int(payload["dim"]),
                   pairs=tuple(pairs), extra=extra)


# ---------------------------------------------------------------------------
# Binary writer
# ---------------------------------------------------------------------------

def _write_header(fh: BinaryIO, dim: int, count: int) -> None:
    fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dim, count))


def _write_id(fh: BinaryIO, record_id: str) -> None:
    raw = record_id.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise InvalidParams(f"id too long ({len(raw)} bytes): {record_id[:32]!r}...")
    fh.write(_U16.pack(len(raw)))
    fh.write(raw)


def write_gallery(
    records: Iterable[VideoRecord],
    texts: Iterable[TextRecord],
    manifest: Manifest,
    path: str | Path,
) -> Path:
    """Write ``videos.bin``, ``texts.bin`` and ``manifest.json`` under ``path``.

    Every record must match ``manifest.dim``.  Files are written to temporary
    names and atomically renamed, so a crashed writer never leaves a
    half-written dataset behind.

    Returns:
        The dataset directory path.

    Raises:
        ShapeMismatch: if any record disagrees with the manifest dimension.
    """
    records = list(records)
    texts = list(texts)
    dim = manifest.dim
    for rec in records:
        if rec.dim != dim:
            raise ShapeMismatch(f"video {rec.id!r} has dim {rec.dim}, manifest says {dim}")
    for text in texts:
        if text.dim != dim:
            raise ShapeMismatch(f"text {text.id!r} has dim {text.dim}, manifest says {dim}")

    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)

    def _atomic(name: str, payload_writer) -> None:
        tmp = directory / (name + ".tmp")
        with open(tmp, "wb") as fh:
            payload_writer(fh)
        os.replace(tmp, directory / name)

    def _write_videos(fh: BinaryIO) -> None:
        _write_header(fh, dim, len(records))
        for rec in records:
            _write_id(fh, rec.id)
            fh.write(struct.pack("<HH", rec.num_frames, rec.patches_per_frame))
            fh.write(np.ascontiguousarray(rec.frames, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(rec.patches, dtype="<f4").tobytes())

    def _write_texts(fh: BinaryIO) -> None:
        _write_header(fh, dim, len(texts))
        for text in texts:
            _write_id(fh, text.id)
            fh.write(np.ascontiguousarray(text.feature, dtype="<f4").tobytes())

    _atomic(_VIDEOS_FILE, _write_videos)
    _atomic(_TEXTS_FILE, _write_texts)
    tmp = directory / (_MANIFEST_FILE + ".tmp")
    tmp.write_text(manifest.to_json(), encoding="utf-8")
    os.replace(tmp, directory / _MANIFEST_FILE)
    return directory


# ---------------------------------------------------------------------------
# Binary reader
# ---------------------------------------------------------------------------

def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise Truncated(f"unexpected end of file while reading {what}")
    return data


def _read_header(fh: BinaryIO, path: Path) -> tuple[int, int]:
    raw = fh.read(_HEADER.size)
    if len(raw) < len(MAGIC) or raw[: len(MAGIC)] != MAGIC:
        raise BadMagic(f"{path}: not a valid container (bad magic bytes)")
    if len(raw) != _HEADER.size:
        raise Truncated(f"{path}: header truncated")
    _, version, dim, count = _HEADER.unpack(raw)
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"{path}: container version {version}, expected {FORMAT_VERSION}")
    return dim, count


def _read_id(fh: BinaryIO) -> str:
    (id_len,) = _U16.unpack(_read_exact(fh, _U16.size, "id length"))
    return _read_exact(fh, id_len, "record id").decode("utf-8")


def _read_f32(fh: BinaryIO, count: int, what: str) -> np.ndarray:
    return np.frombuffer(_read_exact(fh, 4 * count, what), dtype="<f4")


def _resolve(path: str | Path, default_name: str) -> Path:
    p = Path(path)
    return p / default_name if p.is_dir() else p


def load_gallery(path: str | Path) -> Gallery:
    """Load ``videos.bin`` (direct path, or a dataset directory) into a Gallery.

    Coarse vectors are recomputed at load from the frame payload, so a loaded
    gallery can never carry stale pooled features.

    Raises:
        BadMagic, VersionUnsupported, Truncated: on malformed files.
        ShapeMismatch, EmptyInput, InvalidParams: if a record violates the
            data-model invariants.
    """
    file_path = _resolve(path, _VIDEOS_FILE)
    records: list[VideoRecord] = []
    with open(file_path, "rb") as fh:
        dim, count = _read_header(fh, file_path)
        for _ in range(count):
            record_id = _read_id(fh)
            t, patches_per_frame = struct.unpack("<HH", _read_exact(fh, 4, "record shape"))
            frames = _read_f32(fh, t * dim, f"frames of {record_id!r}").reshape(t, dim)
            patches = _read_f32(
                fh, t * patches_per_frame * dim, f"patches of {record_id!r}"
            ).reshape(t, patches_per_frame, dim)
            records.append(VideoRecord(id=record_id, frames=frames, patches=patches))
        if fh.read(1):
            raise Truncated(f"{file_path}: trailing bytes after {count} records")
    return Gallery(records)


def load_texts(path: str | Path) -> list[TextRecord]:
    """Load ``texts.bin`` (direct path, or a dataset directory)."""
    file_path = _resolve(path, _TEXTS_FILE)
    texts: list[TextRecord] = []
    with open(file_path, "rb") as fh:
        dim, count = _read_header(fh, file_path)
        for _ in range(count):
            record_id = _read_id(fh)
            feature = _read_f32(fh, dim, f"feature of {record_id!r}")
            texts.append(TextRecord(id=record_id, feature=feature))
        if fh.read(1):
            raise Truncated(f"{file_path}: trailing bytes after {count} records")
    return texts


def load_manifest(path: str | Path) -> Manifest:
    """Load ``manifest.json`` (direct path, or a dataset directory)."""
    file_path = _resolve(path, _MANIFEST_FILE)
    return Manifest.from_json(file_path.read_text(encoding="utf-8"))


def load_dataset(path: str | Path) -> tuple[Gallery, list[TextRecord], Manifest]:
    """Load and cross-validate all three dataset files from a directory.

    Raises:
        ShapeMismatch: if the three files disagree on dimension.
        UnknownId: if a manifest pair references a missing text or video.
    """
    gallery = load_gallery(path)
    texts = load_texts(path)
    manifest = load_manifest(path)
    if len(gallery) and gallery.dim != manifest.dim:
        raise ShapeMismatch(f"gallery dim {gallery.dim} != manifest dim {manifest.dim}")
    text_ids = {t.id for t in texts}
    for text_dim in {t.dim for t in texts}:
        if text_dim != manifest.dim:
            raise ShapeMismatch(f"text dim {text_dim} != manifest dim {manifest.dim}")
    for text_id, video_id in manifest.pairs:
        if text_id not in text_ids:
            raise UnknownId(f"manifest references unknown text id {text_id!r}")
        if video_id not in gallery:
            raise UnknownId(f"manifest references unknown video id {video_id!r}")
    return gallery, texts, manifest
