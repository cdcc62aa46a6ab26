"""Standalone writer for the retrieval engine's binary dataset format.

This module deliberately re-implements the byte layout instead of importing
the engine package: the container bytes *are* the interface between the two
tools, and writing them directly keeps the exporter installable on machines
that never run the engine.

Layout (all little-endian):

* header: magic ``45 45 52 43 46 00`` ("EERCF\\0"), ``u16`` version = 1,
  ``u32`` dimension, ``u64`` record count;
* ``videos.bin`` record: ``u16`` id length, UTF-8 id, ``u16`` frame count T,
  ``u16`` patches per frame P, T x D float32 frame features, T x P x D
  float32 patch features;
* ``texts.bin`` record: ``u16`` id length, UTF-8 id, D float32 features;
* ``manifest.json``: object with ``dataset``, ``dim`` and ``pairs`` (a list
  of ``{"text_id", "video_id"}``), plus free-form extra keys.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import BinaryIO, Mapping, Sequence

import numpy as np

from .errors import InvalidParams

MAGIC = b"EERCF\x00"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<6sHIQ")
_U16 = struct.Struct("<H")
_SHAPE = struct.Struct("<HH")

VIDEOS_FILE = "videos.bin"
TEXTS_FILE = "texts.bin"
MANIFEST_FILE = "manifest.json"


def _checked_id(record_id: str, seen: set[str]) -> bytes:
    raw = record_id.encode("utf-8")
    if not raw:
        raise InvalidParams("record id must be non-empty")
    if len(raw) > 0xFFFF:
        raise InvalidParams(f"id too long ({len(raw)} bytes): {record_id[:32]!r}...")
    if record_id in seen:
        raise InvalidParams(f"duplicate record id {record_id!r}")
    seen.add(record_id)
    return raw


def _checked_f32(arr: np.ndarray, shape: tuple[int, ...], what: str) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype="<f4")
    if out.shape != shape:
        raise InvalidParams(f"{what}: expected shape {shape}, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise InvalidParams(f"{what}: contains non-finite values")
    return out


def _write_header(fh: BinaryIO, dim: int, count: int) -> None:
    if dim < 1 or dim > 0xFFFFFFFF:
        raise InvalidParams(f"dimension out of range: {dim}")
    fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dim, count))


def _atomic_write(path: Path, write_payload) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        write_payload(fh)
    os.replace(tmp, path)


def write_videos(
    path: str | Path,
    records: Sequence[tuple[str, np.ndarray, np.ndarray]],
    dim: int,
) -> Path:
    """Write ``(id, frames T x D, patches T x P x D)`` records to ``path``."""
    target = Path(path)

    def _payload(fh: BinaryIO) -> None:
        _write_header(fh, dim, len(records))
        seen: set[str] = set()
        for record_id, frames, patches in records:
            raw_id = _checked_id(record_id, seen)
            frames_arr = np.asarray(frames)
            patches_arr = np.asarray(patches)
            if frames_arr.ndim != 2 or patches_arr.ndim != 3:
                raise InvalidParams(
                    f"video {record_id!r}: need frames T x D and patches T x P x D, "
                    f"got {frames_arr.shape} and {patches_arr.shape}"
                )
            t, p = frames_arr.shape[0], patches_arr.shape[1]
            if t < 1 or p < 1:
                raise InvalidParams(f"video {record_id!r}: empty frame or patch axis")
            if t > 0xFFFF or p > 0xFFFF:
                raise InvalidParams(f"video {record_id!r}: frame/patch count exceeds u16")
            frames_arr = _checked_f32(frames_arr, (t, dim), f"video {record_id!r} frames")
            patches_arr = _checked_f32(patches_arr, (t, p, dim), f"video {record_id!r} patches")
            fh.write(_U16.pack(len(raw_id)))
            fh.write(raw_id)
            fh.write(_SHAPE.pack(t, p))
            fh.write(frames_arr.tobytes())
            fh.write(patches_arr.tobytes())

    _atomic_write(target, _payload)
    return target


def write_texts(
    path: str | Path,
    records: Sequence[tuple[str, np.ndarray]],
    dim: int,
) -> Path:
    """Write ``(id, feature D)`` records to ``path``."""
    target = Path(path)

    def _payload(fh: BinaryIO) -> None:
        _write_header(fh, dim, len(records))
        seen: set[str] = set()
        for record_id, feature in records:
            raw_id = _checked_id(record_id, seen)
            feature_arr = _checked_f32(np.asarray(feature), (dim,), f"text {record_id!r}")
            fh.write(_U16.pack(len(raw_id)))
            fh.write(raw_id)
            fh.write(feature_arr.tobytes())

    _atomic_write(target, _payload)
    return target


def write_manifest(
    path: str | Path,
    dataset: str,
    dim: int,
    pairs: Sequence[tuple[str, str]],
    extra: Mapping[str, object] | None = None,
) -> Path:
    """Write the manifest JSON; ``pairs`` are (text id, video id) tuples."""
    target = Path(path)
    payload: dict[str, object] = {
        "dataset": dataset,
        "dim": dim,
        "pairs": [{"text_id": text_id, "video_id": video_id} for text_id, video_id in pairs],
    }
    for key, value in (extra or {}).items():
        payload.setdefault(key, value)
    text = json.dumps(payload, indent=2, sort_keys=True)
    _atomic_write(target, lambda fh: fh.write(text.encode("utf-8")))
    return target


__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "VIDEOS_FILE",
    "TEXTS_FILE",
    "MANIFEST_FILE",
    "write_videos",
    "write_texts",
    "write_manifest",
]
