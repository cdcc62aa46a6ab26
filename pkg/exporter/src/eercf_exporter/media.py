"""Clip discovery and frame decoding.

A "clip" under the videos directory is either a video file (decoded with
OpenCV when available) or a subdirectory of image frames in lexicographic
order (decoded with Pillow).  Frame directories need no codec support, which
keeps the tool usable in minimal environments and makes tests byte-stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DecodeError, InvalidParams

VIDEO_EXTENSIONS = {".mp4", ".avi", ".mov", ".mkv", ".webm", ".mpg", ".mpeg", ".m4v"}
IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff", ".webp"}


@dataclass(frozen=True)
class ClipSource:
    """One discovered clip: stable id plus where and how to decode it."""

    id: str
    path: Path
    kind: str  # "frames-dir" or "video-file"


def discover_clips(videos_dir: str | Path) -> list[ClipSource]:
    """Enumerate clips under ``videos_dir`` in sorted order.

    Video files are identified by extension; subdirectories count as clips
    when they contain at least one image file.  Other entries are ignored.

    Raises:
        FileNotFoundError: if ``videos_dir`` does not exist or is not a directory.
        InvalidParams: if two entries claim the same clip id.
    """
    root = Path(videos_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"videos directory not found: {root}")
    clips: list[ClipSource] = []
    seen: dict[str, Path] = {}
    for entry in sorted(root.iterdir()):
        if entry.is_dir():
            if not any(p.suffix.lower() in IMAGE_EXTENSIONS for p in entry.iterdir()):
                continue
            clip = ClipSource(id=entry.name, path=entry, kind="frames-dir")
        elif entry.suffix.lower() in VIDEO_EXTENSIONS:
            clip = ClipSource(id=entry.stem, path=entry, kind="video-file")
        else:
            continue
        if clip.id in seen:
            raise InvalidParams(
                f"duplicate clip id {clip.id!r}: {seen[clip.id]} and {entry}"
            )
        seen[clip.id] = entry
        clips.append(clip)
    return clips


def uniform_indices(total: int, count: int) -> list[int]:
    """Center-aligned uniform sampling of ``count`` indices from ``range(total)``.

    Index ``i`` maps to ``floor((i + 0.5) * total / count)``: nondecreasing,
    always in bounds, the identity when ``count == total``, and evenly
    repeating when the source has fewer frames than requested.
    """
    if count < 1:
        raise InvalidParams(f"sample count must be positive, got {count}")
    if total < 1:
        raise InvalidParams(f"cannot sample from {total} frames")
    return [min(total - 1, math.floor((i + 0.5) * total / count)) for i in range(count)]


def _load_image(path: Path) -> Image.Image:
    try:
        with Image.open(path) as img:
            return img.convert("RGB")
    except Exception as exc:  # Pillow raises many per-format error types.
        raise DecodeError(f"{path.name}: {exc}") from exc


def _frames_from_dir(clip: ClipSource, count: int) -> list[Image.Image]:
    files = sorted(p for p in clip.path.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)
    if not files:
        raise DecodeError(f"{clip.id}: no image frames in {clip.path}")
    return [_load_image(files[i]) for i in uniform_indices(len(files), count)]


def _frames_from_video(clip: ClipSource, count: int) -> list[Image.Image]:
    try:
        import cv2
    except ImportError as exc:
        raise DecodeError(
            f"{clip.id}: decoding video files requires opencv (install the 'video' extra)"
        ) from exc
    capture = cv2.VideoCapture(str(clip.path))
    try:
        if not capture.isOpened():
            raise DecodeError(f"{clip.id}: cannot open {clip.path.name}")
        decoded: list[np.ndarray] = []
        while True:
            ok, frame = capture.read()
            if not ok:
                break
            decoded.append(frame[:, :, ::-1].copy())  # BGR -> RGB
    finally:
        capture.release()
    if not decoded:
        raise DecodeError(f"{clip.id}: no decodable frames in {clip.path.name}")
    return [Image.fromarray(decoded[i]) for i in uniform_indices(len(decoded), count)]


def load_clip_frames(clip: ClipSource, count: int) -> list[Image.Image]:
    """Decode ``count`` uniformly sampled RGB frames from a clip.

    Raises:
        DecodeError: if the clip cannot be decoded; callers treat this as a
            per-item skip, not a fatal error.
    """
    if clip.kind == "frames-dir":
        return _frames_from_dir(clip, count)
    if clip.kind == "video-file":
        return _frames_from_video(clip, count)
    raise InvalidParams(f"unknown clip kind {clip.kind!r}")


__all__ = [
    "ClipSource",
    "VIDEO_EXTENSIONS",
    "IMAGE_EXTENSIONS",
    "discover_clips",
    "uniform_indices",
    "load_clip_frames",
]
