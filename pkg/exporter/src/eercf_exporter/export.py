"""The export pipeline: clips + captions -> binary dataset directory.

Per-item failures (undecodable clips, missing or empty captions) are recorded
and skipped so one bad file never poisons a long batch; an export in which
*nothing* survives is an error.  Every frame row, patch row, and text vector
is L2-normalized before writing: downstream attention pooling is temperature
scaled, and unit rows keep its logits in the intended range regardless of the
backend's native feature magnitudes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import container
from .backends import FeatureBackend, make_backend
from .config import ExportConfig
from .errors import CaptionsError, DecodeError, EmptyExport, InvalidParams
from .media import discover_clips, load_clip_frames


@dataclass(frozen=True)
class SkippedItem:
    """One item left out of the export, and why."""

    id: str
    reason: str


@dataclass(frozen=True)
class ExportReport:
    """What an export run produced."""

    out_dir: Path
    dataset: str
    backend: str
    exported: tuple[str, ...]
    skipped: tuple[SkippedItem, ...]
    dim: int
    frames: int
    patches_per_frame: int

    def summary_lines(self) -> list[str]:
        lines = [f"skipped  {item.id}: {item.reason}" for item in self.skipped]
        for label, value in (
            ("dataset", self.dataset),
            ("backend", self.backend),
            ("frames", self.frames),
            ("patches", self.patches_per_frame),
            ("dim", self.dim),
            ("videos", len(self.exported)),
            ("texts", len(self.exported)),
            ("skipped", len(self.skipped)),
            ("out", self.out_dir),
        ):
            lines.append(f"{label:<8} {value}")
        return lines


def load_captions(path: str | Path) -> dict[str, str]:
    """Read the captions file: one JSON object mapping clip id -> caption.

    Raises:
        CaptionsError: if the file is not valid JSON, not an object, or any
            value is not a string.
        FileNotFoundError: if the file does not exist.
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise FileNotFoundError(f"captions file not found: {file_path}")
    try:
        payload = json.loads(file_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CaptionsError(f"{file_path}: not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise CaptionsError(f"{file_path}: expected a JSON object of id -> caption")
    captions: dict[str, str] = {}
    for clip_id, caption in payload.items():
        if not isinstance(caption, str):
            raise CaptionsError(
                f"{file_path}: caption for {clip_id!r} must be a string, got {type(caption).__name__}"
            )
        captions[str(clip_id)] = caption
    return captions


def _unit_rows(rows: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=-1, keepdims=True)
    if np.any(norms < 1e-12):
        raise InvalidParams(f"{what}: backend produced a zero-norm feature row")
    return rows / norms


def _checked_shapes(
    clip_id: str,
    frame_feats: np.ndarray,
    patch_feats: np.ndarray,
    config: ExportConfig,
) -> None:
    expected_frames = (config.frames, config.dim)
    expected_patches = (config.frames, config.patches_per_frame, config.dim)
    if frame_feats.shape != expected_frames or patch_feats.shape != expected_patches:
        raise InvalidParams(
            f"clip {clip_id!r}: backend returned shapes {frame_feats.shape} / "
            f"{patch_feats.shape}, config requires {expected_frames} / {expected_patches}"
        )


def run_export(
    videos_dir: str | Path,
    captions_path: str | Path,
    out_dir: str | Path,
    config: ExportConfig = ExportConfig(),
    backend: FeatureBackend | None = None,
) -> ExportReport:
    """Export every captioned, decodable clip under ``videos_dir``.

    Clips are processed in sorted id order; each contributes one video
    record, one text record, and one ground-truth pair (the clip's own
    caption).  Re-running with identical inputs and a deterministic backend
    reproduces the output files byte for byte.

    Raises:
        EmptyExport: if no clip survives decoding and captioning.
        CaptionsError: if the captions file itself is malformed.
        BackendUnavailable: if the configured backend cannot be built.
    """
    active_backend = backend if backend is not None else make_backend(config)
    captions = load_captions(captions_path)
    clips = discover_clips(videos_dir)

    video_records: list[tuple[str, np.ndarray, np.ndarray]] = []
    text_records: list[tuple[str, np.ndarray]] = []
    pairs: list[tuple[str, str]] = []
    skipped: list[SkippedItem] = []
    clip_ids: set[str] = set()

    for clip in clips:
        clip_ids.add(clip.id)
        caption = captions.get(clip.id)
        if caption is None:
            skipped.append(SkippedItem(clip.id, "no caption for this clip"))
            continue
        try:
            frames = load_clip_frames(clip, config.frames)
            frame_feats, patch_feats = active_backend.encode_video(frames)
            text_feat = active_backend.encode_text(caption)
        except DecodeError as exc:
            skipped.append(SkippedItem(clip.id, str(exc)))
            continue
        _checked_shapes(clip.id, frame_feats, patch_feats, config)
        frame_feats = _unit_rows(np.asarray(frame_feats, dtype=np.float64), f"clip {clip.id!r} frames")
        patch_feats = _unit_rows(np.asarray(patch_feats, dtype=np.float64), f"clip {clip.id!r} patches")
        text_feat = _unit_rows(np.asarray(text_feat, dtype=np.float64), f"caption {clip.id!r}")
        video_records.append((clip.id, frame_feats.astype("<f4"), patch_feats.astype("<f4")))
        text_records.append((clip.id, text_feat.astype("<f4")))
        pairs.append((clip.id, clip.id))

    for orphan in sorted(set(captions) - clip_ids):
        skipped.append(SkippedItem(orphan, "no clip for this caption"))

    if not video_records:
        raise EmptyExport(
            f"nothing exported from {videos_dir}: {len(skipped)} item(s) skipped"
        )

    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    container.write_videos(out_path / container.VIDEOS_FILE, video_records, config.dim)
    container.write_texts(out_path / container.TEXTS_FILE, text_records, config.dim)
    container.write_manifest(
        out_path / container.MANIFEST_FILE,
        dataset=config.dataset,
        dim=config.dim,
        pairs=pairs,
        extra={
            "videos": len(video_records),
            "texts": len(text_records),
            "exporter": {
                "backend": active_backend.name,
                "frames": config.frames,
                "model": config.model,
            },
        },
    )
    return ExportReport(
        out_dir=out_path,
        dataset=config.dataset,
        backend=active_backend.name,
        exported=tuple(record_id for record_id, _, _ in video_records),
        skipped=tuple(skipped),
        dim=config.dim,
        frames=config.frames,
        patches_per_frame=config.patches_per_frame,
    )


__all__ = ["SkippedItem", "ExportReport", "load_captions", "run_export"]
