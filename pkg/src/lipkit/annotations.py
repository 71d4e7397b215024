"""Per-frame face/lip annotation schema: types, parsing, detection statistics.

One annotation document (JSON) describes one recording as a list of speaker
segments.  Each segment carries a total frame count and a sparse list of
per-frame detections; frames absent from the list count as undetected for
both face and lip.

Schema:
    {"segments": [{"segment_id": str, "speaker_id": str, "total_frames": int,
                   "fps": number, "transcript": str|null,
                   "frames": [{"i": int, "face": [lx,ty,rx,by]|null,
                               "lip": [lx,ty,rx,by]|null}, ...]}]}
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Any, Optional


class ParseError(ValueError):
    """Raised when the document is not valid JSON; message names the line."""


class ValidationError(ValueError):
    """Raised when a well-formed document violates the schema; message names the field."""


class AnnotationWarning(UserWarning):
    """Emitted for recoverable irregularities (e.g. out-of-order frame lists)."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in integer pixel coordinates, corners (left_x, top_y) / (right_x, bottom_y)."""

    left_x: int
    top_y: int
    right_x: int
    bottom_y: int

    def __post_init__(self) -> None:
        for name in ("left_x", "top_y", "right_x", "bottom_y"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValidationError(f"BBox.{name} must be an integer, got {value!r}")
            if value < 0:
                raise ValidationError(f"BBox.{name} must be >= 0, got {value}")
        if self.right_x <= self.left_x:
            raise ValidationError(
                f"BBox requires right_x > left_x, got {self.left_x}..{self.right_x}"
            )
        if self.bottom_y <= self.top_y:
            raise ValidationError(
                f"BBox requires bottom_y > top_y, got {self.top_y}..{self.bottom_y}"
            )

    @property
    def width(self) -> int:
        return self.right_x - self.left_x

    @property
    def height(self) -> int:
        return self.bottom_y - self.top_y

    @property
    def center(self) -> tuple[float, float]:
        """Midpoint (cx, cy); half-integral when width/height is odd."""
        return (self.left_x + self.right_x) / 2, (self.top_y + self.bottom_y) / 2


@dataclass(frozen=True)
class FrameAnnotation:
    """Detections for a single frame.  Either box may be missing independently."""

    frame_index: int
    face: Optional[BBox] = None
    lip: Optional[BBox] = None


@dataclass(frozen=True)
class SpeakerSegment:
    """A contiguous annotated utterance clip for one speaker.

    `frames` is sparse: it holds only annotated frames, sorted strictly
    ascending by frame_index with no duplicates, all < total_frames.
    """

    segment_id: str
    speaker_id: str
    total_frames: int
    fps: float = 25.0
    frames: tuple[FrameAnnotation, ...] = field(default_factory=tuple)
    transcript: Optional[str] = None

    def __post_init__(self) -> None:
        if self.total_frames < 1:
            raise ValidationError(
                f"segment {self.segment_id!r}: total_frames must be >= 1, got {self.total_frames}"
            )
        if self.fps <= 0:
            raise ValidationError(
                f"segment {self.segment_id!r}: fps must be > 0, got {self.fps}"
            )
        seen: set[int] = set()
        prev = -1
        for fr in self.frames:
            if fr.frame_index in seen:
                raise ValidationError(
                    f"segment {self.segment_id!r}: duplicate frame_index {fr.frame_index}"
                )
            if fr.frame_index < 0 or fr.frame_index >= self.total_frames:
                raise ValidationError(
                    f"segment {self.segment_id!r}: frame_index {fr.frame_index} outside "
                    f"[0, {self.total_frames})"
                )
            if fr.frame_index < prev:
                raise ValidationError(
                    f"segment {self.segment_id!r}: frames not sorted at index {fr.frame_index}"
                )
            seen.add(fr.frame_index)
            prev = fr.frame_index


def _parse_box(raw: Any, where: str) -> Optional[BBox]:
    if raw is None:
        return None
    if not isinstance(raw, list) or len(raw) != 4:
        raise ValidationError(f"{where}: expected [lx, ty, rx, by] or null, got {raw!r}")
    return BBox(*raw)


def _parse_frame(raw: Any, where: str) -> FrameAnnotation:
    if not isinstance(raw, dict):
        raise ValidationError(f"{where}: expected an object, got {type(raw).__name__}")
    if "i" not in raw:
        raise ValidationError(f"{where}.i: missing frame index")
    idx = raw["i"]
    if not isinstance(idx, int) or isinstance(idx, bool):
        raise ValidationError(f"{where}.i: must be an integer, got {idx!r}")
    return FrameAnnotation(
        frame_index=idx,
        face=_parse_box(raw.get("face"), f"{where}.face"),
        lip=_parse_box(raw.get("lip"), f"{where}.lip"),
    )


def _parse_segment(raw: Any, where: str) -> SpeakerSegment:
    if not isinstance(raw, dict):
        raise ValidationError(f"{where}: expected an object, got {type(raw).__name__}")
    for key in ("segment_id", "speaker_id"):
        if not isinstance(raw.get(key), str):
            raise ValidationError(f"{where}.{key}: missing or not a string")
    if "total_frames" not in raw:
        raise ValidationError(f"{where}.total_frames: missing")
    total = raw["total_frames"]
    if not isinstance(total, int) or isinstance(total, bool):
        raise ValidationError(f"{where}.total_frames: must be an integer, got {total!r}")
    fps = raw.get("fps", 25.0)
    if not isinstance(fps, (int, float)) or isinstance(fps, bool):
        raise ValidationError(f"{where}.fps: must be a number, got {fps!r}")
    transcript = raw.get("transcript")
    if transcript is not None and not isinstance(transcript, str):
        raise ValidationError(f"{where}.transcript: must be a string or null")

    raw_frames = raw.get("frames", [])
    if not isinstance(raw_frames, list):
        raise ValidationError(f"{where}.frames: expected a list")
    frames = [_parse_frame(fr, f"{where}.frames[{k}]") for k, fr in enumerate(raw_frames)]
    indices = [fr.frame_index for fr in frames]
    if indices != sorted(indices):
        warnings.warn(
            f"{where}: frames out of order in segment {raw['segment_id']!r}; re-sorting",
            AnnotationWarning,
            stacklevel=3,
        )
        frames.sort(key=lambda fr: fr.frame_index)
    return SpeakerSegment(
        segment_id=raw["segment_id"],
        speaker_id=raw["speaker_id"],
        total_frames=total,
        fps=float(fps),
        frames=tuple(frames),
        transcript=transcript,
    )


def parse_annotations(document: str) -> list[SpeakerSegment]:
    """Parse one annotation document (JSON text) into validated segments.

    Unknown fields are ignored.  Out-of-order frame lists are re-sorted with
    an AnnotationWarning; duplicate frame indices and degenerate boxes are
    rejected with ValidationError.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("segments"), list):
        raise ValidationError("segments: missing or not a list at document root")
    return [_parse_segment(seg, f"segments[{k}]") for k, seg in enumerate(doc["segments"])]


def load_annotations(path) -> list[SpeakerSegment]:
    """Read and parse an annotation JSON file."""
    with open(path, encoding="utf-8") as fh:
        return parse_annotations(fh.read())


def serialize_annotations(segments: list[SpeakerSegment]) -> str:
    """Render segments back to the document schema (inverse of parse_annotations)."""

    def box(b: Optional[BBox]):
        return None if b is None else [b.left_x, b.top_y, b.right_x, b.bottom_y]

    doc = {
        "segments": [
            {
                "segment_id": seg.segment_id,
                "speaker_id": seg.speaker_id,
                "total_frames": seg.total_frames,
                "fps": seg.fps,
                "transcript": seg.transcript,
                "frames": [
                    {"i": fr.frame_index, "face": box(fr.face), "lip": box(fr.lip)}
                    for fr in seg.frames
                ],
            }
            for seg in segments
        ]
    }
    return json.dumps(doc, ensure_ascii=False)


def detection_rates(segment: SpeakerSegment) -> tuple[float, float, float]:
    """Return (face_rate, lip_rate, joint_rate), each = detected frames / total_frames."""
    faces = sum(1 for fr in segment.frames if fr.face is not None)
    lips = sum(1 for fr in segment.frames if fr.lip is not None)
    joint = sum(1 for fr in segment.frames if fr.face is not None and fr.lip is not None)
    t = segment.total_frames
    return faces / t, lips / t, joint / t
