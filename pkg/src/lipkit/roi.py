"""Face-size-normalized multi-scale lip ROI geometry.

The crop side for a segment is the mean of (face width + face height) / 8
over detected frames, times a scale factor.  Crops are squares centered on
the per-frame lip midpoint; frames without a lip detection borrow the center
of the temporally nearest detected frame.  Segments whose face or lip
detection rate does not exceed 50% are discarded outright.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from .annotations import SpeakerSegment, detection_rates
from .imageops import resize_bilinear, round_half_up

DEFAULT_SCALES = (0.6, 0.8, 1.0, 1.25, 1.5, 1.75)
DEFAULT_OUTPUT_SIZE = 112


class NoFaceDetectionsError(ValueError):
    """Segment has no frame usable for the crop-size mean."""


class NoLipDetectionsError(ValueError):
    """Segment has no lip detection to center any crop on."""


class DiscardReason(Enum):
    face_rate_low = "face_rate_low"
    lip_rate_low = "lip_rate_low"


@dataclass(frozen=True)
class CropPlan:
    """Resolved square ROI for one segment at one scale.

    `centers[i]` is the (cx, cy) crop center for frame i, for every frame of
    the segment; `filled[i]` is True where the center was borrowed from a
    neighbor rather than detected.
    """

    segment_id: str
    scale: float
    side: float
    centers: tuple[tuple[float, float], ...]
    filled: tuple[bool, ...]
    output_size: int = DEFAULT_OUTPUT_SIZE
    interp: str = "bilinear"

    def __post_init__(self) -> None:
        if self.side <= 0:
            raise ValueError(f"plan {self.segment_id!r}: side must be > 0, got {self.side}")
        if len(self.centers) != len(self.filled):
            raise ValueError(f"plan {self.segment_id!r}: centers/filled length mismatch")

    def to_json(self) -> str:
        return json.dumps(
            {
                "segment_id": self.segment_id,
                "scale": self.scale,
                "side": self.side,
                "output_size": self.output_size,
                "interp": self.interp,
                "centers": [[cx, cy] for cx, cy in self.centers],
                "filled": list(self.filled),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "CropPlan":
        doc = json.loads(text)
        return cls(
            segment_id=doc["segment_id"],
            scale=doc["scale"],
            side=doc["side"],
            centers=tuple((cx, cy) for cx, cy in doc["centers"]),
            filled=tuple(bool(b) for b in doc["filled"]),
            output_size=doc["output_size"],
            interp=doc.get("interp", "bilinear"),
        )


@dataclass(frozen=True)
class Planned:
    plan: CropPlan


@dataclass(frozen=True)
class Discarded:
    reason: DiscardReason


SegmentDisposition = Union[Planned, Discarded]


def crop_size(segment: SpeakerSegment, scale: float, *, joint_only: bool = False) -> float:
    """Side length of the square lip ROI for this segment at `scale`.

    Mean of (face width + face height) / 8 over face-detected frames, times
    scale.  With joint_only=True the mean runs over frames where face and lip
    are both detected instead.
    """
    if scale <= 0:
        raise ValueError(f"scale must be > 0, got {scale}")
    faces = [
        fr.face
        for fr in segment.frames
        if fr.face is not None and (not joint_only or fr.lip is not None)
    ]
    if not faces:
        raise NoFaceDetectionsError(
            f"segment {segment.segment_id!r}: no "
            + ("jointly detected" if joint_only else "face-detected")
            + " frames to average over"
        )
    mean = sum((box.width + box.height) / 8 for box in faces) / len(faces)
    return mean * scale


def lip_centers(segment: SpeakerSegment) -> tuple[list[tuple[float, float]], list[bool]]:
    """Per-frame crop centers for all total_frames frames, plus a gap-fill mask.

    Detected frames get the lip-box midpoint; undetected frames get the
    center of the temporally nearest detected frame, equidistant ties going
    to the earlier frame.
    """
    detected: dict[int, tuple[float, float]] = {
        fr.frame_index: fr.lip.center for fr in segment.frames if fr.lip is not None
    }
    if not detected:
        raise NoLipDetectionsError(f"segment {segment.segment_id!r}: no lip detections")

    t = segment.total_frames
    indices = sorted(detected)
    centers: list[tuple[float, float]] = []
    filled: list[bool] = []
    pos = 0  # last detected index <= i, as a cursor into `indices`
    for i in range(t):
        if i in detected:
            centers.append(detected[i])
            filled.append(False)
            continue
        while pos + 1 < len(indices) and indices[pos + 1] < i:
            pos += 1
        prev = indices[pos] if indices[pos] < i else None
        following = next((j for j in indices[pos:] if j > i), None)
        if prev is None:
            nearest = following
        elif following is None:
            nearest = prev
        else:
            # Tie goes to the earlier (past) frame.
            nearest = prev if i - prev <= following - i else following
        centers.append(detected[nearest])
        filled.append(True)
    return centers, filled


def plan_crops(
    segment: SpeakerSegment,
    scale: float,
    output_size: int = DEFAULT_OUTPUT_SIZE,
    *,
    joint_only: bool = False,
) -> SegmentDisposition:
    """Resolve a segment into a CropPlan, or discard it under the 50% rule.

    The rule is strict: a detection rate of exactly 0.5 is discarded.
    """
    face_rate, lip_rate, _ = detection_rates(segment)
    if face_rate <= 0.5:
        return Discarded(DiscardReason.face_rate_low)
    if lip_rate <= 0.5:
        return Discarded(DiscardReason.lip_rate_low)
    side = crop_size(segment, scale, joint_only=joint_only)
    centers, filled = lip_centers(segment)
    return Planned(
        CropPlan(
            segment_id=segment.segment_id,
            scale=scale,
            side=side,
            centers=tuple(centers),
            filled=tuple(filled),
            output_size=output_size,
        )
    )


def crop_frame(image: np.ndarray, plan: CropPlan, frame_index: int) -> np.ndarray:
    """Extract the planned square for one frame, zero-padded at image borders,
    and resize it to output_size x output_size."""
    if not 0 <= frame_index < len(plan.centers):
        raise IndexError(
            f"frame_index {frame_index} outside [0, {len(plan.centers)}) for plan {plan.segment_id!r}"
        )
    if image.size == 0:
        raise ValueError("empty image")

    side = max(1, round_half_up(plan.side))
    cx, cy = plan.centers[frame_index]
    # The square spans [c - side//2, c - side//2 + side) on each axis.
    x0 = round_half_up(cx) - side // 2
    y0 = round_half_up(cy) - side // 2

    h, w = image.shape[:2]
    window_shape = (side, side) + image.shape[2:]
    window = np.zeros(window_shape, dtype=image.dtype)
    src_y0, src_y1 = max(y0, 0), min(y0 + side, h)
    src_x0, src_x1 = max(x0, 0), min(x0 + side, w)
    if src_y0 < src_y1 and src_x0 < src_x1:
        window[src_y0 - y0 : src_y1 - y0, src_x0 - x0 : src_x1 - x0] = image[
            src_y0:src_y1, src_x0:src_x1
        ]
    if side == plan.output_size:
        return window
    return resize_bilinear(window, plan.output_size, plan.output_size)
