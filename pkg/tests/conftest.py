from pathlib import Path

import pytest

from lipkit.annotations import BBox, FrameAnnotation, SpeakerSegment

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


def box(lx: int, ty: int, rx: int, by: int) -> BBox:
    return BBox(lx, ty, rx, by)


def make_segment(total_frames, face_at=(), lip_at=(), segment_id="seg", face_box=None, lip_box=None):
    """Segment with uniform boxes at the given frame indices."""
    face_box = face_box or box(0, 0, 80, 80)
    lip_box = lip_box or box(10, 20, 30, 40)
    frames = []
    for i in range(total_frames):
        face = face_box if i in set(face_at) else None
        lip = lip_box if i in set(lip_at) else None
        if face or lip:
            frames.append(FrameAnnotation(i, face=face, lip=lip))
    return SpeakerSegment(segment_id, "spk", total_frames, frames=tuple(frames))
