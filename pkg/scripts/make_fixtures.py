#!/usr/bin/env python3
"""Regenerate the checked-in test fixtures under tests/data/.

Everything here is a pure function of (x, y, frame_index), so reruns are
byte-identical.  The golden crop outputs are produced by the pipeline itself
and pin regressions; correctness of the geometry is established separately by
the oracle tests.
"""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
DATA = REPO / "tests" / "data"

sys.path.insert(0, str(REPO / "src"))

from lipkit import cli  # noqa: E402
from lipkit.imageops import write_image  # noqa: E402

FRAME_W, FRAME_H = 160, 120


def synthetic_frame(index: int) -> np.ndarray:
    """Deterministic color pattern with enough structure to make crops distinct."""
    yy, xx = np.meshgrid(np.arange(FRAME_H), np.arange(FRAME_W), indexing="ij")
    r = (2 * xx + yy) % 256
    g = (xx + 3 * yy + 7 * index) % 256
    b = (xx * yy // 16 + 11 * index) % 256
    return np.stack([r, g, b], axis=-1).astype(np.uint8)


def annotations_doc() -> dict:
    # S217_001: planned. 12 frames; faces on 10 (gap at 5, 6), lips on 9
    # (additionally missing at 8), so the plan exercises gap-fill.
    frames_a = []
    for i in range(12):
        face = None if i in (5, 6) else [30 + i % 3, 20, 130 + i % 3, 110]
        lip = None if i in (5, 6, 8) else [70 + i % 2, 70, 94 + i % 2, 86]
        frames_a.append({"i": i, "face": face, "lip": lip})
    # S443_002: discarded, lip rate 4/10 <= 0.5 while face rate 6/10 > 0.5.
    frames_b = []
    for i in range(10):
        face = [10, 10, 90, 98] if i < 6 else None
        lip = [40, 60, 60, 74] if i < 4 else None
        if face or lip:
            frames_b.append({"i": i, "face": face, "lip": lip})
    return {
        "segments": [
            {
                "segment_id": "S217_001",
                "speaker_id": "S217",
                "total_frames": 12,
                "fps": 25,
                "transcript": "你好世界",
                "frames": frames_a,
            },
            {
                "segment_id": "S443_002",
                "speaker_id": "S443",
                "total_frames": 10,
                "fps": 25,
                "transcript": "大家好",
                "frames": frames_b,
            },
        ]
    }


def write_transcripts() -> None:
    (DATA / "ref.txt").write_text(
        "utt1\t你好世界\nutt2\t今天天气很好\nutt3\t大家早上好\n", encoding="utf-8"
    )
    # hyp_a: 1 sub in utt2.  hyp_b: 1 del in utt1, 1 sub in utt2 (same spot,
    # different token).  hyp_c: matches hyp_a on utt2, clean elsewhere.
    (DATA / "hyp_a.txt").write_text(
        "utt1\t你好世界\nutt2\t今天天汽很好\nutt3\t大家早上好\n", encoding="utf-8"
    )
    (DATA / "hyp_b.txt").write_text(
        "utt1\t你好世\nutt2\t今天天齐很好\nutt3\t大家早上好\n", encoding="utf-8"
    )
    (DATA / "hyp_c.txt").write_text(
        "utt1\t你好世界\nutt2\t今天天汽很好\nutt3\t大家早上好\n", encoding="utf-8"
    )


def geometry_image() -> np.ndarray:
    yy, xx = np.meshgrid(np.arange(224), np.arange(224), indexing="ij")
    return ((2 * xx + 3 * yy) % 256).astype(np.uint8)


def write_geometry_goldens() -> None:
    """Golden crops for the three crop_frame geometry cases."""
    from lipkit.roi import CropPlan, crop_frame

    out = DATA / "golden" / "geometry"
    out.mkdir(parents=True)
    image = geometry_image()
    write_image(out / "input.png", image)
    cases = {
        "centered": CropPlan("g", 1.0, 112.0, ((112.0, 112.0),), (False,), 112),
        "corner": CropPlan("g", 1.0, 20.0, ((0.0, 0.0),), (False,), 112),
        "downsample": CropPlan("g", 1.0, 224.0, ((112.0, 112.0),), (False,), 112),
    }
    for name, plan in cases.items():
        write_image(out / f"{name}.png", crop_frame(image, plan, 0))


def main() -> None:
    if DATA.exists():
        shutil.rmtree(DATA)
    DATA.mkdir(parents=True)

    (DATA / "annotations.json").write_text(
        json.dumps(annotations_doc(), ensure_ascii=False, indent=1), encoding="utf-8"
    )

    frames_dir = DATA / "frames" / "S217_001"
    frames_dir.mkdir(parents=True)
    for i in range(12):
        write_image(frames_dir / f"{i:06d}.png", synthetic_frame(i))

    write_transcripts()

    golden = DATA / "golden"
    plans = golden / "plans"
    crops = golden / "crops"
    rc = cli.main(["plan", str(DATA / "annotations.json"), "--out", str(plans)])
    assert rc == 0, f"plan exited {rc}"
    rc = cli.main(
        ["crop", "--frames", str(DATA / "frames"), "--plans", str(plans), "--out", str(crops)]
    )
    assert rc == 0, f"crop exited {rc}"

    write_geometry_goldens()

    total = sum(1 for _ in DATA.rglob("*") if _.is_file())
    print(f"wrote {total} fixture files under {DATA}")


if __name__ == "__main__":
    main()
