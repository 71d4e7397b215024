#!/usr/bin/env python3
"""Run the whole pipeline against the checked-in fixture into a scratch dir.

Exercises every subcommand end to end: plan crops from annotations, apply
them, speed-perturb and augment the crops, score two hypothesis files, and
fuse three systems.  Useful as a smoke test and as executable documentation.

Usage: python scripts/demo_pipeline.py [workdir]
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from lipkit import cli  # noqa: E402

DATA = REPO / "tests" / "data"


def step(name: str, argv: list[str]) -> None:
    print(f"\n== lipkit {' '.join(argv)}")
    rc = cli.main(argv)
    print(f"== {name}: exit {rc}")
    if rc not in (0,):
        raise SystemExit(f"{name} failed with exit code {rc}")


def main() -> None:
    work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="lipkit_demo_"))
    work.mkdir(parents=True, exist_ok=True)
    print(f"working directory: {work}")

    plans = work / "plans"
    crops = work / "crops"
    step("plan", ["plan", str(DATA / "annotations.json"), "--out", str(plans)])
    step(
        "crop",
        ["crop", "--frames", str(DATA / "frames"), "--plans", str(plans), "--out", str(crops), "--jobs", "2"],
    )
    step("perturb", ["perturb", "--frames", str(DATA / "frames"), "--out", str(work / "perturbed")])
    step(
        "augment",
        ["augment", "--frames", str(DATA / "frames"), "--out", str(work / "augmented"), "--seed", "11"],
    )
    step(
        "score",
        ["score", str(DATA / "ref.txt"), str(DATA / "hyp_b.txt"), "--out", str(work / "cer.tsv")],
    )
    step(
        "rover",
        [
            "rover",
            str(DATA / "hyp_a.txt"),
            str(DATA / "hyp_b.txt"),
            str(DATA / "hyp_c.txt"),
            "--out",
            str(work / "fused.txt"),
            "--dump-wtn",
            str(work / "wtn"),
        ],
    )

    print("\nCER report:")
    print((work / "cer.tsv").read_text(), end="")
    print("fused transcripts:")
    print((work / "fused.txt").read_text(encoding="utf-8"), end="")
    print(f"\nartifacts under {work}")


if __name__ == "__main__":
    main()
