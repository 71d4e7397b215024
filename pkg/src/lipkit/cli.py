"""Batch command-line front door: plan, crop, perturb, augment, score, rover.

Commands are manifest-driven: one bad segment is recorded and skipped, the
rest of the batch continues, and the exit code reports the aggregate
(0 success, 1 usage, 2 partial failure, 3 total failure).  Given the same
inputs, config, and seed, every command produces byte-identical outputs.
"""

from __future__ import annotations

import argparse
import os
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from . import annotations as ann
from . import augment as aug
from . import imageops, roi, rover, scoring
from .config import ConfigError, PipelineConfig, load_config

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2
EXIT_TOTAL = 3

FRAME_STEM = "{:06d}"


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; this tool reserves 2 for partial failures.
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _scale_tag(value: float) -> str:
    return str(float(value))


def _frame_path(directory: Path, index: int) -> Path:
    stem = FRAME_STEM.format(index)
    matches = sorted(directory.glob(stem + ".*"))
    if not matches:
        raise FileNotFoundError(f"{directory}: no frame {stem}.*")
    return matches[0]


def _run_pool(jobs: int, tasks: Iterable[tuple[str, Callable[[], str]]]) -> list[tuple[str, bool, str]]:
    """Run (name, thunk) tasks on a worker pool; results sorted by name."""

    def run_one(item: tuple[str, Callable[[], str]]) -> tuple[str, bool, str]:
        name, thunk = item
        try:
            return name, True, thunk()
        except Exception as exc:  # per-item isolation: batch jobs must continue
            return name, False, f"{type(exc).__name__}: {exc}"

    task_list = list(tasks)
    if jobs <= 1:
        results = [run_one(t) for t in task_list]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, task_list))
    return sorted(results, key=lambda r: r[0])


def _aggregate_exit(results: Sequence[tuple[str, bool, str]]) -> int:
    if not results:
        return EXIT_PARTIAL
    failures = sum(1 for _, ok, _ in results if not ok)
    if failures == 0:
        return EXIT_OK
    if failures == len(results):
        return EXIT_TOTAL
    return EXIT_PARTIAL


class _UsageError(ValueError):
    pass


def _resolve_dir(flag_value, config_value, name: str) -> Path:
    """CLI flags win; the config's [paths] table is the fallback."""
    if flag_value is not None:
        return Path(flag_value)
    if config_value is not None:
        return Path(config_value)
    raise _UsageError(f"{name} required (flag or [paths] config entry)")


# ---------------------------------------------------------------- plan


def cmd_plan(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    out_dir = _resolve_dir(args.out, cfg.output_dir, "--out")
    out_dir.mkdir(parents=True, exist_ok=True)

    segments: list[ann.SpeakerSegment] = []
    for path in args.annotations:
        try:
            segments.extend(ann.load_annotations(path))
        except OSError as exc:
            print(f"cannot read {path}: {exc}", file=sys.stderr)
            return EXIT_TOTAL

    rows = []
    planned_any = False
    for seg in sorted(segments, key=lambda s: s.segment_id):
        face_rate, lip_rate, joint_rate = ann.detection_rates(seg)
        disposition = roi.plan_crops(
            seg, 1.0, cfg.output_size, joint_only=cfg.joint_mean
        )
        if isinstance(disposition, roi.Discarded):
            rows.append(
                f"{seg.segment_id}\tdiscarded\t{disposition.reason.value}"
                f"\t{face_rate:.4f}\t{lip_rate:.4f}\t{joint_rate:.4f}"
            )
            continue
        planned_any = True
        for scale in cfg.scales:
            plan = roi.plan_crops(seg, scale, cfg.output_size, joint_only=cfg.joint_mean)
            assert isinstance(plan, roi.Planned)
            name = f"{seg.segment_id}@{_scale_tag(scale)}.plan.json"
            _write_text(out_dir / name, plan.plan.to_json() + "\n")
        rows.append(
            f"{seg.segment_id}\tplanned\t-"
            f"\t{face_rate:.4f}\t{lip_rate:.4f}\t{joint_rate:.4f}"
        )

    header = "segment_id\tstatus\treason\tface_rate\tlip_rate\tjoint_rate"
    _write_text(out_dir / "plan_manifest.tsv", "\n".join([header] + rows) + "\n")
    if not planned_any:
        print("warning: no segment survived the discard rule", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


# ---------------------------------------------------------------- crop


def _crop_segment(plan_path: Path, frames_dir: Path, out_dir: Path, fmt: str) -> str:
    plan = roi.CropPlan.from_json(plan_path.read_text(encoding="utf-8"))
    clip_name = plan_path.name.removesuffix(".plan.json")
    seg_frames = frames_dir / plan.segment_id
    clip_out = out_dir / clip_name
    clip_out.mkdir(parents=True, exist_ok=True)
    for index in range(len(plan.centers)):
        image = imageops.read_image(_frame_path(seg_frames, index))
        crop = roi.crop_frame(image, plan, index)
        stem = FRAME_STEM.format(index)
        if fmt == "rgb":
            name = imageops.raw_name(stem, crop.shape[1], crop.shape[0])
        else:
            name = stem + ".png"
        imageops.write_image(clip_out / name, crop)
    return f"{len(plan.centers)} frames"


def cmd_crop(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    frames_dir = _resolve_dir(args.frames, cfg.input_dir, "--frames")
    plans_dir = Path(args.plans)
    out_dir = _resolve_dir(args.out, cfg.output_dir, "--out")
    out_dir.mkdir(parents=True, exist_ok=True)

    plan_paths = sorted(plans_dir.glob("*.plan.json"))
    tasks = [
        (
            path.name.removesuffix(".plan.json"),
            (lambda p=path: _crop_segment(p, frames_dir, out_dir, args.format)),
        )
        for path in plan_paths
    ]
    results = _run_pool(args.jobs, tasks)

    lines = ["clip_id\tstatus\tdetail"]
    for name, ok, message in results:
        lines.append(f"{name}\t{'ok' if ok else 'failed'}\t{message}")
    _write_text(out_dir / "crop_manifest.tsv", "\n".join(lines) + "\n")
    for name, ok, message in results:
        if not ok:
            print(f"failed {name}: {message}", file=sys.stderr)
    return _aggregate_exit(results)


# ---------------------------------------------------------------- perturb


def _perturb_segment(seg_dir: Path, out_dir: Path, rates: Sequence[float]) -> str:
    frames = sorted(p for p in seg_dir.iterdir() if p.is_file())
    if not frames:
        raise FileNotFoundError(f"{seg_dir}: no frames")
    written = 0
    for rate in rates:
        clip_out = out_dir / aug.perturbed_clip_id(seg_dir.name, rate)
        clip_out.mkdir(parents=True, exist_ok=True)
        for j, src_index in enumerate(aug.resample_indices(len(frames), rate)):
            src = frames[src_index]
            suffix = src.name[len(FRAME_STEM.format(src_index)) :]
            dst = clip_out / (FRAME_STEM.format(j) + suffix)
            tmp = dst.with_name(dst.name + ".tmp")
            shutil.copyfile(src, tmp)
            os.replace(tmp, dst)
            written += 1
    return f"{written} frames over {len(rates)} rates"


def cmd_perturb(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    frames_dir = _resolve_dir(args.frames, cfg.input_dir, "--frames")
    out_dir = _resolve_dir(args.out, cfg.output_dir, "--out")
    out_dir.mkdir(parents=True, exist_ok=True)
    seg_dirs = sorted(p for p in frames_dir.iterdir() if p.is_dir())
    results = _run_pool(
        args.jobs,
        [
            (seg.name, (lambda s=seg: _perturb_segment(s, out_dir, cfg.perturb_rates)))
            for seg in seg_dirs
        ],
    )
    for name, ok, message in results:
        if not ok:
            print(f"failed {name}: {message}", file=sys.stderr)
    return _aggregate_exit(results)


# ---------------------------------------------------------------- augment


def _augment_segment(seg_dir: Path, out_dir: Path, spec: aug.AugmentSpec) -> str:
    frame_paths = sorted(p for p in seg_dir.iterdir() if p.is_file())
    if not frame_paths:
        raise FileNotFoundError(f"{seg_dir}: no frames")
    transform = aug.sample_augment(spec, seg_dir.name)
    frames = [imageops.read_image(p) for p in frame_paths]
    augmented = aug.apply_augment(frames, transform)
    clip_out = out_dir / seg_dir.name
    clip_out.mkdir(parents=True, exist_ok=True)
    for path, frame in zip(frame_paths, augmented):
        imageops.write_image(clip_out / path.name, frame)
    return f"{len(frames)} frames angle={transform.angle:.2f}"


def cmd_augment(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    frames_dir = _resolve_dir(args.frames, cfg.input_dir, "--frames")
    out_dir = _resolve_dir(args.out, cfg.output_dir, "--out")
    out_dir.mkdir(parents=True, exist_ok=True)
    seg_dirs = sorted(p for p in frames_dir.iterdir() if p.is_dir())
    results = _run_pool(
        args.jobs,
        [
            (seg.name, (lambda s=seg: _augment_segment(s, out_dir, cfg.augment)))
            for seg in seg_dirs
        ],
    )
    for name, ok, message in results:
        if not ok:
            print(f"failed {name}: {message}", file=sys.stderr)
    return _aggregate_exit(results)


# ---------------------------------------------------------------- score


def cmd_score(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    with open(args.ref, encoding="utf-8") as fh:
        refs = scoring.read_transcripts(fh, args.ref)
    with open(args.hyp, encoding="utf-8") as fh:
        hyps = scoring.read_transcripts(fh, args.hyp)

    missing_hyp = sorted(refs.keys() - hyps.keys())
    missing_ref = sorted(hyps.keys() - refs.keys())
    for utt in missing_hyp:
        print(f"coverage error: {utt} missing from hypothesis", file=sys.stderr)
    for utt in missing_ref:
        print(f"coverage error: {utt} missing from reference", file=sys.stderr)

    rows, total = scoring.score_transcripts(refs, hyps)
    report = scoring.format_report(rows, total)
    if args.out:
        _write_text(Path(args.out), report)
    else:
        sys.stdout.write(report)
    return EXIT_PARTIAL if (missing_hyp or missing_ref) else EXIT_OK


# ---------------------------------------------------------------- rover


def _read_confidences(path: str) -> dict[str, list[float]]:
    table: dict[str, list[float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise scoring.TranscriptFormatError(f"{path}:{lineno}: missing tab separator")
            utt_id, scores = line.split("\t", 1)
            table[utt_id] = [float(s) for s in scores.split()]
    return table


def cmd_rover(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    alpha = args.alpha if args.alpha is not None else cfg.rover_alpha
    if args.confidences and len(args.confidences) != len(args.hyps):
        print("need one confidence file per hypothesis file", file=sys.stderr)
        return EXIT_USAGE

    systems: list[tuple[str, dict[str, str], Optional[dict[str, list[float]]]]] = []
    for k, path in enumerate(args.hyps):
        with open(path, encoding="utf-8") as fh:
            table = scoring.read_transcripts(fh, path)
        conf = _read_confidences(args.confidences[k]) if args.confidences else None
        systems.append((Path(path).stem, table, conf))

    if args.cer_table:
        with open(args.cer_table, encoding="utf-8") as fh:
            dev_cer = {
                row.split("\t")[0]: float(row.split("\t")[1])
                for row in fh.read().splitlines()
                if row
            }
        systems.sort(key=lambda item: dev_cer.get(item[0], float("inf")))

    utt_sets = [set(table) for _, table, _ in systems]
    common = set.intersection(*utt_sets)
    union = set.union(*utt_sets)
    if common != union and not args.intersect:
        for (system_id, _, _), utts in zip(systems, utt_sets):
            for utt in sorted(union - utts):
                print(f"utterance set mismatch: {utt} missing from {system_id}", file=sys.stderr)
        print("pass --intersect to fuse the common subset", file=sys.stderr)
        return EXIT_TOTAL

    dump_dir = Path(args.dump_wtn) if args.dump_wtn else None
    if dump_dir:
        dump_dir.mkdir(parents=True, exist_ok=True)

    lines = []
    for utt in sorted(common):
        hyps = []
        for system_id, table, conf in systems:
            tokens = tuple(scoring.tokenize(table[utt]))
            conf_values = None
            if conf is not None:
                values = conf.get(utt)
                if values is None or len(values) != len(tokens):
                    raise rover.ParameterError(
                        f"{system_id}/{utt}: confidence count does not match token count"
                    )
                conf_values = tuple(values)
            hyps.append(rover.Hypothesis(system_id, utt, tokens, conf_values))
        wtn = rover.build_wtn(hyps)
        fused = rover.vote(wtn, alpha, cfg.null_confidence)
        if dump_dir:
            _write_text(dump_dir / f"{utt}.wtn.json", wtn.to_json() + "\n")
        lines.append(f"{utt}\t{''.join(fused)}")

    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        _write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML or JSON pipeline config")
    common.add_argument("--jobs", type=int, default=1, help="worker threads (default 1)")
    common.add_argument("--seed", type=int, help="override the augmentation seed")

    parser = _Parser(prog="lipkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", parents=[common], help="resolve crop plans from annotations")
    p.add_argument("annotations", nargs="+", help="annotation JSON document(s)")
    p.add_argument("--out", help="output directory for plans + manifest")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("crop", parents=[common], help="apply crop plans to frame images")
    p.add_argument("--frames", help="directory of <segment_id>/<nnnnnn>.<ext> frames")
    p.add_argument("--plans", required=True, help="directory of *.plan.json files")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("png", "rgb"), default="png")
    p.set_defaults(func=cmd_crop)

    p = sub.add_parser("perturb", parents=[common], help="write speed-perturbed frame sequences")
    p.add_argument("--frames")
    p.add_argument("--out")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("augment", parents=[common], help="apply seeded per-clip augmentation")
    p.add_argument("--frames")
    p.add_argument("--out")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("score", parents=[common], help="character error rate report")
    p.add_argument("ref", help="reference transcripts (utt<TAB>text)")
    p.add_argument("hyp", help="hypothesis transcripts (utt<TAB>text)")
    p.add_argument("--out", help="write TSV report here instead of stdout")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("rover", parents=[common], help="fuse transcripts from several systems")
    p.add_argument("hyps", nargs="+", help="hypothesis files, one per system, in merge order")
    p.add_argument("--alpha", type=float, help="vote weight on frequency (default config)")
    p.add_argument("--out", help="write fused transcripts here instead of stdout")
    p.add_argument("--intersect", action="store_true", help="fuse the common utterance subset")
    p.add_argument("--cer-table", help="system<TAB>cer table; merge order becomes ascending CER")
    p.add_argument("--confidences", nargs="+", help="per-system confidence files (utt<TAB>c c ...)")
    p.add_argument("--dump-wtn", help="directory for per-utterance WTN JSON dumps")
    p.set_defaults(func=cmd_rover)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, cfg)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (
        ann.ParseError,
        ann.ValidationError,
        scoring.TranscriptFormatError,
        rover.ParameterError,
        rover.AlignmentError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOTAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_TOTAL


if __name__ == "__main__":
    sys.exit(main())
