"""Seedable training-time transforms: speed perturbation and per-clip augmentation.

A clip's transform is resolved once from (seed, clip_id) and then applied
identically to every frame, so augmented clips stay temporally consistent
and any worker can process any clip without shared RNG state.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .imageops import luma, rotate_bilinear, round_half_up

DEFAULT_PERTURB_RATES = (0.9, 1.0, 1.1)


@dataclass(frozen=True)
class AugmentSpec:
    """Sampling ranges for the four clip augmentations.

    Collapsing every range to a point (rotate (0, 0), probabilities 0,
    jitter ranges (1, 1)) makes the sampled transform an identity.
    """

    rotate_degrees: tuple[float, float] = (-10.0, 10.0)
    hflip_prob: float = 0.5
    grayscale_prob: float = 0.2
    brightness: tuple[float, float] = (0.8, 1.2)
    contrast: tuple[float, float] = (0.8, 1.2)
    saturation: tuple[float, float] = (0.8, 1.2)
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("hflip_prob", "grayscale_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        for name in ("brightness", "contrast", "saturation"):
            lo, hi = getattr(self, name)
            if lo <= 0 or hi < lo:
                raise ValueError(f"{name} range must be positive and ordered, got ({lo}, {hi})")
        lo, hi = self.rotate_degrees
        if hi < lo:
            raise ValueError(f"rotate_degrees range must be ordered, got ({lo}, {hi})")


@dataclass(frozen=True)
class ResolvedTransform:
    """One concrete draw from an AugmentSpec, applied uniformly to a clip."""

    angle: float = 0.0
    hflip: bool = False
    grayscale: bool = False
    brightness: float = 1.0
    contrast: float = 1.0
    saturation: float = 1.0

    @property
    def is_identity(self) -> bool:
        return (
            self.angle == 0.0
            and not self.hflip
            and not self.grayscale
            and self.brightness == 1.0
            and self.contrast == 1.0
            and self.saturation == 1.0
        )


def resample_indices(total_frames: int, rate: float) -> list[int]:
    """Source frame indices realizing speed perturbation at `rate`.

    Output length is round(total_frames / rate); output frame j reads source
    frame min(floor(j * rate), total_frames - 1).  Rate 1.0 is the identity.
    """
    if total_frames < 1:
        raise ValueError(f"total_frames must be >= 1, got {total_frames}")
    if rate <= 0:
        raise ValueError(f"rate must be > 0, got {rate}")
    out_len = round_half_up(total_frames / rate)
    return [min(int(j * rate), total_frames - 1) for j in range(out_len)]


def _clip_rng(seed: int, clip_id: str) -> np.random.Generator:
    # Stable across processes and runs; never Python's salted hash().
    digest = hashlib.sha256(f"{seed}|{clip_id}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:16], "little"))


def sample_augment(spec: AugmentSpec, clip_id: str) -> ResolvedTransform:
    """Draw one transform, a pure function of (spec.seed, clip_id)."""
    rng = _clip_rng(spec.seed, clip_id)
    angle = rng.uniform(*spec.rotate_degrees)
    hflip = rng.random() < spec.hflip_prob
    grayscale = rng.random() < spec.grayscale_prob
    brightness = rng.uniform(*spec.brightness)
    contrast = rng.uniform(*spec.contrast)
    saturation = rng.uniform(*spec.saturation)
    return ResolvedTransform(angle, hflip, grayscale, brightness, contrast, saturation)


def _apply_color(values: np.ndarray, transform: ResolvedTransform, mid: float) -> np.ndarray:
    if transform.brightness != 1.0:
        values = values * transform.brightness
    if transform.contrast != 1.0:
        # Anchored at mid-gray, not the image mean, so the mapping is
        # data-independent and identical for every frame of the clip.
        values = (values - mid) * transform.contrast + mid
    if transform.saturation != 1.0 and values.ndim == 3:
        gray = luma(values)[:, :, None]
        values = gray + (values - gray) * transform.saturation
    if transform.grayscale and values.ndim == 3:
        values = np.repeat(luma(values)[:, :, None], values.shape[2], axis=2)
    return values


def apply_augment(frames: list[np.ndarray], transform: ResolvedTransform) -> list[np.ndarray]:
    """Apply one resolved transform to every frame of a clip.

    All frames must share one shape.  uint8 clips stay uint8 (clipped to
    [0, 255]); float clips are clipped to [0, 1].
    """
    if not frames:
        raise ValueError("empty clip")
    shape = frames[0].shape
    for k, frame in enumerate(frames):
        if frame.shape != shape:
            raise ValueError(f"frame {k} has shape {frame.shape}, expected {shape}")

    out = []
    for frame in frames:
        was_uint8 = frame.dtype == np.uint8
        work = frame
        if transform.angle != 0.0:
            work = rotate_bilinear(work, transform.angle)
        if transform.hflip:
            work = work[:, ::-1].copy()
        values = work.astype(np.float64)
        values = _apply_color(values, transform, mid=127.5 if was_uint8 else 0.5)
        if was_uint8:
            out.append(np.clip(np.rint(values), 0, 255).astype(np.uint8))
        else:
            out.append(np.clip(values, 0.0, 1.0))
    return out


def perturbed_clip_id(segment_id: str, rate: float) -> str:
    """Naming convention for speed-perturbed copies, e.g. 'S217_001@0.9'."""
    return f"{segment_id}@{rate}"
