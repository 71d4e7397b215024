"""Deterministic image primitives shared by the ROI and augmentation pipelines.

Images are numpy arrays, either (H, W) grayscale or (H, W, C).  uint8 arrays
round-trip through float64 internally; float arrays are assumed to lie in
[0, 1].  All resampling is plain bilinear with half-pixel alignment so that
same-size resize is an exact identity and 2x downsampling equals 2x2 block
averaging.
"""

from __future__ import annotations

import os
import re
from pathlib import Path

import numpy as np
from PIL import Image

_RAW_DIMS = re.compile(r"\.(\d+)x(\d+)\.rgb$")

# Rec. 601 luma weights, also used for the saturation axis.
_LUMA = np.array([0.299, 0.587, 0.114])


def round_half_up(x: float) -> int:
    """Round to nearest integer, halves away from zero (not banker's)."""
    return int(np.floor(x + 0.5)) if x >= 0 else -int(np.floor(-x + 0.5))


def read_image(path) -> np.ndarray:
    """Read a frame image; format chosen by extension.

    `.png` decodes via Pillow to uint8 (grayscale stays 2-D, color becomes
    (H, W, 3)).  `.rgb` is a raw planar 8-bit RGB file whose dimensions are
    encoded in the filename as `<stem>.<W>x<H>.rgb`.
    """
    name = str(path)
    m = _RAW_DIMS.search(name)
    if m:
        w, h = int(m.group(1)), int(m.group(2))
        flat = np.fromfile(name, dtype=np.uint8)
        if flat.size != 3 * w * h:
            raise ValueError(f"{name}: expected {3 * w * h} bytes for {w}x{h} RGB planes, got {flat.size}")
        return flat.reshape(3, h, w).transpose(1, 2, 0).copy()
    if name.endswith(".rgb"):
        raise ValueError(f"{name}: raw files need dimensions in the name, e.g. frame.112x112.rgb")
    with Image.open(name) as im:
        if im.mode in ("L", "I;16"):
            return np.asarray(im.convert("L"))
        return np.asarray(im.convert("RGB"))


def write_image(path, image: np.ndarray) -> None:
    """Write a uint8 frame image atomically; format chosen by extension (see read_image)."""
    if image.dtype != np.uint8:
        raise ValueError(f"write_image expects uint8, got {image.dtype}")
    name = str(path)
    tmp = name + ".tmp"
    if name.endswith(".rgb"):
        if not _RAW_DIMS.search(name):
            raise ValueError(f"{name}: raw files need dimensions in the name, e.g. frame.112x112.rgb")
        if image.ndim == 2:
            image = np.stack([image] * 3, axis=-1)
        image.transpose(2, 0, 1).tofile(tmp)
    else:
        Image.fromarray(image).save(tmp, format="PNG")
    os.replace(tmp, name)


def raw_name(stem: str, width: int, height: int) -> str:
    """Filename for a raw planar RGB frame, dimensions embedded."""
    return f"{stem}.{width}x{height}.rgb"


def _as_float(image: np.ndarray) -> tuple[np.ndarray, bool]:
    if image.dtype == np.uint8:
        return image.astype(np.float64), True
    return np.asarray(image, dtype=np.float64), False


def _restore(values: np.ndarray, was_uint8: bool) -> np.ndarray:
    if was_uint8:
        return np.clip(np.rint(values), 0, 255).astype(np.uint8)
    return np.clip(values, 0.0, 1.0)


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel-aligned sampling, edges clamped.

    Source coordinate for output pixel j is (j + 0.5) * in/out - 0.5, so a
    same-size resize is an exact identity.
    """
    values, was_uint8 = _as_float(image)
    in_h, in_w = values.shape[:2]

    def axis_coords(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        lo = np.floor(src).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, fy = axis_coords(in_h, out_h)
    x0, x1, fx = axis_coords(in_w, out_w)
    if values.ndim == 3:
        fy = fy[:, None, None]
        fx = fx[None, :, None]
    else:
        fy = fy[:, None]
        fx = fx[None, :]
    top = values[y0][:, x0] * (1 - fx) + values[y0][:, x1] * fx
    bot = values[y1][:, x0] * (1 - fx) + values[y1][:, x1] * fx
    return _restore(top * (1 - fy) + bot * fy, was_uint8)


def rotate_bilinear(image: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate about the image center, bilinear resampling, zero fill outside."""
    if degrees == 0.0:
        return image.copy()
    values, was_uint8 = _as_float(image)
    h, w = values.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = np.deg2rad(degrees)
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    yy, xx = np.meshgrid(np.arange(h) - cy, np.arange(w) - cx, indexing="ij")
    # Inverse mapping; positive angle turns the image counterclockwise on screen.
    src_x = cos_t * xx - sin_t * yy + cx
    src_y = sin_t * xx + cos_t * yy + cy

    x0 = np.floor(src_x).astype(np.intp)
    y0 = np.floor(src_y).astype(np.intp)
    fx = src_x - x0
    fy = src_y - y0

    def sample(yi: np.ndarray, xi: np.ndarray) -> np.ndarray:
        inside = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
        flat = values.reshape(h * w, -1)
        idx = np.where(inside, yi * w + xi, 0)
        out = flat[idx]
        out[~inside] = 0.0
        return out

    if values.ndim == 2:
        values = values[:, :, None]
    flat_shape = (h, w, values.shape[2])
    p00 = sample(y0, x0).reshape(flat_shape)
    p01 = sample(y0, x0 + 1).reshape(flat_shape)
    p10 = sample(y0 + 1, x0).reshape(flat_shape)
    p11 = sample(y0 + 1, x0 + 1).reshape(flat_shape)
    fx = fx[:, :, None]
    fy = fy[:, :, None]
    out = (p00 * (1 - fx) + p01 * fx) * (1 - fy) + (p10 * (1 - fx) + p11 * fx) * fy
    if image.ndim == 2:
        out = out[:, :, 0]
    return _restore(out, was_uint8)


def luma(image: np.ndarray) -> np.ndarray:
    """Rec. 601 luma of an (H, W, 3) float image; (H, W) input passes through."""
    if image.ndim == 2:
        return image
    return image @ _LUMA
