"""Dataset preparation and post-recognition tooling for lip-reading pipelines.

Submodules:
    annotations  per-frame face/lip annotation schema, parsing, detection stats
    roi          face-size-normalized multi-scale lip ROI geometry
    imageops     deterministic image primitives (PNG/raw IO, bilinear resize, rotation)
    augment      seedable clip augmentation and speed-perturbation resampling
    scoring      character error rate
    rover        transcript fusion via word transition networks
    cli          batch command-line front door
"""

__version__ = "0.1.0"
