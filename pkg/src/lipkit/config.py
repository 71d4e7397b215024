"""Pipeline configuration: one dataclass, loadable from TOML or JSON.

Every constant of the extraction recipe (scale set, output size, perturb
rates, augmentation ranges, fusion weight) lives here with its default, so
nothing is hard-coded in the commands.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .augment import DEFAULT_PERTURB_RATES, AugmentSpec
from .roi import DEFAULT_OUTPUT_SIZE, DEFAULT_SCALES
from .rover import DEFAULT_NULL_CONFIDENCE


class ConfigError(ValueError):
    """Raised for unreadable config files or out-of-range values."""


@dataclass(frozen=True)
class PipelineConfig:
    scales: tuple[float, ...] = DEFAULT_SCALES
    output_size: int = DEFAULT_OUTPUT_SIZE
    perturb_rates: tuple[float, ...] = DEFAULT_PERTURB_RATES
    augment: AugmentSpec = field(default_factory=AugmentSpec)
    rover_alpha: float = 1.0
    null_confidence: float = DEFAULT_NULL_CONFIDENCE
    joint_mean: bool = False
    input_dir: Optional[str] = None
    output_dir: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.scales or any(s <= 0 for s in self.scales):
            raise ConfigError(f"scales must be non-empty and positive, got {self.scales}")
        if self.output_size < 8:
            raise ConfigError(f"output_size must be >= 8, got {self.output_size}")
        if any(r <= 0 for r in self.perturb_rates):
            raise ConfigError(f"perturb rates must be positive, got {self.perturb_rates}")
        if not 0.0 <= self.rover_alpha <= 1.0:
            raise ConfigError(f"rover_alpha must be in [0, 1], got {self.rover_alpha}")


def _build_augment(raw: dict[str, Any], seed: int) -> AugmentSpec:
    known = {
        "rotate_degrees",
        "hflip_prob",
        "grayscale_prob",
        "brightness",
        "contrast",
        "saturation",
        "seed",
    }
    kwargs: dict[str, Any] = {"seed": seed}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"unknown augment option {key!r}")
        kwargs[key] = tuple(value) if isinstance(value, list) else value
    return AugmentSpec(**kwargs)


def load_config(path: Optional[str] = None, seed: Optional[int] = None) -> PipelineConfig:
    """Load a TOML (default) or JSON (.json) config; missing keys keep defaults.

    `seed`, when given, overrides the config's augment seed.
    """
    raw: dict[str, Any] = {}
    if path is not None:
        data = Path(path).read_bytes()
        try:
            if str(path).endswith(".json"):
                raw = json.loads(data)
            else:
                raw = tomllib.loads(data.decode("utf-8"))
        except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a table/object")

    paths = raw.get("paths", {})
    augment_seed = seed if seed is not None else int(raw.get("augment", {}).get("seed", 0))
    try:
        cfg = PipelineConfig(
            scales=tuple(raw.get("scales", DEFAULT_SCALES)),
            output_size=int(raw.get("output_size", DEFAULT_OUTPUT_SIZE)),
            perturb_rates=tuple(raw.get("perturb_rates", DEFAULT_PERTURB_RATES)),
            augment=_build_augment(dict(raw.get("augment", {})), augment_seed),
            rover_alpha=float(raw.get("rover_alpha", 1.0)),
            null_confidence=float(raw.get("null_confidence", DEFAULT_NULL_CONFIDENCE)),
            joint_mean=bool(raw.get("joint_mean", False)),
            input_dir=paths.get("input_dir"),
            output_dir=paths.get("output_dir"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc
    if seed is not None:
        cfg = replace(cfg, augment=replace(cfg.augment, seed=seed))
    return cfg
