# src/fftcrystal/config.py
from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import orjson
import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, model_validator

from .spectral.transform import Axis


class FeedbackConstants(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    k1: float = Field(0.5, gt=0)
    k2: float = Field(0.5, gt=0)
    k3: float = Field(2.0, gt=0)

    def as_array(self) -> np.ndarray:
        return np.array([self.k1, self.k2, self.k3], dtype=np.float64)

    def follows_spectral_policy(self) -> bool:
        # frequency axes loosened, magnitude/phase axis tightened
        return self.k1 < 1.0 and self.k2 < 1.0 and self.k3 > 1.0


class EngineParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    k: FeedbackConstants = Field(default_factory=FeedbackConstants)
    sigma_floor: float = Field(1e-3, gt=0)
    epsilon: Tuple[PositiveFloat, PositiveFloat, PositiveFloat] = (0.1, 0.1, 0.1)
    max_iterations: int = Field(50, ge=1)
    # free-space clouds: density-peak seeds
    seed_count: int = Field(32, ge=1)
    rng_seed: int = 0
    density_bins: int = Field(8, ge=1)
    # spectral planes: one seed per tile, tiles about this many cells wide
    tile_size: float = Field(16.0, gt=0)
    allow_any_feedback: bool = False

    @model_validator(mode="after")
    def _check_feedback_policy(self) -> "EngineParams":
        if not self.allow_any_feedback and not self.k.follows_spectral_policy():
            raise ValueError(
                f"feedback constants {self.k.as_array().tolist()} violate k1 < 1, k2 < 1, k3 > 1 "
                f"(set allow_any_feedback to override)"
            )
        return self


class NoiseThresholds(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    dev_percentile: float = Field(75.0, gt=0, lt=100)
    mag_percentile: float = Field(75.0, gt=0, lt=100)
    protect_dc_radius: float = Field(16.0, ge=0)


class StegoSettings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    alpha: float = Field(0.02, gt=0)
    beta: float = Field(0.08, gt=0)


class ToolConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    engine: EngineParams = Field(default_factory=EngineParams)
    mask_radius: float = Field(30.0, ge=0)
    noise: NoiseThresholds = Field(default_factory=NoiseThresholds)
    stego: StegoSettings = Field(default_factory=StegoSettings)
    axis: Axis = Axis.MAGNITUDE
    max_value: float = Field(255.0, gt=0)
    ssim_window: int = Field(8, ge=1)
    log_level: str = os.getenv("FFTCRYSTAL_LOG_LEVEL", "INFO")


# ---------------- load / dump ----------------

def load_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> ToolConfig:
    """
    Defaults < config file < overrides. The file is JSON text; it goes through
    yaml.safe_load, which reads JSON as well. `overrides` is a nested dict with
    the same shape as the file, e.g. {"engine": {"k": {"k3": 3.0}}}.
    """
    data: Dict[str, Any] = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ValueError(f"config {path} must hold a JSON object, got {type(loaded).__name__}")
        data = loaded
    if overrides:
        data = _deep_merge(data, overrides)
    return ToolConfig.model_validate(data)


def dump_config(cfg: ToolConfig) -> bytes:
    return orjson.dumps(cfg.model_dump(mode="json"), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)


def _deep_merge(base: Dict[str, Any], extra: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = val
    return out

