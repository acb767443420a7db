import numpy as np
import pytest
from pydantic import ValidationError

from fftcrystal.config import EngineParams, FeedbackConstants, NoiseThresholds, ToolConfig, dump_config, load_config
from fftcrystal.spectral.transform import Axis


def test_defaults():
    cfg = ToolConfig()
    np.testing.assert_array_equal(cfg.engine.k.as_array(), [0.5, 0.5, 2.0])
    assert cfg.engine.epsilon == (0.1, 0.1, 0.1)
    assert cfg.engine.tile_size == 16.0
    assert cfg.mask_radius == 30.0
    assert cfg.axis == Axis.MAGNITUDE
    assert (cfg.stego.alpha, cfg.stego.beta) == (0.02, 0.08)
    assert cfg.noise == NoiseThresholds()
    assert (cfg.noise.dev_percentile, cfg.noise.mag_percentile, cfg.noise.protect_dc_radius) == (75.0, 75.0, 16.0)


@pytest.mark.parametrize("k", [(1.0, 0.5, 2.0), (0.5, 1.5, 2.0), (0.5, 0.5, 1.0), (0.5, 0.5, 0.9)])
def test_feedback_policy(k):
    kk = FeedbackConstants(k1=k[0], k2=k[1], k3=k[2])
    with pytest.raises(ValidationError, match="allow_any_feedback"):
        EngineParams(k=kk)
    assert EngineParams(k=kk, allow_any_feedback=True).k == kk


def test_values_are_checked():
    with pytest.raises(ValidationError):
        FeedbackConstants(k1=0.0)
    with pytest.raises(ValidationError):
        EngineParams(epsilon=(0.1, 0.0, 0.1))
    with pytest.raises(ValidationError):
        EngineParams(sigma_floor=float("nan"))
    with pytest.raises(ValidationError):
        NoiseThresholds(dev_percentile=100.0)
    with pytest.raises(ValidationError):
        ToolConfig(mask_radius=-1.0)
    with pytest.raises(ValidationError):
        ToolConfig(unknown=1)


def test_models_are_frozen():
    cfg = ToolConfig()
    with pytest.raises(ValidationError):
        cfg.mask_radius = 3.0


def test_load_merges_file_and_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text('{"engine": {"k": {"k1": 0.25}, "seed_count": 4}, "axis": "phase"}', encoding="utf-8")
    cfg = load_config(path, {"engine": {"k": {"k3": 3.0}}})
    assert cfg.engine.k.as_array().tolist() == [0.25, 0.5, 3.0]
    assert cfg.engine.seed_count == 4
    assert cfg.axis == Axis.PHASE


def test_load_empty_and_invalid_files(tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text("", encoding="utf-8")
    assert load_config(empty) == ToolConfig()
    listing = tmp_path / "list.json"
    listing.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ValueError):
        load_config(listing)


def test_dump_then_load(tmp_path):
    cfg = load_config(None, {"engine": {"epsilon": [0.2, 0.3, 0.4], "rng_seed": 7}, "ssim_window": 5})
    path = tmp_path / "dumped.json"
    path.write_bytes(dump_config(cfg))
    assert load_config(path) == cfg
