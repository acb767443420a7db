import struct

import orjson
import numpy as np
import pandas as pd
import pytest

from fftcrystal.cli import EXIT_OK, EXIT_PROCESSING, EXIT_USAGE, run
from fftcrystal.config import load_config
from fftcrystal.dictionary.codec import MAGIC, VERSION
from fftcrystal.engine.fit import DUMP_COLUMNS
from fftcrystal.imaging import corpus
from fftcrystal.imaging.images import load_image, save_image

FAST = ["--density-bins", "2", "--max-iterations", "30"]


@pytest.fixture
def images(tmp_path):
    paths = {}
    for name, img in (("scene", corpus.scene(size=16, seed=3)), ("board", corpus.checkerboard(size=16, cell=4)),
                      ("color", corpus.scene_rgb(size=16))):
        suffix = ".ppm" if img.ndim == 3 else ".pgm"
        paths[name] = tmp_path / f"{name}{suffix}"
        save_image(img, paths[name])
    return paths


def _json_out(capsys):
    return orjson.loads(capsys.readouterr().out)


# ---------------- compare ----------------

def test_compare_identical(images, capsys):
    assert run(["compare", str(images["scene"]), str(images["scene"])]) == EXIT_OK
    report = _json_out(capsys)
    assert report["psnr"] == "inf"
    assert report["ssim"] == pytest.approx(1.0)


def test_compare_writes_histograms(images, tmp_path, capsys):
    hist = tmp_path / "hist.csv"
    assert run(["compare", str(images["scene"]), str(images["board"]), "--histogram", str(hist)]) == EXIT_OK
    report = _json_out(capsys)
    assert report["psnr"] != "inf"
    df = pd.read_csv(hist)
    assert list(df.columns) == ["bin", "scene_gray", "board_gray"]
    assert df["scene_gray"].sum() == 256


# ---------------- exit codes ----------------

def test_unknown_flag_is_a_usage_error(images, tmp_path):
    out = tmp_path / "never.pgm"
    assert run(["corrupt", str(images["scene"]), "--out", str(out), "--bogus"]) == EXIT_USAGE
    assert not out.exists()


def test_missing_command_is_a_usage_error():
    assert run([]) == EXIT_USAGE


def test_policy_violation_is_a_usage_error(images, tmp_path):
    out = tmp_path / "x.csv"
    assert run(["crystallize", str(images["scene"]), "--out", str(out), "--k3", "0.5"]) == EXIT_USAGE
    assert not out.exists()


def test_bad_dictionary_is_a_processing_error(tmp_path):
    bad = tmp_path / "bad.fcd"
    bad.write_bytes(b"not a dictionary at all, just bytes")
    out = tmp_path / "out.pgm"
    assert run(["reconstruct", str(bad), "--out", str(out)]) == EXIT_PROCESSING
    assert not out.exists()


def test_dictionary_without_channels_is_a_processing_error(tmp_path):
    bad = tmp_path / "empty.fcd"
    bad.write_bytes(struct.pack("<8sHHIId", MAGIC, VERSION, 0, 16, 16, 6.0))
    out = tmp_path / "out.pgm"
    assert run(["reconstruct", str(bad), "--out", str(out)]) == EXIT_PROCESSING
    assert not out.exists()


def test_missing_input_is_a_processing_error(tmp_path):
    assert run(["compare", str(tmp_path / "a.pgm"), str(tmp_path / "b.pgm")]) == EXIT_PROCESSING


def test_oversized_secret_is_a_processing_error(images, tmp_path):
    big = tmp_path / "big.pgm"
    save_image(corpus.gradient(size=32), big)
    code = run(["embed", str(images["scene"]), str(big), "--key", str(tmp_path / "k"),
                "--out", str(tmp_path / "s.pgm"), *FAST])
    assert code == EXIT_PROCESSING
    assert not (tmp_path / "k").exists()


# ---------------- pipelines ----------------

def test_crystallize_dumps_csv(images, tmp_path):
    out = tmp_path / "crystals.csv"
    assert run(["crystallize", str(images["scene"]), "--out", str(out), *FAST]) == EXIT_OK
    df = pd.read_csv(out)
    assert list(df.columns) == DUMP_COLUMNS
    assert set(df["pole"]) <= {"zero", "infinity"}


def test_crystallize_rgb_writes_one_file_per_channel(images, tmp_path):
    out = tmp_path / "crystals.csv"
    assert run(["crystallize", str(images["color"]), "--out", str(out), *FAST]) == EXIT_OK
    for ch in ("R", "G", "B"):
        assert (tmp_path / f"crystals_{ch}.csv").exists()


def test_sparsify_then_reconstruct(images, tmp_path, capsys):
    dictionary = tmp_path / "scene.fcd"
    report = tmp_path / "report.json"
    rebuilt = tmp_path / "rebuilt.pgm"
    assert run(["sparsify", str(images["scene"]), "--out", str(dictionary), "--report", str(report),
                "--mask", "1000", *FAST]) == EXIT_OK
    (entry,) = orjson.loads(report.read_bytes())
    assert entry["passthrough_cells"] == 256
    capsys.readouterr()
    assert run(["reconstruct", str(dictionary), "--out", str(rebuilt)]) == EXIT_OK
    assert rebuilt.read_bytes() == images["scene"].read_bytes()


def test_sparsify_is_deterministic(images, tmp_path):
    for name in ("a.fcd", "b.fcd"):
        assert run(["sparsify", str(images["scene"]), "--out", str(tmp_path / name), "--mask", "3", *FAST]) == EXIT_OK
    assert (tmp_path / "a.fcd").read_bytes() == (tmp_path / "b.fcd").read_bytes()


def test_embed_extract_and_intercept(images, tmp_path):
    key, stego = tmp_path / "cover.key", tmp_path / "stego.pgm"
    args = ["embed", str(images["scene"]), str(images["board"]), "--key", str(key), "--out", str(stego), *FAST]
    assert run(args) == EXIT_OK
    first = (key.read_bytes(), stego.read_bytes())
    assert run(args) == EXIT_OK
    assert (key.read_bytes(), stego.read_bytes()) == first

    secret = tmp_path / "secret.pgm"
    attack = tmp_path / "attack.pgm"
    assert run(["extract", str(stego), "--key", str(key), "--out", str(secret)]) == EXIT_OK
    assert run(["intercept", str(stego), str(images["scene"]), "--out", str(attack), *FAST]) == EXIT_OK
    assert load_image(secret).shape == (16, 16)
    assert load_image(attack).shape == (16, 16)


def test_denoise_with_reference(images, tmp_path, capsys):
    noisy, out, report = tmp_path / "noisy.pgm", tmp_path / "clean.pgm", tmp_path / "report.json"
    assert run(["corrupt", str(images["scene"]), "--out", str(noisy), "--rng-seed", "3"]) == EXIT_OK
    assert run(["denoise", str(noisy), "--out", str(out), "--reference", str(images["scene"]),
                "--report", str(report), *FAST]) == EXIT_OK
    data = orjson.loads(report.read_bytes())
    assert _json_out(capsys) == data
    assert [c["channel"] for c in data["channels"]] == ["gray"]
    assert data["psnr_before"] is not None and data["psnr_after"] is not None
    assert load_image(out).shape == (16, 16)


def test_render_png(images, tmp_path):
    out = tmp_path / "crystals.png"
    assert run(["render", str(images["color"]), "--out", str(out), "--channel", "G", "--pole", "zero",
                *FAST]) == EXIT_OK
    assert load_image(out).shape == (16, 16, 3)
    assert run(["render", str(images["scene"]), "--out", str(out), "--channel", "R", *FAST]) == EXIT_USAGE


def test_corrupt_is_seeded(images, tmp_path):
    for name in ("a.pgm", "b.pgm"):
        assert run(["corrupt", str(images["scene"]), "--out", str(tmp_path / name), "--rng-seed", "9",
                    "--peak", "20"]) == EXIT_OK
    assert (tmp_path / "a.pgm").read_bytes() == (tmp_path / "b.pgm").read_bytes()
    assert not np.array_equal(load_image(tmp_path / "a.pgm"), load_image(images["scene"]))


# ---------------- configuration ----------------

def test_dump_config_round_trip(images, tmp_path, capsys):
    dumped = tmp_path / "effective.json"
    assert run(["compare", str(images["scene"]), str(images["scene"]), "--alpha", "0.05", "--k3", "3",
                "--epsilon", "0.2", "0.2", "0.3", "--tile-size", "8", "--dump-config", str(dumped)]) == EXIT_OK
    cfg = load_config(dumped)
    assert cfg.stego.alpha == 0.05
    assert cfg.engine.k.k3 == 3.0
    assert cfg.engine.epsilon == (0.2, 0.2, 0.3)
    assert cfg.engine.tile_size == 8.0
    capsys.readouterr()
    again = tmp_path / "again.json"
    assert run(["compare", str(images["scene"]), str(images["scene"]), "--config", str(dumped),
                "--dump-config", str(again)]) == EXIT_OK
    assert again.read_bytes() == dumped.read_bytes()


def test_flags_override_the_config_file(images, tmp_path, capsys):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text('{"stego": {"alpha": 0.1, "beta": 0.2}, "mask_radius": 4}', encoding="utf-8")
    dumped = tmp_path / "effective.json"
    assert run(["compare", str(images["scene"]), str(images["scene"]), "--config", str(cfg_file),
                "--beta", "0.3", "--dump-config", str(dumped)]) == EXIT_OK
    cfg = load_config(dumped)
    assert (cfg.stego.alpha, cfg.stego.beta, cfg.mask_radius) == (0.1, 0.3, 4.0)


def test_bad_config_file(images, tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text('{"no_such_key": 1}', encoding="utf-8")
    assert run(["compare", str(images["scene"]), str(images["scene"]), "--config", str(cfg_file)]) == EXIT_USAGE
