# src/fftcrystal/cli.py
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import orjson
import yaml
from pydantic import BaseModel, ValidationError

from .config import ToolConfig, dump_config, load_config
from .denoise.noise import corrupt_poisson_gaussian, denoise_image
from .dictionary.codec import deserialize, serialize
from .dictionary.sparse import build_dictionary, reconstruct
from .engine.fit import fit
from .errors import FftCrystalError
from .imaging.images import load_image, save_image
from .imaging.render import render_crystals
from .quality.metrics import channel_histograms, compare
from .spectral.topology import PoleLabel
from .spectral.transform import Axis, build_point_cloud, forward_spectrum, merge_channels, split_channels
from .stego.embed import StegoParams, crystallize_cover, embed, extract, intercept_extract
from .stego.keyfile import deserialize_key, serialize_key

logger = logging.getLogger("fftcrystal.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PROCESSING = 2

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_DATEFMT = "%Y-%m-%d %H:%M:%S"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------- config flags ----------------

# flag dest -> path into ToolConfig
CONFIG_FLAGS = {
    "k1": ("engine", "k", "k1"),
    "k2": ("engine", "k", "k2"),
    "k3": ("engine", "k", "k3"),
    "sigma_floor": ("engine", "sigma_floor"),
    "epsilon": ("engine", "epsilon"),
    "max_iterations": ("engine", "max_iterations"),
    "seed_count": ("engine", "seed_count"),
    "rng_seed": ("engine", "rng_seed"),
    "density_bins": ("engine", "density_bins"),
    "tile_size": ("engine", "tile_size"),
    "allow_any_feedback": ("engine", "allow_any_feedback"),
    "mask": ("mask_radius",),
    "dev_percentile": ("noise", "dev_percentile"),
    "mag_percentile": ("noise", "mag_percentile"),
    "protect_dc_radius": ("noise", "protect_dc_radius"),
    "alpha": ("stego", "alpha"),
    "beta": ("stego", "beta"),
    "axis": ("axis",),
    "max_value": ("max_value",),
    "ssim_window": ("ssim_window",),
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration (overrides --config)")
    g.add_argument("--config", type=Path, help="JSON config file")
    g.add_argument("--dump-config", type=Path, help="write the effective config here")
    g.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    for name in ("k1", "k2", "k3", "sigma_floor", "alpha", "beta", "mask", "dev_percentile", "mag_percentile",
                 "protect_dc_radius", "max_value", "tile_size"):
        g.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)
    g.add_argument("--epsilon", type=float, nargs=3, metavar=("E1", "E2", "E3"))
    for name in ("max_iterations", "seed_count", "rng_seed", "density_bins", "ssim_window"):
        g.add_argument(f"--{name.replace('_', '-')}", dest=name, type=int)
    g.add_argument("--allow-any-feedback", action="store_true", default=None)
    g.add_argument("--axis", choices=[a.value for a in Axis])


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for dest, path in CONFIG_FLAGS.items():
        val = getattr(args, dest, None)
        if val is None:
            continue
        node = out
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = list(val) if isinstance(val, list) else val
    return out


# ---------------- output helpers ----------------

def _emit(report: Any, path: Optional[Path] = None) -> None:
    if isinstance(report, BaseModel):
        data = report.model_dump(mode="json")
    elif isinstance(report, list):
        data = [r.model_dump(mode="json") for r in report]
    else:
        data = report
    blob = orjson.dumps(data, option=orjson.OPT_INDENT_2)
    if path is not None:
        Path(path).write_bytes(blob + b"\n")
    sys.stdout.write(blob.decode("utf-8") + "\n")


def _channel_path(path: Path, channel: str, n_channels: int) -> Path:
    if n_channels == 1:
        return path
    return path.with_name(f"{path.stem}_{channel}{path.suffix}")


# ---------------- subcommands ----------------

def cmd_crystallize(args, cfg: ToolConfig) -> None:
    img = load_image(args.image)
    planes = split_channels(img)
    dumps = []
    for ch, plane in planes:
        cloud = build_point_cloud(forward_spectrum(plane), cfg.axis, ch)
        dumps.append((ch, fit(cloud, cfg.engine)))
    for ch, clustering in dumps:
        out = _channel_path(args.out, ch.value, len(planes))
        clustering.dump_csv(out)
        print(f"[{ch.value}] {len(clustering.clusters)} crystals -> {out}")


def cmd_sparsify(args, cfg: ToolConfig) -> None:
    img = load_image(args.image)
    dicts, reports = [], []
    for ch, plane in split_channels(img):
        spec = forward_spectrum(plane)
        d, rep = build_dictionary(spec, fit(build_point_cloud(spec, Axis.MAGNITUDE, ch), cfg.engine), cfg.mask_radius)
        dicts.append(d)
        reports.append(rep)
    blob = serialize(dicts)
    args.out.write_bytes(blob)
    _emit(reports, args.report)


def cmd_reconstruct(args, cfg: ToolConfig) -> None:
    dicts = deserialize(args.dictionary.read_bytes())
    img = merge_channels([reconstruct(d) for d in dicts])
    save_image(img, args.out)


def cmd_denoise(args, cfg: ToolConfig) -> None:
    noisy = load_image(args.image)
    ref = load_image(args.reference) if args.reference else None
    out, report = denoise_image(noisy, cfg.engine, cfg.noise, reference=ref, max_value=cfg.max_value,
                                window=cfg.ssim_window)
    save_image(out, args.out)
    _emit(report, args.report)


def cmd_embed(args, cfg: ToolConfig) -> None:
    params = StegoParams.from_config(cfg)
    cover = load_image(args.cover)
    secret = load_image(args.secret)
    key = crystallize_cover(cover, params)
    stego = embed(key, secret, params)
    blob = serialize_key(key)
    save_image(stego, args.out)
    args.key.write_bytes(blob)


def cmd_extract(args, cfg: ToolConfig) -> None:
    key = deserialize_key(args.key.read_bytes())
    save_image(extract(load_image(args.stego), key), args.out)


def cmd_intercept(args, cfg: ToolConfig) -> None:
    params = StegoParams.from_config(cfg)
    save_image(intercept_extract(load_image(args.stego), load_image(args.cover), params), args.out)


def cmd_compare(args, cfg: ToolConfig) -> None:
    a = load_image(args.a)
    b = load_image(args.b)
    report = compare(a, b, max_value=cfg.max_value, window=cfg.ssim_window)
    if args.histogram is not None:
        names = {Path(args.a).stem: a, Path(args.b).stem: b}
        if len(names) < 2:
            names = {"a": a, "b": b}
        channel_histograms(names, cfg.max_value).to_csv(args.histogram, index=False)
    _emit(report)


def cmd_render(args, cfg: ToolConfig) -> None:
    planes = split_channels(load_image(args.image))
    wanted = [(ch, p) for ch, p in planes if args.channel is None or ch.value == args.channel]
    if not wanted:
        raise UsageError(f"image has no channel {args.channel} (has {', '.join(ch.value for ch, _ in planes)})")
    ch, plane = wanted[0]
    clustering = fit(build_point_cloud(forward_spectrum(plane), cfg.axis, ch), cfg.engine)
    pole = PoleLabel(args.pole) if args.pole else None
    render_crystals(clustering, pole=pole).save_png(args.out)


def cmd_corrupt(args, cfg: ToolConfig) -> None:
    clean = load_image(args.image)
    noisy = corrupt_poisson_gaussian(clean, args.peak, args.read_sigma, cfg.engine.rng_seed, cfg.max_value)
    save_image(noisy, args.out)


# ---------------- parser ----------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="fftcrystal", description="Frequency-crystal clustering of image spectra")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name: str, fn, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        _add_config_flags(p)
        p.set_defaults(func=fn)
        return p

    p = add("crystallize", cmd_crystallize, "fit crystals and dump them as CSV")
    p.add_argument("image", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = add("sparsify", cmd_sparsify, "build a magnitude dictionary file")
    p.add_argument("image", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--report", type=Path)

    p = add("reconstruct", cmd_reconstruct, "rebuild an image from a dictionary file")
    p.add_argument("dictionary", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = add("denoise", cmd_denoise, "zero the frequencies of suspicious crystals")
    p.add_argument("image", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--reference", type=Path, help="clean image for before/after quality")
    p.add_argument("--report", type=Path)

    p = add("embed", cmd_embed, "hide a secret image in a crystallized cover")
    p.add_argument("cover", type=Path)
    p.add_argument("secret", type=Path)
    p.add_argument("--key", type=Path, required=True, help="key file to write")
    p.add_argument("--out", type=Path, required=True)

    p = add("extract", cmd_extract, "recover a secret with the key")
    p.add_argument("stego", type=Path)
    p.add_argument("--key", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = add("intercept", cmd_intercept, "attempt extraction with the original cover instead of the key")
    p.add_argument("stego", type=Path)
    p.add_argument("cover", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = add("compare", cmd_compare, "PSNR / SSIM / UQI of two images")
    p.add_argument("a", type=Path)
    p.add_argument("b", type=Path)
    p.add_argument("--histogram", type=Path, help="write 256-bin channel histograms as CSV")

    p = add("render", cmd_render, "draw the crystals of an image spectrum as PNG")
    p.add_argument("image", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--pole", choices=[p.value for p in PoleLabel])
    p.add_argument("--channel", choices=["gray", "R", "G", "B"])

    p = add("corrupt", cmd_corrupt, "add Poisson-Gaussian noise")
    p.add_argument("image", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--peak", type=float, default=30.0)
    p.add_argument("--read-sigma", type=float, default=5.0)
    return ap


def run(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    level = "DEBUG" if args.verbose else os.getenv("FFTCRYSTAL_LOG_LEVEL", "INFO")
    logging.basicConfig(level=level, format=LOG_FORMAT, datefmt=LOG_DATEFMT, stream=sys.stderr)

    try:
        cfg = load_config(args.config, _overrides(args))
    except (ValidationError, ValueError, OSError, yaml.YAMLError) as e:
        logger.error(f"invalid configuration: {e}")
        return EXIT_USAGE
    if not args.verbose:
        logging.getLogger().setLevel(cfg.log_level.upper())

    t0 = time.time()
    try:
        args.func(args, cfg)
        if args.dump_config is not None:
            args.dump_config.write_bytes(dump_config(cfg))
    except UsageError as e:
        logger.error(str(e))
        return EXIT_USAGE
    except (FftCrystalError, OSError) as e:
        code = getattr(e, "code", None)
        logger.error(f"{args.command} failed{f' [{code}]' if isinstance(code, str) else ''}: {e}")
        return EXIT_PROCESSING
    logger.info(f"{args.command} done in {time.time() - t0:.2f}s")
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
