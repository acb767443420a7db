#!/usr/bin/env python3
"""
Writes the bundled synthetic corpus (PGM for gray images, PPM for RGB).

Usage:
    python make_corpus.py --out ./corpus --size 128
"""
import argparse
from pathlib import Path

from fftcrystal.imaging.corpus import CORPUS
from fftcrystal.imaging.images import save_image


def write_one(name: str, out_dir: Path, size: int, force: bool) -> bool:
    """True when written, False when skipped."""
    img = CORPUS[name](size=size)
    path = out_dir / f"{name}.{'ppm' if img.ndim == 3 else 'pgm'}"
    if path.exists() and not force:
        print(f"[{name}] ⊘ {path} already exists, skipping")
        return False
    save_image(img, path)
    print(f"[{name}] ✓ {path} ({size}x{size})")
    return True


def main():
    ap = argparse.ArgumentParser(description="Write the synthetic test corpus to disk.")
    ap.add_argument("--out", default="./corpus", help="output directory (default: ./corpus)")
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("-n", "--name", choices=sorted(CORPUS), help="write only this image")
    ap.add_argument("--force", action="store_true", help="overwrite existing files")
    args = ap.parse_args()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = [args.name] if args.name else list(CORPUS)
    written = sum(write_one(n, out_dir, args.size, args.force) for n in names)
    print(f"\n{written}/{len(names)} images written to {out_dir}")


if __name__ == "__main__":
    main()
