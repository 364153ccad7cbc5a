#!/usr/bin/env python3
"""Convert the public Make3D release into the dtransfer ingest layout.

Input: the extracted Train400/Test134 archives, i.e. a directory of JPEG
images and a directory of depth .mat files (Position3DGrid, depth in the
fourth channel). Output: one subdirectory per image holding img_00000.png
(resized to 345x460) and depth_00000.pfm in meters. Training sets need
--upsample-depth since ingest requires depth at image size; test sets keep
the native grid, which is what scores are computed at.

The benchmark trains on the 134-image archive and tests on the 400-image one:

    python3 tools/make3d_convert.py --images Test134Img --depths Test134Depth --out make3d/train --upsample-depth
    python3 tools/make3d_convert.py --images Train400Img --depths Train400Depth --out make3d/test
"""

import argparse
import pathlib
import sys

import numpy as np
from PIL import Image
from scipy.io import loadmat


def write_pfm(path: pathlib.Path, depth: np.ndarray) -> None:
    h, w = depth.shape
    with open(path, "wb") as f:
        f.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        f.write(np.flipud(depth).astype("<f4").tobytes())


def depth_grid(mat_path: pathlib.Path, image_size) -> np.ndarray:
    grid = loadmat(mat_path)["Position3DGrid"]
    depth = np.asarray(grid[:, :, 3], dtype=np.float64)
    # Orient the depth grid so its long axis follows the image's long axis.
    w, h = image_size
    if (depth.shape[0] > depth.shape[1]) != (h > w):
        depth = depth.T
    return depth


def stem_key(name: str) -> str:
    # img-foo.jpg pairs with depth_sph_corr-foo.mat
    return name.split("-", 1)[1] if "-" in name else name


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--images", required=True, type=pathlib.Path)
    ap.add_argument("--depths", required=True, type=pathlib.Path)
    ap.add_argument("--out", required=True, type=pathlib.Path)
    ap.add_argument("--width", type=int, default=345)
    ap.add_argument("--height", type=int, default=460)
    ap.add_argument("--upsample-depth", action="store_true", help="resample depth to the output image size")
    args = ap.parse_args()

    depths = {stem_key(p.stem): p for p in args.depths.glob("*.mat")}
    images = sorted(p for p in args.images.iterdir() if p.suffix.lower() in (".jpg", ".jpeg", ".png"))
    written = 0
    for img_path in images:
        mat = depths.get(stem_key(img_path.stem))
        if mat is None:
            print(f"no depth for {img_path.name}, skipped", file=sys.stderr)
            continue
        img = Image.open(img_path).convert("RGB")
        depth = depth_grid(mat, img.size)
        dest = args.out / img_path.stem
        dest.mkdir(parents=True, exist_ok=True)
        img.resize((args.width, args.height), Image.BILINEAR).save(dest / "img_00000.png")
        if args.upsample_depth:
            depth = np.asarray(
                Image.fromarray(depth.astype(np.float32), mode="F").resize((args.width, args.height), Image.BILINEAR),
                dtype=np.float64,
            )
        write_pfm(dest / "depth_00000.pfm", depth)
        written += 1
    print(f"{written} items written to {args.out}")
    return 0 if written else 1


if __name__ == "__main__":
    sys.exit(main())
