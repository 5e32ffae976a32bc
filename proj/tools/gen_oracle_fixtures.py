#!/usr/bin/env python3
"""Freeze Pillow reference outputs for the deterministic image operations.

The C++ tests read the manifest written here and compare byte-for-byte.
Regenerate with:  python3 tools/gen_oracle_fixtures.py tests/data/oracle
"""

import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image, ImageEnhance, ImageOps

FILL = (128, 128, 128)


def varied_images(rng, count, width, height):
    """Random images with deliberately uneven statistics.

    Uniform noise alone makes equalize/autocontrast nearly trivial, so the
    set mixes narrow ranges, few-level histograms, gradients and constant
    channels.
    """
    out = []
    ys, xs = np.mgrid[0:height, 0:width]
    for i in range(count):
        kind = i % 6
        img = np.empty((height, width, 3), dtype=np.int64)
        for c in range(3):
            if kind == 0:
                ch = rng.integers(0, 256, size=(height, width))
            elif kind == 1:
                lo = int(rng.integers(0, 200))
                hi = int(rng.integers(lo, 256))
                ch = rng.integers(lo, hi + 1, size=(height, width))
            elif kind == 2:
                levels = rng.choice(256, size=int(rng.integers(1, 6)), replace=False)
                ch = levels[rng.integers(0, len(levels), size=(height, width))]
            elif kind == 3:
                gx, gy = rng.uniform(-6, 6, size=2)
                base = rng.uniform(0, 255)
                ch = base + gx * xs + gy * ys + rng.normal(0, 8, size=(height, width))
            elif kind == 4:
                ch = (rng.uniform(0, 1, size=(height, width)) ** 3) * 255
            else:
                if c == int(rng.integers(0, 3)):
                    ch = np.full((height, width), int(rng.integers(0, 256)))
                else:
                    ch = rng.integers(0, 256, size=(height, width))
            img[:, :, c] = np.clip(np.rint(ch), 0, 255)
        out.append(img.astype(np.uint8))
    return out


def grid_signed(max_value):
    vals = []
    for m in range(10):
        v = m / 9 * max_value
        vals.extend([v, -v])
    return vals


def enhance_factors():
    vals = [0.0, 1.0, 2.5, 0.37]
    for m in range(10):
        vals.extend([1 + m / 9 * 0.9, 1 - m / 9 * 0.9])
    return vals


def affine(img, coeffs):
    return img.transform(img.size, Image.AFFINE, coeffs, Image.NEAREST, fillcolor=FILL)


def run_case(op, img, p):
    if op == "invert":
        return ImageOps.invert(img)
    if op == "solarize":
        return ImageOps.solarize(img, p)
    if op == "posterize":
        return ImageOps.posterize(img, p)
    if op == "equalize":
        return ImageOps.equalize(img)
    if op == "autocontrast":
        return ImageOps.autocontrast(img)
    if op == "contrast":
        return ImageEnhance.Contrast(img).enhance(p)
    if op == "color":
        return ImageEnhance.Color(img).enhance(p)
    if op == "brightness":
        return ImageEnhance.Brightness(img).enhance(p)
    if op == "sharpness":
        return ImageEnhance.Sharpness(img).enhance(p)
    if op == "shear_x":
        return affine(img, (1, p, 0, 0, 1, 0))
    if op == "shear_y":
        return affine(img, (1, 0, 0, p, 1, 0))
    if op == "translate_x":
        return affine(img, (1, 0, p, 0, 1, 0))
    if op == "translate_y":
        return affine(img, (1, 0, 0, 0, 1, p))
    if op == "rotate":
        return img.rotate(p, resample=Image.NEAREST, fillcolor=FILL)
    raise ValueError(op)


def cycle(values, count):
    return [values[i % len(values)] for i in range(count)]


def write_set(outdir, name, images, cases):
    h, w, _ = images[0].shape
    inputs_file = f"{name}_inputs.bin"
    (outdir / inputs_file).write_bytes(b"".join(im.tobytes() for im in images))
    entry = {"name": name, "width": w, "height": h, "count": len(images),
             "inputs": inputs_file, "cases": []}
    for op, params in cases:
        pil = [Image.fromarray(im, "RGB") for im in images]
        outs = [np.asarray(run_case(op, im, p).convert("RGB")) for im, p in zip(pil, params)]
        fname = f"{name}_{op}.bin"
        (outdir / fname).write_bytes(b"".join(o.tobytes() for o in outs))
        entry["cases"].append({"op": op, "params": params, "output": fname})
    return entry


def main():
    outdir = Path(sys.argv[1] if len(sys.argv) > 1 else "tests/data/oracle")
    outdir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20180524)
    n = 100
    size = 32
    images = varied_images(rng, n, size, size)
    translate_max = 150 * size / 331
    main_cases = [
        ("invert", cycle([None], n)),
        ("solarize", cycle([0, 1, 128, 255, 256] + [round(256 * (1 - m / 9)) for m in range(10)], n)),
        ("posterize", cycle(list(range(1, 9)), n)),
        ("equalize", cycle([None], n)),
        ("autocontrast", cycle([None], n)),
        ("contrast", cycle(enhance_factors(), n)),
        ("color", cycle(enhance_factors(), n)),
        ("brightness", cycle(enhance_factors(), n)),
        ("sharpness", cycle(enhance_factors(), n)),
        ("shear_x", cycle(grid_signed(0.3), n)),
        ("shear_y", cycle(grid_signed(0.3), n)),
        ("translate_x", cycle(grid_signed(translate_max) + [3.0, -3.0, 0.5, -0.5], n)),
        ("translate_y", cycle(grid_signed(translate_max) + [3.0, -3.0, 0.5, -0.5], n)),
        ("rotate", cycle(grid_signed(30.0) + [90.0, 180.0, -90.0, 45.0, 360.0], n)),
    ]
    sets = [write_set(outdir, "random32", images, main_cases)]

    # Small named fixtures.
    small_rng = np.random.default_rng(7)
    eq8 = [small_rng.integers(0, 256, size=(8, 8, 3)).astype(np.uint8)]
    sets.append(write_set(outdir, "equalize8", eq8, [("equalize", [None])]))

    ramp = np.arange(256, dtype=np.uint8).reshape(16, 16)
    ramp_img = np.stack([ramp, ramp[::-1], ramp.T], axis=-1).copy()
    const_img = np.full((16, 16, 3), 77, dtype=np.uint8)
    sets.append(write_set(outdir, "ramp16", [ramp_img, const_img],
                          [("equalize", [None, None]), ("autocontrast", [None, None])]))

    col8 = [small_rng.integers(0, 256, size=(8, 8, 3)).astype(np.uint8)]
    sets.append(write_set(outdir, "color8", col8, [("color", [0.0])]))

    rot16 = [small_rng.integers(0, 256, size=(16, 16, 3)).astype(np.uint8)]
    sets.append(write_set(outdir, "rotate16", rot16, [("rotate", [30.0])]))

    odd = [rng.integers(0, 256, size=(13, 21, 3)).astype(np.uint8) for _ in range(4)]
    sets.append(write_set(outdir, "odd13x21", odd, [
        ("rotate", [30.0, -17.5, 7.0, -30.0]),
        ("shear_x", [0.3, -0.2, 0.1, -0.3]),
        ("shear_y", [0.3, -0.2, 0.1, -0.3]),
        ("translate_x", [2.4, -7.9, 30.0, -0.2]),
        ("sharpness", [0.1, 1.9, 0.0, 0.55]),
        ("contrast", [0.1, 1.9, 0.0, 0.55]),
    ]))

    manifest = {"generator": "Pillow " + Image.__version__, "fill": FILL[0], "sets": sets}
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")


if __name__ == "__main__":
    main()
