"""Regenerates the image fixtures. Deterministic."""

import pathlib

import numpy as np
from PIL import Image

OUT = pathlib.Path(__file__).parent / "images"


def base_image():
    rng = np.random.default_rng(7)
    h, w = 96, 128
    y, x = np.mgrid[0:h, 0:w]
    r = 120 + 80 * np.sin(x / 17.0) * np.cos(y / 23.0)
    g = 90 + 60 * np.cos((x + y) / 29.0)
    b = 60 + 0.9 * x
    img = np.stack([r, g, b], axis=-1)
    img[30:70, 40:90] += np.array([70, -40, 20])
    img += rng.normal(0, 4, img.shape)
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def perturbed(img):
    rng = np.random.default_rng(11)
    out = img.astype(np.int16)
    h, w, _ = img.shape
    n = int(round(0.05 * h * w))
    idx = rng.choice(h * w, size=n, replace=False)
    sign = rng.choice([-1, 1], size=n)
    rows, cols = np.unravel_index(idx, (h, w))
    out[rows, cols, :] += sign[:, None]
    return np.clip(out, 0, 255).astype(np.uint8)


def main():
    OUT.mkdir(exist_ok=True)
    img = base_image()
    Image.fromarray(img).save(OUT / "scene.png")
    Image.fromarray(perturbed(img)).save(OUT / "scene_perturbed.png")
    Image.fromarray(img).save(OUT / "scene_reencoded.jpg", quality=90)
    Image.fromarray(img).resize((256, 192), Image.BILINEAR).save(OUT / "scene_large.png")
    Image.fromarray(255 - img).save(OUT / "scene_inverted.png")
    ramp = np.tile(np.linspace(10, 245, 64).round().astype(np.uint8), (32, 1))
    Image.fromarray(ramp, mode="L").save(OUT / "ramp.png")
    Image.fromarray(ramp[:, ::-1].copy(), mode="L").save(OUT / "ramp_reversed.png")
    Image.fromarray(np.full((20, 30), 128, np.uint8), mode="L").save(OUT / "gray.png")
    (OUT / "not_an_image.png").write_bytes(b"\x89PNG\r\n\x1a\nthis is not a png")


if __name__ == "__main__":
    main()
