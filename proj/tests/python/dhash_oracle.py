"""Reference difference hash in numpy, independent of the C++ code."""

import numpy as np
from PIL import Image


def luma(path):
    img = np.asarray(Image.open(path).convert("RGB"), dtype=np.float64)
    y = 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]
    return np.minimum(np.round(y), 255.0)


def resize_bilinear(gray, out_h=8, out_w=9):
    """Two-tap bilinear with half-pixel centres, clamped at the borders."""
    h, w = gray.shape
    ys = np.clip((np.arange(out_h) + 0.5) * h / out_h - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * w / out_w - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = gray[np.ix_(y0, x0)] + fx * (gray[np.ix_(y0, x1)] - gray[np.ix_(y0, x0)])
    bottom = gray[np.ix_(y1, x0)] + fx * (gray[np.ix_(y1, x1)] - gray[np.ix_(y1, x0)])
    return top + fy * (bottom - top)


def dhash(gray):
    small = resize_bilinear(gray)
    bits = (small[:, :-1] > small[:, 1:]).flatten()
    return int("".join("1" if b else "0" for b in bits), 2)


def dhash_hex(path):
    return format(dhash(luma(path)), "016x")


if __name__ == "__main__":
    import sys

    for p in sys.argv[1:]:
        print(p, dhash_hex(p))
