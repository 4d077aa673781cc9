"""Regenerate the deterministic test fixture images in tests/fixtures/."""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from copyaudit import imagecore  # noqa: E402

SIZE = 96
OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def grid():
    y, x = np.mgrid[0:SIZE, 0:SIZE]
    return y.astype(float), x.astype(float)


def texture(rng, lo=-0.03, hi=0.03):
    return rng.uniform(lo, hi, size=(SIZE, SIZE, 1))


def save(name, rgb):
    img = imagecore.ImageBuffer.from_array(np.clip(rgb, 0.0, 1.0))
    (OUT / name).write_bytes(imagecore.encode_png(img))
    print("wrote", OUT / name)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240817)
    y, x = grid()
    c = SIZE / 2

    # bright circle on dark background
    base = np.full((SIZE, SIZE, 3), [0.12, 0.14, 0.2])
    disk = (y - c) ** 2 + (x - c) ** 2 <= (SIZE * 0.3) ** 2
    base[disk] = [0.9, 0.85, 0.6]
    save("circle.png", base + texture(rng))

    # dark square, off-center, on light background
    base = np.full((SIZE, SIZE, 3), [0.85, 0.82, 0.78])
    base[18:60, 30:72] = [0.15, 0.2, 0.3]
    save("square.png", base + texture(rng))

    # bright triangle over a vertical gradient
    base = np.stack([np.tile((y / SIZE) * 0.35 + 0.1, (1, 1))] * 3, axis=2)
    tri = (y > 25) & (np.abs(x - c) < (y - 25) * 0.6) & (y < 80)
    base[tri] = [0.95, 0.9, 0.3]
    save("triangle.png", base + texture(rng))

    # face-like portrait: oval head with eyes and mouth on a dark field
    base = np.full((SIZE, SIZE, 3), [0.1, 0.1, 0.14])
    head = ((y - c) / (SIZE * 0.38)) ** 2 + ((x - c) / (SIZE * 0.27)) ** 2 <= 1.0
    base[head] = [0.85, 0.7, 0.55]
    for ex in (c - 12, c + 12):
        eye = (y - (c - 10)) ** 2 + (x - ex) ** 2 <= 9
        base[eye] = [0.1, 0.1, 0.1]
    mouth = (np.abs(y - (c + 16)) < 2) & (np.abs(x - c) < 10)
    base[mouth] = [0.5, 0.15, 0.15]
    save("portrait.png", base + texture(rng))

    # bright ring on mid-gray background
    base = np.full((SIZE, SIZE, 3), [0.35, 0.35, 0.35])
    r2 = (y - c) ** 2 + (x - c) ** 2
    ring = (r2 >= (SIZE * 0.22) ** 2) & (r2 <= (SIZE * 0.34) ** 2)
    base[ring] = [0.95, 0.95, 0.95]
    save("rings.png", base + texture(rng))

    # diagonal bar on a dim checker field
    base = np.full((SIZE, SIZE, 3), [0.2, 0.22, 0.2])
    checker = ((y // 12 + x // 12) % 2).astype(bool)
    base[checker] *= 1.3
    bar = np.abs(y - x) < 9
    base[bar] = [0.9, 0.4, 0.3]
    save("bar.png", base + texture(rng))


if __name__ == "__main__":
    main()
