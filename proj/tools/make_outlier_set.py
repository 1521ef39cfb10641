"""Write 400 non-digit grayscale PGM images for outlier-rejection runs.

Used when the ORL face database is not available locally.  The set is built
from images bundled with scikit-image, so no download is needed:
  * 200 images of the LFW subset (100 faces, 100 non-face patches, 25x25)
  * 200 random 112x92 crops of the bundled natural grayscale photographs
"""
import sys
from pathlib import Path

import numpy as np
from skimage import color, data


def write_pgm(path, img):
    img = np.asarray(img, dtype=np.uint8)
    rows, cols = img.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (cols, rows))
        f.write(img.tobytes())


def to_u8(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        img = color.rgb2gray(img[..., :3])
    if img.max() <= 1.0:
        img = img * 255.0
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def main(out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20201130)

    lfw = data.lfw_subset()
    for i, img in enumerate(lfw):
        write_pgm(out / f"lfw_{i:03d}.pgm", to_u8(img))

    photos = [data.camera(), data.moon(), data.coins(), data.astronaut(),
              data.chelsea(), data.coffee(), data.rocket(), data.grass(),
              data.gravel(), data.brick(), data.cell(), data.horse()]
    photos = [to_u8(p) for p in photos]
    for i in range(200):
        p = photos[i % len(photos)]
        r = rng.integers(0, p.shape[0] - 112 + 1)
        c = rng.integers(0, p.shape[1] - 92 + 1)
        write_pgm(out / f"crop_{i:03d}.pgm", p[r:r + 112, c:c + 92])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "outliers")
