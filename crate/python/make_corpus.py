#!/usr/bin/env python3
"""Regenerate the desk-scale natural image corpus in data/corpus/.

Exports 256x256 grayscale crops of the photographic images bundled with
scikit-image as 8-bit binary PGM files, plus train/test manifests. The
output is deterministic, so the checked-in corpus can be reproduced with:

    python3 python/make_corpus.py
"""

import os

import numpy as np
from PIL import Image
import skimage.data

DATA_DIR = os.path.dirname(skimage.data.__file__)
OUT = os.path.join(os.path.dirname(__file__), "..", "data", "corpus")

# photographic images bundled with the scikit-image wheel (no download)
SOURCES = [
    ("camera", "camera.png"),
    ("moon", "moon.png"),
    ("astronaut", "astronaut.png"),
    ("coffee", "coffee.png"),
    ("chelsea", "chelsea.png"),
    ("coins", "coins.png"),
    ("rocket", "rocket.jpg"),
    ("clock", "clock_motion.png"),
    ("brick", "brick.png"),
    ("grass", "grass.png"),
    ("gravel", "gravel.png"),
    ("motorcycle", "motorcycle_left.png"),
    ("hubble", "hubble_deep_field.jpg"),
]

SIZE = 256


def to_gray(fname):
    arr = np.asarray(Image.open(os.path.join(DATA_DIR, fname)), dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[:, :, :3].mean(axis=2)
    return arr


def crops(arr):
    """All non-overlapping 256x256 tiles, row-major."""
    h, w = arr.shape
    out = []
    for ty in range(h // SIZE):
        for tx in range(w // SIZE):
            out.append(arr[ty * SIZE:(ty + 1) * SIZE, tx * SIZE:(tx + 1) * SIZE])
    return out


def write_pgm(path, tile):
    lo, hi = tile.min(), tile.max()
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    q = np.clip((tile - lo) * scale + 0.5, 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (SIZE, SIZE))
        f.write(q.tobytes())


def main():
    os.makedirs(OUT, exist_ok=True)
    names = []
    for name, src in SOURCES:
        arr = to_gray(src)
        if arr.shape[0] < SIZE or arr.shape[1] < SIZE:
            print(f"skip {name}: {arr.shape}")
            continue
        # cap at 4 tiles per source to keep the corpus varied
        for i, tile in enumerate(crops(arr)[:4]):
            fname = f"{name}_{i}.pgm"
            write_pgm(os.path.join(OUT, fname), tile)
            names.append(fname)
    names.sort()
    train = [n for i, n in enumerate(names) if i % 5 != 4]
    test = [n for i, n in enumerate(names) if i % 5 == 4]
    with open(os.path.join(OUT, "manifest.txt"), "w") as f:
        f.write("# full desk-scale corpus (256x256 grayscale crops)\n")
        f.write("\n".join(names) + "\n")
    with open(os.path.join(OUT, "train.txt"), "w") as f:
        f.write("# training split\n" + "\n".join(train) + "\n")
    with open(os.path.join(OUT, "test.txt"), "w") as f:
        f.write("# held-out split\n" + "\n".join(test) + "\n")
    print(f"wrote {len(names)} tiles ({len(train)} train / {len(test)} test)")


if __name__ == "__main__":
    main()
