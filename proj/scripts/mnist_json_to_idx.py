#!/usr/bin/env python3
"""Convert the digit JSON files shipped in the npm `mnist` package into IDX files.

The npm package (https://www.npmjs.com/package/mnist, MIT) bundles 10,000
MNIST digits as flat arrays of pixel intensities divided by 255 and rounded to
three decimals. Rounding is finer than the 1/255 grid, so round(v * 255)
recovers the original byte exactly.

Usage:
    npm pack mnist && tar xzf mnist-1.1.0.tgz
    python3 scripts/mnist_json_to_idx.py package/src/digits data/mnist-10k

Each digit's samples are split 80/20 in file order into train/test and the
combined sets are shuffled with a fixed seed.
"""
import json
import random
import struct
import sys
from pathlib import Path

ROWS = COLS = 28


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(images), ROWS, COLS))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(bytes(labels))


def main():
    src, dst = Path(sys.argv[1]), Path(sys.argv[2])
    dst.mkdir(parents=True, exist_ok=True)
    train, test = [], []
    for digit in range(10):
        flat = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(flat) % (ROWS * COLS) == 0
        samples = []
        for i in range(0, len(flat), ROWS * COLS):
            px = [round(v * 255) for v in flat[i:i + ROWS * COLS]]
            assert all(0 <= p <= 255 for p in px)
            samples.append((px, digit))
        cut = (len(samples) * 4) // 5
        train += samples[:cut]
        test += samples[cut:]
    rng = random.Random(20170831)
    rng.shuffle(train)
    rng.shuffle(test)
    write_images(dst / "train-images-idx3-ubyte", [s[0] for s in train])
    write_labels(dst / "train-labels-idx1-ubyte", [s[1] for s in train])
    write_images(dst / "t10k-images-idx3-ubyte", [s[0] for s in test])
    write_labels(dst / "t10k-labels-idx1-ubyte", [s[1] for s in test])
    print(f"train={len(train)} test={len(test)} -> {dst}")


if __name__ == "__main__":
    main()
