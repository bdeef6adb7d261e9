#!/usr/bin/env python3
"""Build IDX-format MNIST files from the digits shipped in the npm `mnist` package.

Usage:
    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 scripts/mnist_from_npm.py package/src/digits data/mnist

Each class keeps its last 200 images for the test split; the rest go to train.
Pixels are stored as round(v * 255).
"""
import gzip
import json
import struct
import sys
from pathlib import Path

TEST_PER_CLASS = 200


def load_class(path):
    data = json.loads(path.read_text())["data"]
    assert len(data) % 784 == 0, path
    return [data[i : i + 784] for i in range(0, len(data), 784)]


def write_split(out, prefix, items):
    images = bytearray(struct.pack(">IIII", 0x803, len(items), 28, 28))
    labels = bytearray(struct.pack(">II", 0x801, len(items)))
    for label, pixels in items:
        images.extend(min(255, max(0, round(v * 255))) for v in pixels)
        labels.append(label)
    for name, payload in (("images-idx3", images), ("labels-idx1", labels)):
        path = out / f"{prefix}-{name}-ubyte.gz"
        path.write_bytes(gzip.compress(bytes(payload), mtime=0))


def main():
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    train, test = [], []
    for digit in range(10):
        images = load_class(src / f"{digit}.json")
        split = len(images) - TEST_PER_CLASS
        train += [(digit, im) for im in images[:split]]
        test += [(digit, im) for im in images[split:]]
    write_split(out, "train", train)
    write_split(out, "t10k", test)
    print(f"train {len(train)} test {len(test)} -> {out}")


if __name__ == "__main__":
    main()
