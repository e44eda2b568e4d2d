#!/usr/bin/env python3
"""Fetch a 10k-digit MNIST sample and write it as IDX files.

Full MNIST mirrors are often unreachable from build machines, but the npm
registry is not. The `mnist` npm package ships 10,000 MNIST digits as
byte/255 values rounded to three decimals, which round-trip exactly to bytes.

The digits are shuffled with a fixed seed and split 8000/2000 into
train-*/t10k-* IDX files under the output directory (default: data/mnist).
"""
import io
import json
import os
import random
import struct
import sys
import tarfile
import urllib.request

URL = "https://registry.npmjs.org/mnist/-/mnist-1.1.0.tgz"
N_TRAIN = 8000


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(os.path.abspath(__file__)), "..", "data", "mnist")
    os.makedirs(out, exist_ok=True)
    blob = urllib.request.urlopen(URL, timeout=120).read()
    samples = []
    with tarfile.open(fileobj=io.BytesIO(blob), mode="r:gz") as tar:
        for digit in range(10):
            member = tar.extractfile(f"package/src/digits/{digit}.json")
            data = json.load(member)["data"]
            for i in range(len(data) // 784):
                px = [int(round(v * 255)) for v in data[i * 784:(i + 1) * 784]]
                samples.append((px, digit))
    random.Random(2022).shuffle(samples)
    train, test = samples[:N_TRAIN], samples[N_TRAIN:]
    write_images(os.path.join(out, "train-images-idx3-ubyte"), [s[0] for s in train])
    write_labels(os.path.join(out, "train-labels-idx1-ubyte"), [s[1] for s in train])
    write_images(os.path.join(out, "t10k-images-idx3-ubyte"), [s[0] for s in test])
    write_labels(os.path.join(out, "t10k-labels-idx1-ubyte"), [s[1] for s in test])
    print(f"wrote {len(train)} train / {len(test)} test digits to {out}")


if __name__ == "__main__":
    main()
