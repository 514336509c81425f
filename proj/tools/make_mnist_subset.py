#!/usr/bin/env python3
"""Build IDX files from the 10,000 MNIST digits bundled in the npm `mnist` package.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/

Each digit's samples are split in order: the first 85% go to the training
files, the rest to the test files. Samples are interleaved across digits so
the files look like the standard MNIST ordering. Pixel values in the package
are byte/255 rounded to three decimals, which round back to the exact byte.
"""
import json
import struct
import sys
import tarfile
import io
from pathlib import Path

TRAIN_FRACTION = 0.85


def idx3(images):
    out = bytearray(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
    for img in images:
        out += bytes(img)
    return bytes(out)


def idx1(labels):
    return struct.pack(">II", 0x00000801, len(labels)) + bytes(labels)


def interleave(per_digit):
    rows = []
    longest = max(len(v) for v in per_digit.values())
    for i in range(longest):
        for d in range(10):
            if i < len(per_digit[d]):
                rows.append((per_digit[d][i], d))
    return [r[0] for r in rows], [r[1] for r in rows]


def main():
    src, dst = Path(sys.argv[1]), Path(sys.argv[2])
    train, test = {}, {}
    for d in range(10):
        raw = json.loads((src / f"{d}.json").read_text())["data"]
        n = len(raw) // 784
        imgs = [[round(v * 255) for v in raw[k * 784:(k + 1) * 784]] for k in range(n)]
        cut = int(n * TRAIN_FRACTION)
        train[d], test[d] = imgs[:cut], imgs[cut:]
    files = {}
    for name, split in (("train", train), ("t10k", test)):
        images, labels = interleave(split)
        files[f"{name}-images-idx3-ubyte"] = idx3(images)
        files[f"{name}-labels-idx1-ubyte"] = idx1(labels)
    dst.mkdir(parents=True, exist_ok=True)
    with tarfile.open(dst / "mnist-subset.tar.gz", "w:gz", format=tarfile.USTAR_FORMAT) as tar:
        for fname, blob in sorted(files.items()):
            info = tarfile.TarInfo(f"mnist-subset/{fname}")
            info.size = len(blob)
            info.mtime = 0
            tar.addfile(info, io.BytesIO(blob))
    for fname, blob in sorted(files.items()):
        print(fname, len(blob))


if __name__ == "__main__":
    main()
