#!/usr/bin/env python3
"""Write a 5000-image MNIST subset (500 per class) as IDX files.

The images come from the CSV bundled inside the `mlxtend` wheel, so only a
PyPI mirror is needed. Output: <out>/mnist5k-images-idx3-ubyte and
<out>/mnist5k-labels-idx1-ubyte, in the original CSV row order.
"""
import argparse
import glob
import gzip
import os
import struct
import subprocess
import sys
import tempfile
import zipfile


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "mnist"))
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        subprocess.check_call(
            [sys.executable, "-m", "pip", "download", "mlxtend", "--no-deps", "-q", "-d", tmp]
        )
        wheel = glob.glob(os.path.join(tmp, "mlxtend-*.whl"))[0]
        raw = zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz")

    rows = gzip.decompress(raw).decode().strip().split("\n")
    pixels = bytearray()
    labels = bytearray()
    for row in rows:
        vals = [int(float(v)) for v in row.split(",")]
        assert len(vals) == 785
        pixels.extend(vals[:784])
        labels.append(vals[784])

    os.makedirs(args.out, exist_ok=True)
    n = len(rows)
    with open(os.path.join(args.out, "mnist5k-images-idx3-ubyte"), "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        f.write(pixels)
    with open(os.path.join(args.out, "mnist5k-labels-idx1-ubyte"), "wb") as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels)
    print(f"wrote {n} images to {os.path.abspath(args.out)}")


if __name__ == "__main__":
    main()
