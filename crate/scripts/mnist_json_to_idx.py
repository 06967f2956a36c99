"""Convert the per-digit JSON files of the npm `mnist` package to gzipped IDX.

Usage: python3 scripts/mnist_json_to_idx.py <package>/src/digits data/mnist10k

Pixels are stored as floats in [0, 1] and are rounded back to bytes. The
10k examples are shuffled with a fixed seed and split 8000/2000.
"""

import gzip
import json
import random
import struct
import sys
from pathlib import Path

N_TRAIN = 8000
SEED = 0


def write_idx(out_dir, name, examples):
    images = struct.pack(">IIII", 0x803, len(examples), 28, 28)
    images += bytes(p for pixels, _ in examples for p in pixels)
    labels = struct.pack(">II", 0x801, len(examples)) + bytes(y for _, y in examples)
    # mtime=0 keeps the archives byte-reproducible.
    for suffix, payload in (("images", images), ("labels", labels)):
        with open(out_dir / f"{name}-{suffix}-idx.gz", "wb") as f:
            with gzip.GzipFile(fileobj=f, mode="wb", mtime=0) as gz:
                gz.write(payload)


def main():
    src, out_dir = Path(sys.argv[1]), Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)
    examples = []
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(data) % 784 == 0
        for k in range(len(data) // 784):
            pixels = [min(255, max(0, round(v * 255))) for v in data[784 * k : 784 * (k + 1)]]
            examples.append((pixels, digit))
    random.Random(SEED).shuffle(examples)
    write_idx(out_dir, "train", examples[:N_TRAIN])
    write_idx(out_dir, "test", examples[N_TRAIN:])
    print(f"{len(examples)} examples -> {out_dir}")


if __name__ == "__main__":
    main()
