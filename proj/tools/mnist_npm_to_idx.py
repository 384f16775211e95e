#!/usr/bin/env python3
"""Convert the digit samples shipped with the `mnist` npm package to IDX.

The npm package stores pixels as floats in [0, 1] rounded to three decimals,
one JSON file per digit class. Multiplying by 255 and rounding recovers the
original unsigned-byte pixels. Classes are interleaved round-robin so any
prefix of the output file holds a mix of digits.

    npm install mnist
    python3 tools/mnist_npm_to_idx.py node_modules/mnist/src/digits data/mnist/images-idx3-ubyte
"""

import argparse
import json
import struct
from pathlib import Path

ROWS = COLS = 28


def load_class(path: Path) -> list[bytes]:
    flat = json.loads(path.read_text())["data"]
    size = ROWS * COLS
    if len(flat) % size:
        raise ValueError(f"{path}: length {len(flat)} is not a multiple of {size}")
    images = []
    for start in range(0, len(flat), size):
        pixels = flat[start:start + size]
        images.append(bytes(min(255, max(0, round(p * 255))) for p in pixels))
    return images


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("digits_dir", type=Path)
    parser.add_argument("output", type=Path)
    args = parser.parse_args()

    classes = [load_class(args.digits_dir / f"{d}.json") for d in range(10)]
    interleaved = []
    for i in range(max(len(c) for c in classes)):
        interleaved.extend(c[i] for c in classes if i < len(c))

    args.output.parent.mkdir(parents=True, exist_ok=True)
    with args.output.open("wb") as out:
        out.write(struct.pack(">IIII", 0x00000803, len(interleaved), ROWS, COLS))
        for image in interleaved:
            out.write(image)
    print(f"wrote {len(interleaved)} images to {args.output}")


if __name__ == "__main__":
    main()
