#!/usr/bin/env python3
# Copyright 2026 The cnnbound Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Convert the digit JSON files of the npm `mnist` package to IDX files.

Each digits/<c>.json holds {"data": [...]} with 784 values in [0, 1] per
image. Images are interleaved by class (0, 1, ..., 9, 0, 1, ...) so any
prefix is close to class-balanced.
"""

import argparse
import json
import pathlib
import struct

SIDE = 28


def load(digits_dir):
    per_class = []
    for c in range(10):
        values = json.loads((digits_dir / f"{c}.json").read_text())["data"]
        if len(values) % (SIDE * SIDE):
            raise SystemExit(f"{c}.json: {len(values)} values is not a multiple of 784")
        pixels = bytes(min(255, max(0, round(v * 255))) for v in values)
        per_class.append([pixels[i:i + SIDE * SIDE] for i in range(0, len(pixels), SIDE * SIDE)])
    images, labels = [], []
    for i in range(max(len(p) for p in per_class)):
        for c, imgs in enumerate(per_class):
            if i < len(imgs):
                images.append(imgs[i])
                labels.append(c)
    return images, labels


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("digits_dir", type=pathlib.Path)
    ap.add_argument("out_dir", type=pathlib.Path)
    args = ap.parse_args()
    images, labels = load(args.digits_dir)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    with open(args.out_dir / "train-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), SIDE, SIDE))
        for img in images:
            f.write(img)
    with open(args.out_dir / "train-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))
    print(f"wrote {len(images)} images to {args.out_dir}")


if __name__ == "__main__":
    main()
