#!/usr/bin/env python3
# Copyright 2026 The kgfusion Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Repartition the standard UMLS triples into background/train/valid/test.

Input is a directory holding the usual train.txt / valid.txt / test.txt
(5,216 / 652 / 661 tab-separated triples). Output is a dataset directory
with background.txt (4,006), train.txt (1,321), valid.txt (569) and
test.txt (633). Valid and test are drawn from the original valid and test
files; everything left over forms the background/train pool.
"""
import argparse
import pathlib
import random

SIZES = {"background": 4006, "train": 1321, "valid": 569, "test": 633}


def read(path):
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            rows.append(tuple(line.split("\t")))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("source", type=pathlib.Path)
    ap.add_argument("dest", type=pathlib.Path)
    ap.add_argument("--seed", type=int, default=20240)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    train = read(args.source / "train.txt")
    valid = read(args.source / "valid.txt")
    test = read(args.source / "test.txt")

    rng.shuffle(valid)
    rng.shuffle(test)
    out_valid = valid[: SIZES["valid"]]
    out_test = test[: SIZES["test"]]
    pool = train + valid[SIZES["valid"]:] + test[SIZES["test"]:]
    rng.shuffle(pool)
    out_train = pool[: SIZES["train"]]
    out_background = pool[SIZES["train"]:]
    assert len(out_background) == SIZES["background"], len(out_background)

    args.dest.mkdir(parents=True, exist_ok=True)
    for name, rows in [("background", out_background), ("train", out_train),
                       ("valid", out_valid), ("test", out_test)]:
        with open(args.dest / f"{name}.txt", "w", encoding="utf-8") as fh:
            for h, r, t in sorted(rows):
                fh.write(f"{h}\t{r}\t{t}\n")


if __name__ == "__main__":
    main()
