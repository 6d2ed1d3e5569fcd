#!/usr/bin/env python3
"""Writes the NCI60 expression matrix shipped in the ISLP wheel as an alsi input CSV.

usage: export_nci60.py ISLP-WHEEL OUT.csv
"""
import csv
import io
import sys
import zipfile

import numpy as np


def main(wheel, out):
    with zipfile.ZipFile(wheel) as z:
        values = np.load(io.BytesIO(z.read("ISLP/data/NCI60data.npy")))
        labels = list(csv.DictReader(io.TextIOWrapper(z.open("ISLP/data/NCI60labs.csv"))))
    names = [row["label"].strip() for row in labels]
    if values.shape[0] != len(names):
        sys.exit(f"label count {len(names)} does not match {values.shape[0]} rows")
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["label"] + [f"g{j + 1}" for j in range(values.shape[1])])
        for name, row in zip(names, values):
            w.writerow([name] + [repr(float(v)) for v in row])


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__.strip())
    main(sys.argv[1], sys.argv[2])
