#!/usr/bin/env python3
"""Convert the Orange3 copies of the UCI BC, HEART and ION sets to data/uci/*.csv.

Orange ships the Wisconsin breast cancer table with the original integer
scores jittered into [v - 1, v]; ceil() recovers them (0.00 maps back to 1).
Heart disease columns are mapped back to the UCI numeric codes and rows with
a missing value are dropped.

usage: prepare_uci.py <orange_root> <out_dir>
"""

import csv
import math
import pathlib
import sys

HEART_CODES = {
    "gender": {"female": 0, "male": 1},
    "chest pain": {"typical ang": 1, "atypical ang": 2, "non-anginal": 3, "asymptomatic": 4},
    "rest ECG": {"normal": 0, "ST-T abnormal": 1, "left vent hypertrophy": 2},
    "slope peak exc ST": {"upsloping": 1, "flat": 2, "downsloping": 3},
    "thal": {"normal": 3, "fixed defect": 6, "reversable defect": 7},
}


def read_tab(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f, delimiter="\t"))
    return rows[0], rows[3:]


def write(path, names, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow([n.strip().replace(" ", "_") for n in names] + ["label"])
        w.writerows(rows)


def breast_cancer(root, out):
    names, rows = read_tab(root / "tests/datasets/breast-cancer-wisconsin.tab")
    data = []
    for r in rows:
        if not r or any(v in ("", "?") for v in r):
            continue
        feats = [str(max(1, math.ceil(float(v)))) for v in r[:-1]]
        data.append(feats + ["1" if r[-1] == "malign" else "0"])
    write(out / "bc.csv", names[:-1], data)
    return len(data)


def heart(root, out):
    names, rows = read_tab(root / "datasets/heart_disease.tab")
    data = []
    for r in rows:
        if not r or any(v in ("", "?") for v in r):
            continue
        feats = []
        for name, v in zip(names[:-1], r[:-1]):
            feats.append(str(HEART_CODES[name][v]) if name in HEART_CODES else v)
        data.append(feats + ["1" if r[-1] == "1" else "0"])
    write(out / "heart.csv", names[:-1], data)
    return len(data)


def ionosphere(root, out):
    names, rows = read_tab(root / "tests/datasets/ionosphere.tab")
    data = [r[:-1] + ["1" if r[-1] == "g" else "0"] for r in rows if r]
    write(out / "ion.csv", names[:-1], data)
    return len(data)


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    root, out = pathlib.Path(sys.argv[1]), pathlib.Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    print("bc", breast_cancer(root, out))
    print("heart", heart(root, out))
    print("ion", ionosphere(root, out))


if __name__ == "__main__":
    main()
