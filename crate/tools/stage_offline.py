#!/usr/bin/env python3
"""Rebuild benchmark dataset files in their UCI layout from locally
installed packages, for machines that cannot reach the UCI archive.

    python3 tools/stage_offline.py --data-dir data \
        [--mglearn-wheel mglearn-0.2.0-py2.py3-none-any.whl] \
        [--biopsy-csv path/to/MASS/biopsy.csv]

Iris and WDBC come from scikit-learn, Balance Scale is generated from its
definition, Adult comes from the copy shipped inside the mglearn wheel and
the original Wisconsin file from R's MASS::biopsy. Abalone, Cover Type and
the Ljubljana breast cancer set have no offline source and are skipped.
Run `fids-bench fetch` afterwards to see what is still missing.
"""

import argparse
import csv
import itertools
import zipfile
from pathlib import Path


def write(path: Path, lines):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(line + "\n" for line in lines))
    print(f"wrote {path}")


def iris(out: Path):
    from sklearn.datasets import load_iris

    bunch = load_iris()
    names = ["Iris-setosa", "Iris-versicolor", "Iris-virginica"]
    rows = [[f"{v:.1f}" for v in x] + [names[y]] for x, y in zip(bunch.data, bunch.target)]
    # The archive copy carries two transcription errors that scikit-learn fixed.
    rows[34][3] = "0.1"
    rows[37][1:3] = ["3.1", "1.5"]
    write(out / "iris" / "iris.data", [",".join(r) for r in rows] + [""])


def balance_scale(out: Path):
    lines = []
    for lw, ld, rw, rd in itertools.product(range(1, 6), repeat=4):
        left, right = lw * ld, rw * rd
        cls = "L" if left > right else "R" if right > left else "B"
        lines.append(f"{cls},{lw},{ld},{rw},{rd}")
    write(out / "balance-scale" / "balance-scale.data", lines)


def wdbc(out: Path):
    from sklearn.datasets import load_breast_cancer

    bunch = load_breast_cancer()
    # scikit-learn drops the patient ids; a row counter stands in for them.
    lines = []
    for i, (x, y) in enumerate(zip(bunch.data, bunch.target)):
        diagnosis = "B" if y == 1 else "M"
        lines.append(",".join([str(i + 1), diagnosis] + [repr(float(v)) for v in x]))
    write(out / "breast-cancer-wdbc" / "wdbc.data", lines)


def wisconsin(out: Path, biopsy_csv: Path):
    with biopsy_csv.open() as f:
        reader = csv.reader(f)
        next(reader)
        lines = []
        for row in reader:
            values = ["?" if v == "NA" else v for v in row[1:11]]
            cls = {"benign": "2", "malignant": "4"}[row[11]]
            lines.append(",".join(values + [cls]))
    write(out / "breast-cancer-wisconsin" / "breast-cancer-wisconsin.data", lines)


def adult(out: Path, wheel: Path):
    with zipfile.ZipFile(wheel) as z:
        data = z.read("mglearn/data/adult.data")
    path = out / "income" / "adult.data"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    print(f"wrote {path}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--data-dir", type=Path, default=Path("data"))
    parser.add_argument("--mglearn-wheel", type=Path)
    parser.add_argument("--biopsy-csv", type=Path)
    args = parser.parse_args()
    iris(args.data_dir)
    balance_scale(args.data_dir)
    wdbc(args.data_dir)
    if args.biopsy_csv:
        wisconsin(args.data_dir, args.biopsy_csv)
    if args.mglearn_wheel:
        adult(args.data_dir, args.mglearn_wheel)


if __name__ == "__main__":
    main()
