"""Convert the bundled UCI copies into the headered CSVs under ``datasets/``.

The UCI repository is not always reachable, so the benchmark CSVs are built
from copies that ship inside PyPI wheels:

* ``keel_ds`` (KEEL mirror): letter, sonar
* ``Orange3``: ionosphere (the KEEL copy drops the constant second attribute)
* ``imbalanced_databases``: pima, german (numeric encoding), haberman
* ``scikit-learn``: breast (Wisconsin diagnostic)

Usage::

    pip download --no-deps -d wheels keel-ds imbalanced_databases orange3
    python scripts/build_datasets.py wheels datasets
"""
import csv
import glob
import os
import sys
import zipfile

from sklearn.datasets import load_breast_cancer


def _wheel(wheel_dir, prefix):
    (path,) = glob.glob(os.path.join(wheel_dir, prefix + "*.whl"))
    return zipfile.ZipFile(path)


def _rows(text, sep=","):
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@") or line.startswith("%"):
            continue
        yield [cell.strip() for cell in (line.split(sep) if sep else line.split())]


def _write(out_dir, name, rows):
    rows = list(rows)
    d = len(rows[0]) - 1
    with open(os.path.join(out_dir, name + ".csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"a{i + 1}" for i in range(d)] + ["class"])
        w.writerows(rows)
    print(f"{name}: {len(rows)} rows, {d} attributes")


def main(wheel_dir, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    keel = _wheel(wheel_dir, "keel_ds")
    imb = _wheel(wheel_dir, "imbalanced_databases")

    orange = _wheel(wheel_dir, "orange3")

    for name in ("letter", "sonar"):
        raw = keel.read(f"keel_ds/data/balanced/raw/{name}.dat").decode()
        _write(out_dir, name, _rows(raw))

    raw = orange.read("Orange/tests/datasets/ionosphere.tab").decode()
    _write(out_dir, "ionosphere", list(_rows(raw, sep="\t"))[3:])

    raw = imb.read("imbalanced_databases/data/pima/pima.dat").decode()
    _write(out_dir, "pima", _rows(raw))
    raw = imb.read("imbalanced_databases/data/haberman/haberman.dat").decode()
    _write(out_dir, "haberman", _rows(raw))
    raw = imb.read("imbalanced_databases/data/german/german.data-numeric.txt").decode()
    _write(out_dir, "german", _rows(raw, sep=None))

    bc = load_breast_cancer()
    rows = [[repr(float(v)) for v in x] + [str(int(y))] for x, y in zip(bc.data, bc.target)]
    _write(out_dir, "breast", rows)


if __name__ == "__main__":
    main(*sys.argv[1:3])
