"""Rebuild data/glass.data and data/winequality-red.csv without network access to UCI.

Both UCI files are redistributed inside the ``imbalanced-databases`` wheel on PyPI:
``glass/glass.data.txt`` is the raw UCI file, and the red-wine table is split
across four KEEL one-vs-rest subsets. ``winequality-red-4`` carries all 1,599
rows in UCI order, so the quality grade of each row is recovered by looking it
up in the 3-vs-5, 8-vs-6 and 8-vs-6-7 subsets.

Usage::

    pip download --no-deps -d /tmp/wheels imbalanced-databases==0.1.1
    python scripts/rebuild_offline_data.py /tmp/wheels/imbalanced_databases-0.1.1-py3-none-any.whl
"""
import sys
import zipfile
from collections import Counter
from pathlib import Path

WINE_HEADER = [
    "fixed acidity", "volatile acidity", "citric acid", "residual sugar", "chlorides",
    "free sulfur dioxide", "total sulfur dioxide", "density", "pH", "sulphates", "alcohol",
    "quality",
]
EXPECTED_GRADES = {3: 10, 4: 53, 5: 681, 6: 638, 7: 199, 8: 18}


def _keel_rows(z, name):
    text = z.read(f"imbalanced_databases/data/{name}/{name}.dat").decode()
    rows = []
    for line in text.splitlines():
        if line and not line.startswith("@"):
            *values, label = [v.strip() for v in line.split(",")]
            rows.append((tuple(values), label == "positive"))
    return rows


def _key(values):
    return tuple(float(v) for v in values)


def rebuild(wheel, out_dir):
    z = zipfile.ZipFile(wheel)
    (out_dir / "glass.data").write_bytes(z.read("imbalanced_databases/data/glass/glass.data.txt"))

    full = _keel_rows(z, "winequality-red-4")
    grade_3_5 = {_key(v): (3 if pos else 5) for v, pos in _keel_rows(z, "winequality-red-3_vs_5")}
    grade_8_6 = {_key(v): (8 if pos else 6) for v, pos in _keel_rows(z, "winequality-red-8_vs_6")}
    in_8_67 = {_key(v) for v, _ in _keel_rows(z, "winequality-red-8_vs_6-7")}

    lines = [";".join(f'"{h}"' for h in WINE_HEADER)]
    grades = Counter()
    for values, is_four in full:
        k = _key(values)
        if is_four:
            grade = 4
        elif k in grade_3_5:
            grade = grade_3_5[k]
        elif k in grade_8_6:
            grade = grade_8_6[k]
        elif k in in_8_67:
            grade = 7
        else:
            raise RuntimeError(f"row {values} not found in any subset")
        grades[grade] += 1
        lines.append(";".join(values) + f";{grade}")
    if dict(grades) != EXPECTED_GRADES:
        raise RuntimeError(f"grade counts {dict(grades)} differ from UCI {EXPECTED_GRADES}")
    (out_dir / "winequality-red.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {len(full)} wine rows, grades {dict(sorted(grades.items()))}")


if __name__ == "__main__":
    rebuild(sys.argv[1], Path(__file__).resolve().parent.parent / "data")
