"""Regenerate the bundled CSV fixtures under src/delala/data/.

Iris and Wine come from scikit-learn. Yeast (10 classes) and Letter are
rebuilt from the KEEL copies shipped in the ``keel-ds`` wheel, which is the
only route to them in an offline environment:

    pip download --no-deps keel-ds -d /tmp/pd
    python tools/build_fixtures.py /tmp/pd/keel_ds-*.whl

KEEL only ships Yeast as binary one-vs-rest / subset problems. The multiclass
labels are recovered by intersecting those subsets; the script aborts unless
the per-class counts equal the UCI ones and every row resolves uniquely.
"""

import sys
import zipfile
from collections import Counter
from pathlib import Path

import numpy as np
from sklearn.datasets import load_iris, load_wine

OUT = Path(__file__).resolve().parents[1] / "src" / "delala" / "data"

YEAST_COUNTS = {
    "CYT": 463, "NUC": 429, "MIT": 244, "ME3": 163, "ME2": 51,
    "ME1": 44, "EXC": 35, "VAC": 30, "POX": 20, "ERL": 5,
}


def write_sklearn(loader, name):
    bunch = loader()
    cols = [c.replace(" ", "_").replace("(cm)", "cm").strip("_") for c in bunch.feature_names]
    with open(OUT / f"{name}.csv", "w", encoding="utf-8") as fh:
        fh.write(",".join(cols + ["class"]) + "\n")
        for row, y in zip(bunch.data, bunch.target):
            fh.write(",".join(repr(float(v)) for v in row) + "," + str(bunch.target_names[y]) + "\n")


def _read_keel(text):
    rows = []
    for line in text.splitlines():
        if line.startswith("@") or not line.strip():
            continue
        *x, c = [t.strip() for t in line.split(",")]
        x = [round(float(v), 2) for v in x]
        if len(x) == 7:
            # one KEEL subset drops the (almost always zero) pox column
            x.insert(5, 0.0)
        rows.append((tuple(x), c))
    return rows


def write_yeast(wheel):
    raw = "keel_ds/data/imbalanced/raw/"
    with zipfile.ZipFile(wheel) as z:
        def rd(name):
            return _read_keel(z.read(raw + name).decode())

        full = rd("yeast1.dat")

        def pos(f):
            return Counter(x for x, c in rd(f) if c == "positive")

        def neg(f):
            return Counter(x for x, c in rd(f) if c == "negative")

        # KEEL class numbering: 0 MIT 1 NUC 2 CYT 3 ME3 4 ME2 5 ME1 6 EXC 7 VAC 8 POX 9 ERL
        sets = {
            "NUC": pos("yeast1.dat"), "ME3": pos("yeast3.dat"), "ME2": pos("yeast4.dat"),
            "ME1": pos("yeast5.dat"), "EXC": pos("yeast6.dat"), "VAC": pos("yeast-1_vs_7.dat"),
            "POX": pos("yeast-2_vs_8.dat"), "CYT": neg("yeast-2_vs_4.dat"),
        }
        sets["ERL"] = neg("yeast-1-2-8-9_vs_7.dat") - sets["NUC"] - sets["CYT"] - sets["POX"]
        sets["MIT"] = neg("yeast-0-3-5-9_vs_7-8.dat") - sets["ME3"] - sets["ME1"] - sets["ERL"]

    counts = {k: sum(v.values()) for k, v in sets.items()}
    if counts != YEAST_COUNTS:
        raise SystemExit(f"class counts do not match UCI: {counts}")
    remaining = {k: Counter(v) for k, v in sets.items()}
    labels = []
    for x, _ in full:
        cands = [k for k, v in remaining.items() if v[x] > 0]
        if len(cands) != 1:
            raise SystemExit(f"ambiguous row {x}: {cands}")
        remaining[cands[0]][x] -= 1
        labels.append(cands[0])
    with open(OUT / "yeast.csv", "w", encoding="utf-8") as fh:
        fh.write("mcg,gvh,alm,mit,erl,pox,vac,nuc,class\n")
        for (x, _), y in zip(full, labels):
            fh.write(",".join("%.2f" % v for v in x) + "," + y + "\n")


def write_letter_subsample(wheel, size=2000, seed=0):
    with zipfile.ZipFile(wheel) as z:
        text = z.read("keel_ds/data/balanced/raw/letter.dat").decode()
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("@")]
    pick = np.sort(np.random.default_rng(seed).choice(len(lines), size=size, replace=False))
    with open(OUT / "letter2000.csv", "w", encoding="utf-8") as fh:
        fh.write(",".join(f"f{i}" for i in range(16)) + ",class\n")
        for i in pick:
            fh.write(lines[i].replace(" ", "") + "\n")


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    write_sklearn(load_iris, "iris")
    write_sklearn(load_wine, "wine")
    if len(sys.argv) > 1:
        write_yeast(sys.argv[1])
        write_letter_subsample(sys.argv[1])
