"""Deterministic labeling on Iris against random labeling of the same size.

    python demos/02_iris_selection.py
"""

from pathlib import Path

import numpy as np

from delala.config import load_config
from delala.dataset import load_builtin
from delala.pipeline import accuracy, run_pipeline

cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "iris.cfg")
ds = load_builtin("iris")

res, annot = run_pipeline(ds, cfg)
print(f"delala: {accuracy(res, ds.labels):.2f}% with {len(res.labeled)} labels, "
      f"{len(annot.queries)} annotator queries")
for i in res.selection.selected:
    print(f"  sample {i:>3}  class {ds.class_names[res.labels[i] - 1]:<16} "
          f"layer {res.forest.layer[i]}  role {res.selection.role[i]}")

# ten random labeled sets of the same size, same KLMCA + 1NN downstream
rand = [accuracy(run_pipeline(ds, cfg.replace(pipeline="random-baseline"), seed=s)[0], ds.labels)
        for s in range(10)]
print(f"random: {np.mean(rand):.2f} +- {np.std(rand):.2f}% over 10 draws")
