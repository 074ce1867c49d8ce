"""One metric per leading subtree on the 10-class Yeast data.

    python demos/03_yeast_multimetric.py
"""

from pathlib import Path

from delala.config import load_config
from delala.experiment import run

cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "yeast.cfg")

flat = run(cfg.replace(pipeline="delala"))
multi = run(cfg)
print(f"flat delala   {flat.accuracy:.2f}%")
print(f"multimetric   {multi.accuracy:.2f}%")
print()
# per-subtree table: size, depth, labels spent, classes seen, local accuracy, method
print(multi.to_human().split("\n\n")[-1])
