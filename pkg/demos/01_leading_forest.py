"""Build a leading forest on two 1-D blobs and watch LoDOG pick the cut.

    python demos/01_leading_forest.py
"""

import numpy as np

from delala.dataset import pairwise_distances
from delala.leading_forest import build_forest, edge_list_text, leading_tree

X = np.array([0.0, 0.1, 0.2, 10.0, 10.1, 10.2])[:, None]
D = pairwise_distances(X)

# the uncut tree: one root, the densest point of the left blob
tree = leading_tree(D)
print("leading tree")
print(edge_list_text(tree))

# LoDOG trades granule count against the delta cost kept inside granules
forest, gran = build_forest(D, alpha_lodog=0.5, n_max=len(X))
print("Q(N_g):", np.round(gran.objective_curve, 4).tolist())
print(f"chosen N_g = {gran.n_g}")
print(edge_list_text(forest))
