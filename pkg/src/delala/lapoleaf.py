"""Non-iterative label propagation over an optimal leading forest.

Three passes: children to parent (bottom-up weighted average), root to
root (unlabeled roots borrow from the nearest denser labeled root), and
parent to children (top-down copy).  A node counts as labeled when any entry
of its label row is positive.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import PropagationError
from .leading_forest import LeadingForest

EPS_DIST = 1e-12


@dataclass(frozen=True)
class LabelMatrix:
    vectors: np.ndarray
    populations: np.ndarray

    @classmethod
    def from_seeds(cls, n: int, n_classes: int, seeds: dict) -> "LabelMatrix":
        """One-hot rows for ``seeds`` (node -> class id 1..C), zeros elsewhere."""
        V = np.zeros((n, n_classes))
        for i, c in seeds.items():
            V[int(i), int(c) - 1] = 1.0
        return cls(V, np.ones(n, dtype=int))

    @property
    def labeled(self) -> np.ndarray:
        return (self.vectors > 0).any(axis=1)

    def predict(self) -> np.ndarray:
        """Class id (1..C) with the largest entry per row; ties pick the lowest."""
        return np.argmax(self.vectors, axis=1) + 1


def _by_layer(forest: LeadingForest):
    layer = forest.layer
    return [np.flatnonzero(layer == t) for t in range(1, layer.max() + 1)]


def c2p_pass(forest: LeadingForest, labels: LabelMatrix) -> LabelMatrix:
    """Fill unlabeled parents with the weighted average of their children.

    Child weight is ``pop_i / dist(i, parent)``; every child counts in the
    denominator, so unlabeled children dilute the average.  Seeded rows are
    never overwritten.
    """
    V = labels.vectors.copy()
    pop = labels.populations
    parent = forest.parent
    w = pop / np.maximum(forest.delta, EPS_DIST)
    levels = _by_layer(forest)
    for nodes in reversed(levels[1:]):
        par = parent[nodes]
        num = np.zeros_like(V)
        den = np.zeros(len(V))
        np.add.at(num, par, w[nodes, None] * V[nodes])
        np.add.at(den, par, w[nodes])
        targets = np.unique(par)
        labeled = (V > 0).any(axis=1)
        grow = targets[~labeled[targets] & (num[targets] > 0).any(axis=1)]
        V[grow] = num[grow] / den[grow, None]
    return replace(labels, vectors=V)


def r2r_pass(forest: LeadingForest, labels: LabelMatrix, dist) -> LabelMatrix:
    """Give every unlabeled root the row of the nearest denser labeled root.

    Roots are visited from densest to sparsest, so a root labeled by
    borrowing can lend to sparser roots later in the same sweep.  The top
    root borrows from the nearest labeled root regardless of density.
    """
    V = labels.vectors.copy()
    labeled = (V > 0).any(axis=1)
    roots = np.asarray(forest.roots)
    if not labeled[roots].any():
        raise PropagationError("no subtree carries a label; nothing to propagate from")
    rank = forest.density_rank()
    roots = roots[np.argsort(rank[roots], kind="stable")]
    dist = np.asarray(dist)
    for r in roots:
        if labeled[r]:
            continue
        lenders = roots[labeled[roots]]
        if r != forest.top_root:
            lenders = lenders[rank[lenders] < rank[r]]
        if lenders.size == 0:
            # only reachable when the top root is missing from ``roots``
            lenders = roots[labeled[roots]]
        d = dist[r, lenders]
        src = lenders[np.lexsort((lenders, d))[0]]
        V[r] = V[src]
        labeled[r] = True
    return replace(labels, vectors=V)


def p2c_pass(forest: LeadingForest, labels: LabelMatrix) -> LabelMatrix:
    """Top-down: every still unlabeled node copies its parent's row."""
    V = labels.vectors.copy()
    parent = forest.parent
    for nodes in _by_layer(forest)[1:]:
        todo = nodes[~(V[nodes] > 0).any(axis=1)]
        V[todo] = V[parent[todo]]
    return replace(labels, vectors=V)


def propagate_matrix(forest: LeadingForest, seeds: dict, n_classes: int, dist) -> LabelMatrix:
    if not seeds:
        raise PropagationError("no seed labels given")
    L = LabelMatrix.from_seeds(forest.n, n_classes, seeds)
    L = c2p_pass(forest, L)
    L = r2r_pass(forest, L, dist)
    return p2c_pass(forest, L)


def propagate(forest: LeadingForest, seeds: dict, n_classes: int, dist) -> np.ndarray:
    """Predicted class id (1..C) for every node."""
    return propagate_matrix(forest, seeds, n_classes, dist).predict()


def roots_labeled_after_c2p(forest: LeadingForest, labels: LabelMatrix) -> bool:
    """Check that every subtree holding a seed has a labeled root."""
    seeded_trees = np.unique(forest.tree_id[labels.labeled])
    after = c2p_pass(forest, labels).labeled
    return bool(all(after[forest.roots[t - 1]] for t in seeded_trees))

