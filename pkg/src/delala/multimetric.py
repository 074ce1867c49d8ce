"""Multi-metric DeLaLA: one KLMCA metric per leading subtree.

The optimal leading forest splits the data into subtrees.  The label budget
is shared out in proportion to subtree size; a subtree whose share would be
smaller than the per-class quota ``k`` gets no labels and is merged into the
nearest denser funded subtree, the same lending rule LaPOLeaF uses between
roots.  Each funded group then labels its own top ranked members.  A group
whose labels still span more than ``c_tilde`` classes is split again with a
fresh leading forest over its members, up to ``max_depth`` levels; any other
group trains a local metric, or falls back to input-space 1NN when it holds
too few labels to train one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import klmca
from .config import ExperimentConfig
from .labeling import rank_samples, selection_scores
from .leading_forest import LeadingForest, build_forest, default_sigma

# leaf methods
NONE = "none"
SINGLE_CLASS = "single-class"
INPUT_1NN = "input-1nn"
KLMCA = "klmca"


@dataclass
class MetricNode:
    """One group of the recursion.

    ``children`` is non-empty for split groups.  Leaves carry the method used
    and, for ``klmca`` leaves, the trained model.
    """

    members: np.ndarray
    depth: int
    budget: int
    labeled: list = field(default_factory=list)
    classes: list = field(default_factory=list)
    children: list = field(default_factory=list)
    method: str | None = None
    model: object = None
    test: np.ndarray | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def budget_used(self) -> int:
        if self.is_leaf:
            return len(self.labeled)
        return sum(c.budget_used for c in self.children)

    def leaves(self):
        if self.is_leaf:
            yield self
        else:
            for c in self.children:
                yield from c.leaves()


def subtree_class_count(members, labels: dict) -> int:
    """Distinct classes among the labeled samples in ``members``."""
    return len({labels[int(i)] for i in members if int(i) in labels})


def proportional_shares(sizes, budget: int, floor: int) -> np.ndarray:
    """Split ``budget`` in proportion to ``sizes``; shares below ``floor`` become 0.

    Largest remainders receive the leftover units (ties to the earlier
    group), and budget freed by dropped groups is shared again among the
    rest.  The result sums to ``budget`` whenever any group is funded.
    """
    sizes = np.asarray(sizes, dtype=float)
    funded = np.ones(len(sizes), dtype=bool)
    while True:
        share = np.zeros(len(sizes), dtype=int)
        if not funded.any() or budget <= 0:
            return share
        raw = np.where(funded, sizes, 0.0) * budget / sizes[funded].sum()
        share = np.floor(raw).astype(int)
        left = budget - share.sum()
        frac = np.where(funded, raw - share, -1.0)
        share[np.argsort(-frac, kind="stable")[:left]] += 1
        low = funded & (share < floor)
        if not low.any():
            return share
        if funded.sum() == 1:
            # a lone group keeps the whole budget even below the floor
            return share
        if low.sum() == funded.sum():
            # nothing clears the floor: fund the largest group alone
            keep = int(np.argmax(np.where(funded, sizes, -1.0)))
            funded[:] = False
            funded[keep] = True
            continue
        # drop only the smallest offender so shares shrink gradually
        cand = np.flatnonzero(low)
        funded[cand[np.lexsort((cand, sizes[cand]))[0]]] = False


def merge_unfunded(forest: LeadingForest, funded, dist_local) -> list:
    """Group subtrees so that every unfunded one joins a funded one.

    An unfunded subtree follows the nearest funded root that is denser than
    its own root (any funded root when none is denser), by root-to-root
    distance with ties to the lower index.  Returns a list of
    ``(funded tree index, sorted local member indices)``.
    """
    n_trees = forest.n_trees
    funded = np.asarray(funded, dtype=bool)
    roots = np.asarray(forest.roots)
    rank = forest.density_rank()
    lenders = np.flatnonzero(funded)
    owner = np.arange(n_trees)
    for t in np.flatnonzero(~funded):
        cand = lenders[rank[roots[lenders]] < rank[roots[t]]]
        if cand.size == 0:
            cand = lenders
        d = dist_local[roots[t], roots[cand]]
        owner[t] = cand[np.lexsort((cand, d))[0]]
    groups = []
    for t in lenders:
        m = np.concatenate([forest.members(s + 1) for s in np.flatnonzero(owner == t)])
        groups.append((int(t), np.sort(m)))
    return groups


class MultiMetric:
    """Recursive driver; call :meth:`fit_predict` once per dataset."""

    def __init__(self, cfg: ExperimentConfig, dist, annotate, n_classes: int, train_fn, timer):
        self.cfg = cfg
        self.dist = dist
        self.annotate = annotate
        self.n_classes = n_classes
        self.train_fn = train_fn  # (train_idx, y, test_idx) -> (pred, model)
        self.timer = timer  # stage name -> context manager
        self.labels: dict[int, int] = {}
        self.queries: list[int] = []
        self.role: dict[int, str] = {}
        self.pred = np.zeros(dist.shape[0], dtype=int)
        self.top_forest = None
        self.top_granulation = None
        self.top_scores = None

    def _forest(self, members, depth):
        D = self.dist[np.ix_(members, members)]
        # the top level uses the configured bandwidth; deeper levels re-estimate
        sigma = self.sigma if depth == 0 else default_sigma(D)
        forest, gran = build_forest(D, sigma, self.cfg.alpha_lodog, self.cfg.n_max if depth == 0 else None)
        return D, forest, gran

    def _label_top(self, node: MetricNode, ranking_global):
        """Query the best ranked members of ``node`` until its budget is spent."""
        have = [int(i) for i in node.members if int(i) in self.labels]
        want = node.budget - len(have)
        inside = np.zeros(self.dist.shape[0], dtype=bool)
        inside[node.members] = True
        for i in ranking_global:
            if want <= 0:
                break
            if not inside[i] or i in self.labels:
                continue
            self.labels[i] = int(self.annotate(i))
            self.queries.append(i)
            want -= 1

    def fit_predict(self, sigma: float) -> MetricNode:
        self.sigma = sigma
        n = self.dist.shape[0]
        l = self.cfg.l
        root = MetricNode(np.arange(n), depth=0, budget=l)
        self._split(root)
        return root

    def _split(self, node: MetricNode):
        cfg = self.cfg
        with self.timer("forest"):
            D, forest, gran = self._forest(node.members, node.depth)
        with self.timer("selection"):
            scores = selection_scores(forest, cfg.w, cfg.xor_normalization)
            local_rank = rank_samples(scores)
        if node.depth == 0:
            self.top_forest, self.top_granulation, self.top_scores = forest, gran, scores
        glob_rank = node.members[local_rank]
        sizes = [len(forest.members(t)) for t in range(1, forest.n_trees + 1)]
        if node.depth > 0:
            # labels already inside a subtree are spent; share only the rest
            held = np.array([sum(int(node.members[i]) in self.labels for i in forest.members(t))
                             for t in range(1, forest.n_trees + 1)])
        else:
            held = np.zeros(len(sizes), dtype=int)
        extra = node.budget - int(held.sum())
        share = proportional_shares(sizes, max(extra, 0), cfg.k) + held
        funded = share > 0
        if not funded.any():
            funded[int(np.argmax(sizes))] = True
        groups = merge_unfunded(forest, funded, D)
        if len(groups) == 1:
            # no real split: this group is a leaf
            self._leaf(node, glob_rank)
            return
        for t, local_members in groups:
            child = MetricNode(node.members[local_members], node.depth + 1, int(share[t]))
            node.children.append(child)
            with self.timer("selection"):
                self._label_top(child, glob_rank)
            n_cls = subtree_class_count(child.members, self.labels)
            if n_cls > cfg.c_tilde and child.depth < cfg.max_depth and len(child.members) < len(node.members):
                self._split(child)
            else:
                self._leaf(child, glob_rank, labeled_already=True)

    def _leaf(self, node: MetricNode, glob_rank, labeled_already=False):
        if not labeled_already:
            with self.timer("selection"):
                self._label_top(node, glob_rank)
        lab = np.array([int(i) for i in node.members if int(i) in self.labels], dtype=int)
        test = np.array([int(i) for i in node.members if int(i) not in self.labels], dtype=int)
        y = np.array([self.labels[i] for i in lab], dtype=int)
        classes = np.unique(y)
        node.labeled = lab.tolist()
        node.classes = classes.tolist()
        node.test = test
        if len(test) == 0:
            node.method = NONE
        elif len(classes) == 1:
            self.pred[test] = classes[0]
            node.method = SINGLE_CLASS
        elif len(lab) < 3 or len(lab) <= (self.cfg.p or klmca.default_p(len(classes), len(lab))):
            with self.timer("inference"):
                self.pred[test] = y[np.argmin(self.dist[np.ix_(test, lab)], axis=1)]
            node.method = INPUT_1NN
        else:
            self.pred[test], node.model = self.train_fn(lab, y, test)
            node.method = KLMCA
