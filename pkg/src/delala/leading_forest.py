"""Leading tree construction and its cut into an optimal leading forest.

Parent arrays use ``-1`` for "no parent".  Density comparisons are always
made under the tie-broken order ``(rho_j, -j) > (rho_i, -i)``, so equal
densities (duplicate points) still give a strict order and a unique root.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .dataset import distance_percentile
from .errors import ConfigError, StructureError

NO_PARENT = -1


@dataclass(frozen=True)
class LeadingForest:
    rho: np.ndarray
    parent: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray
    layer: np.ndarray
    tree_id: np.ndarray
    roots: np.ndarray
    # root of the uncut leading tree (the tie-broken density maximum)
    top_root: int

    @property
    def n(self) -> int:
        return len(self.rho)

    @property
    def n_trees(self) -> int:
        return len(self.roots)

    def members(self, tree: int) -> np.ndarray:
        """Node indices of the subtree with 1-based id ``tree``."""
        return np.flatnonzero(self.tree_id == tree)

    def density_rank(self) -> np.ndarray:
        """rank[i] = position of node i in descending tie-broken density order."""
        return density_rank(self.rho)


@dataclass(frozen=True)
class GranulationResult:
    n_g: int
    objective_curve: np.ndarray
    alpha_lodog: float
    dist_cost: np.ndarray
    n_max: int


def default_sigma(dist) -> float:
    """2% percentile of the off-diagonal distances, floored away from zero."""
    s = distance_percentile(dist, 2.0)
    if s <= 0:
        pos = np.asarray(dist)[np.asarray(dist) > 0]
        s = float(pos.min()) if pos.size else 1.0
    return s


def local_density(dist, sigma: float) -> np.ndarray:
    """Gaussian local density ``sum_{j != i} exp(-d_ij^2 / sigma^2)``."""
    if not sigma > 0:
        raise ConfigError(f"density bandwidth sigma must be positive, got {sigma}")
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    if n == 1:
        warnings.warn("local density of a single point is an empty sum", RuntimeWarning)
        return np.zeros(1)
    E = np.exp(-(dist / sigma) ** 2)
    np.fill_diagonal(E, 0.0)
    # summing in sorted order makes duplicate points bit-identical in density,
    # so the index tie-break really applies to them
    return np.sort(E, axis=1).sum(axis=1)


def density_order(rho) -> np.ndarray:
    """Node indices from densest to sparsest; equal densities by ascending index."""
    rho = np.asarray(rho)
    return np.lexsort((np.arange(len(rho)), -rho))


def density_rank(rho) -> np.ndarray:
    order = density_order(rho)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return rank


def leading_nodes(dist, rho):
    """Nearest denser node of every point and the distance to it.

    Returns ``(parent, delta)``.  The density maximum gets ``parent = -1``
    and ``delta`` equal to the largest entry of ``dist``, so it always has
    the largest delta.  Distance ties pick the lowest index.
    """
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    rank = density_rank(rho)
    parent = np.full(n, NO_PARENT, dtype=int)
    delta = np.zeros(n)
    # column j is a candidate for row i iff j is denser than i
    cand = rank[None, :] < rank[:, None]
    masked = np.where(cand, dist, np.inf)
    has = cand.any(axis=1)
    best = np.argmin(masked, axis=1)  # first occurrence = lowest index
    parent[has] = best[has]
    delta[has] = masked[has, best[has]]
    root = int(np.flatnonzero(~has)[0])
    delta[root] = dist.max() if n > 1 else 0.0
    return parent, delta


def layers(parent) -> np.ndarray:
    """Breadth-first depth of every node below its root (roots are layer 1)."""
    parent = np.asarray(parent, dtype=int)
    n = len(parent)
    children = [[] for _ in range(n)]
    for i, p in enumerate(parent):
        if p != NO_PARENT:
            children[p].append(i)
    layer = np.zeros(n, dtype=int)
    queue = deque(np.flatnonzero(parent == NO_PARENT).tolist())
    for r in queue:
        layer[r] = 1
    seen = len(queue)
    while queue:
        u = queue.popleft()
        for v in children[u]:
            layer[v] = layer[u] + 1
            queue.append(v)
            seen += 1
    if seen != n:
        raise StructureError("parent links contain a cycle")
    return layer


def tree_ids(parent, roots) -> np.ndarray:
    """1-based subtree id of every node; ``roots[t-1]`` heads subtree ``t``."""
    parent = np.asarray(parent, dtype=int)
    n = len(parent)
    tid = np.zeros(n, dtype=int)
    for t, r in enumerate(roots, start=1):
        tid[r] = t
    # resolve each node by walking up to the first node with a known id
    for i in range(n):
        path = []
        j = i
        while tid[j] == 0:
            path.append(j)
            j = parent[j]
            if j == NO_PARENT or len(path) > n:
                raise StructureError(f"node {i} does not reach a listed root")
        tid[path] = tid[j]
    return tid


def leading_tree(dist, sigma: float | None = None) -> LeadingForest:
    """The uncut leading tree (a forest with a single subtree)."""
    dist = np.asarray(dist, dtype=float)
    if sigma is None:
        sigma = default_sigma(dist)
    rho = local_density(dist, sigma)
    parent, delta = leading_nodes(dist, rho)
    root = int(np.flatnonzero(parent == NO_PARENT)[0])
    roots = np.array([root])
    return LeadingForest(
        rho=rho,
        parent=parent,
        delta=delta,
        gamma=rho * delta,
        layer=layers(parent),
        tree_id=np.ones(len(rho), dtype=int),
        roots=roots,
        top_root=root,
    )


def cut_candidates(forest: LeadingForest) -> np.ndarray:
    """Nodes other than the top root, by gamma descending (ties: lower index)."""
    g = forest.gamma
    order = np.lexsort((np.arange(len(g)), -g))
    return order[order != forest.top_root]


def cut(tree: LeadingForest, n_trees: int) -> LeadingForest:
    """Detach the ``n_trees - 1`` highest-gamma nodes from their parents."""
    if tree.n_trees != 1:
        raise StructureError("cut expects the uncut leading tree")
    if not 1 <= n_trees <= tree.n:
        raise ConfigError(f"number of subtrees must be in 1..{tree.n}, got {n_trees}")
    cuts = cut_candidates(tree)[: n_trees - 1]
    parent = tree.parent.copy()
    parent[cuts] = NO_PARENT
    roots = np.concatenate([[tree.top_root], cuts]).astype(int)
    return replace(
        tree,
        parent=parent,
        layer=layers(parent),
        tree_id=tree_ids(parent, roots),
        roots=roots,
    )


def default_n_max(n: int) -> int:
    return min(n, math.ceil(math.sqrt(n)) * 4)


def lodog_curve(tree: LeadingForest, alpha_lodog: float, n_max: int | None = None):
    """Granulation objective for N_g = 1..n_max.

    Returns ``(Q, dist_cost)``; index ``k`` holds N_g = k + 1.  Both the
    count term and the summed within-granule delta are min-max scaled over
    the candidate range before mixing.
    """
    if not 0 < alpha_lodog < 1:
        raise ConfigError(f"alpha_lodog must lie in (0, 1), got {alpha_lodog}")
    n = tree.n
    n_max = default_n_max(n) if n_max is None else int(n_max)
    if not 1 <= n_max <= n:
        raise ConfigError(f"n_max must be in 1..{n}, got {n_max}")
    cand = cut_candidates(tree)[: n_max - 1]
    base = tree.delta.sum() - tree.delta[tree.top_root]
    dist_cost = base - np.concatenate([[0.0], np.cumsum(tree.delta[cand])])
    count = np.arange(1, n_max + 1, dtype=float)
    Q = alpha_lodog * _minmax(count) + (1 - alpha_lodog) * _minmax(dist_cost)
    return Q, dist_cost


def lodog_cut(tree: LeadingForest, alpha_lodog: float = 0.5, n_max: int | None = None):
    """Pick the subtree count minimizing the granulation objective and cut.

    Returns ``(forest, GranulationResult)``.
    """
    Q, dist_cost = lodog_curve(tree, alpha_lodog, n_max)
    n_g = int(np.argmin(Q)) + 1  # argmin returns the first (smallest N_g) on ties
    result = GranulationResult(n_g, Q, float(alpha_lodog), dist_cost, len(Q))
    return cut(tree, n_g), result


def build_forest(dist, sigma=None, alpha_lodog=0.5, n_max=None):
    """Leading tree plus granulation in one call: ``(forest, granulation)``."""
    return lodog_cut(leading_tree(dist, sigma), alpha_lodog, n_max)


def _minmax(v):
    v = np.asarray(v, dtype=float)
    lo, hi = v.min(), v.max()
    if hi - lo <= 0:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def edge_list_text(forest: LeadingForest) -> str:
    """One ``node,parent,rho,delta,gamma,layer,tree_id`` line per node, with a header.

    Roots have an empty parent field.
    """
    lines = ["node,parent,rho,delta,gamma,layer,tree_id"]
    for i in range(forest.n):
        p = forest.parent[i]
        lines.append(
            f"{i},{'' if p == NO_PARENT else int(p)},{float(forest.rho[i])!r},{float(forest.delta[i])!r},"
            f"{float(forest.gamma[i])!r},{int(forest.layer[i])},{int(forest.tree_id[i])}"
        )
    return "\n".join(lines) + "\n"


def dump_edge_list(forest: LeadingForest, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(edge_list_text(forest))
