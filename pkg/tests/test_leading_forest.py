import math

import numpy as np
import pytest
from conftest import random_dataset
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from delala.dataset import pairwise_distances
from delala.errors import ConfigError, StructureError
from delala.leading_forest import (
    NO_PARENT,
    build_forest,
    cut,
    default_n_max,
    default_sigma,
    edge_list_text,
    layers,
    leading_nodes,
    leading_tree,
    local_density,
    lodog_curve,
    lodog_cut,
    tree_ids,
)

ONE_D = pairwise_distances(np.array([[0.0], [1.0], [2.0]]))


def test_density_examples():
    same = pairwise_distances(np.array([[1.0, 2.0], [1.0, 2.0]]))
    np.testing.assert_array_equal(local_density(same, 0.7), [1.0, 1.0])
    rho = local_density(ONE_D, 1.0)
    np.testing.assert_allclose(rho, [math.exp(-1) + math.exp(-4), 2 * math.exp(-1), math.exp(-1) + math.exp(-4)])
    np.testing.assert_allclose(rho, [0.38620, 0.73576, 0.38620], atol=1e-5)


def test_density_scale_invariance():
    D = pairwise_distances(np.random.default_rng(0).normal(size=(30, 3)))
    np.testing.assert_allclose(local_density(D, 0.8), local_density(D * 7.5, 0.8 * 7.5), atol=1e-9)


def test_density_bad_sigma_and_single_point():
    with pytest.raises(ConfigError):
        local_density(ONE_D, 0.0)
    with pytest.warns(RuntimeWarning):
        assert local_density(np.zeros((1, 1)), 1.0).tolist() == [0.0]


def test_density_range_random():
    rng = np.random.default_rng(1)
    for _ in range(20):
        D = pairwise_distances(rng.normal(size=(15, 2)))
        rho = local_density(D, default_sigma(D))
        assert np.all((rho > 0) & (rho <= 14))


def test_leading_nodes_examples():
    parent, delta = leading_nodes(ONE_D, local_density(ONE_D, 1.0))
    assert parent.tolist() == [1, NO_PARENT, 1]
    assert delta.tolist() == [1.0, 2.0, 1.0]
    assert layers(parent).tolist() == [2, 1, 2]


def test_leading_nodes_two_points():
    D = pairwise_distances(np.array([[0.0], [2.5]]))
    parent, delta = leading_nodes(D, np.array([0.3, 0.9]))
    assert parent.tolist() == [1, NO_PARENT]
    assert delta[0] == 2.5


def test_leading_nodes_all_identical():
    D = np.zeros((5, 5))
    parent, delta = leading_nodes(D, local_density(D, 1.0))
    assert parent.tolist() == [NO_PARENT, 0, 0, 0, 0]
    assert delta.tolist() == [0.0] * 5


def test_layers_examples():
    assert layers([NO_PARENT, 0, 1]).tolist() == [1, 2, 3]
    assert layers([NO_PARENT, 0, 0, 0, 0, 0]).tolist() == [1, 2, 2, 2, 2, 2]


def test_layers_cycle():
    with pytest.raises(StructureError):
        layers([NO_PARENT, 2, 1])


def test_tree_ids_unreachable_root():
    with pytest.raises(StructureError):
        tree_ids([NO_PARENT, 2, 1], [0])


def test_gamma_of_one_d_root():
    f = leading_tree(ONE_D, 1.0)
    assert f.gamma[1] == pytest.approx(1.4715, abs=1e-4)
    np.testing.assert_array_equal(f.gamma, f.rho * f.delta)


def test_lodog_alpha_limits():
    X = np.random.default_rng(2).normal(size=(60, 2))
    tree = leading_tree(pairwise_distances(X))
    _, hi = lodog_cut(tree, 0.999)
    assert hi.n_g == 1
    _, lo = lodog_cut(tree, 0.001)
    assert lo.n_g == default_n_max(60) == 32


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5])
def test_lodog_bad_alpha(alpha):
    with pytest.raises(ConfigError):
        lodog_cut(leading_tree(ONE_D, 1.0), alpha)


def test_two_blob_granulation(two_blobs, two_blob_dist):
    X, _ = two_blobs
    forest, res = build_forest(two_blob_dist, None, 0.5, n_max=6)
    assert res.n_g == 2
    assert len(set(forest.tree_id[:3])) == 1 and len(set(forest.tree_id[3:])) == 1
    assert forest.tree_id[0] != forest.tree_id[3]
    # against the independent evaluation of the objective
    best, Q, costs = oracles.lodog_bruteforce(oracles.dist_matrix(X), default_sigma(two_blob_dist), 0.5, 6)
    assert best == res.n_g
    np.testing.assert_allclose(res.objective_curve, Q, atol=1e-9)
    np.testing.assert_allclose(res.dist_cost, costs, atol=1e-9)


def test_n_max_default():
    assert default_n_max(5) == 5
    assert default_n_max(150) == 52
    assert default_n_max(1484) == 156


def test_edge_list(tmp_path):
    f = leading_tree(ONE_D, 1.0)
    lines = edge_list_text(f).splitlines()
    assert lines[0] == "node,parent,rho,delta,gamma,layer,tree_id"
    assert lines[2].startswith("1,,")
    assert lines[1].split(",")[1] == "1"


def check_forest(forest, n_g=None):
    n = forest.n
    par = forest.parent
    roots = np.flatnonzero(par == NO_PARENT)
    assert sorted(roots.tolist()) == sorted(forest.roots.tolist())
    if n_g is not None:
        assert len(roots) == n_g
    nonroot = par != NO_PARENT
    rho = forest.rho
    for i in np.flatnonzero(nonroot):
        p = par[i]
        assert rho[p] > rho[i] or (rho[p] == rho[i] and p < i)
        assert forest.layer[i] == forest.layer[p] + 1
        assert forest.tree_id[i] == forest.tree_id[p]
    assert np.all(forest.layer[roots] == 1)
    np.testing.assert_array_equal(forest.gamma, forest.rho * forest.delta)
    assert sorted(set(forest.tree_id.tolist())) == list(range(1, len(roots) + 1))
    for t, r in enumerate(forest.roots, start=1):
        assert forest.tree_id[r] == t
    assert np.all(forest.delta >= 0)
    assert np.bincount(forest.tree_id)[1:].sum() == n


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_forest_invariants_hypothesis(seed):
    rng = np.random.default_rng(seed)
    X, _ = random_dataset(rng, n=int(rng.integers(2, 120)))
    D = pairwise_distances(X)
    forest, res = build_forest(D, None, float(rng.uniform(0.05, 0.95)))
    check_forest(forest, res.n_g)
    assert res.n_g == int(np.argmin(res.objective_curve)) + 1
    assert 1 <= res.n_g <= forest.n


def test_matches_loop_oracle_random():
    rng = np.random.default_rng(3)
    for _ in range(10):
        X = rng.normal(size=(int(rng.integers(2, 25)), 2))
        X[rng.integers(0, len(X))] = X[0]  # one duplicate row
        D = oracles.dist_matrix(X)
        sigma = 0.9
        t = leading_tree(pairwise_distances(X), sigma)
        rho = oracles.densities(D, sigma)
        par, delta = oracles.parents(D, rho)
        np.testing.assert_allclose(t.rho, rho, atol=1e-12)
        assert t.parent.tolist() == par
        np.testing.assert_allclose(t.delta, delta, atol=1e-12)
        assert t.layer.tolist() == [oracles.depth(par, i) for i in range(len(X))]


def test_permutation_stability():
    rng = np.random.default_rng(4)
    for _ in range(10):
        X = rng.normal(size=(40, 3))
        perm = rng.permutation(40)
        a, ra = build_forest(pairwise_distances(X), 0.7, 0.5)
        b, rb = build_forest(pairwise_distances(X[perm]), 0.7, 0.5)
        # node perm[i] of the original is node i of the permuted set
        back = np.empty(40, dtype=int)
        back[perm] = np.arange(40)
        assert ra.n_g == rb.n_g
        np.testing.assert_allclose(b.gamma, a.gamma[perm], atol=1e-12)
        np.testing.assert_allclose(b.delta, a.delta[perm], atol=1e-12)
        mapped = np.where(b.parent == NO_PARENT, NO_PARENT, perm[np.maximum(b.parent, 0)])
        np.testing.assert_array_equal(mapped, a.parent[perm])
        assert sorted(perm[b.roots].tolist()) == sorted(a.roots.tolist())


def test_cut_refinement_and_incremental_cost():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(80, 2))
    tree = leading_tree(pairwise_distances(X))
    _, costs = lodog_curve(tree, 0.5, 30)
    prev = cut(tree, 1)
    for g in range(2, 31):
        cur = cut(tree, g)
        # every old granule is the union of new ones, and exactly one splits
        splits = 0
        for t in range(1, g):
            new_ids = set(cur.tree_id[prev.tree_id == t].tolist())
            splits += len(new_ids) - 1
        assert splits == 1
        direct = sum(cur.delta[i] for i in range(cur.n) if cur.parent[i] != NO_PARENT)
        assert costs[g - 1] == pytest.approx(direct, abs=1e-9)
        prev = cur


def test_cut_bounds():
    tree = leading_tree(ONE_D, 1.0)
    with pytest.raises(ConfigError):
        cut(tree, 0)
    with pytest.raises(ConfigError):
        cut(tree, 4)
    with pytest.raises(StructureError):
        cut(cut(tree, 2), 2)
