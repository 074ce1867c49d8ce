"""Acceptance suite: one test per numbered criterion, each printing a verdict line.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import time
from pathlib import Path

import numpy as np
import pytest
from conftest import TWO_BLOBS, random_dataset

import gradcheck
import oracles
from delala.config import load_config
from delala.dataset import load_builtin, pairwise_distances
from delala.experiment import run
from delala.klmca import classify_1nn
from delala.labeling import Annotator, rank_samples, select_labeled, selection_scores
from delala.lapoleaf import LabelMatrix, propagate_matrix
from delala.leading_forest import NO_PARENT, build_forest, default_sigma
from delala.pipeline import run_pipeline

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
REPEATS = 10


@pytest.fixture
def verdict(request):
    """``verdict(n, ok, detail)`` writes one PASS/FAIL line to the terminal."""
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        else:  # pragma: no cover
            print(line)
        return ok

    return emit


def profile(name, **changes):
    return load_config(CONFIGS / f"{name}.cfg").replace(**changes)


def timed_run(cfg):
    t0 = time.perf_counter()
    rep = run(cfg)
    return rep, time.perf_counter() - t0


@pytest.mark.parametrize("n,name,floor,limit", [(1, "iris", 93.5, 2.0), (2, "wine", 93.5, 2.0),
                                                 (3, "yeast", 40.0, 30.0)])
def test_criteria_1_to_3_accuracy(verdict, n, name, floor, limit):
    cfg = profile(name)
    rep, secs = timed_run(cfg)
    ok = rep.accuracy >= floor and secs < limit
    verdict(n, ok, f"{name} {cfg.pipeline}: {rep.accuracy:.2f}% (>= {floor}), {secs:.2f} s (< {limit} s)")
    assert rep.accuracy >= floor
    assert secs < limit


@pytest.fixture(scope="module")
def repeated():
    """Ten-repeat reports per dataset for the tuned profile and both baselines."""
    out = {}
    for name in ("iris", "wine", "yeast"):
        cfg = profile(name, repeats=REPEATS)
        out[name] = {
            "profile": run(cfg),
            "random": run(cfg.replace(pipeline="random-baseline")),
            "lapoleaf": run(cfg.replace(pipeline="lapoleaf")),
        }
        if cfg.pipeline != "delala":
            out[name]["flat"] = run(cfg.replace(pipeline="delala"))
    return out


def test_criterion_4_stability(verdict, repeated):
    det = {}
    for name, reps in repeated.items():
        det[name] = max(r.accuracy_std for k, r in reps.items() if k in ("profile", "flat"))
    rnd = {name: reps["random"].accuracy_std for name, reps in repeated.items()}
    noisy = sum(s > 1.0 for s in rnd.values())
    ok = all(s == 0.0 for s in det.values()) and noisy >= 2
    verdict(4, ok, "delala std " + ", ".join(f"{k}={v:g}" for k, v in det.items())
            + "; random std " + ", ".join(f"{k}={v:.2f}" for k, v in rnd.items()))
    assert all(s == 0.0 for s in det.values())
    assert noisy >= 2


def test_criterion_5_beats_lapoleaf(verdict, repeated):
    pairs = {name: (reps["profile"].accuracy, reps["lapoleaf"].accuracy) for name, reps in repeated.items()}
    ok = all(a > b for a, b in pairs.values())
    verdict(5, ok, "; ".join(f"{k} {a:.2f} vs {b:.2f}" for k, (a, b) in pairs.items()))
    assert ok


def test_criterion_6_gradient(verdict):
    rng = np.random.default_rng(20240601)
    errs = [gradcheck.relative_error(*gradcheck.smooth_point(rng)) for _ in range(50)]
    worst = max(errs)
    verdict(6, worst < 1e-4, f"50 hinge-smooth points, worst relative error {worst:.2e} (< 1e-4)")
    assert worst < 1e-4


def check_structure(rng):
    X, y = random_dataset(rng)
    n = len(X)
    C = int(y.max())
    D = pairwise_distances(X)
    forest, gran = build_forest(D, None, float(rng.uniform(0.05, 0.95)))
    par, rho = forest.parent, forest.rho
    rank = forest.density_rank()
    # parent-density monotonicity, and the parent is the nearest denser node
    for i in np.flatnonzero(par != NO_PARENT):
        assert rank[par[i]] < rank[i]
        denser = np.flatnonzero(rank < rank[i])
        assert D[i, par[i]] == D[i, denser].min()
    # a partition into n_g trees, each headed by one root
    roots = np.flatnonzero(par == NO_PARENT)
    assert len(roots) == gran.n_g == forest.n_trees
    assert sorted(roots.tolist()) == sorted(forest.roots.tolist())
    assert np.all(forest.tree_id >= 1) and np.bincount(forest.tree_id)[1:].sum() == n
    nr = par != NO_PARENT
    assert np.all(forest.tree_id[nr] == forest.tree_id[par[nr]])
    # gamma and layers
    assert np.array_equal(forest.gamma, rho * forest.delta)
    assert np.all(forest.layer[roots] == 1)
    assert np.all(forest.layer[nr] == forest.layer[par[nr]] + 1)

    # LaPOLeaF completeness and seed preservation
    idx = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
    seeds = {int(i): int(y[i]) for i in idx}
    L = propagate_matrix(forest, seeds, C, D)
    assert L.labeled.all()
    assert np.array_equal(L.vectors[idx], LabelMatrix.from_seeds(n, C, seeds).vectors[idx])

    # 1NN against the exhaustive scan
    P = rng.normal(size=(int(rng.integers(1, 4)), n))
    lab = idx[: max(1, len(idx) // 2)]
    test = np.setdiff1d(np.arange(n), lab)
    if len(test):
        got = classify_1nn(P[:, lab], y[lab], P[:, test])
        assert got.tolist() == oracles.nn_scan(P[:, lab], y[lab].tolist(), P[:, test])

    # selection determinism and quota soundness
    w = float(rng.uniform())
    s = selection_scores(forest, w)
    r1 = rank_samples(s)
    assert np.array_equal(r1, rank_samples(selection_scores(forest, w)))
    counts = np.bincount(y, minlength=C + 1)[1:]
    if counts.min() >= 1:
        k = int(min(counts.min(), 2))
        l = min(n, k * C + int(rng.integers(0, 4)))
        a = select_labeled(r1, Annotator(y), l, k, C, s)
        b = select_labeled(r1, Annotator(y), l, k, C, s)
        assert a.selected == b.selected
        assert len(a.selected) == len(set(a.selected)) == l
        for c in range(1, C + 1):
            assert len(a.per_class[c]) == k and all(y[i] == c for i in a.per_class[c])


def test_criterion_7_structural_invariants(verdict):
    rng = np.random.default_rng(7)
    failures = []
    for trial in range(200):
        try:
            check_structure(rng)
        except AssertionError as e:  # collect, then fail once
            failures.append((trial, repr(e)))
    verdict(7, not failures, f"200 random datasets (n <= 300), {len(failures)} failing")
    assert not failures, failures[:3]


def test_criterion_8_lodog_bruteforce(verdict):
    D = pairwise_distances(TWO_BLOBS)
    sigma = default_sigma(D)
    _, gran = build_forest(D, sigma, 0.5, n_max=len(D))
    best, Q, _ = oracles.lodog_bruteforce(oracles.dist_matrix(TWO_BLOBS), sigma, 0.5, len(D))
    err = float(np.max(np.abs(np.asarray(Q) - gran.objective_curve)))
    ok = best == gran.n_g and err <= 1e-9
    verdict(8, ok, f"N_g {gran.n_g} vs brute force {best}, max |dQ| = {err:.1e}")
    assert best == gran.n_g
    assert err <= 1e-9


def synthetic(n, seed=0, C=4, d=5):
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=4.0, size=(C, d))
    y = np.arange(n) % C
    return centers[y] + rng.normal(size=(n, d)), y + 1


def selection_seconds(n, reps=7):
    X, y = synthetic(n)
    forest, _ = build_forest(pairwise_distances(X))
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        s = selection_scores(forest, 0.5)
        select_labeled(rank_samples(s), Annotator(y), 40, 3, 4, s)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def test_criterion_9_performance(verdict):
    t2, t4 = selection_seconds(2000), selection_seconds(4000)
    ratio = t4 / t2
    ds = load_builtin("iris")
    t0 = time.perf_counter()
    run_pipeline(ds, profile("iris"))
    iris = time.perf_counter() - t0
    ok = ratio < 2.5 and iris < 2.9
    verdict(9, ok, f"selection {t2 * 1e3:.2f} ms -> {t4 * 1e3:.2f} ms (x{ratio:.2f} < 2.5); "
                   f"iris pipeline {iris:.2f} s (< 2.9 s)")
    assert ratio < 2.5
    assert iris < 2.9


def test_letter_smoke(verdict):
    ds = load_builtin("letter2000")
    cfg = load_config(None, dataset="letter2000", pipeline="multimetric", l=150)
    rep = run(cfg, ds)
    ok = rep.accuracy > 100.0 / 26
    verdict("letter", ok, f"2000-row Letter multimetric {rep.accuracy:.2f}% (> {100 / 26:.2f}%)")
    assert ok
