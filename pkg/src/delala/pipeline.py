"""End-to-end pipelines: DeLaLA, multi-metric DeLaLA and the two baselines.

Every pipeline receives the dataset with its labels hidden plus an
:class:`~delala.labeling.Annotator` that reveals labels on request, so the
only ground truth a pipeline sees is what it paid for.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import klmca
from .config import ExperimentConfig
from .dataset import Dataset, distance_percentile, gaussian_kernel, pairwise_distances, zscore_normalize
from .errors import ConfigError
from .labeling import (
    CENTRAL,
    DIVERGENT,
    Annotator,
    SelectionResult,
    objective_value,
    rank_samples,
    select_labeled,
    selection_scores,
)
from .lapoleaf import propagate
from .leading_forest import build_forest, default_sigma
from .multimetric import MultiMetric

STAGES = ("forest", "selection", "training", "inference")


@dataclass
class PipelineResult:
    predictions: np.ndarray
    labeled: np.ndarray
    labels: dict
    timings: dict = field(default_factory=lambda: dict.fromkeys(STAGES, 0.0))
    selection: object = None
    scores: object = None
    forest: object = None
    granulation: object = None
    model: object = None
    objective: float | None = None
    subtrees: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    metric_tree: object = None

    @property
    def unlabeled(self) -> np.ndarray:
        mask = np.ones(len(self.predictions), dtype=bool)
        mask[self.labeled] = False
        return np.flatnonzero(mask)


@contextmanager
def _timed(timings, stage):
    t0 = time.perf_counter()
    try:
        yield
    finally:
        timings[stage] += (time.perf_counter() - t0) * 1e3


def default_budget(n_classes: int, k: int) -> int:
    """3 global extras for up to 3 classes, else 2 per class (Iris/Wine 12, Yeast 50)."""
    extra = 3 if n_classes <= 3 else 2 * n_classes
    return k * n_classes + extra


def prepare(ds: Dataset, cfg: ExperimentConfig):
    """Normalized feature matrix and its distance matrix."""
    X = zscore_normalize(ds).features if cfg.normalize else ds.features
    return X, pairwise_distances(X)


def _sigma(dist, cfg):
    if cfg.sigma is not None:
        return cfg.sigma
    if cfg.sigma_percentile == 2.0:
        return default_sigma(dist)
    return max(distance_percentile(dist, cfg.sigma_percentile), 1e-12)


def kernel_bandwidth(dist, cfg) -> float:
    if cfg.kernel_bandwidth is not None:
        return cfg.kernel_bandwidth
    return max(distance_percentile(dist, cfg.kernel_percentile), 1e-12)


def klmca_config(cfg: ExperimentConfig, bandwidth=None, p=None) -> klmca.KlmcaConfig:
    return klmca.KlmcaConfig(
        k=cfg.k, c=cfg.c, lam=cfg.lam, max_iters=cfg.max_iters,
        p=p if p is not None else cfg.p, bandwidth=bandwidth, tol=cfg.tol, seed=cfg.seed,
    )


def fit_and_classify(dist, train_idx, train_labels, test_idx, cfg, bandwidth, timings):
    """Train KLMCA on ``train_idx`` and 1NN-classify ``test_idx``.

    Returns ``(predicted labels for test_idx, model)``.
    """
    train_idx = np.asarray(train_idx, dtype=int)
    test_idx = np.asarray(test_idx, dtype=int)
    train_labels = np.asarray(train_labels, dtype=int)
    l = len(train_idx)
    n_cls = len(np.unique(train_labels))
    p = cfg.p if cfg.p is not None else klmca.default_p(n_cls, l)
    p = max(1, min(p, l - 1)) if l > 1 else 1
    with _timed(timings, "training"):
        D_ll = dist[np.ix_(train_idx, train_idx)]
        K_ll = gaussian_kernel(D_ll, bandwidth)
        model = klmca.train(
            K_ll, train_labels, D_ll, klmca_config(cfg, bandwidth, p),
            train_indices=train_idx, bandwidth=bandwidth,
        )
    with _timed(timings, "inference"):
        K_lu = gaussian_kernel(dist[np.ix_(train_idx, test_idx)], bandwidth)
        P_l = klmca.project(model, K_ll)
        P_u = klmca.project(model, K_lu)
        pred = klmca.classify_1nn(P_l, train_labels, P_u)
    return pred, model


def _assemble(n, labeled, labels, test_idx, test_pred):
    pred = np.zeros(n, dtype=int)
    pred[test_idx] = test_pred
    for i in labeled:
        pred[i] = labels[i]
    return pred


def run_delala(ds: Dataset, annotate, cfg: ExperimentConfig, dist=None) -> PipelineResult:
    """Deterministic selection, KLMCA on the selected samples, 1NN on the rest."""
    cfg.validate()
    timings = dict.fromkeys(STAGES, 0.0)
    C = ds.class_count
    l = cfg.l if cfg.l is not None else default_budget(C, cfg.k)
    with _timed(timings, "forest"):
        if dist is None:
            _, dist = prepare(ds, cfg)
        sigma = _sigma(dist, cfg)
        forest, gran = build_forest(dist, sigma, cfg.alpha_lodog, cfg.n_max)
    with _timed(timings, "selection"):
        scores = selection_scores(forest, cfg.w, cfg.xor_normalization)
        ranking = rank_samples(scores)
        sel = select_labeled(ranking, annotate, l, cfg.k, C, scores)
    bw = kernel_bandwidth(dist, cfg)
    labeled = np.asarray(sel.selected, dtype=int)
    test = np.setdiff1d(np.arange(ds.n), labeled)
    y_l = np.array([sel.labels[i] for i in labeled])
    test_pred, model = fit_and_classify(dist, labeled, y_l, test, cfg, bw, timings)
    return PipelineResult(
        predictions=_assemble(ds.n, labeled, sel.labels, test, test_pred),
        labeled=labeled,
        labels=sel.labels,
        timings=timings,
        selection=sel,
        scores=scores,
        forest=forest,
        granulation=gran,
        model=model,
        objective=objective_value(sel, scores, cfg.w),
        params={"sigma": sigma, "kernel_bandwidth": bw, "l": l, "p": model.p},
    )


def run_multimetric(ds: Dataset, annotate, cfg: ExperimentConfig, dist=None) -> PipelineResult:
    """One KLMCA metric per leading subtree, recursing into multi-class subtrees.

    With ``C <= c_tilde`` the flat pipeline runs unchanged.
    """
    cfg.validate()
    if ds.class_count <= cfg.c_tilde:
        return run_delala(ds, annotate, cfg, dist)
    timings = dict.fromkeys(STAGES, 0.0)
    C = ds.class_count
    l = cfg.l if cfg.l is not None else default_budget(C, cfg.k)
    with _timed(timings, "forest"):
        if dist is None:
            _, dist = prepare(ds, cfg)
        sigma = _sigma(dist, cfg)
    bw = kernel_bandwidth(dist, cfg)

    def train_fn(lab, y, test):
        return fit_and_classify(dist, lab, y, test, cfg, bw, timings)

    driver = MultiMetric(cfg.replace(l=l), dist, annotate, C, train_fn, lambda st: _timed(timings, st))
    tree = driver.fit_predict(sigma)
    labels = driver.labels
    labeled = np.array(sorted(labels), dtype=int)
    scores = driver.top_scores
    div, cen = scores.divergent_term, scores.central_term
    per_class = {c: [] for c in range(1, C + 1)}
    for i in driver.queries:
        per_class[labels[i]].append(i)
    sel = SelectionResult(
        selected=list(driver.queries), per_class=per_class, global_extras=[],
        role={i: DIVERGENT if div[i] > cen[i] else CENTRAL for i in driver.queries},
        queries=list(driver.queries), labels=dict(labels),
    )
    pred = driver.pred
    for i in labeled:
        pred[i] = labels[i]
    return PipelineResult(
        predictions=pred,
        labeled=labeled,
        labels=dict(labels),
        timings=timings,
        selection=sel,
        scores=scores,
        forest=driver.top_forest,
        granulation=driver.top_granulation,
        objective=objective_value(sel, scores, cfg.w),
        subtrees=list(tree.leaves()),
        params={"sigma": sigma, "kernel_bandwidth": bw, "l": l},
        metric_tree=tree,
    )


def random_labels(n, l, annotate, seed):
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=l, replace=False))
    return idx, {int(i): annotate(int(i)) for i in idx}


def run_random_baseline(ds: Dataset, annotate, cfg: ExperimentConfig, seed: int, dist=None) -> PipelineResult:
    """Uniformly random labeled set, same KLMCA + 1NN downstream as DeLaLA."""
    cfg.validate()
    timings = dict.fromkeys(STAGES, 0.0)
    l = cfg.l if cfg.l is not None else default_budget(ds.class_count, cfg.k)
    if dist is None:
        _, dist = prepare(ds, cfg)
    with _timed(timings, "selection"):
        labeled, labels = random_labels(ds.n, l, annotate, seed)
    bw = kernel_bandwidth(dist, cfg)
    test = np.setdiff1d(np.arange(ds.n), labeled)
    y_l = np.array([labels[i] for i in labeled])
    test_pred, model = fit_and_classify(dist, labeled, y_l, test, cfg, bw, timings)
    return PipelineResult(
        predictions=_assemble(ds.n, labeled, labels, test, test_pred),
        labeled=labeled, labels=labels, timings=timings, model=model,
        params={"kernel_bandwidth": bw, "l": l, "p": model.p, "seed": seed},
    )


def run_lapoleaf(ds: Dataset, annotate, cfg: ExperimentConfig, seed: int, dist=None) -> PipelineResult:
    """Random labeled set propagated over the optimal leading forest."""
    cfg.validate()
    timings = dict.fromkeys(STAGES, 0.0)
    l = cfg.l if cfg.l is not None else default_budget(ds.class_count, cfg.k)
    with _timed(timings, "forest"):
        if dist is None:
            _, dist = prepare(ds, cfg)
        sigma = _sigma(dist, cfg)
        forest, gran = build_forest(dist, sigma, cfg.alpha_lodog, cfg.n_max)
    with _timed(timings, "selection"):
        labeled, labels = random_labels(ds.n, l, annotate, seed)
    with _timed(timings, "inference"):
        pred = propagate(forest, labels, ds.class_count, dist)
    return PipelineResult(
        predictions=pred, labeled=labeled, labels=labels, timings=timings,
        forest=forest, granulation=gran, params={"sigma": sigma, "l": l, "seed": seed},
    )


def accuracy(result: PipelineResult, truth) -> float:
    """Percentage of unlabeled samples classified correctly."""
    u = result.unlabeled
    if len(u) == 0:
        return 100.0
    return float(100.0 * np.mean(result.predictions[u] == np.asarray(truth)[u]))


def run_pipeline(ds: Dataset, cfg: ExperimentConfig, seed=None, dist=None):
    """Run ``cfg.pipeline`` on ``ds``; returns ``(result, annotator)``."""
    hidden = ds.without_labels()
    annot = Annotator(ds.labels)
    seed = cfg.seed if seed is None else seed
    if cfg.pipeline == "delala":
        res = run_delala(hidden, annot, cfg, dist)
    elif cfg.pipeline == "multimetric":
        res = run_multimetric(hidden, annot, cfg, dist)
    elif cfg.pipeline == "random-baseline":
        res = run_random_baseline(hidden, annot, cfg, seed, dist)
    elif cfg.pipeline == "lapoleaf":
        res = run_lapoleaf(hidden, annot, cfg, seed, dist)
    else:
        raise ConfigError(f"unknown pipeline {cfg.pipeline!r}")
    return res, annot


__all__ = [
    "PipelineResult",
    "accuracy",
    "default_budget",
    "fit_and_classify",
    "prepare",
    "run_delala",
    "run_lapoleaf",
    "run_multimetric",
    "run_pipeline",
    "run_random_baseline",
]
