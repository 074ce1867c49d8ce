"""Deterministic choice of the samples to send for labeling.

Each node gets a typicalness score ``h(gamma) = 1 / log(gamma)`` (small for
cluster centers) and a divergence score ``rho / layer`` (small for sparse,
deep nodes).  The two are combined by a weighted continuous XOR and the
resulting ranking is walked with per-class quotas.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError, DataError, InfeasibleBudgetError
from .leading_forest import LeadingForest

CENTRAL = "central"
DIVERGENT = "divergent"

# gamma is rescaled into [GAMMA_LO, e] so that log(gamma) is in (0, 1]
GAMMA_LO = 1.0 + 1e-6


@dataclass(frozen=True)
class SelectionScores:
    typicalness: np.ndarray
    divergence: np.ndarray
    w: float
    typicalness_norm: np.ndarray
    divergence_norm: np.ndarray
    normalization: str = "minmax"

    @property
    def divergent_term(self) -> np.ndarray:
        a, b = self.typicalness_norm, self.divergence_norm
        return self.w * a * (1 - b)

    @property
    def central_term(self) -> np.ndarray:
        a, b = self.typicalness_norm, self.divergence_norm
        return (1 - self.w) * b * (1 - a)

    @property
    def composite(self) -> np.ndarray:
        return self.divergent_term + self.central_term


@dataclass
class SelectionResult:
    selected: list
    per_class: dict
    global_extras: list
    role: dict
    queries: list = field(default_factory=list)
    labels: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "selected": [int(i) for i in self.selected],
            "labels": {str(int(i)): int(c) for i, c in self.labels.items()},
            "per_class": {str(c): [int(i) for i in v] for c, v in sorted(self.per_class.items())},
            "global_extras": [int(i) for i in self.global_extras],
            "role": {str(int(i)): r for i, r in self.role.items()},
            "queries": len(self.queries),
        }

    def to_json(self, **extra) -> str:
        d = self.to_dict()
        d.update(extra)
        return json.dumps(d, indent=2, sort_keys=True)


def inverse_log(gamma) -> np.ndarray:
    """The decreasing map ``1 / log(gamma)``, defined for gamma > 1."""
    return 1.0 / np.log(np.asarray(gamma, dtype=float))


def rescale_gamma(gamma) -> np.ndarray:
    """Affine map of gamma onto ``[1 + 1e-6, e]``; constant input maps to e."""
    g = np.asarray(gamma, dtype=float)
    lo, hi = g.min(), g.max()
    if hi - lo <= 0:
        return np.full_like(g, np.e)
    return GAMMA_LO + (g - lo) * (np.e - GAMMA_LO) / (hi - lo)


def normalize(v, how="minmax") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if how == "minmax":
        lo, hi = v.min(), v.max()
        return np.zeros_like(v) if hi - lo <= 0 else (v - lo) / (hi - lo)
    if how == "zscore":
        sd = v.std()
        return np.zeros_like(v) if sd <= 0 else (v - v.mean()) / sd
    if how == "rank":
        # average ranks mapped to [0, 1]; robust to the heavy tail of 1/log
        if len(v) == 1:
            return np.zeros(1)
        return (rankdata(v) - 1) / (len(v) - 1)
    raise ConfigError(f"unknown normalization {how!r}")


def selection_scores(forest: LeadingForest, w: float, normalization="minmax") -> SelectionScores:
    if not 0 <= w <= 1:
        raise ConfigError(f"XOR weight must lie in [0, 1], got {w}")
    typ = inverse_log(rescale_gamma(forest.gamma))
    div = forest.rho / forest.layer
    return SelectionScores(
        typicalness=typ,
        divergence=div,
        w=float(w),
        typicalness_norm=normalize(typ, normalization),
        divergence_norm=normalize(div, normalization),
        normalization=normalization,
    )


def conti_xor_small(a, b, w: float, normalization="minmax") -> np.ndarray:
    """Indices sorted by ``w a*(1-b*) + (1-w) b*(1-a*)``, descending.

    ``a*`` and ``b*`` are the normalized inputs.  Ties keep ascending index
    order.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError(f"score arrays must be 1-D of equal non-zero length, got {a.shape} and {b.shape}")
    if not 0 <= w <= 1:
        raise ConfigError(f"XOR weight must lie in [0, 1], got {w}")
    an, bn = normalize(a, normalization), normalize(b, normalization)
    com = w * an * (1 - bn) + (1 - w) * bn * (1 - an)
    return np.argsort(-com, kind="stable")


def rank_samples(scores: SelectionScores) -> np.ndarray:
    return np.argsort(-scores.composite, kind="stable")


class Annotator:
    """Reveals ground-truth labels one query at a time and logs every query."""

    def __init__(self, labels):
        self._labels = np.asarray(labels, dtype=int)
        self.queries: list[int] = []

    def __call__(self, i: int) -> int:
        self.queries.append(int(i))
        return int(self._labels[i])


def select_labeled(ranking, annotate, l: int, k: int, n_classes: int, scores=None) -> SelectionResult:
    """Walk ``ranking`` filling ``k`` slots per class and ``l - k*C`` global slots.

    ``annotate(i)`` returns the class id (1..C) of node ``i``; it is only
    called on popped nodes.  Skipped nodes are never revisited.  When
    ``scores`` is given each selected node is tagged with the role whose XOR
    term dominated its composite.
    """
    if k < 0 or l < 0:
        raise ConfigError("budget and quota must be non-negative")
    if l < k * n_classes:
        raise InfeasibleBudgetError(f"budget l={l} cannot give k={k} samples to each of {n_classes} classes")
    if callable(annotate):
        oracle = annotate
    else:
        oracle = Annotator(annotate)
    p_global = l - k * n_classes
    per_class = {c: [] for c in range(1, n_classes + 1)}
    extras: list[int] = []
    selected: list[int] = []
    labels: dict[int, int] = {}
    queries: list[int] = []
    for i in ranking:
        if len(selected) >= l:
            break
        i = int(i)
        c = oracle(i)
        queries.append(i)
        if c not in per_class:
            raise DataError(f"annotator returned class {c} for node {i}; expected 1..{n_classes}")
        if len(per_class[c]) < k:
            per_class[c].append(i)
        elif p_global > 0 and len(extras) < p_global:
            extras.append(i)
        else:
            continue
        selected.append(i)
        labels[i] = c
    if len(selected) < l:
        short = [c for c, v in per_class.items() if len(v) < k]
        raise DataError(f"ranking exhausted with {len(selected)} of {l} labels; classes short of quota: {short}")
    role = {}
    if scores is not None:
        div, cen = scores.divergent_term, scores.central_term
        role = {i: DIVERGENT if div[i] > cen[i] else CENTRAL for i in selected}
    return SelectionResult(selected, per_class, extras, role, queries, labels)


def objective_value(sel: SelectionResult, scores: SelectionScores, alpha: float) -> float:
    """``alpha * sum h(gamma) over central + (1 - alpha) * sum rho/layer over divergent``."""
    cen = [i for i in sel.selected if sel.role.get(i) == CENTRAL]
    div = [i for i in sel.selected if sel.role.get(i) == DIVERGENT]
    return float(alpha * scores.typicalness[cen].sum() + (1 - alpha) * scores.divergence[div].sum())


def xor_objective(sel: SelectionResult, scores: SelectionScores, alpha: float) -> float:
    """Maximization form: sum over selected of the XOR composite with weight ``alpha``."""
    idx = np.asarray(sel.selected, dtype=int)
    a, b = scores.typicalness_norm[idx], scores.divergence_norm[idx]
    return float(np.sum(alpha * a * (1 - b) + (1 - alpha) * (1 - a) * b))
