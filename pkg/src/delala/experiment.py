"""Experiment orchestration: repeated runs, sweeps and report emission."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, _coerce
from .dataset import MISSING, Dataset, load_builtin, load_csv
from .errors import ConfigError, DataError
from .pipeline import STAGES, accuracy, prepare, run_pipeline

REPORT_FORMAT = "delala.report/1"
CSV_COLUMNS = (
    "dataset", "pipeline", "repeats", "accuracy", "accuracy_std", "n", "n_labeled",
    "objective", "forest_ms", "selection_ms", "training_ms", "inference_ms",
)
SWEEP_COLUMNS = ("parameter", "value", "accuracy", "accuracy_std")


def resolve_dataset(source: str) -> Dataset:
    """A CSV path when the file exists, else the name of a bundled dataset."""
    p = Path(source)
    if p.suffix.lower() == ".csv" or p.is_file():
        return load_csv(p)
    return load_builtin(source)


@dataclass
class RunReport:
    dataset: str
    pipeline: str
    accuracy: float
    accuracy_std: float
    accuracies: list
    per_class: dict
    timings_ms: dict
    n: int
    n_labeled: int
    selected: list
    roles: dict
    objective: float | None
    loss: dict | None
    params: dict
    config: dict
    subtrees: list = field(default_factory=list)
    queries: int = 0

    def to_dict(self, canonical=False) -> dict:
        d = asdict(self)
        d["format"] = REPORT_FORMAT
        if canonical:
            d.pop("timings_ms")
        return d

    def to_json(self, canonical=False) -> str:
        return json.dumps(self.to_dict(canonical), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        d = json.loads(text)
        d.pop("format", None)
        d.setdefault("timings_ms", dict.fromkeys(STAGES, 0.0))
        return cls(**d)

    def csv_row(self) -> dict:
        row = {
            "dataset": self.dataset, "pipeline": self.pipeline, "repeats": len(self.accuracies),
            "accuracy": self.accuracy, "accuracy_std": self.accuracy_std, "n": self.n,
            "n_labeled": self.n_labeled, "objective": "" if self.objective is None else self.objective,
        }
        for st in STAGES:
            row[f"{st}_ms"] = self.timings_ms.get(st, 0.0)
        return row

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerow(self.csv_row())
        return buf.getvalue()

    def to_human(self) -> str:
        acc = f"{self.accuracy:.2f}"
        if len(self.accuracies) > 1:
            acc += f" +- {self.accuracy_std:.2f} over {len(self.accuracies)} runs"
        lines = [
            f"dataset    {self.dataset} (n={self.n}, labeled={self.n_labeled})",
            f"pipeline   {self.pipeline}",
            f"accuracy   {acc} %",
        ]
        if self.objective is not None:
            lines.append(f"J(L)       {self.objective:.6g}")
        if self.loss:
            lines.append(f"loss       {self.loss['initial']:.6g} -> {self.loss['final']:.6g} "
                         f"({self.loss['iterations']} iterations)")
        lines.append("")
        lines.append(f"{'stage':<12}{'ms':>12}")
        for st in STAGES:
            lines.append(f"{st:<12}{self.timings_ms.get(st, 0.0):>12.2f}")
        lines.append("")
        lines.append(f"{'class':<12}{'accuracy':>12}")
        for name, a in self.per_class.items():
            lines.append(f"{name:<12}{'-' if a is None else f'{a:.2f}':>12}")
        if self.subtrees:
            lines.append("")
            lines.append(f"{'subtree':<9}{'size':>6}{'depth':>7}{'labels':>8}{'classes':>9}{'local acc':>11}  method")
            for j, s in enumerate(self.subtrees):
                la = "-" if s["local_accuracy"] is None else f"{s['local_accuracy']:.1f}"
                lines.append(f"{j:<9}{s['size']:>6}{s['depth']:>7}{s['labels_used']:>8}"
                             f"{len(s['classes']):>9}{la:>11}  {s['method']}")
        return "\n".join(lines) + "\n"


def emit_report(report: RunReport, fmt="human", path=None, canonical=False) -> str:
    """Render ``report`` as json, csv or a human table; write it to ``path`` if given."""
    if fmt == "json":
        text = report.to_json(canonical)
    elif fmt == "csv":
        text = report.to_csv()
    elif fmt == "human":
        text = report.to_human()
    else:
        raise ConfigError(f"unknown report format {fmt!r}")
    if path is not None:
        try:
            Path(path).write_text(text, encoding="utf-8")
        except OSError as e:
            raise DataError(f"cannot write report to {path}: {e}") from None
    return text


def _per_class(ds: Dataset, result) -> dict:
    u = result.unlabeled
    out = {}
    for c, name in enumerate(ds.class_names, start=1):
        mask = ds.labels[u] == c
        out[name] = float(100.0 * np.mean(result.predictions[u][mask] == c)) if mask.any() else None
    return out


def _subtree_rows(ds: Dataset, result) -> list:
    rows = []
    for node in result.subtrees:
        test = node.test if node.test is not None else np.array([], dtype=int)
        local = float(100.0 * np.mean(result.predictions[test] == ds.labels[test])) if len(test) else None
        rows.append({
            "size": int(len(node.members)), "depth": int(node.depth), "budget": int(node.budget),
            "labels_used": len(node.labeled), "classes": [int(c) for c in node.classes],
            "method": node.method, "local_accuracy": local,
        })
    return rows


def _loss_summary(model):
    if model is None:
        return None
    h = model.loss_history
    return {"initial": float(h[0]), "final": float(h[-1]), "iterations": len(h) - 1}


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def run(config: ExperimentConfig, ds: Dataset | None = None) -> RunReport:
    """Execute ``config.pipeline`` ``config.repeats`` times and summarize.

    Deterministic pipelines give identical repeats.  The two random-label
    pipelines use seed ``config.seed + r`` for repeat ``r``.
    """
    config.validate()
    if ds is None:
        ds = resolve_dataset(config.dataset)
    if not ds.labeled_mask.all():
        raise DataError("scoring needs a label on every row of the dataset")
    accs, times, first = [], [], None
    for r in range(config.repeats):
        result, annot = run_pipeline(ds, config, seed=config.seed + r)
        accs.append(accuracy(result, ds.labels))
        times.append(result.timings)
        if first is None:
            first = (result, annot)
    result, annot = first
    timings = {st: float(np.mean([t[st] for t in times])) for st in STAGES}
    roles = {}
    if result.selection is not None:
        roles = {str(int(i)): role for i, role in sorted(result.selection.role.items())}
    return RunReport(
        dataset=ds.name or str(config.dataset),
        pipeline=config.pipeline,
        accuracy=float(np.mean(accs)),
        accuracy_std=float(np.std(accs)),
        accuracies=[float(a) for a in accs],
        per_class=_per_class(ds, result),
        timings_ms=timings,
        n=ds.n,
        n_labeled=int(len(result.labeled)),
        selected=[int(i) for i in (result.selection.selected if result.selection is not None else result.labeled)],
        roles=roles,
        objective=result.objective,
        loss=_loss_summary(result.model),
        params={k: _jsonable(v) for k, v in result.params.items()},
        config=config.to_dict(),
        subtrees=_subtree_rows(ds, result),
        queries=len(annot.queries),
    )


@dataclass
class SweepReport:
    parameter: str
    values: list
    reports: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for v, rep in zip(self.values, self.reports):
            w.writerow([self.parameter, v, rep.accuracy, rep.accuracy_std])
        return buf.getvalue()

    def to_json(self, canonical=False) -> str:
        return json.dumps({
            "parameter": self.parameter,
            "values": self.values,
            "reports": [r.to_dict(canonical) for r in self.reports],
        }, indent=2, sort_keys=True) + "\n"


def sweep(config: ExperimentConfig, parameter: str, grid) -> SweepReport:
    """One :func:`run` per value of ``parameter`` in ``grid``."""
    if parameter not in config.to_dict() or parameter in ("dataset", "pipeline", "repeats"):
        raise ConfigError(f"unknown or non-tunable parameter {parameter!r}")
    values = [_coerce(parameter, v) for v in grid]
    if not values:
        raise ConfigError("sweep grid is empty")
    ds = resolve_dataset(config.dataset)
    reports = [run(config.replace(**{parameter: v}), ds) for v in values]
    return SweepReport(parameter, values, reports)


def parse_grid(text: str) -> list:
    """``"2,3,4"`` or a range ``"0.1:0.9:0.2"`` (start:stop:step, stop included)."""
    text = text.strip()
    if ":" in text:
        try:
            start, stop, step = (float(s) for s in text.split(":"))
        except ValueError:
            raise ConfigError(f"bad grid range {text!r}; expected start:stop:step") from None
        if step <= 0:
            raise ConfigError("grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        vals = [round(start + i * step, 12) for i in range(count)]
        return [int(v) if all(float(x).is_integer() for x in (start, step)) else v for v in vals]
    return [s.strip() for s in text.split(",") if s.strip()]


def forest_summary(ds: Dataset, config: ExperimentConfig):
    """Leading forest of ``ds`` under ``config`` with its granulation result."""
    from .leading_forest import build_forest
    from .pipeline import _sigma

    _, dist = prepare(ds, config)
    sigma = _sigma(dist, config)
    forest, gran = build_forest(dist, sigma, config.alpha_lodog, config.n_max)
    return forest, gran, sigma


def select_only(ds: Dataset, config: ExperimentConfig) -> dict:
    """Selection stage alone.

    Returns the full composite ranking with roles; when every row is
    labeled the quota walk is run too and its result included.
    """
    from .labeling import CENTRAL, DIVERGENT, rank_samples, select_labeled, selection_scores
    from .pipeline import default_budget

    forest, gran, sigma = forest_summary(ds, config)
    scores = selection_scores(forest, config.w, config.xor_normalization)
    ranking = rank_samples(scores)
    div, cen = scores.divergent_term, scores.central_term
    out = {
        "dataset": ds.name,
        "n": ds.n,
        "n_trees": gran.n_g,
        "ranking": [
            {"index": int(i), "composite": float(scores.composite[i]),
             "role": DIVERGENT if div[i] > cen[i] else CENTRAL}
            for i in ranking
        ],
    }
    if ds.class_count and np.all(ds.labels != MISSING):
        l = config.l if config.l is not None else default_budget(ds.class_count, config.k)
        sel = select_labeled(ranking, ds.labels, l, config.k, ds.class_count, scores)
        out["selection"] = sel.to_dict()
    return out
