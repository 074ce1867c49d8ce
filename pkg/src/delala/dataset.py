"""Dataset ingestion, normalization, distance and kernel matrices."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError, DataError

MISSING = 0  # label id of an unlabeled row; class ids are 1..C


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with optional 1-based class labels.

    ``labels[i] == MISSING`` marks a row without a label.  ``class_names[c-1]``
    is the original label string of class id ``c``.
    """

    features: np.ndarray
    labels: np.ndarray
    class_names: tuple = ()
    name: str = ""
    feature_names: tuple = field(default=(), compare=False)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"features must be a non-empty 2-D matrix, got shape {X.shape}")
        y = np.asarray(self.labels, dtype=int)
        if y.shape != (X.shape[0],):
            raise DataError("labels must have one entry per row")
        C = len(self.class_names)
        if np.any((y < 0) | (y > C)):
            raise DataError(f"label ids must lie in 1..{C} (or {MISSING} for absent)")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    @property
    def labeled_mask(self) -> np.ndarray:
        return self.labels != MISSING

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=int)
        return replace(self, features=self.features[indices], labels=self.labels[indices])

    def without_labels(self, keep=()) -> "Dataset":
        """Copy whose labels are hidden except at the indices in ``keep``."""
        y = np.full(self.n, MISSING, dtype=int)
        keep = np.asarray(keep, dtype=int)
        y[keep] = self.labels[keep]
        return replace(self, labels=y)


def load_csv(path, label_column=-1, header="auto", name=None) -> Dataset:
    """Read a comma separated file into a :class:`Dataset`.

    Parameters
    ----------
    path : str or Path
        UTF-8 CSV file.
    label_column : int or None
        Index of the label column (negative indices count from the end).
        ``None`` means the file has no labels.
    header : bool or "auto"
        Whether the first row is a header.  ``"auto"`` treats the first row
        as a header when none of its feature cells parses as a float.
    name : str, optional
        Dataset identifier; defaults to the file stem.

    Labels are mapped to ids ``1..C`` in order of first appearance; an empty
    label cell yields an absent label.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: empty input")

    width = len(rows[0])
    lab = None
    if label_column is not None:
        lab = label_column % width
        if width < 2:
            raise DataError(f"{path}: need at least one feature column besides the label")
    feat_cols = [j for j in range(width) if j != lab]

    def is_numeric(cell):
        try:
            float(cell)
        except ValueError:
            return False
        return True

    first = 0
    feature_names = ()
    if header is True or (header == "auto" and not any(is_numeric(rows[0][j]) for j in feat_cols)):
        feature_names = tuple(rows[0][j].strip() for j in feat_cols)
        first = 1
    if first >= len(rows):
        raise DataError(f"{path}: empty input")

    X = np.empty((len(rows) - first, len(feat_cols)))
    y = np.zeros(len(rows) - first, dtype=int)
    classes: dict[str, int] = {}
    for r, row in enumerate(rows[first:]):
        lineno = r + first + 1
        if len(row) != width:
            raise DataError(f"{path}: line {lineno}: expected {width} fields, got {len(row)}")
        for c, j in enumerate(feat_cols):
            try:
                X[r, c] = float(row[j])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-numeric feature {row[j]!r}") from None
        if lab is not None:
            cell = row[lab].strip()
            if cell:
                y[r] = classes.setdefault(cell, len(classes) + 1)
    return Dataset(X, y, tuple(classes), name or path.stem, feature_names)


def save_csv(ds: Dataset, path, header=True):
    """Write ``ds`` in the format read by :func:`load_csv` (label last)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header:
            names = ds.feature_names or tuple(f"x{j}" for j in range(ds.d))
            fh.write(",".join(list(names) + ["class"]) + "\n")
        for row, lab in zip(ds.features, ds.labels):
            cells = [repr(float(v)) for v in row]
            cells.append(ds.class_names[lab - 1] if lab != MISSING else "")
            fh.write(",".join(cells) + "\n")


def load_builtin(name: str) -> Dataset:
    """Load one of the bundled fixtures: iris, wine, yeast or letter2000."""
    ref = resources.files("delala") / "data" / f"{name}.csv"
    with resources.as_file(ref) as p:
        if not p.exists():
            raise DataError(f"no bundled dataset named {name!r}")
        return load_csv(p, name=name)


def zscore_normalize(ds: Dataset) -> Dataset:
    """Standardize every column with the population standard deviation.

    Constant columns become all zeros.
    """
    X = ds.features
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    # relative threshold so float noise in a constant column does not blow up
    const = sd <= 1e-12 * np.maximum(1.0, np.abs(mu))
    Z = (X - mu) / np.where(const, 1.0, sd)
    Z[:, const] = 0.0
    return replace(ds, features=Z)


def pairwise_distances(X) -> np.ndarray:
    """Euclidean distance matrix between the rows of ``X`` (or a Dataset)."""
    if isinstance(X, Dataset):
        X = X.features
    X = np.asarray(X, dtype=float)
    D = cdist(X, X)
    # cdist is exact per pair; enforce the structural zeros explicitly
    np.fill_diagonal(D, 0.0)
    return np.maximum(D, D.T)


def cross_distances(A, B) -> np.ndarray:
    return cdist(np.asarray(A, dtype=float), np.asarray(B, dtype=float))


def gaussian_kernel(dist, bandwidth: float) -> np.ndarray:
    """Entrywise ``exp(-d**2 / bandwidth**2)`` of a distance block."""
    if not bandwidth > 0:
        raise ConfigError(f"kernel bandwidth must be positive, got {bandwidth}")
    dist = np.asarray(dist, dtype=float)
    return np.exp(-(dist / bandwidth) ** 2)


def distance_percentile(dist, q: float) -> float:
    """``q``-th percentile of the off-diagonal entries of a square distance matrix."""
    dist = np.asarray(dist)
    n = dist.shape[0]
    if n < 2:
        return 1.0
    iu = np.triu_indices(n, k=1)
    return float(np.percentile(dist[iu], q))
