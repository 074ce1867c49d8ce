"""Kernelized large margin component analysis over a labeled kernel basis.

The projection of a point ``q`` is ``Omega @ k_q`` where ``k_q`` holds the
kernel values between ``q`` and the ``l`` training samples.  Training
minimizes

    sum_ij eta_ij D_ij + c * sum_ijm eta_ij (1 - y_im) max(D_ij - D_im + 1, 0)

with ``D_ij = ||Omega (k_i - k_j)||^2`` by gradient descent from a kernel
PCA start.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError, TrainingError

MODEL_FORMAT = "delala.klmca/1"


@dataclass
class KlmcaConfig:
    k: int = 3
    c: float = 1.0
    lam: float = 1e-3
    max_iters: int = 100
    p: int | None = None
    bandwidth: float | None = None
    tol: float = 1e-7
    seed: int = 42
    max_halvings: int = 20

    def validate(self, l: int | None = None):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not self.c > 0:
            raise ConfigError("push weight c must be positive")
        if not self.lam > 0:
            raise ConfigError("learning rate must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.p is not None and self.p < 1:
            raise ConfigError("projected dimension p must be >= 1")
        if self.p is not None and l is not None and self.p > l:
            raise ConfigError(f"projected dimension p={self.p} exceeds the {l} training samples")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ConfigError("kernel bandwidth must be positive")
        return self


@dataclass
class TargetNeighbors:
    eta: np.ndarray
    same_class: np.ndarray

    @property
    def pairs(self):
        return np.nonzero(self.eta)


@dataclass
class KlmcaModel:
    omega: np.ndarray
    train_kernel: np.ndarray
    train_indices: np.ndarray
    train_labels: np.ndarray
    bandwidth: float
    loss_history: list = field(default_factory=list)
    config: KlmcaConfig | None = None

    @property
    def p(self) -> int:
        return self.omega.shape[0]

    @property
    def l(self) -> int:
        return self.omega.shape[1]

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": MODEL_FORMAT,
                "train_indices": [int(i) for i in self.train_indices],
                "train_labels": [int(i) for i in self.train_labels],
                "bandwidth": self.bandwidth,
                "p": self.p,
                "omega": self.omega.tolist(),
                "train_kernel": self.train_kernel.tolist(),
                "loss_history": [float(v) for v in self.loss_history],
                "config": asdict(self.config) if self.config else None,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "KlmcaModel":
        d = json.loads(text)
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"unsupported model format {d.get('format')!r}")
        return cls(
            omega=np.array(d["omega"], dtype=float).reshape(d["p"], -1),
            train_kernel=np.array(d["train_kernel"], dtype=float),
            train_indices=np.array(d["train_indices"], dtype=int),
            train_labels=np.array(d["train_labels"], dtype=int),
            bandwidth=d["bandwidth"],
            loss_history=d["loss_history"],
            config=KlmcaConfig(**d["config"]) if d.get("config") else None,
        )


def target_neighbors(labels, dist, k: int) -> TargetNeighbors:
    """Each sample's ``k`` nearest same-class samples (distance ties by index)."""
    labels = np.asarray(labels)
    dist = np.asarray(dist, dtype=float)
    l = len(labels)
    same = labels[:, None] == labels[None, :]
    eta = np.zeros((l, l), dtype=bool)
    for i in range(l):
        mates = np.flatnonzero(same[i])
        mates = mates[mates != i]
        if mates.size == 0:
            continue
        order = np.lexsort((mates, dist[i, mates]))
        eta[i, mates[order[:k]]] = True
    return TargetNeighbors(eta=eta, same_class=same)


def center_kernel(K) -> np.ndarray:
    K = np.asarray(K, dtype=float)
    row = K.mean(axis=0)
    return K - row[None, :] - K.mean(axis=1)[:, None] + row.mean()


def kpca_init(K, p: int, seed: int = 42, eig_floor: float = 1e-12):
    """Whitened kernel PCA coefficients ``Lambda_p^{-1/2} V_p^T H``.

    Returns ``(omega, p_eff)``.  Components with eigenvalue below
    ``eig_floor`` are dropped with a warning; if none survive, a small seeded
    random matrix with ``p`` rows is returned and ``p_eff`` is 0.
    """
    K = np.asarray(K, dtype=float)
    l = K.shape[0]
    Kc = center_kernel(K)
    Kc = (Kc + Kc.T) / 2
    vals, vecs = np.linalg.eigh(Kc)
    order = np.argsort(vals)[::-1][:p]
    vals, vecs = vals[order], vecs[:, order]
    keep = vals > eig_floor
    if not keep.all():
        warnings.warn(
            f"kernel PCA: only {int(keep.sum())} of {p} components have positive variance",
            RuntimeWarning,
        )
    vals, vecs = vals[keep], vecs[:, keep]
    if vals.size == 0:
        rng = np.random.default_rng(seed)
        return 1e-3 * rng.standard_normal((p, l)), 0
    H = np.eye(l) - 1.0 / l
    omega = (vecs / np.sqrt(vals)).T @ H
    # fix the eigenvector sign so runs are reproducible across LAPACK builds
    signs = np.sign(omega[np.arange(len(vals)), np.argmax(np.abs(omega), axis=1)])
    return omega * signs[:, None], len(vals)


def _sq_dists(P) -> np.ndarray:
    """Squared Euclidean distances between the columns of ``P``."""
    return cdist(P.T, P.T, "sqeuclidean")


def _margins(omega, K, nb: TargetNeighbors):
    """Return (D, ii, jj, S, impostor) where S[t, m] = D_ij - D_im + 1 for pair t."""
    P = omega @ K
    D = _sq_dists(P)
    ii, jj = nb.pairs
    S = D[ii, jj][:, None] - D[ii, :] + 1.0
    impostor = ~nb.same_class[ii, :]
    return D, ii, jj, S, impostor


def loss(omega, K, nb: TargetNeighbors, c: float = 1.0) -> float:
    """Pull plus hinge push loss of projection ``omega`` on training kernel ``K``."""
    D, ii, jj, S, imp = _margins(omega, K, nb)
    pull = D[ii, jj].sum()
    push = np.maximum(S, 0.0)[imp].sum()
    return float(pull + c * push)


def gamma_step(omega, K, nb: TargetNeighbors, c: float = 1.0) -> np.ndarray:
    """Gradient of :func:`loss` with respect to ``omega``.

    Every term is a weighted ``(k_i - k_j)(k_i - k_j)^T`` outer product, so
    the sum collapses to ``K (Dg - A - A^T) K`` for a pair weight matrix ``A``
    with ``Dg`` the diagonal of its row plus column sums.  The hinge
    subgradient at zero is taken as zero.
    """
    K = np.asarray(K, dtype=float)
    l = K.shape[0]
    _, ii, jj, S, imp = _margins(omega, K, nb)
    active = (S > 0) & imp
    A = np.zeros((l, l))
    np.add.at(A, (ii, jj), 1.0 + c * active.sum(axis=1))
    # impostor terms enter with a minus sign
    t_idx, m_idx = np.nonzero(active)
    np.add.at(A, (ii[t_idx], m_idx), -c)
    lap = np.diag(A.sum(axis=1) + A.sum(axis=0)) - A - A.T
    return 2.0 * omega @ (K @ lap @ K)


def train(K, labels, dist, config: KlmcaConfig | None = None, train_indices=None, bandwidth=None) -> KlmcaModel:
    """Fit ``Omega`` on an ``l x l`` training kernel.

    ``dist`` is the input-space distance block used to pick target neighbors.
    A step that increases the loss is retried with half the learning rate, up
    to ``config.max_halvings`` times; if none decreases it, training stops.
    """
    config = config or KlmcaConfig()
    K = np.asarray(K, dtype=float)
    labels = np.asarray(labels, dtype=int)
    l = K.shape[0]
    if not np.all(np.isfinite(K)):
        raise TrainingError("training kernel has non-finite entries; check the kernel bandwidth")
    n_classes = len(np.unique(labels))
    p = config.p if config.p is not None else default_p(n_classes, l)
    config.validate(l)
    nb = target_neighbors(labels, dist, config.k)
    omega, _ = kpca_init(K, p, seed=config.seed)

    cur = loss(omega, K, nb, config.c)
    if not np.isfinite(cur):
        raise TrainingError(f"initial loss is not finite ({cur}); check the kernel bandwidth")
    history = [cur]
    for _ in range(config.max_iters):
        G = gamma_step(omega, K, nb, config.c)
        step = config.lam
        for _ in range(config.max_halvings + 1):
            cand = omega - step * G
            new = loss(cand, K, nb, config.c)
            if not np.isfinite(new):
                raise TrainingError(f"loss diverged to {new} with step {step}")
            if new <= cur:
                break
            step /= 2
        else:
            break  # no descent along -G within the halving budget
        omega = cand
        prev, cur = cur, new
        history.append(cur)
        if abs(cur - prev) / max(prev, 1e-12) < config.tol:
            break
    return KlmcaModel(
        omega=omega,
        train_kernel=K,
        train_indices=np.arange(l) if train_indices is None else np.asarray(train_indices, dtype=int),
        train_labels=labels,
        bandwidth=bandwidth if bandwidth is not None else float("nan"),
        loss_history=history,
        config=config,
    )


def default_p(n_classes: int, l: int) -> int:
    return max(1, min(n_classes + 2, l - 1))


def project(model: KlmcaModel, kernel_block) -> np.ndarray:
    """``Omega @ kernel_block``; block rows must follow ``model.train_indices``."""
    kernel_block = np.asarray(kernel_block, dtype=float)
    if kernel_block.ndim != 2 or kernel_block.shape[0] != model.l:
        raise ValueError(f"kernel block needs {model.l} rows, got shape {kernel_block.shape}")
    return model.omega @ kernel_block


def classify_1nn(proj_labeled, labels, proj_unlabeled) -> np.ndarray:
    """Label of the nearest labeled column for every unlabeled column.

    Distance ties go to the lowest labeled index.
    """
    PL = np.atleast_2d(np.asarray(proj_labeled, dtype=float))
    PU = np.atleast_2d(np.asarray(proj_unlabeled, dtype=float))
    labels = np.asarray(labels)
    if PL.shape[1] == 0:
        raise ValueError("no labeled samples to classify against")
    d2 = cdist(PU.T, PL.T, "sqeuclidean")
    return labels[np.argmin(d2, axis=1)]
