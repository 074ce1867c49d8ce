"""Semi-supervised classification with deterministic labeling on a leading forest."""

from .dataset import Dataset, gaussian_kernel, load_builtin, load_csv, pairwise_distances, zscore_normalize
from .leading_forest import LeadingForest, build_forest, leading_tree, lodog_cut
from .labeling import conti_xor_small, select_labeled, selection_scores
from .klmca import KlmcaConfig, KlmcaModel, classify_1nn
from .lapoleaf import propagate
from .config import ExperimentConfig, load_config

__version__ = "0.1.0"
