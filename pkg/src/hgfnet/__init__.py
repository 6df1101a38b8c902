"""Deep hierarchical Gaussian filter networks as one-shot predictive-coding
classifiers, with backprop-MLP and iterative-PCN baselines and a benchmark
harness."""

from .core import Activation, he_init, make_rng, one_hot, sigmoid
from .network import HgfNetwork, build_network, graded_prior
from .plasticity import WeightRule, train_step, weight_update
from .baselines import AdamState, MlpModel, PcnModel
from .data import (
    Dataset,
    DriftSchedule,
    load_idx,
    spiral_dataset,
    split,
    subset,
    synthetic_image_classification,
)
from .estimators import HgfClassifier, MlpClassifier, PcnClassifier

__all__ = [
    "Activation",
    "AdamState",
    "Dataset",
    "DriftSchedule",
    "HgfClassifier",
    "HgfNetwork",
    "MlpClassifier",
    "MlpModel",
    "PcnClassifier",
    "PcnModel",
    "WeightRule",
    "build_network",
    "graded_prior",
    "he_init",
    "load_idx",
    "make_rng",
    "one_hot",
    "sigmoid",
    "spiral_dataset",
    "split",
    "subset",
    "synthetic_image_classification",
    "train_step",
    "weight_update",
]

__version__ = "0.1.0"
