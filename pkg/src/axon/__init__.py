"""Greedy growth of deep ReLU networks, one neuron at a time."""

from .core import AxonModel, TrainingSet, TrainReport, infer, load, save, train
from .inner_opt import RELU, SolverConfig
from .problems import catalog, get_problem, rel_l2_error, sample
from .yarotsky import YarotskyApproximant, f_m, hat, verify_bound

__all__ = [
    "AxonModel",
    "RELU",
    "SolverConfig",
    "TrainReport",
    "TrainingSet",
    "YarotskyApproximant",
    "catalog",
    "f_m",
    "get_problem",
    "hat",
    "infer",
    "load",
    "rel_l2_error",
    "sample",
    "save",
    "train",
    "verify_bound",
]
