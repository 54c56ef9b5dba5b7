"""Decentralized self-size-estimating feedforward networks.

Layer-wise training of a fixed-width ReLU network where each layer's readout
is a norm-constrained least-squares problem, solved either on pooled data or
by edge-consensus ADMM over a graph of nodes that each hold a data shard.
"""
from .consensus import SolverConfig, train_decentralized
from .data import Dataset, load_csv, normalize_fit_apply, partition_uniform
from .estimator import DecentralizedSSFNClassifier, SSFNClassifier
from .linalg import SeededRng
from .model import LayerStack, SsfnConfig, accuracy, predict, train_centralized
from .projection import project_frobenius
from .topology import Graph, circulant_graph, load_edge_list

__version__ = "0.1.0"

__all__ = [
    "SolverConfig",
    "train_decentralized",
    "Dataset",
    "load_csv",
    "normalize_fit_apply",
    "partition_uniform",
    "SSFNClassifier",
    "DecentralizedSSFNClassifier",
    "SeededRng",
    "LayerStack",
    "SsfnConfig",
    "accuracy",
    "predict",
    "train_centralized",
    "project_frobenius",
    "Graph",
    "circulant_graph",
    "load_edge_list",
]
