"""scikit-learn style wrappers around centralized and decentralized training.

These follow the usual row-per-sample convention; the core routines take
samples as columns, so inputs are transposed on the way in.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.preprocessing import LabelEncoder
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, validate_data

from .consensus import SolverConfig, train_decentralized
from .data import fit_scaling, one_hot, partition_uniform, Dataset
from .model import SsfnConfig, predict as stack_predict, train_centralized
from .topology import circulant_graph

__all__ = ["SSFNClassifier", "DecentralizedSSFNClassifier"]


class _SSFNBase(ClassifierMixin, TransformerMixin, BaseEstimator):
    def _ssfn_config(self) -> SsfnConfig:
        return SsfnConfig(
            max_layers=self.layers,
            width_extra=self.width_extra,
            eps=self.eps,
            mu_first=self.mu0,
            mu_rest=self.mu,
            seed=self.seed,
            rand_gain=self.rand_gain,
            input_bias=self.input_bias,
            solver=self.solver,
            admm_iters=self.admm_iters,
        )

    def _prepare_fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        check_classification_targets(y)
        self.encoder_ = LabelEncoder().fit(y)
        self.classes_ = self.encoder_.classes_
        if len(self.classes_) < 2:
            raise ValueError(f"need at least two classes, got 1 class ({self.classes_[0]!r})")
        feats = X.T
        self.scaling_ = fit_scaling(feats) if self.normalize else None
        if self.scaling_ is not None:
            feats = self.scaling_.apply(feats)
        targets = one_hot(self.encoder_.transform(y), len(self.classes_))
        return feats, targets

    def _columns(self, X) -> np.ndarray:
        check_is_fitted(self)
        feats = validate_data(self, X, dtype=np.float64, reset=False).T
        return self.scaling_.apply(feats) if self.scaling_ is not None else feats

    def _scores(self, X) -> np.ndarray:
        cols = self._columns(X)
        return stack_predict(self.stack_, cols).T

    def decision_function(self, X) -> np.ndarray:
        """Readout scores, one row per sample and one column per class.

        With two classes this is the single column ``score_1 - score_0``,
        positive for ``classes_[1]``.
        """
        s = self._scores(X)
        return s[:, 1] - s[:, 0] if s.shape[1] == 2 else s

    def predict(self, X) -> np.ndarray:
        # argmax keeps the first maximum, so ties go to the lowest class index
        scores = self._scores(X)
        return self.classes_[np.argmax(scores, axis=1)]

    def transform(self, X) -> np.ndarray:
        """Last hidden layer's features, one row per sample."""
        cols = self._columns(X)
        return self.stack_.features(cols).T

    @property
    def train_costs_(self) -> list[float]:
        check_is_fitted(self, "stack_")
        return list(self.stack_.train_costs)


class SSFNClassifier(_SSFNBase):
    """Layer-wise trained ReLU network on pooled data.

    Parameters
    ----------
    layers : int
        Number of hidden layers L.
    width_extra : int
        Hidden width is ``2Q + width_extra``.
    mu0, mu : float
        Regularization weight of the input layer and of every hidden layer.
    eps : float or None
        Readout norm bound; None means ``2Q``.
    seed : int
        Seed of the random weight blocks.
    rand_gain : float
        Random block entries are uniform on ``±rand_gain / sqrt(fan_in)``.
    input_bias : float or None
        Constant appended to every input; None disables it.
    solver : {"admm", "ridge"}
        Pooled layer solver: exact constrained least squares by ADMM with
        ``mu`` as the inverse penalty, or ridge followed by projection.
    admm_iters : int
        Iterations of the ADMM layer solver.
    normalize : bool
        Scale each feature to ``[-1, 1]`` with the training min/max.
    """

    def __init__(
        self,
        layers=20,
        width_extra=1000,
        mu0=1.0,
        mu=1.0,
        eps=None,
        seed=0,
        rand_gain=1.0,
        input_bias=None,
        solver="admm",
        admm_iters=100,
        normalize=True,
    ):
        self.layers = layers
        self.width_extra = width_extra
        self.mu0 = mu0
        self.mu = mu
        self.eps = eps
        self.seed = seed
        self.rand_gain = rand_gain
        self.input_bias = input_bias
        self.solver = solver
        self.admm_iters = admm_iters
        self.normalize = normalize

    def fit(self, X, y):
        feats, targets = self._prepare_fit(X, y)
        self.stack_ = train_centralized(feats, targets, self._ssfn_config())
        return self


class DecentralizedSSFNClassifier(_SSFNBase):
    """Same network trained by edge-consensus ADMM over a circulant graph.

    The training set is split uniformly over ``nodes`` nodes, each linked to
    ``degree`` neighbors. ``iters`` is the iteration budget per layer (rounds
    in sync mode, single activations in async mode). The fitted per-layer
    consensus runs are kept in ``model_``.
    """

    def __init__(
        self,
        nodes=4,
        degree=2,
        mode="sync",
        iters=200,
        gamma0=None,
        gamma=0.5,
        eta=0.5,
        staleness_cap=0,
        activation_seed=0,
        shuffle=True,
        layers=20,
        width_extra=1000,
        mu0=1.0,
        mu=1.0,
        eps=None,
        seed=0,
        rand_gain=1.0,
        input_bias=None,
        solver="admm",
        admm_iters=100,
        normalize=True,
    ):
        self.nodes = nodes
        self.degree = degree
        self.mode = mode
        self.iters = iters
        self.gamma0 = gamma0
        self.gamma = gamma
        self.eta = eta
        self.staleness_cap = staleness_cap
        self.activation_seed = activation_seed
        self.shuffle = shuffle
        self.layers = layers
        self.width_extra = width_extra
        self.mu0 = mu0
        self.mu = mu
        self.eps = eps
        self.seed = seed
        self.rand_gain = rand_gain
        self.input_bias = input_bias
        self.solver = solver
        self.admm_iters = admm_iters
        self.normalize = normalize

    def fit(self, X, y):
        feats, targets = self._prepare_fit(X, y)
        graph = circulant_graph(self.nodes, self.degree)
        part = partition_uniform(Dataset(feats, targets), self.nodes, self.seed, shuffle=self.shuffle)
        solver = SolverConfig(
            gamma=self.gamma,
            gamma_first=self.gamma0,
            eta=self.eta,
            max_activations=self.iters,
            mode=self.mode,
            staleness_cap=self.staleness_cap,
            activation_seed=self.activation_seed,
            trace_costs=False,
        )
        shards = [(s.features, s.targets) for s in part.shards]
        self.model_ = train_decentralized(shards, graph, self._ssfn_config(), solver)
        self.stack_ = self.model_.stack
        return self
