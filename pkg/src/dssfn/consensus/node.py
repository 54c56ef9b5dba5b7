"""Per-node state and the one-sided activation update."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ..linalg import GramSystem, NotPositiveDefiniteError
from ..projection import project_frobenius
from ..topology import Graph

__all__ = ["SolverConfig", "NodeState", "NodeUpdate", "NodeSolveError", "GammaBoundWarning", "make_node_states", "node_update", "gamma_bound"]

MODES = ("sync", "async")
SCHEDULES = ("uniform", "round_robin")
SWEEPS = ("sequential", "jacobi")


class NodeSolveError(RuntimeError):
    def __init__(self, node: int, layer: int, cause: Exception):
        self.node = node
        self.layer = layer
        super().__init__(f"node {node}, layer {layer}: local solve failed ({cause})")


class GammaBoundWarning(UserWarning):
    """gamma exceeds 2 / ||Y_m||_2 for some node."""


@dataclass(frozen=True)
class SolverConfig:
    """Consensus solver settings.

    ``max_activations`` is the iteration budget ``K``: full rounds in sync
    mode, single node activations in async mode. ``gamma_first`` overrides
    ``gamma`` on layer 0. In async mode ``schedule`` picks the activated node
    (seeded i.i.d. uniform, or round robin) and every message is held back a
    seeded uniform delay in ``0..staleness_cap`` activations. In sync mode
    ``sync_sweep`` is ``"sequential"`` (nodes update in id order, each seeing
    its predecessors' messages from the same round) or ``"jacobi"`` (all nodes
    use the previous round's messages). ``tol`` enables early stopping once
    the largest per-node iterate change over a round (or over ``M``
    activations) drops below ``tol`` times the iterate norm.
    """

    gamma: float = 0.5
    eta: float = 0.5
    max_activations: int = 200
    mode: str = "sync"
    activation_seed: int = 0
    staleness_cap: int = 0
    schedule: str = "uniform"
    sync_sweep: str = "sequential"
    gamma_first: float | None = None
    tol: float | None = None
    record_time: bool = False
    trace_costs: bool = True

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.gamma_first is not None and not self.gamma_first > 0:
            raise ValueError(f"gamma_first must be positive, got {self.gamma_first}")
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if self.max_activations < 1:
            raise ValueError(f"max_activations must be at least 1, got {self.max_activations}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if self.sync_sweep not in SWEEPS:
            raise ValueError(f"sync_sweep must be one of {SWEEPS}, got {self.sync_sweep!r}")
        if self.staleness_cap < 0:
            raise ValueError("staleness_cap must be non-negative")
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be positive")

    def at_layer(self, layer: int) -> "SolverConfig":
        if layer == 0 and self.gamma_first is not None:
            return replace(self, gamma=self.gamma_first)
        return self


@dataclass
class NodeState:
    """Everything node ``m`` holds while solving one layer.

    Duals are stored stacked, one slice per neighbor in ``neighbors`` order:
    ``out_stack[i]`` is ``Z_{m,n}`` (owned and updated by this node) and
    ``in_stack[i]`` the last ``Z_{n,m}`` delivered from neighbor ``n``. The
    dict views :attr:`out_duals` and :attr:`in_duals` key them by neighbor id.
    ``system`` caches the factor of ``Y Yᵀ + (mu_share + gamma |E(m)| / 2) I``
    and ``base`` the constant term ``T Yᵀ`` multiplied by its inverse.
    """

    node_id: int
    targets: np.ndarray
    features: np.ndarray
    neighbors: list[int]
    gamma: float
    eps: float
    mu_share: float = 0.0
    layer: int = 0
    iterate: np.ndarray = field(default=None, repr=False)
    out_stack: np.ndarray = field(default=None, repr=False)
    in_stack: np.ndarray = field(default=None, repr=False)
    system: GramSystem | None = field(default=None, repr=False)
    base: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        q, d = self.targets.shape[0], self.features.shape[0]
        if self.features.shape[1] != self.targets.shape[1]:
            raise ValueError(f"node {self.node_id}: {self.features.shape[1]} feature columns but {self.targets.shape[1]} targets")
        if len(set(self.neighbors)) != len(self.neighbors) or self.node_id in self.neighbors:
            raise ValueError(f"node {self.node_id}: neighbor list must be distinct and exclude the node itself")
        self._slot = {n: i for i, n in enumerate(self.neighbors)}
        if self.iterate is None:
            self.iterate = np.zeros((q, d))
        shape = (len(self.neighbors), q, d)
        if self.out_stack is None:
            self.out_stack = np.zeros(shape)
        if self.in_stack is None:
            self.in_stack = np.zeros(shape)
        if self.out_stack.shape != shape or self.in_stack.shape != shape:
            raise ValueError(f"node {self.node_id}: dual stacks must have shape {shape}")
        if self.system is None:
            self.refactor()

    @property
    def degree(self) -> int:
        return len(self.neighbors)

    @property
    def shift(self) -> float:
        return self.mu_share + 0.5 * self.gamma * self.degree

    @property
    def out_duals(self) -> dict[int, np.ndarray]:
        return {n: self.out_stack[i] for i, n in enumerate(self.neighbors)}

    @property
    def in_duals(self) -> dict[int, np.ndarray]:
        return {n: self.in_stack[i] for i, n in enumerate(self.neighbors)}

    def receive(self, sender: int, payload: np.ndarray) -> None:
        """Store ``Z_{sender,m}`` (copied, so later sender updates cannot leak in)."""
        try:
            i = self._slot[sender]
        except KeyError:
            raise ValueError(f"node {self.node_id} has no neighbor {sender}") from None
        self.in_stack[i] = payload

    def install(self, update: "NodeUpdate") -> None:
        self.iterate = update.iterate
        self.out_stack = update.out_stack

    def refactor(self) -> None:
        try:
            self.system = GramSystem(self.features, self.shift)
        except NotPositiveDefiniteError as exc:
            raise NodeSolveError(self.node_id, self.layer, exc) from exc
        self.base = self.system.ridge(self.targets)

    def local_cost(self, o: np.ndarray | None = None) -> float:
        o = self.iterate if o is None else o
        r = self.targets - o @ self.features
        return float(np.vdot(r, r))


@dataclass
class NodeUpdate:
    iterate: np.ndarray
    out_stack: np.ndarray
    neighbors: list[int]

    @property
    def out_duals(self) -> dict[int, np.ndarray]:
        return {n: self.out_stack[i] for i, n in enumerate(self.neighbors)}


def node_update(state: NodeState, cfg: SolverConfig) -> NodeUpdate:
    """One activation of ``state.node_id``.

    New iterate: ``P_eps((2 T Yᵀ - sum_n Z_{n,m}) (2 Y Yᵀ + gamma |E(m)| I)^-1)``,
    evaluated in the halved form with the cached factor. Then for every
    neighbor ``Z_{m,n} <- Z_{m,n} - eta ((Z_{m,n} + Z_{n,m}) / 2 + gamma O)``.
    The state is not modified; the returned dual stack is a fresh array, so
    slices of it can travel as messages.
    """
    if state.neighbors:
        zsum = state.in_stack.sum(axis=0)
        o = project_frobenius(state.base - state.system.apply_inverse(0.5 * zsum), state.eps)
    else:
        o = project_frobenius(state.base, state.eps)
    zo, zi = state.out_stack, state.in_stack
    out = zo - cfg.eta * (0.5 * (zo + zi) + state.gamma * o)
    return NodeUpdate(o, out, state.neighbors)


def gamma_bound(features: np.ndarray) -> float:
    """``2 / ||Y||_2`` (spectral norm), the admissible upper limit for gamma."""
    y = features
    small = y.T @ y if y.shape[1] < y.shape[0] else y @ y.T
    top = float(np.linalg.eigvalsh(small)[-1]) if small.size else 0.0
    return np.inf if top <= 0 else 2.0 / np.sqrt(top)


def make_node_states(
    features: list[np.ndarray],
    targets: list[np.ndarray],
    graph: Graph,
    gamma: float,
    eps: float,
    *,
    mu: float = 0.0,
    layer: int = 0,
    check_gamma: bool = True,
) -> list[NodeState]:
    """Fresh per-node states with zero duals for one layer.

    ``mu`` is the pooled ridge weight; each node carries ``mu / M`` so that the
    consensus solution matches the centralized ridge problem.
    """
    M = graph.node_count
    if len(features) != M or len(targets) != M:
        raise ValueError(f"graph has {M} nodes but {len(features)} feature and {len(targets)} target shards were given")
    dims = {f.shape[0] for f in features}
    if len(dims) != 1:
        raise ValueError(f"all nodes must share the feature dimension, got {sorted(dims)}")
    if check_gamma and M > 1:
        worst = min(gamma_bound(f) for f in features)
        if gamma >= worst:
            warnings.warn(
                f"layer {layer}: gamma={gamma:g} exceeds the bound 2/||Y_m||_2 = {worst:.3g}",
                GammaBoundWarning,
                stacklevel=2,
            )
    return [
        NodeState(m, targets[m], features[m], graph.neighbors(m), gamma, eps, mu / M, layer)
        for m in range(M)
    ]
