"""Layer-wise decentralized training over a node graph."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model import LayerStack, SsfnConfig, assemble_weight, forward_layer, layer_random_block, training_cost
from ..topology import Graph
from .engine import LayerConsensusResult, run_layer_consensus
from .node import NodeSolveError, SolverConfig, make_node_states

__all__ = ["DecentralizedModel", "train_decentralized", "average_iterates"]


@dataclass
class DecentralizedModel:
    """Output of :func:`train_decentralized`.

    ``stack`` holds the shared weights with the averaged readouts used to
    build them; ``node_stacks[m]`` holds the same weights with node ``m``'s own
    readouts. ``layers[l]`` is the consensus run of layer ``l``.
    """

    stack: LayerStack
    node_stacks: list[LayerStack]
    layers: list[LayerConsensusResult] = field(default_factory=list)

    @property
    def traces(self):
        return [r.trace for r in self.layers]

    @property
    def activations(self) -> int:
        return sum(r.activations for r in self.layers)

    @property
    def rounds(self) -> int:
        return sum(r.rounds for r in self.layers)

    @property
    def messages_sent(self) -> int:
        return sum(r.messages_sent for r in self.layers)

    @property
    def messages_delivered(self) -> int:
        return sum(r.messages_delivered for r in self.layers)

    @property
    def final_consensus_errors(self) -> list[float]:
        return [float(r.trace.events[-1].consensus_error) if r.trace.events else 0.0 for r in self.layers]


def average_iterates(iterates: list[np.ndarray]) -> np.ndarray:
    """Exact all-reduce mean, summed in node order."""
    total = iterates[0].copy()
    for o in iterates[1:]:
        total += o
    return total / len(iterates)


def train_decentralized(
    shards: list[tuple[np.ndarray, np.ndarray]],
    graph: Graph,
    ssfn_cfg: SsfnConfig,
    solver_cfg: SolverConfig,
    *,
    runner=run_layer_consensus,
) -> DecentralizedModel:
    """Train one network whose data is split over the nodes of ``graph``.

    ``shards[m]`` is ``(X_m, T_m)`` with samples as columns. For each layer
    every node forms its features locally, the consensus solver produces the
    per-node readouts, and their average fixes the readout block of the next
    weight matrix. All nodes derive the random block from the shared seed, so
    every node assembles the same weights.
    """
    M = graph.node_count
    if len(shards) != M:
        raise ValueError(f"graph has {M} nodes but {len(shards)} shards were given")
    p = shards[0][0].shape[0]
    q = shards[0][1].shape[0]
    for m, (x, t) in enumerate(shards):
        if x.shape[0] != p or t.shape[0] != q or x.shape[1] != t.shape[1]:
            raise ValueError(f"shard {m} has inconsistent shapes {x.shape}, {t.shape}")
    cfg = ssfn_cfg.resolve(q)
    eps = cfg.epsilon(q)
    ys = [cfg.augment(x) for x, _ in shards]
    ts = [t for _, t in shards]
    weights: list[np.ndarray] = []
    shared: list[np.ndarray] = []
    per_node: list[list[np.ndarray]] = [[] for _ in range(M)]
    costs: list[float] = []
    results: list[LayerConsensusResult] = []
    for layer in range(cfg.max_layers + 1):
        layer_cfg = solver_cfg.at_layer(layer)
        try:
            states = make_node_states(ys, ts, graph, layer_cfg.gamma, eps, mu=cfg.mu(layer), layer=layer)
            res = runner(states, graph, layer_cfg)
        except NodeSolveError:
            raise
        except Exception as exc:
            raise RuntimeError(f"layer {layer}: {exc}") from exc
        results.append(res)
        o_star = average_iterates(res.iterates)
        shared.append(o_star)
        for m in range(M):
            per_node[m].append(res.iterates[m])
        costs.append(sum(training_cost(o_star, y, t) for y, t in zip(ys, ts)))
        if layer == cfg.max_layers:
            break
        w = assemble_weight(o_star, layer_random_block(cfg, layer + 1, ys[0].shape[0], q), q)
        weights.append(w)
        ys = [forward_layer(w, y) for y in ys]
    stack = LayerStack(p, q, list(weights), shared, cfg, costs)
    node_stacks = [LayerStack(p, q, list(weights), per_node[m], cfg, []) for m in range(M)]
    return DecentralizedModel(stack, node_stacks, results)
