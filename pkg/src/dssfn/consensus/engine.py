"""Deterministic simulator for one layer of edge-consensus ADMM."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..linalg import NotPositiveDefiniteError, SeededRng
from ..topology import Graph
from .mailbox import Mailbox
from .node import NodeSolveError, NodeState, NodeUpdate, SolverConfig, node_update

__all__ = [
    "TRACE_HEADER",
    "TraceEvent",
    "EventTrace",
    "LayerConsensusResult",
    "consensus_error",
    "dual_residual",
    "run_layer_consensus",
]

TRACE_HEADER = ("k", "node", "local_cost", "consensus_error", "wall_ns")


@dataclass(frozen=True)
class TraceEvent:
    k: int
    node: int  # -1 for a whole sync round
    local_cost: float  # sum over nodes for a sync round
    consensus_error: float
    wall_ns: int = 0


@dataclass
class EventTrace:
    events: list[TraceEvent] = field(default_factory=list)

    def append(self, event: TraceEvent) -> None:
        self.events.append(event)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def consensus_errors(self) -> np.ndarray:
        return np.array([e.consensus_error for e in self.events])

    @property
    def local_costs(self) -> np.ndarray:
        return np.array([e.local_cost for e in self.events])

    def to_csv(self, fh=None) -> str | None:
        """Write the header and one row per event; returns the text when ``fh`` is None."""
        own = fh is None
        if own:
            fh = io.StringIO()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for e in self.events:
            w.writerow([e.k, e.node, repr(e.local_cost), repr(e.consensus_error), e.wall_ns])
        return fh.getvalue() if own else None

    @classmethod
    def read_csv(cls, path: str | Path) -> "EventTrace":
        """Read a file written by :meth:`to_csv`; ``#`` comment lines are skipped."""
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
        return cls([
            TraceEvent(int(r["k"]), int(r["node"]), float(r["local_cost"]), float(r["consensus_error"]), int(r["wall_ns"]))
            for r in rows
        ])


@dataclass
class LayerConsensusResult:
    iterates: list[np.ndarray]
    trace: EventTrace
    activations: int
    rounds: int
    messages_sent: int
    messages_delivered: int
    max_staleness: int = 0
    stopped_early: bool = False


def consensus_error(nodes: list[NodeState] | list[np.ndarray], graph: Graph) -> float:
    """Largest ``||O_m - O_n||_F`` over the graph's edges."""
    its = [s.iterate if isinstance(s, NodeState) else s for s in nodes]
    return max((float(np.linalg.norm(its[m] - its[n])) for m, n in graph.edges), default=0.0)


def dual_residual(nodes: list[NodeState]) -> float:
    """Largest ``||(Z_{m,n} + Z_{n,m}) / 2 + gamma O_m||_F``; zero at a fixed point."""
    worst = 0.0
    for s in nodes:
        for n in s.neighbors:
            r = 0.5 * (s.out_duals[n] + nodes[n].out_duals[s.node_id]) + s.gamma * s.iterate
            worst = max(worst, float(np.linalg.norm(r)))
    return worst


class _EdgeTracker:
    """Incremental max edge disagreement: only edges touching an updated node change."""

    def __init__(self, graph: Graph, nodes: list[NodeState]):
        self.graph = graph
        self.index = {e: i for i, e in enumerate(graph.edges)}
        self.norms = np.zeros(len(graph.edges))
        self.refresh(nodes)

    @staticmethod
    def _gap(a: np.ndarray, b: np.ndarray) -> float:
        d = a - b
        return float(np.sqrt(np.vdot(d, d)))

    def refresh(self, nodes: list[NodeState]) -> None:
        for i, (m, n) in enumerate(self.graph.edges):
            self.norms[i] = self._gap(nodes[m].iterate, nodes[n].iterate)

    def touch(self, nodes: list[NodeState], m: int) -> None:
        for n in nodes[m].neighbors:
            e = (m, n) if m < n else (n, m)
            self.norms[self.index[e]] = self._gap(nodes[m].iterate, nodes[n].iterate)

    def value(self) -> float:
        return float(self.norms.max()) if self.norms.size else 0.0


def _apply(state: NodeState, upd: NodeUpdate) -> float:
    """Install an update and return the iterate change."""
    change = float(np.linalg.norm(upd.iterate - state.iterate))
    state.install(upd)
    return change


def _update(state: NodeState, cfg: SolverConfig) -> NodeUpdate:
    try:
        return node_update(state, cfg)
    except NotPositiveDefiniteError as exc:  # pragma: no cover - factor is built up front
        raise NodeSolveError(state.node_id, state.layer, exc) from exc


def _converged(change: float, nodes: list[NodeState], tol: float | None) -> bool:
    if tol is None:
        return False
    scale = max(max(float(np.linalg.norm(s.iterate)) for s in nodes), 1e-300)
    return change <= tol * scale


def run_layer_consensus(nodes: list[NodeState], graph: Graph, cfg: SolverConfig) -> LayerConsensusResult:
    """Drive the nodes through ``cfg.max_activations`` iterations and return their iterates.

    Sync mode records one trace row per round (``node = -1``, summed local
    cost); async mode one row per activation.
    """
    if len(nodes) != graph.node_count:
        raise ValueError(f"graph has {graph.node_count} nodes, got {len(nodes)} states")
    if not graph.is_connected():  # pragma: no cover - Graph refuses to build disconnected graphs
        raise ValueError("graph is not connected")
    for s in nodes:
        if s.neighbors != graph.neighbors(s.node_id):
            raise ValueError(f"node {s.node_id} neighbor list disagrees with the graph")
    if cfg.mode == "sync":
        return _run_sync(nodes, graph, cfg)
    return _run_async(nodes, graph, cfg)


def _run_sync(nodes: list[NodeState], graph: Graph, cfg: SolverConfig) -> LayerConsensusResult:
    trace = EventTrace()
    tracker = _EdgeTracker(graph, nodes)
    M = len(nodes)
    sent = 0
    start = time.perf_counter_ns()
    rounds = 0
    stopped = False
    for r in range(1, cfg.max_activations + 1):
        change = 0.0
        if cfg.sync_sweep == "jacobi":
            updates = [_update(s, cfg) for s in nodes]
            for s, upd in zip(nodes, updates):
                change = max(change, _apply(s, upd))
            for s in nodes:
                for n, z in s.out_duals.items():
                    nodes[n].receive(s.node_id, z)
                    sent += 1
        else:
            for s in nodes:
                change = max(change, _apply(s, _update(s, cfg)))
                for n, z in s.out_duals.items():
                    nodes[n].receive(s.node_id, z)
                    sent += 1
        tracker.refresh(nodes)
        rounds = r
        cost = sum(s.local_cost() for s in nodes) if cfg.trace_costs else float("nan")
        wall = time.perf_counter_ns() - start if cfg.record_time else 0
        trace.append(TraceEvent(r, -1, cost, tracker.value(), wall))
        if _converged(change, nodes, cfg.tol):
            stopped = True
            break
    return LayerConsensusResult([s.iterate for s in nodes], trace, rounds * M, rounds, sent, sent, 0, stopped)


def _run_async(nodes: list[NodeState], graph: Graph, cfg: SolverConfig) -> LayerConsensusResult:
    trace = EventTrace()
    tracker = _EdgeTracker(graph, nodes)
    M = len(nodes)
    rng = SeededRng(cfg.activation_seed, (0xA5, nodes[0].layer))
    mailbox = Mailbox(graph.directed_links())
    start = time.perf_counter_ns()
    window_change = 0.0
    active: set[int] = set()
    stopped = False
    k = 0
    for k in range(1, cfg.max_activations + 1):
        for msg in mailbox.deliver(k):
            nodes[msg.receiver].receive(msg.sender, msg.payload)
        m = (k - 1) % M if cfg.schedule == "round_robin" else int(rng.integers(M))
        s = nodes[m]
        window_change = max(window_change, _apply(s, _update(s, cfg)))
        for n, z in s.out_duals.items():
            delay = int(rng.integers(cfg.staleness_cap + 1)) if cfg.staleness_cap else 0
            mailbox.send(m, n, z, k, delay)
        tracker.touch(nodes, m)
        cost = s.local_cost() if cfg.trace_costs else float("nan")
        wall = time.perf_counter_ns() - start if cfg.record_time else 0
        trace.append(TraceEvent(k, m, cost, tracker.value(), wall))
        active.add(m)
        if len(active) == M:  # a window closes once every node has updated
            if _converged(window_change, nodes, cfg.tol):
                stopped = True
                break
            window_change = 0.0
            active.clear()
    for msg in mailbox.flush():
        nodes[msg.receiver].receive(msg.sender, msg.payload)
    return LayerConsensusResult(
        [s.iterate for s in nodes],
        trace,
        k,
        k // M,
        mailbox.sent,
        mailbox.delivered,
        mailbox.max_staleness,
        stopped,
    )
