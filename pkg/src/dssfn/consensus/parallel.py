"""Thread-per-node runtime for one layer of consensus.

Each worker owns its :class:`NodeState`; the only shared objects are the
per-link queues (FIFO, atomic handoff) and the trace, which is appended under
a lock. Sync mode separates rounds with a barrier; async mode lets the
workers run freely. Results satisfy the same convergence behavior as the
simulator but are not bit-identical to it, since thread interleaving decides
which messages an activation sees.
"""
from __future__ import annotations

import queue
import threading
import time

from ..topology import Graph
from .engine import EventTrace, LayerConsensusResult, TraceEvent, _EdgeTracker
from .node import NodeState, SolverConfig, node_update

__all__ = ["run_layer_consensus_threaded"]


class _Links:
    def __init__(self, graph: Graph):
        self.q = {link: queue.SimpleQueue() for link in graph.directed_links()}
        self.sent = 0
        self.delivered = 0
        self._lock = threading.Lock()

    def send(self, sender: int, receiver: int, payload) -> None:
        self.q[(sender, receiver)].put(payload)
        with self._lock:
            self.sent += 1

    def drain(self, state: NodeState) -> None:
        got = 0
        for n in state.neighbors:
            box = self.q[(n, state.node_id)]
            while True:
                try:
                    state.receive(n, box.get_nowait())
                except queue.Empty:
                    break
                got += 1
        if got:
            with self._lock:
                self.delivered += got


def run_layer_consensus_threaded(nodes: list[NodeState], graph: Graph, cfg: SolverConfig) -> LayerConsensusResult:
    """Same contract as :func:`run_layer_consensus`, one thread per node.

    Sync mode runs ``K`` barrier-separated rounds where every node updates
    from the previous round's messages. Async mode gives each node an equal
    share of the ``K`` activations (the first ``K mod M`` nodes get one
    extra) and never waits.
    """
    M = len(nodes)
    links = _Links(graph)
    trace = EventTrace()
    tracker = _EdgeTracker(graph, nodes)
    lock = threading.Lock()
    counter = [0]
    errors: list[BaseException] = []
    start = time.perf_counter_ns()
    barrier = threading.Barrier(M)

    def record(m: int, cost: float) -> None:
        with lock:
            counter[0] += 1
            tracker.touch(nodes, m)
            wall = time.perf_counter_ns() - start if cfg.record_time else 0
            trace.append(TraceEvent(counter[0], m, cost, tracker.value(), wall))

    def sync_worker(m: int) -> None:
        s = nodes[m]
        for _ in range(cfg.max_activations):
            upd = node_update(s, cfg)
            barrier.wait()  # everyone has read the previous round's duals
            with lock:
                s.install(upd)
            for n, z in s.out_duals.items():
                links.send(m, n, z)
            barrier.wait()
            links.drain(s)
            if m == 0:
                with lock:
                    counter[0] += 1
                    tracker.refresh(nodes)
                    cost = sum(x.local_cost() for x in nodes) if cfg.trace_costs else float("nan")
                    wall = time.perf_counter_ns() - start if cfg.record_time else 0
                    trace.append(TraceEvent(counter[0], -1, cost, tracker.value(), wall))
            barrier.wait()

    def async_worker(m: int) -> None:
        s = nodes[m]
        share = cfg.max_activations // M + (1 if m < cfg.max_activations % M else 0)
        barrier.wait()  # common start; no synchronization after this
        for _ in range(share):
            links.drain(s)
            upd = node_update(s, cfg)
            with lock:
                s.install(upd)
            for n, z in s.out_duals.items():
                links.send(m, n, z)
            record(m, s.local_cost() if cfg.trace_costs else float("nan"))

    def guarded(fn, m):
        try:
            fn(m)
        except BaseException as exc:  # surfaced in the caller's thread
            errors.append(exc)
            barrier.abort()

    worker = sync_worker if cfg.mode == "sync" else async_worker
    threads = [threading.Thread(target=guarded, args=(worker, m), name=f"node-{m}") for m in range(M)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    real = [e for e in errors if not isinstance(e, threading.BrokenBarrierError)]
    if real or errors:
        raise (real or errors)[0]
    for s in nodes:
        links.drain(s)
    activations = cfg.max_activations * M if cfg.mode == "sync" else cfg.max_activations
    rounds = cfg.max_activations if cfg.mode == "sync" else cfg.max_activations // M
    return LayerConsensusResult([s.iterate for s in nodes], trace, activations, rounds, links.sent, links.delivered)
