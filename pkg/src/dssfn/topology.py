"""Undirected communication graphs for the simulated node network."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["Graph", "TopologyError", "circulant_graph", "ring_graph", "complete_graph", "path_graph", "star_graph", "load_edge_list", "write_edge_list"]


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    """Connected undirected graph on nodes ``0..node_count-1``.

    Edges are stored once as ``(min, max)`` pairs. Construction rejects
    self-loops, duplicate edges, out-of-range ids and disconnected graphs.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    _adj: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.node_count < 1:
            raise TopologyError(f"node_count must be positive, got {self.node_count}")
        seen = set()
        adj = [[] for _ in range(self.node_count)]
        canon = []
        for m, n in self.edges:
            m, n = int(m), int(n)
            if m == n:
                raise TopologyError(f"self-loop at node {m}")
            if not (0 <= m < self.node_count and 0 <= n < self.node_count):
                raise TopologyError(f"edge ({m}, {n}) references a node outside 0..{self.node_count - 1}")
            e = (min(m, n), max(m, n))
            if e in seen:
                raise TopologyError(f"duplicate edge {e}")
            seen.add(e)
            canon.append(e)
            adj[m].append(n)
            adj[n].append(m)
        object.__setattr__(self, "edges", tuple(sorted(canon)))
        object.__setattr__(self, "_adj", tuple(tuple(sorted(a)) for a in adj))
        if not self.is_connected():
            raise TopologyError("graph is not connected; consensus cannot reach a single solution")

    def neighbors(self, m: int) -> list[int]:
        """Sorted neighbor ids of node ``m``."""
        if not 0 <= m < self.node_count:
            raise TopologyError(f"node {m} out of range 0..{self.node_count - 1}")
        return list(self._adj[m])

    def degree(self, m: int) -> int:
        """``|E(m)|``, the number of links touching ``m``."""
        return len(self.neighbors(m))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def directed_links(self) -> list[tuple[int, int]]:
        return [(m, n) for m in range(self.node_count) for n in self._adj[m]]

    def is_connected(self) -> bool:
        reached = {0}
        queue = deque([0])
        while queue:
            m = queue.popleft()
            for n in self._adj[m]:
                if n not in reached:
                    reached.add(n)
                    queue.append(n)
        return len(reached) == self.node_count

    def is_regular(self, d: int) -> bool:
        return all(len(a) == d for a in self._adj)


def circulant_graph(node_count: int, degree: int) -> Graph:
    """Symmetric circulant graph: node ``m`` links to ``m ± k (mod M)`` for ``k = 1..degree/2``.

    ``degree`` must be even, except for the two-node network where ``degree=1``
    gives the single edge.
    """
    M, d = node_count, degree
    if M < 1:
        raise TopologyError(f"node count must be positive, got {M}")
    if M == 1:
        if d != 0:
            raise TopologyError("a single node has no neighbors; use degree 0")
        return Graph(1, ())
    if d < 1 or d > M - 1:
        raise TopologyError(f"degree must lie in 1..{M - 1} for {M} nodes, got {d}")
    if M == 2:
        if d != 1:
            raise TopologyError("the two-node network only supports degree 1")
        return Graph(2, ((0, 1),))
    if d % 2:
        raise TopologyError(f"odd degree {d} cannot form a symmetric circulant on {M} nodes")
    edges = {(min(m, (m + k) % M), max(m, (m + k) % M)) for m in range(M) for k in range(1, d // 2 + 1)}
    return Graph(M, tuple(edges))


def ring_graph(node_count: int) -> Graph:
    """Ring used in the node-count sweep: degree 2, or 1 for two nodes."""
    if node_count == 1:
        return circulant_graph(1, 0)
    return circulant_graph(node_count, 1 if node_count == 2 else 2)


def complete_graph(node_count: int) -> Graph:
    return Graph(node_count, tuple((m, n) for m in range(node_count) for n in range(m + 1, node_count)))


def path_graph(node_count: int) -> Graph:
    return Graph(node_count, tuple((m, m + 1) for m in range(node_count - 1)))


def star_graph(node_count: int) -> Graph:
    return Graph(node_count, tuple((0, n) for n in range(1, node_count)))


def load_edge_list(path: str | Path, node_count: int | None = None) -> Graph:
    """Read one ``m n`` pair per line; ``#`` lines and blank lines are skipped.

    Without ``node_count`` the graph spans ``0..max id``.
    """
    edges = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise TopologyError(f"{path}:{lineno}: expected two node ids, got {line!r}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise TopologyError(f"{path}:{lineno}: node ids must be integers, got {line!r}") from None
    if node_count is None:
        node_count = 1 + max((max(e) for e in edges), default=0)
    return Graph(node_count, tuple(edges))


def write_edge_list(graph: Graph, path: str | Path) -> None:
    lines = [f"# {graph.node_count} nodes, {graph.edge_count} edges"]
    lines += [f"{m} {n}" for m, n in graph.edges]
    Path(path).write_text("\n".join(lines) + "\n")
