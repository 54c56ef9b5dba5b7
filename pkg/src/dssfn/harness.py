"""Experiment runner: central, sync, async and compare runs plus sweeps.

Results are plain JSON; traces are CSV files with the spec embedded in ``#``
comment lines. Everything is a function of the spec and its seeds, so a run
replayed from its own JSON reproduces the same bytes unless wall-clock timing
was switched on.
"""
from __future__ import annotations

import json
import logging
import math
import statistics
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .consensus import (
    SolverConfig,
    run_layer_consensus,
    run_layer_consensus_threaded,
    train_decentralized,
)
from .data import Dataset, DataError, load_csv, normalize_fit_apply, partition_uniform
from .model import LayerStack, SsfnConfig, accuracy, centralized_layer_solve, predict, train_centralized
from .topology import Graph, circulant_graph

log = logging.getLogger("dssfn")

__all__ = [
    "ExperimentSpec",
    "RunResult",
    "ExperimentResult",
    "EquivalenceError",
    "run_experiment",
    "sweep_degree",
    "sweep_nodes",
    "ring_degree",
]

MODES = ("central", "sync", "async", "compare")
# "total": iters counts all async activations; "per_node": every node gets iters on average
ASYNC_BUDGETS = ("total", "per_node")


class EquivalenceError(AssertionError):
    """Compare mode found decentralized readouts too far from the pooled solve."""


@dataclass(frozen=True)
class ExperimentSpec:
    train: str
    test: str | None = None
    mode: str = "central"
    label_column: int = -1
    header: bool | str = "auto"
    nodes: int = 20
    degree: int = 8
    iters: int = 200
    gamma0: float | None = None
    gamma: float = 0.5
    mu0: float = 1.0
    mu: float = 1.0
    eta: float = 0.5
    eps: float | None = None
    layers: int = 20
    width_extra: int = 1000
    seed: int = 0
    repeats: int = 1
    shuffle: bool = True
    normalize: bool = True
    input_bias: float | None = 2.0
    rand_gain: float = 1.0
    solver: str = "admm"
    admm_iters: int = 100
    staleness_cap: int = 0
    schedule: str = "uniform"
    activation_seed: int = 0
    sync_sweep: str = "sequential"
    async_budget: str = "total"
    compare_with: str = "sync"
    equivalence_tol: float = 1e-3
    parallel: bool = False
    timing: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.compare_with not in ("sync", "async"):
            raise ValueError(f"compare_with must be sync or async, got {self.compare_with!r}")
        if self.async_budget not in ASYNC_BUDGETS:
            raise ValueError(f"async_budget must be one of {ASYNC_BUDGETS}, got {self.async_budget!r}")
        if self.repeats < 1:
            raise ValueError(f"repeats must be at least 1, got {self.repeats}")
        if self.mode != "central":
            if self.nodes < 1:
                raise ValueError(f"nodes must be positive, got {self.nodes}")
            if self.degree < 0:
                raise ValueError(f"degree must be non-negative, got {self.degree}")

    @property
    def decentralized_mode(self) -> str | None:
        if self.mode == "central":
            return None
        return self.compare_with if self.mode == "compare" else self.mode

    def ssfn_config(self, seed: int) -> SsfnConfig:
        return SsfnConfig(
            max_layers=self.layers,
            width_extra=self.width_extra,
            eps=self.eps,
            mu_first=self.mu0,
            mu_rest=self.mu,
            seed=seed,
            rand_gain=self.rand_gain,
            input_bias=self.input_bias,
            solver=self.solver,
            admm_iters=self.admm_iters,
        )

    def solver_config(self, mode: str) -> SolverConfig:
        budget = self.iters
        if mode == "async" and self.async_budget == "per_node":
            budget = self.iters * self.nodes
        return SolverConfig(
            gamma=self.gamma,
            gamma_first=self.gamma0,
            eta=self.eta,
            max_activations=budget,
            mode=mode,
            activation_seed=self.activation_seed,
            staleness_cap=self.staleness_cap,
            schedule=self.schedule,
            sync_sweep=self.sync_sweep,
            record_time=self.timing,
        )

    def graph(self) -> Graph:
        return circulant_graph(self.nodes, self.degree)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown spec fields {sorted(unknown)}")
        return cls(**d)


@dataclass
class RunResult:
    """One trained model (one variant, one seed)."""

    variant: str
    seed: int
    accuracy: float | None  # percent on the test set
    train_accuracy: float
    train_costs: list[float]
    consensus_errors: list[float] = field(default_factory=list)  # final value per layer
    activations: int = 0
    rounds: int = 0
    messages: int = 0
    wall_time: float | None = None
    equivalence: list[dict] = field(default_factory=list)


@dataclass
class ExperimentResult:
    spec: dict
    runs: list[RunResult]

    def variants(self) -> list[str]:
        out: list[str] = []
        for r in self.runs:
            if r.variant not in out:
                out.append(r.variant)
        return out

    def accuracies(self, variant: str) -> list[float]:
        return [r.accuracy for r in self.runs if r.variant == variant and r.accuracy is not None]

    def summary(self) -> dict:
        out = {}
        for v in self.variants():
            accs = self.accuracies(v)
            runs = [r for r in self.runs if r.variant == v]
            walls = [r.wall_time for r in runs if r.wall_time is not None]
            out[v] = {
                "accuracy_mean": statistics.fmean(accs) if accs else None,
                "accuracy_std": statistics.stdev(accs) if len(accs) > 1 else 0.0 if accs else None,
                "messages": runs[0].messages,
                "activations": runs[0].activations,
                "rounds": runs[0].rounds,
                "wall_time_mean": statistics.fmean(walls) if walls else None,
            }
        return out

    def to_dict(self) -> dict:
        return {"spec": self.spec, "summary": self.summary(), "runs": [asdict(r) for r in self.runs]}

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentResult":
        return cls(d["spec"], [RunResult(**r) for r in d["runs"]])


def _clean(obj):
    """JSON has no NaN or Inf; map them to None."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def ring_degree(node_count: int) -> int:
    """Degree of the ring used in node-count sweeps (one link for two nodes)."""
    return 0 if node_count == 1 else 1 if node_count == 2 else 2


def _load(spec: ExperimentSpec) -> tuple[Dataset, Dataset | None]:
    train = load_csv(spec.train, spec.label_column, header=spec.header)
    test = None
    if spec.test:
        test = load_csv(spec.test, spec.label_column, train.class_count, header=spec.header)
        if test.input_dim != train.input_dim:
            raise DataError(f"train has {train.input_dim} features but test has {test.input_dim}")
    if spec.normalize:
        train, test, _ = normalize_fit_apply(train, test)
    return train, test


def _percent(stack: LayerStack, data: Dataset | None) -> float | None:
    if data is None:
        return None
    return 100.0 * accuracy(predict(stack, data.features), data.targets)


def _equivalence(stack: LayerStack, shards, spec: ExperimentSpec, seed: int) -> list[dict]:
    """Per-layer distance between the averaged readout and the pooled ridge solve on the same features.

    Only layers whose pooled solution lies strictly inside the norm ball are
    held to the tolerance: there the consensus fixed point is the pooled ridge
    solution, while on the boundary the projected update settles elsewhere.
    """
    cfg = stack.config
    q = stack.target_dim
    eps = cfg.epsilon(q)
    t = np.hstack([s.targets for s in shards])
    rows = []
    for layer in range(stack.depth + 1):
        y = np.hstack([stack.features(s.features, layer) for s in shards])
        ref = centralized_layer_solve(y, t, cfg.mu(layer), eps, method="ridge")
        inside = float(np.vdot(ref, ref)) < eps * (1 - 1e-9)
        dist = float(np.linalg.norm(stack.readouts[layer] - ref) / max(np.linalg.norm(ref), 1e-300))
        rows.append({"layer": layer, "relative_distance": dist, "interior": inside, "checked": inside})
    bad = [r for r in rows if r["checked"] and r["relative_distance"] > spec.equivalence_tol]
    if bad:
        worst = max(bad, key=lambda r: r["relative_distance"])
        raise EquivalenceError(
            f"seed {seed}: layer {worst['layer']} readout is {worst['relative_distance']:.3g} "
            f"from the pooled solution (tolerance {spec.equivalence_tol:g})"
        )
    return rows


def _run_central(spec: ExperimentSpec, train: Dataset, test: Dataset | None, seed: int) -> tuple[RunResult, LayerStack]:
    t0 = time.perf_counter()
    stack = train_centralized(train.features, train.targets, spec.ssfn_config(seed))
    wall = time.perf_counter() - t0
    res = RunResult(
        "central",
        seed,
        _percent(stack, test),
        _percent(stack, train),
        list(stack.train_costs),
        wall_time=wall if spec.timing else None,
    )
    return res, stack


def _run_decentralized(spec, mode, train, test, seed, trace_sink):
    graph = spec.graph()
    part = partition_uniform(train, spec.nodes, seed, shuffle=spec.shuffle)
    shards = [(s.features, s.targets) for s in part.shards]
    runner = run_layer_consensus_threaded if spec.parallel else run_layer_consensus
    t0 = time.perf_counter()
    model = train_decentralized(shards, graph, spec.ssfn_config(seed), spec.solver_config(mode), runner=runner)
    wall = time.perf_counter() - t0
    stack = model.stack
    res = RunResult(
        mode,
        seed,
        _percent(stack, test),
        _percent(stack, train),
        list(stack.train_costs),
        model.final_consensus_errors,
        model.activations,
        model.rounds,
        model.messages_sent,
        wall if spec.timing else None,
    )
    if trace_sink is not None:
        trace_sink(mode, seed, model.traces)
    return res, stack, part


def run_experiment(spec: ExperimentSpec, out: str | Path | None = None) -> ExperimentResult:
    """Train the configured variant(s) for ``spec.repeats`` consecutive seeds.

    With ``out`` set, the result JSON goes to ``out`` and one trace CSV per
    decentralized run and layer to ``<out stem>_traces/``.
    """
    try:
        train, test = _load(spec)
    except (OSError, DataError) as exc:
        raise DataError(f"loading {spec.train}: {exc}") from exc
    if spec.mode != "central":
        if spec.nodes > train.sample_count:
            raise DataError(f"cannot split {train.sample_count} samples over {spec.nodes} nodes")
        spec.graph()  # reject a bad degree before any training
    trace_dir = None
    if out is not None:
        out = Path(out)
        trace_dir = out.with_name(out.stem + "_traces")
    header = "# spec: " + json.dumps(_clean(spec.to_dict()), sort_keys=True)

    def sink(mode, seed, traces):
        if trace_dir is None:
            return
        trace_dir.mkdir(parents=True, exist_ok=True)
        for layer, tr in enumerate(traces):
            path = trace_dir / f"{mode}_seed{seed}_layer{layer:02d}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(header + "\n")
                fh.write(f"# mode: {mode}, seed: {seed}, layer: {layer}\n")
                tr.to_csv(fh)

    runs: list[RunResult] = []
    for r in range(spec.repeats):
        seed = spec.seed + r
        log.info("repeat %d/%d (seed %d)", r + 1, spec.repeats, seed)
        if spec.mode in ("central", "compare"):
            res, _ = _run_central(spec, train, test, seed)
            runs.append(res)
            log.info("central: accuracy %s", res.accuracy)
        mode = spec.decentralized_mode
        if mode is not None:
            res, stack, part = _run_decentralized(spec, mode, train, test, seed, sink)
            if spec.mode == "compare":
                res.equivalence = _equivalence(stack, part.shards, spec, seed)
            runs.append(res)
            log.info("%s: accuracy %s, %d messages", mode, res.accuracy, res.messages)
    result = ExperimentResult(_clean(spec.to_dict()), runs)
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(result.to_json(), encoding="utf-8")
    return result


def _row(spec: ExperimentSpec, res: ExperimentResult, mode: str) -> dict:
    s = res.summary()[mode]
    rounds = s["rounds"] or 0
    acts = s["activations"] or 0
    layers = spec.layers + 1
    return {
        "mode": mode,
        "nodes": spec.nodes,
        "degree": spec.degree,
        "accuracy_mean": s["accuracy_mean"],
        "accuracy_std": s["accuracy_std"],
        "messages": s["messages"],
        "activations": acts,
        "rounds": rounds,
        "messages_per_round": s["messages"] / rounds if mode == "sync" and rounds else None,
        "messages_per_activation": s["messages"] / acts if mode == "async" and acts else None,
        "activations_per_layer": acts / layers,
        "wall_time_mean": s["wall_time_mean"],
    }


def sweep_degree(spec: ExperimentSpec, degrees: list[int], modes=("sync", "async")) -> list[dict]:
    """One row per (mode, degree) on a circulant graph with ``spec.nodes`` nodes."""
    for d in degrees:
        circulant_graph(spec.nodes, d)  # all degrees are checked before any run
    rows = []
    for mode in modes:
        for d in degrees:
            s = replace(spec, mode=mode, degree=d)
            rows.append(_row(s, run_experiment(s), mode))
    return rows


def sweep_nodes(spec: ExperimentSpec, node_counts: list[int], modes=("sync", "async")) -> list[dict]:
    """One row per (mode, node count) on a ring; two nodes share a single link."""
    train = load_csv(spec.train, spec.label_column, header=spec.header)
    for m in node_counts:
        if m > train.sample_count:
            raise DataError(f"cannot split {train.sample_count} samples over {m} nodes")
        circulant_graph(m, ring_degree(m))
    rows = []
    for mode in modes:
        for m in node_counts:
            s = replace(spec, mode=mode, nodes=m, degree=ring_degree(m))
            rows.append(_row(s, run_experiment(s), mode))
    return rows
