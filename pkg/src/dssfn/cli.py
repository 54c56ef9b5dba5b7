"""Command line entry point: ``dssfn train``, ``dssfn sweep-degree``, ``dssfn sweep-nodes``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .harness import ExperimentSpec, run_experiment, sweep_degree, sweep_nodes

log = logging.getLogger("dssfn")


def _int_list(text: str) -> list[int]:
    try:
        out = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _header(text: str):
    t = text.lower()
    if t in ("auto", "yes", "no"):
        return {"auto": "auto", "yes": True, "no": False}[t]
    raise argparse.ArgumentTypeError("header must be auto, yes or no")


def _add_experiment_args(p: argparse.ArgumentParser) -> None:
    d = ExperimentSpec(train="")
    p.add_argument("--data", required=True, help="training CSV")
    p.add_argument("--test", help="test CSV (accuracy is reported on it)")
    p.add_argument("--label-column", type=int, default=d.label_column)
    p.add_argument("--header", type=_header, default=d.header, help="auto, yes or no")
    p.add_argument("--nodes", type=int, default=d.nodes)
    p.add_argument("--degree", type=int, default=d.degree)
    p.add_argument("--iters", type=int, default=d.iters, help="rounds (sync) or activations (async) per layer")
    p.add_argument("--gamma0", type=float, default=d.gamma0)
    p.add_argument("--gamma", type=float, default=d.gamma)
    p.add_argument("--mu0", type=float, default=d.mu0)
    p.add_argument("--mu", type=float, default=d.mu)
    p.add_argument("--eta", type=float, default=d.eta)
    p.add_argument("--eps", type=float, default=d.eps)
    p.add_argument("--layers", type=int, default=d.layers)
    p.add_argument("--width-extra", type=int, default=d.width_extra)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--repeats", type=int, default=d.repeats)
    p.add_argument("--out", help="result JSON path; traces go next to it")
    p.add_argument("--parallel", action="store_true", help="thread-per-node consensus runtime")
    p.add_argument("--no-shuffle", action="store_true", help="split data in file order")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--input-bias", type=float, default=d.input_bias, help="constant input feature; 0 disables")
    p.add_argument("--rand-gain", type=float, default=d.rand_gain)
    p.add_argument("--solver", choices=("admm", "ridge"), default=d.solver)
    p.add_argument("--admm-iters", type=int, default=d.admm_iters)
    p.add_argument("--staleness-cap", type=int, default=d.staleness_cap)
    p.add_argument("--schedule", choices=("uniform", "round_robin"), default=d.schedule)
    p.add_argument("--activation-seed", type=int, default=d.activation_seed)
    p.add_argument("--sync-sweep", choices=("sequential", "jacobi"), default=d.sync_sweep)
    p.add_argument(
        "--async-budget",
        choices=("total", "per-node"),
        default=d.async_budget.replace("_", "-"),
        help="async --iters counts all activations (total) or activations per node (per-node)",
    )
    p.add_argument("--compare-with", choices=("sync", "async"), default=d.compare_with)
    p.add_argument("--timing", action="store_true", help="record wall-clock times (breaks byte-identical output)")


def _spec(args, mode: str) -> ExperimentSpec:
    return ExperimentSpec(
        train=args.data,
        test=args.test,
        mode=mode,
        label_column=args.label_column,
        header=args.header,
        nodes=args.nodes,
        degree=args.degree,
        iters=args.iters,
        gamma0=args.gamma0,
        gamma=args.gamma,
        mu0=args.mu0,
        mu=args.mu,
        eta=args.eta,
        eps=args.eps,
        layers=args.layers,
        width_extra=args.width_extra,
        seed=args.seed,
        repeats=args.repeats,
        shuffle=not args.no_shuffle,
        normalize=not args.no_normalize,
        input_bias=args.input_bias or None,
        rand_gain=args.rand_gain,
        solver=args.solver,
        admm_iters=args.admm_iters,
        staleness_cap=args.staleness_cap,
        schedule=args.schedule,
        activation_seed=args.activation_seed,
        sync_sweep=args.sync_sweep,
        async_budget=args.async_budget.replace("-", "_"),
        compare_with=args.compare_with,
        parallel=args.parallel,
        timing=args.timing,
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dssfn", description="Centralized and decentralized SSFN training.")
    sub = ap.add_subparsers(dest="command", required=True)
    tr = sub.add_parser("train", help="train one variant, possibly repeated over seeds")
    tr.add_argument("--mode", choices=("central", "sync", "async", "compare"), default="central")
    _add_experiment_args(tr)
    sd = sub.add_parser("sweep-degree", help="sync and async runs over several graph degrees")
    sd.add_argument("--degrees", type=_int_list, required=True)
    _add_experiment_args(sd)
    sn = sub.add_parser("sweep-nodes", help="sync and async runs on rings of several sizes")
    sn.add_argument("--counts", type=_int_list, required=True)
    _add_experiment_args(sn)
    return ap


def configure_logging() -> None:
    level = os.environ.get("DSSFN_LOG", "WARNING").strip().upper()
    numeric = int(level) if level.isdigit() else logging.getLevelName(level)
    if not isinstance(numeric, int):
        raise ValueError(f"DSSFN_LOG must be a logging level name or number, got {level!r}")
    logging.basicConfig(level=numeric, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)  # the gamma bound warning goes through the log


def _emit(payload, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        configure_logging()
        if args.command == "train":
            spec = _spec(args, args.mode)
            res = run_experiment(spec, args.out)
            sys.stdout.write(json.dumps(res.summary(), indent=2, sort_keys=True) + "\n")
        elif args.command == "sweep-degree":
            _emit(sweep_degree(_spec(args, "sync"), args.degrees), args.out)
        else:
            _emit(sweep_nodes(_spec(args, "sync"), args.counts), args.out)
    except Exception as exc:  # noqa: BLE001 - every failure becomes a message and exit code
        log.debug("failure", exc_info=True)
        print(f"dssfn: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
