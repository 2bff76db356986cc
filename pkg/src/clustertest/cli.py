"""Command-line entry point.

Exit codes: 0 on success, 2 when the walk-budget guard refuses a run, 1 on
any other error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import spectral
from .generators import NoisyParitiesInstance, gen_clusterable, gen_config_model, gen_noisy_parities, gen_unclusterable
from .graph import Graph, QueryLedger, dump_graph, load_graph
from .harness import ExperimentConfig, build_instance, emit_report, run_experiment, trial_kind
from .lowerbound import run_distinguisher
from .reductions import reduce_to_maxcut, reduce_to_partition_testing
from .rng import child_seed
from .tester import BudgetExceeded, partition_test


def _write(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _read_graph(path: str) -> Graph:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    return load_graph(text)


def cmd_generate(args) -> int:
    if args.kind == "clusterable":
        inst = gen_clusterable(args.k, args.n, args.d, args.seed)
        g, truth = inst.graph, inst.ground_truth()
    elif args.kind == "unclusterable":
        inst = gen_unclusterable(args.k, args.n, args.d, args.phi_out, args.seed)
        g, truth = inst.graph, inst.ground_truth()
    elif args.kind == "regular":
        g = gen_config_model(args.n, args.d, args.seed)
        truth = {"kind": "regular"}
    else:
        inst = gen_noisy_parities(args.n, args.d, args.eps, args.case, args.seed)
        g = inst.graph
        truth = json.loads(inst.to_json())
    truth = {"kind": args.kind, "seed": args.seed, **truth}
    _write(dump_graph(g), args.out)
    sidecar = args.truth or (f"{args.out}.json" if args.out not in (None, "-") else None)
    if sidecar:
        Path(sidecar).write_text(json.dumps(truth, sort_keys=True) + "\n")
    return 0


def _overrides(args) -> dict:
    keys = ("s", "t", "R", "r", "s_scale", "t_scale", "R_scale", "r_scale")
    return {k: getattr(args, k) for k in keys if getattr(args, k) is not None}


def cmd_test(args) -> int:
    if args.graph:
        graphs = [(_read_graph(args.graph), "file")]
    else:
        config = ExperimentConfig(
            task="test", kind=args.kind, n=args.n, d=args.d, k=args.k, phi_in=args.phi_in,
            phi_out=args.phi_out, beta=args.beta, seed=args.seed,
        )
        graphs = []
        for trial in range(args.trials):
            kind = trial_kind(config, trial)
            graphs.append((build_instance(config, kind, child_seed(args.seed, "instance", trial))[0], kind))
    verdicts, rows = [], []
    for trial in range(args.trials):
        g, label = graphs[trial] if len(graphs) > 1 else graphs[0]
        ledger = QueryLedger()
        seed = child_seed(args.seed, "test", trial)
        v = partition_test(
            g, args.k, args.phi_in, args.phi_out, args.beta, mode=args.mode, profile=args.profile, seed=seed,
            eta=args.eta, overrides=_overrides(args), repetitions=args.repetitions,
            walk_budget=args.walk_budget, ledger=ledger,
        )
        verdicts.append(
            {"trial": trial, "instance": label, "decision": v.decision, "statistic": v.statistic,
             "threshold": v.threshold, "queries": v.queries, "seed": v.seed, "mode": v.mode}
        )
        rows.append({"trial": trial, "instance": label, "decision": v.decision, "statistic": v.statistic,
                     "threshold": v.threshold, "total_queries": ledger.total})
    _write(json.dumps(verdicts, indent=1, default=str) + "\n", args.json_out)
    if args.csv_out:
        emit_report(rows, args.csv_out, "csv")
    return 0


def cmd_noisy_parities(args) -> int:
    results = run_distinguisher(
        args.n, args.d, args.eps, args.sessions, args.seed, args.num_seeds, args.walks_per_seed, args.walk_len, args.closure
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(["session", "case", "guess", "queries", "cycles_found", "advantage"])
    for i, res in enumerate(results):
        writer.writerow([i, res.case, res.guess, res.queries, res.cycles_found, 1 if res.correct else -1])
    _write(buf.getvalue(), args.out)
    if results:
        rate = sum(r.correct for r in results) / len(results)
        print(f"success rate {rate:.4f}, advantage {2 * rate - 1:.4f}", file=sys.stderr)
    return 0


def cmd_reduce(args) -> int:
    inst = NoisyParitiesInstance.from_json(Path(args.instance).read_text())
    if args.to == "partition":
        reduced = reduce_to_partition_testing(inst)
        _write(dump_graph(reduced.graph), args.out)
        provenance = {"encoding": "2v+b", "edges": reduced.provenance()}
    else:
        g = reduce_to_maxcut(inst)
        _write(dump_graph(g), args.out)
        provenance = {"kept_source_edges": [int(i) for i, y in enumerate(inst.Y) if y == 1]}
    target = args.provenance or (f"{args.out}.provenance.json" if args.out not in (None, "-") else None)
    if target:
        Path(target).write_text(json.dumps(provenance) + "\n")
    return 0


def cmd_spectrum(args) -> int:
    g = _read_graph(args.graph)
    ev = spectral.laplacian_spectrum(g, args.count)
    lines = ["index,eigenvalue"] + [f"{i + 1},{format(float(x), '.12g')}" for i, x in enumerate(ev)]
    _write("\r\n".join(lines) + "\r\n", args.out)
    return 0


def cmd_run(args) -> int:
    config = ExperimentConfig.load(args.config)
    rows = run_experiment(config)
    if not config.output_csv and not config.output_json:
        sys.stdout.write(emit_report(rows, None, "csv", config.timing))
    return 0


def cmd_sweep(args) -> int:
    if args.config:
        config = ExperimentConfig.load(args.config)
        config.task = "sweep"
    else:
        config = ExperimentConfig(
            task="sweep", kind="mixed", n=args.n, d=args.d, k=args.k, phi_in=args.phi_in, beta=args.beta,
            trials=args.trials, seed=args.seed, mode=args.mode,
            sweep_values=[float(v) for v in args.values.split(",")],
        )
    rows = run_experiment(config)
    _write(emit_report(rows, None, "csv", config.timing), args.out)
    return 0


def _add_tester_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--phi-in", type=float, default=0.2)
    p.add_argument("--phi-out", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--mode", choices=("oracle", "query"), default="oracle")
    p.add_argument("--profile", choices=("paper", "calibrated"), default="calibrated")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clustertest", description="Sublinear cluster-structure testers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate an instance as an edge list plus JSON ground truth")
    p.add_argument("--kind", choices=("clusterable", "unclusterable", "regular", "noisy-parities"), required=True)
    p.add_argument("--n", type=int, default=200, help="vertices (per cluster for cluster kinds)")
    p.add_argument("--d", type=int, default=12)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--phi-out", type=float, default=0.01)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--case", choices=("yes", "no", "random"), default="no")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--truth", default=None, help="ground-truth sidecar path (default OUT.json)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("test", help="run PartitionTest")
    _add_tester_args(p)
    p.add_argument("--graph", default=None, help="edge-list file; otherwise instances are generated")
    p.add_argument("--kind", choices=("clusterable", "unclusterable", "mixed"), default="mixed")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--d", type=int, default=12)
    for key, kind in (("s", int), ("t", int), ("R", int), ("r", int)):
        p.add_argument(f"--{key}", type=kind, default=None)
    for key in ("s_scale", "t_scale", "R_scale", "r_scale"):
        p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=float, default=None)
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--walk-budget", type=float, default=2e8)
    p.add_argument("--json-out", default=None)
    p.add_argument("--csv-out", default=None)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("noisy-parities", help="play the NoisyParities game")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--strategy", choices=("cycle-sum",), default="cycle-sum")
    p.add_argument("--sessions", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-seeds", type=int, default=6)
    p.add_argument("--walks-per-seed", type=int, default=40)
    p.add_argument("--walk-len", type=int, default=5)
    p.add_argument("--closure", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_noisy_parities)

    p = sub.add_parser("reduce", help="reduce a NoisyParities instance")
    p.add_argument("--to", choices=("partition", "maxcut"), required=True)
    p.add_argument("--instance", required=True, help="instance JSON as written by generate")
    p.add_argument("--out", default=None)
    p.add_argument("--provenance", default=None)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("spectrum", help="smallest normalized-Laplacian eigenvalues")
    p.add_argument("--graph", required=True)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("sweep", help="rejection rates over a list of phi_out values")
    p.add_argument("--config", default=None)
    p.add_argument("--values", default="0.001,0.005,0.01,0.02")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--d", type=int, default=12)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--phi-in", type=float, default=0.2)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--mode", choices=("oracle", "query"), default="oracle")
    p.add_argument("--trials", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("run", help="run an experiment config file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"budget guard: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and map to exit code 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
