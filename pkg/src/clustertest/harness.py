"""Experiment configuration, orchestration and reports.

A config is a flat ``key = value`` file.  Every random choice of a run is
derived from ``config.seed``, so a config file fully determines the rows it
produces.  Timing is measured but kept out of reports unless requested,
which keeps repeated runs byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import spectral
from .generators import gen_clusterable, gen_config_model, gen_noisy_parities, gen_unclusterable
from .graph import QueryLedger
from .lowerbound import run_distinguisher
from .reductions import reduce_to_maxcut, reduce_to_partition_testing, vstar_expansion
from .rng import child_seed
from .tester import compute_params, partition_test

TASKS = ("generate", "test", "noisy-parities", "reduce", "spectrum", "sweep")
INSTANCE_KINDS = ("clusterable", "unclusterable", "mixed", "regular", "noisy_parities")


@dataclass
class ExperimentConfig:
    """Flat experiment description.  ``n`` counts vertices per cluster for cluster kinds."""

    task: str = "test"
    kind: str = "mixed"
    n: int = 200
    d: int = 12
    k: int = 1
    phi_in: float = 0.2
    phi_out: float = 0.0
    instance_phi_out: float | None = None
    beta: float = 1.0
    eta: float = 0.5
    eps: float = 0.05
    case: str = "no"
    mode: str = "oracle"
    profile: str = "calibrated"
    trials: int = 1
    seed: int = 0
    s: int | None = None
    t: int | None = None
    R: int | None = None
    r: int | None = None
    s_scale: float | None = None
    t_scale: float | None = None
    R_scale: float | None = None
    r_scale: float | None = None
    walk_budget: float = 2e8
    repetitions: int = 1
    sweep_values: list = field(default_factory=list)
    target: str = "partition"
    count: int = 4
    num_seeds: int = 6
    walks_per_seed: int = 40
    walk_len: int = 5
    closure: bool = False
    workers: int = 1
    timing: bool = False
    output_csv: str | None = None
    output_json: str | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.kind not in INSTANCE_KINDS:
            raise ValueError(f"unknown instance kind {self.kind!r}")
        if self.trials < 0:
            raise ValueError("trials must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def overrides(self) -> dict:
        keys = ("s", "t", "R", "r", "s_scale", "t_scale", "R_scale", "r_scale")
        return {key: getattr(self, key) for key in keys if getattr(self, key) is not None}

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        types = {f.name: f for f in fields(cls)}
        values = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            values[key] = _parse_value(value, cls.__dataclass_fields__[key].type)
        return cls(**values)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ",".join(repr(float(v)) for v in value)
    return str(value)


def _parse_value(text: str, annotation: str):
    if text.lower() == "none":
        return None
    if "list" in annotation:
        return [float(v) for v in text.split(",") if v.strip()]
    if "bool" in annotation:
        if text.lower() not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r}")
        return text.lower() == "true"
    if annotation.startswith("int"):
        return int(text)
    if annotation.startswith("float"):
        return float(text)
    return text


RESULT_COLUMNS = (
    "task",
    "trial",
    "seed",
    "param",
    "instance",
    "truth",
    "decision",
    "statistic",
    "threshold",
    "vertex_queries",
    "degree_queries",
    "neighbor_queries",
    "total_queries",
    "extra",
)


@dataclass
class ResultRow:
    task: str
    trial: int
    seed: int
    param: float | str = ""
    instance: str = ""
    truth: str = ""
    decision: str = ""
    statistic: float | str = ""
    threshold: float | str = ""
    vertex_queries: int = 0
    degree_queries: int = 0
    neighbor_queries: int = 0
    total_queries: int = 0
    extra: str = ""
    wall_time: float = 0.0

    def as_dict(self, timing: bool = False) -> dict:
        out = {c: getattr(self, c) for c in RESULT_COLUMNS}
        if timing:
            out["wall_time"] = self.wall_time
        return out

    def with_ledger(self, ledger: QueryLedger) -> "ResultRow":
        return dataclasses.replace(
            self,
            vertex_queries=ledger.vertex_queries,
            degree_queries=ledger.degree_queries,
            neighbor_queries=ledger.neighbor_queries,
            total_queries=ledger.total,
        )


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".12g")
    return value


def emit_report(rows, path=None, fmt: str = "csv", timing: bool = False) -> str:
    """Serialize rows as RFC-4180 CSV or a JSON array; writes ``path`` if given."""
    dicts = [r.as_dict(timing) if isinstance(r, ResultRow) else dict(r) for r in rows]
    if fmt == "csv":
        columns = list(dicts[0]) if dicts else list(RESULT_COLUMNS) + (["wall_time"] if timing else [])
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(columns)
        for row in dicts:
            if list(row) != columns:
                raise ValueError("rows do not share a schema")
            writer.writerow([_fmt(row[c]) for c in columns])
        text = buf.getvalue()
    elif fmt == "json":
        def clean(v):
            if isinstance(v, (float, np.floating)):
                v = float(v)
                return v if math.isinf(v) else float(format(v, ".12g"))
            return v

        text = json.dumps([{k: clean(v) for k, v in row.items()} for row in dicts], indent=1) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def load_report(text: str, fmt: str = "json") -> list[dict]:
    if fmt == "json":
        return json.loads(text)
    return list(csv.DictReader(io.StringIO(text)))


# -- instances -----------------------------------------------------------------


def build_instance(config: ExperimentConfig, kind: str, seed: int):
    """Returns ``(graph, truth, payload)`` where ``payload`` is the generator output."""
    phi = config.instance_phi_out if config.instance_phi_out is not None else config.phi_out
    if kind == "clusterable":
        inst = gen_clusterable(config.k, config.n, config.d, seed)
        return inst.graph, "yes", inst
    if kind == "unclusterable":
        inst = gen_unclusterable(config.k, config.n, config.d, phi if phi > 0 else 1e-9, seed)
        return inst.graph, "no", inst
    if kind == "regular":
        g = gen_config_model(config.n, config.d, seed)
        return g, "", g
    if kind == "noisy_parities":
        inst = gen_noisy_parities(config.n, config.d, config.eps, config.case, seed)
        return inst.graph, inst.case, inst
    raise ValueError(f"cannot build instance kind {kind!r}")


def trial_kind(config: ExperimentConfig, trial: int) -> str:
    if config.kind == "mixed":
        return "clusterable" if trial % 2 == 0 else "unclusterable"
    return config.kind


# -- tasks ---------------------------------------------------------------------


def _test_trial(config: ExperimentConfig, trial: int, phi_out: float, instance_seed: int, param="") -> ResultRow:
    kind = trial_kind(config, trial)
    g, truth, _ = build_instance(config, kind, instance_seed)
    ledger = QueryLedger()
    # The tester seed ignores the sweep value, so a sweep only moves the threshold.
    seed = child_seed(config.seed, "test", trial)
    verdict = partition_test(
        g, config.k, config.phi_in, phi_out, config.beta, mode=config.mode, profile=config.profile,
        seed=seed, eta=config.eta, overrides=config.overrides(), repetitions=config.repetitions,
        walk_budget=config.walk_budget, ledger=ledger,
    )
    row = ResultRow(
        task=config.task, trial=trial, seed=seed, param=param, instance=kind, truth=truth,
        decision=verdict.decision, statistic=verdict.statistic, threshold=verdict.threshold,
    )
    return row.with_ledger(ledger)


def _generate_trial(config: ExperimentConfig, trial: int) -> ResultRow:
    seed = child_seed(config.seed, "instance", trial)
    kind = trial_kind(config, trial)
    g, truth, payload = build_instance(config, kind, seed)
    extra = {"n": g.n, "m": g.m, "vol": g.vol}
    if hasattr(payload, "phi_in"):
        extra.update(phi_in=payload.phi_in, beta=payload.beta, cross_edges=payload.cross_edges)
    return ResultRow(task="generate", trial=trial, seed=seed, instance=kind, truth=truth, extra=json.dumps(extra, sort_keys=True))


def _reduce_trial(config: ExperimentConfig, trial: int) -> ResultRow:
    seed = child_seed(config.seed, "instance", trial)
    inst = gen_noisy_parities(config.n, config.d, config.eps, config.case, seed)
    if config.target == "partition":
        reduced = reduce_to_partition_testing(inst)
        stat = vstar_expansion(inst, reduced) if inst.X is not None else ""
        extra = {"n": reduced.graph.n, "m": reduced.graph.m}
    elif config.target == "maxcut":
        g = reduce_to_maxcut(inst)
        stat = g.m / max(inst.graph.m, 1)
        extra = {"n": g.n, "m": g.m}
    else:
        raise ValueError(f"unknown reduction target {config.target!r}")
    return ResultRow(
        task="reduce", trial=trial, seed=seed, param=config.target, instance="noisy_parities",
        truth=inst.case, statistic=stat, extra=json.dumps(extra, sort_keys=True),
    )


def _spectrum_trial(config: ExperimentConfig, trial: int) -> ResultRow:
    seed = child_seed(config.seed, "instance", trial)
    kind = trial_kind(config, trial)
    g, truth, _ = build_instance(config, kind, seed)
    ev = spectral.laplacian_spectrum(g, config.count)
    stat = float(ev[config.k]) if config.k < len(ev) else ""
    return ResultRow(
        task="spectrum", trial=trial, seed=seed, instance=kind, truth=truth, statistic=stat,
        extra=json.dumps([float(format(x, ".12g")) for x in ev]),
    )


def _run_trial(config: ExperimentConfig, trial: int) -> list[ResultRow]:
    start = time.perf_counter()
    if config.task == "test":
        rows = [_test_trial(config, trial, config.phi_out, child_seed(config.seed, "instance", trial))]
    elif config.task == "sweep":
        # One fixed YES/NO pair; every sweep value sees the same graphs.
        rows = []
        for value in config.sweep_values:
            rows.append(_test_trial(config, trial, float(value), child_seed(config.seed, "instance", trial % 2), value))
    elif config.task == "generate":
        rows = [_generate_trial(config, trial)]
    elif config.task == "reduce":
        rows = [_reduce_trial(config, trial)]
    elif config.task == "spectrum":
        rows = [_spectrum_trial(config, trial)]
    else:
        raise ValueError(f"task {config.task!r} is not trial-based")
    elapsed = time.perf_counter() - start
    return [dataclasses.replace(r, wall_time=elapsed / max(len(rows), 1)) for r in rows]


def _noisy_parities_rows(config: ExperimentConfig) -> list[ResultRow]:
    results = run_distinguisher(
        config.n, config.d, config.eps, config.trials, config.seed,
        config.num_seeds, config.walks_per_seed, config.walk_len, config.closure,
    )
    rows = []
    for i, res in enumerate(results):
        extra = {"cycles_found": res.cycles_found, "mean_cycle_length": res.mean_cycle_length, "err": res.err}
        rows.append(
            ResultRow(
                task="noisy-parities", trial=i, seed=child_seed(config.seed, "session", i), instance="noisy_parities",
                truth=res.case, decision=res.guess, statistic=res.zero_fraction, threshold=res.threshold,
                total_queries=res.queries, vertex_queries=res.queries, extra=json.dumps(extra, sort_keys=True),
            )
        )
    return rows


def run_experiment(config: ExperimentConfig) -> list[ResultRow]:
    """Run all trials and write the configured reports; returns the rows in trial order."""
    if config.task == "noisy-parities":
        rows = _noisy_parities_rows(config)
    elif config.workers > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(_run_trial, [config] * config.trials, range(config.trials)))
        rows = [r for chunk in chunks for r in chunk]
    else:
        rows = [r for trial in range(config.trials) for r in _run_trial(config, trial)]
    if config.output_csv:
        emit_report(rows, config.output_csv, "csv", config.timing)
    if config.output_json:
        emit_report(rows, config.output_json, "json", config.timing)
    return rows


def rejection_rates(rows, by: str = "param") -> dict:
    """Fraction of ``reject`` decisions grouped by ``(row[by], instance)``."""
    groups: dict = {}
    for r in rows:
        d = r.as_dict() if isinstance(r, ResultRow) else r
        groups.setdefault((d[by], d["instance"]), []).append(d["decision"] == "reject")
    return {key: float(np.mean(v)) for key, v in groups.items()}


def params_echo(config: ExperimentConfig, g) -> dict:
    return compute_params(g, config.k, config.phi_in, config.phi_out, config.beta, config.profile, config.overrides(), config.eta).as_dict()
