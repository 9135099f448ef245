"""Studies built on the search loop: convergence curves, multiplexing,
transfer learning and dense-network scaling.

Every trial seed is derived from the manifest's base seed and the trial
index, so rerunning a manifest reproduces the same records.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import mannwhitneyu

from .controllability import LNDM_RANK_CAP, controllability_report
from .dynamics import Network
from .optimizers import ConfigError, OptimizerConfig, RunRecord, run, trial_seed
from .stability import stability_report
from .tasks import TaskSpec, encoding_label, encoding_sweep, make_target

EXPERIMENT_KINDS = ("convergence", "multiplex", "transfer", "scaling")
DESK_SIZES = (3, 10, 100, 300)
LARGE_SIZES = (1000, 3000)
MEMORY_BUDGET_MB = 3000.0


def _task_from(doc, where):
    if isinstance(doc, TaskSpec):
        return doc
    try:
        return TaskSpec.from_dict(doc)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(where, str(exc)) from None


def _default_algorithms(kind):
    if kind == "convergence":
        budget = 448_000
        return [OptimizerConfig(algorithm=a, max_generations=2000, max_evaluations=budget)
                for a in ("sga", "cmaes", "spso2011", "acor")]
    if kind == "scaling":
        return [OptimizerConfig(population_size=64, max_generations=300, sga={"mutation_sigma": 2.0})]
    return [OptimizerConfig()]


@dataclass
class ExperimentManifest:
    kind: str
    node_counts: tuple = ()
    algorithms: list = field(default_factory=list)
    trials: int = 1
    base_seed: int = 0
    output_dir: Optional[str] = None
    task: Optional[TaskSpec] = None
    scenarios: list = field(default_factory=list)     # multiplex only
    source_target: str = "peak"                       # transfer only
    large: bool = False                               # scaling only
    memory_budget_mb: float = MEMORY_BUDGET_MB
    workers: int = 1

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError("kind", f"must be one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        if not self.node_counts:
            self.node_counts = {"convergence": (3,), "multiplex": (20,), "transfer": (10,),
                                "scaling": DESK_SIZES}[self.kind]
        self.node_counts = tuple(int(n) for n in self.node_counts)
        if self.kind == "scaling" and self.large:
            self.node_counts = tuple(sorted(set(self.node_counts) | set(LARGE_SIZES)))
        if not self.algorithms:
            self.algorithms = _default_algorithms(self.kind)
        algos = []
        for i, a in enumerate(self.algorithms):
            if isinstance(a, OptimizerConfig):
                algos.append(a)
                continue
            try:
                algos.append(OptimizerConfig.from_dict(a))
            except ConfigError as exc:
                raise ConfigError(f"algorithms[{i}].{exc.field}", exc.message) from None
        self.algorithms = algos
        self.task = _task_from(self.task, "task") if self.task is not None else TaskSpec.build()
        self.scenarios = [_task_from(s, f"scenarios[{i}]") for i, s in enumerate(self.scenarios)]
        if self.kind == "multiplex" and not self.scenarios:
            self.scenarios = [TaskSpec.build("binary_in_multiplex_out", ("band_pass", "valley", "threshold"))]
        self.validate()

    def validate(self):
        if int(self.trials) < 1:
            raise ConfigError("trials", "must be at least 1")
        if self.kind == "transfer" and int(self.trials) < 2:
            raise ConfigError("trials", "transfer needs at least 2 trials")
        if any(n < 3 for n in self.node_counts):
            raise ConfigError("node_counts", "every node count must be at least 3")
        if self.kind == "scaling" and not self.large and max(self.node_counts) > max(DESK_SIZES):
            raise ConfigError("node_counts", f"sizes above {max(DESK_SIZES)} need large=True")
        if not 0 <= int(self.base_seed) < 2 ** 64:
            raise ConfigError("base_seed", "must be a 64-bit unsigned integer")
        if int(self.workers) < 1:
            raise ConfigError("workers", "must be at least 1")
        if self.kind == "transfer":
            try:
                make_target(self.source_target, self.task.b, self.task.input_range)
            except ValueError as exc:
                raise ConfigError("source_target", str(exc)) from None
        if not self.memory_budget_mb > 0:
            raise ConfigError("memory_budget_mb", "must be positive")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "node_counts": list(self.node_counts),
            "algorithms": [a.to_dict() for a in self.algorithms],
            "trials": int(self.trials),
            "base_seed": int(self.base_seed),
            "output_dir": self.output_dir,
            "task": self.task.to_dict(),
            "scenarios": [s.to_dict() for s in self.scenarios],
            "source_target": self.source_target,
            "large": bool(self.large),
            "memory_budget_mb": float(self.memory_budget_mb),
            "workers": int(self.workers),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentManifest":
        if not isinstance(doc, dict):
            raise ConfigError("manifest", "expected a mapping")
        known = {f for f in cls.__dataclass_fields__}
        for key in doc:
            if key not in known:
                raise ConfigError(key, "unknown key")
        if "kind" not in doc:
            raise ConfigError("kind", "missing")
        return cls(**doc)


def _map(fn, jobs, workers):
    """Ordered map; results come back in job order whatever ``workers`` is."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _safe_run(job):
    config, task, n = job
    try:
        return run(config, task, task.template(n))
    except Exception as exc:  # recorded, the study carries on
        return {"error": f"{type(exc).__name__}: {exc}", "seed": config.seed}


def mean_curve(records) -> list:
    """Mean elite cost on the evaluation grid of the longest trial.

    Trials that stopped early hold their final cost.
    """
    records = [r for r in records if isinstance(r, RunRecord)]
    if not records:
        return []
    longest = max(records, key=lambda r: r.generations_used)
    grid = [row[1] for row in longest.trajectory]
    table = np.empty((len(records), len(grid)))
    for i, r in enumerate(records):
        c = r.elite_costs
        table[i, :len(c)] = c
        table[i, len(c):] = c[-1]
    return [[e, float(v)] for e, v in zip(grid, table.mean(axis=0))]


# --- convergence -----------------------------------------------------------

@dataclass
class ConvergenceResult:
    manifest: ExperimentManifest
    records: dict          # (algorithm, n) -> list of RunRecord or error dicts
    mean_curves: dict

    def successes(self, algorithm, n) -> int:
        return sum(1 for r in self.records[(algorithm, n)] if isinstance(r, RunRecord) and r.converged)

    def summary(self) -> dict:
        out = {}
        for (algo, n), recs in self.records.items():
            ok = [r for r in recs if isinstance(r, RunRecord)]
            out[f"{algo}/{n}"] = {
                "trials": len(recs),
                "failed": len(recs) - len(ok),
                "converged": self.successes(algo, n),
                "final_costs": [r.final_cost for r in ok],
                "generations": [r.generations_used for r in ok],
                "evaluations": [r.evaluations for r in ok],
            }
        return out


def convergence_study(manifest: ExperimentManifest) -> ConvergenceResult:
    records, curves = {}, {}
    for cfg in manifest.algorithms:
        for n in manifest.node_counts:
            jobs = [(cfg.replace(seed=trial_seed(manifest.base_seed, i)), manifest.task, n)
                    for i in range(manifest.trials)]
            recs = _map(_safe_run, jobs, manifest.workers)
            records[(cfg.algorithm, n)] = recs
            curves[(cfg.algorithm, n)] = mean_curve(recs)
    return ConvergenceResult(manifest, records, curves)


# --- multiplexing ----------------------------------------------------------

def response_curves(net: Network, task: TaskSpec) -> dict:
    """One curve per declared channel, then one per (untrained encoding, output).

    Keys are ``"<encoding>:<output>"``, declared channels first in channel order.
    """
    sc = task.scenario
    sweep = encoding_sweep(net, sc.n_inputs, sc.levels, task.settings)
    curves = {}
    for ch in sc.channels:
        curves[f"{ch.label}:{ch.output}"] = sweep[ch.label].curves[:, ch.output]
    trained = {ch.label for ch in sc.channels}
    for code in range(2 ** sc.n_inputs):
        label = encoding_label(code, sc.n_inputs)
        if label in trained:
            continue
        for k in range(sc.n_outputs):
            curves[f"{label}:{k}"] = sweep[label].curves[:, k]
    return curves


@dataclass
class MultiplexRun:
    task: TaskSpec
    n_nodes: int
    record: object         # RunRecord or error dict
    responses: dict        # label -> curve
    targets: dict          # label -> target curve (declared channels only)


@dataclass
class MultiplexResult:
    manifest: ExperimentManifest
    runs: list

    def summary(self) -> list:
        out = []
        for r in self.runs:
            rec = r.record
            row = {"scenario": r.task.scenario.kind, "n_nodes": r.n_nodes,
                   "channels": [f"{ch.label}:{ch.output}" for ch in r.task.scenario.channels]}
            if isinstance(rec, RunRecord):
                row.update(converged=rec.converged, per_channel=rec.elite_per_channel,
                           generations=rec.generations_used, evaluations=rec.evaluations,
                           response_ranges={k: float(np.ptp(v)) for k, v in r.responses.items()})
            else:
                row.update(rec)
            out.append(row)
        return out


def multiplex_study(manifest: ExperimentManifest) -> MultiplexResult:
    cfg = manifest.algorithms[0]
    jobs, meta = [], []
    for task in manifest.scenarios:
        for n in manifest.node_counts:
            for i in range(manifest.trials):
                jobs.append((cfg.replace(seed=trial_seed(manifest.base_seed, i)), task, n))
                meta.append((task, n))
    recs = _map(_safe_run, jobs, manifest.workers)
    runs = []
    for (task, n), rec in zip(meta, recs):
        if isinstance(rec, RunRecord):
            responses = response_curves(rec.network, task)
        else:
            responses = {}
        targets = {f"{ch.label}:{ch.output}": ch.target.outputs for ch in task.scenario.channels}
        runs.append(MultiplexRun(task, n, rec, responses, targets))
    return MultiplexResult(manifest, runs)


# --- transfer learning -----------------------------------------------------

@dataclass
class TransferTrial:
    index: int
    scratch: object        # RunRecord band-pass from random init
    source: object         # RunRecord source target from random init
    transfer: object       # RunRecord band-pass continued from the source population

    @property
    def complete(self) -> bool:
        return all(isinstance(r, RunRecord) and r.converged for r in (self.scratch, self.source, self.transfer))


@dataclass
class TransferResult:
    manifest: ExperimentManifest
    trials: list
    scratch_generations: list
    source_generations: list
    transfer_generations: list
    random_initial_costs: list
    transferred_initial_costs: list
    n_pairs: int
    n_excluded: int
    mean_scratch: float
    mean_transfer: float
    mean_transfer_total: float
    mean_random_initial: float
    mean_transferred_initial: float
    statistic: float
    p_value: float
    insufficient_data: bool

    def summary(self) -> dict:
        keys = ("scratch_generations", "source_generations", "transfer_generations", "random_initial_costs",
                "transferred_initial_costs", "n_pairs", "n_excluded", "mean_scratch", "mean_transfer",
                "mean_transfer_total", "mean_random_initial", "mean_transferred_initial", "statistic",
                "p_value", "insufficient_data")
        return {k: getattr(self, k) for k in keys}


def _transfer_trial(job):
    index, cfg, source_task, target_task, n, base = job
    seed = trial_seed(base, index)
    tmpl = target_task.template(n)
    try:
        scratch = run(cfg.replace(seed=trial_seed(seed, 0)), target_task, tmpl)
    except Exception as exc:
        scratch = {"error": f"{type(exc).__name__}: {exc}"}
    try:
        source = run(cfg.replace(seed=trial_seed(seed, 1)), source_task, tmpl)
        if source.converged:
            transfer = run(cfg.replace(seed=trial_seed(seed, 2)), target_task, tmpl,
                           initial_population=source.final_population)
        else:
            transfer = {"error": "source task did not converge"}
    except Exception as exc:
        source = transfer = {"error": f"{type(exc).__name__}: {exc}"}
    return TransferTrial(index, scratch, source, transfer)


def _mean(xs):
    return float(np.mean(xs)) if len(xs) else float("nan")


def transfer_study(manifest: ExperimentManifest) -> TransferResult:
    """Scratch band-pass runs against source-then-band-pass runs at one node count.

    The second phase resumes from the whole final population of the first.
    """
    cfg = manifest.algorithms[0]
    target_task = manifest.task
    sc = target_task.scenario
    if len(sc.channels) != 1:
        raise ConfigError("task", "transfer expects a single-channel task")
    source_task = TaskSpec.build(sc.kind, [manifest.source_target], target_task.b, target_task.input_range,
                                 sc.n_inputs, target_task.settings)
    n = manifest.node_counts[0]
    jobs = [(i, cfg, source_task, target_task, n, manifest.base_seed) for i in range(manifest.trials)]
    trials = _map(_transfer_trial, jobs, manifest.workers)
    done = [t for t in trials if t.complete]
    scratch = [t.scratch.generations_used for t in done]
    src = [t.source.generations_used for t in done]
    trans = [t.transfer.generations_used for t in done]
    rand0 = [t.scratch.initial_elite_cost for t in trials if isinstance(t.scratch, RunRecord)]
    trans0 = [t.transfer.initial_elite_cost for t in trials if isinstance(t.transfer, RunRecord)]
    insufficient = len(done) < 2
    if insufficient:
        stat, p = float("nan"), float("nan")
    elif len(set(scratch) | set(trans)) == 1:
        stat, p = float(len(done) ** 2 / 2), 1.0
    else:
        res = mannwhitneyu(trans, scratch, alternative="two-sided")
        stat, p = float(res.statistic), float(res.pvalue)
    return TransferResult(
        manifest, trials, scratch, src, trans, rand0, trans0, len(done), len(trials) - len(done),
        _mean(scratch), _mean(trans), _mean([a + b for a, b in zip(src, trans)]), _mean(rand0), _mean(trans0),
        stat, p, insufficient,
    )


# --- dense network scaling -------------------------------------------------

def estimated_memory_mb(n: int, cfg: OptimizerConfig) -> float:
    """Rough peak memory of one run: a few population copies of n x n genomes."""
    size = {"sga": cfg.population_size, "random_search": cfg.population_size, "spso2011": 4 * cfg.pso.swarm_size,
            "acor": cfg.acor.archive_size + 2 * cfg.acor.ants, "gd": 2 * n * n + 1}.get(cfg.algorithm)
    if size is None:  # cmaes carries a D x D covariance
        D = n * n
        return 3 * D * D * 8 / 2 ** 20
    return 3 * size * n * n * 8 / 2 ** 20


@dataclass
class ScalingEntry:
    n_nodes: int
    record: object = None
    controllability: object = None
    stability: object = None
    series: dict = None
    skipped: Optional[str] = None

    def summary(self) -> dict:
        if self.skipped:
            return {"n_nodes": self.n_nodes, "skipped": self.skipped}
        rec = self.record
        if not isinstance(rec, RunRecord):
            return {"n_nodes": self.n_nodes, **rec}
        initial, final = rec.initial_elite_cost, rec.final_cost
        return {
            "n_nodes": self.n_nodes,
            "converged": rec.converged,
            "generations": rec.generations_used,
            "evaluations": rec.evaluations,
            "initial_cost": initial,
            "final_cost": final,
            "improvement": (initial - final) / initial if initial > 0 else 0.0,
            "controllability": self.controllability.to_dict(),
            "stability": self.stability.to_dict() if self.stability is not None else None,
            "series": self.series,
        }


@dataclass
class ScalingResult:
    manifest: ExperimentManifest
    entries: list

    def summary(self) -> list:
        return [e.summary() for e in self.entries]


class _SeriesTracker:
    """Generation-averaged edge and driver fractions of the elite."""

    def __init__(self, template, theta):
        self.template, self.theta = template, theta
        self.rows = []
        self.last = None
        self.row = None

    def __call__(self, g, cost, elite):
        if self.last is None or not np.array_equal(elite, self.last):
            rep = controllability_report(elite.reshape(self.template.n_nodes, -1), self.theta, rank_check=False)
            self.row = (rep.e, rep.n_L, rep.n_S)
            self.last = elite.copy()
        self.rows.append(self.row)

    def result(self) -> dict:
        arr = np.array(self.rows)
        return {"mean_e": float(arr[:, 0].mean()), "mean_n_L": float(arr[:, 1].mean()),
                "mean_n_S": float(arr[:, 2].mean()), "generations": len(self.rows)}


def _scaling_size(job):
    n, cfg, task, theta, series = job
    tmpl = task.template(n)
    tracker = _SeriesTracker(tmpl, theta) if series else None
    try:
        rec = run(cfg, task, tmpl, callback=tracker)
    except Exception as exc:
        return ScalingEntry(n, {"error": f"{type(exc).__name__}: {exc}"})
    ctrl = controllability_report(rec.network, theta, rank_check=n <= LNDM_RANK_CAP)
    try:
        stab = stability_report(rec.network, float(np.mean(task.input_range)), task.settings)
    except Exception:  # analysis of an unsettled elite stays optional
        stab = None
    return ScalingEntry(n, rec, ctrl, stab, tracker.result() if tracker else None)


def dense_network_scaling(manifest: ExperimentManifest, theta: float = 1e-3, series: bool = True) -> ScalingResult:
    """Band-pass evolution at each size with controllability and stability attached.

    Sizes whose estimated memory exceeds the manifest budget are skipped.
    """
    cfg = manifest.algorithms[0]
    entries, jobs, slots = [], [], []
    for n in manifest.node_counts:
        need = estimated_memory_mb(n, cfg)
        if need > manifest.memory_budget_mb:
            entries.append(ScalingEntry(n, skipped=f"needs about {need:.0f} MB, budget {manifest.memory_budget_mb:.0f} MB"))
            continue
        slots.append(len(entries))
        entries.append(None)
        jobs.append((n, cfg.replace(seed=trial_seed(manifest.base_seed, n)), manifest.task, theta, series))
    for slot, entry in zip(slots, _map(_scaling_size, jobs, manifest.workers)):
        entries[slot] = entry
    return ScalingResult(manifest, entries)


STUDIES = {
    "convergence": convergence_study,
    "multiplex": multiplex_study,
    "transfer": transfer_study,
    "scaling": dense_network_scaling,
}


def run_study(manifest: ExperimentManifest):
    return STUDIES[manifest.kind](manifest)
