"""Configuration parsing, CSV emission and hashed run archives.

Structured documents are JSON with sorted keys; CSVs use '.' decimals,
full-precision floats and '\\n' line endings on every platform.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import shutil
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .controllability import controllability_report
from .dynamics import Network
from .experiments import (ConvergenceResult, ExperimentManifest, MultiplexResult, ScalingResult, TransferResult,
                          response_curves, run_study)
from .optimizers import ConfigError, OptimizerConfig, RunRecord, run
from .tasks import TaskSpec

INDEX_FILE = "index.json"
MANIFEST_FILE = "manifest.json"
TIMING_FILE = "timing.json"


def _plain(x):
    """JSON-safe copy: numpy to builtins, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def dumps(doc) -> str:
    return json.dumps(_plain(doc), indent=2, sort_keys=True, ensure_ascii=True) + "\n"


def load_document(source):
    """A mapping from a dict, a JSON string or a path to a JSON file."""
    if isinstance(source, dict):
        return source
    text = str(source)
    if not text.lstrip().startswith("{"):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigError("file", f"cannot read {source}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("file", f"malformed document: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("file", "top level must be a mapping")
    return doc


def parse_config(source, kind: str = "manifest"):
    """Validated object with every default filled in.

    ``kind`` is ``"manifest"`` (ExperimentManifest), ``"optimizer"``
    (OptimizerConfig) or ``"task"`` (TaskSpec).
    """
    doc = load_document(source) if source is not None else {}
    if kind == "manifest":
        return ExperimentManifest.from_dict(doc)
    if kind == "optimizer":
        return OptimizerConfig.from_dict(doc)
    if kind == "task":
        try:
            return TaskSpec.from_dict(doc)
        except ConfigError:
            raise
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError("task", str(exc)) from None
    raise ValueError(f"unknown config kind {kind!r}")


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def curve_csv(record: RunRecord) -> str:
    return _csv_text(["generation", "evaluations", "elite_cost"], record.trajectory)


def response_csv(levels, curves: dict, targets: dict = None) -> str:
    """``input_level`` then one column per curve; targets interleaved when given."""
    header = ["input_level"]
    cols = []
    for label, values in curves.items():
        header.append(label)
        cols.append(np.asarray(values, dtype=float))
        if targets and label in targets:
            header.append(f"target[{label}]")
            cols.append(np.asarray(targets[label], dtype=float))
    rows = [[float(x)] + [float(c[i]) for c in cols] for i, x in enumerate(levels)]
    return _csv_text(header, rows)


def _write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def emit_curve_csv(record: RunRecord, path) -> Path:
    _write(path, curve_csv(record))
    return Path(path)


def emit_response_csv(curves: dict, path, levels, targets: dict = None) -> Path:
    _write(path, response_csv(levels, curves, targets))
    return Path(path)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunArchive:
    """A directory of artifacts plus an index of their hashes and seeds.

    Writes go through one lock. Wall-clock timings live in a separate file
    that the index does not list.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.entries = {}
        self.timing = {}
        self._lock = threading.Lock()

    def write(self, relpath: str, text: str, seed=None, kind: str = "artifact") -> str:
        with self._lock:
            _write(self.root / relpath, text)
            self.entries[relpath] = {"path": relpath, "kind": kind, "seed": None if seed is None else int(seed),
                                     "sha256": hashlib.sha256(text.encode("utf-8")).hexdigest()}
        return relpath

    def write_json(self, relpath, doc, seed=None, kind="document"):
        return self.write(relpath, dumps(doc), seed, kind)

    def add_timing(self, key, seconds):
        self.timing[key] = float(seconds)

    def add_record(self, prefix: str, record: RunRecord, task: TaskSpec, responses: bool = True):
        seed = record.seed
        self.write_json(f"{prefix}/record.json", record.to_dict(), seed, "run_record")
        self.write(f"{prefix}/curve.csv", curve_csv(record), seed, "curve_csv")
        if responses:
            curves = response_curves(record.network, task)
            targets = {f"{ch.label}:{ch.output}": ch.target.outputs for ch in task.scenario.channels}
            self.write(f"{prefix}/responses.csv", response_csv(task.scenario.levels, curves, targets), seed,
                       "response_csv")
        self.add_timing(prefix, record.duration)

    def finalize(self, manifest: dict):
        self.write_json(MANIFEST_FILE, manifest, None, "manifest")
        index = {"artifacts": [self.entries[k] for k in sorted(self.entries)]}
        _write(self.root / INDEX_FILE, dumps(index))
        _write(self.root / TIMING_FILE, dumps(self.timing))
        return index

    @staticmethod
    def read_index(root) -> dict:
        return json.loads((Path(root) / INDEX_FILE).read_text())


# --- archive producers -----------------------------------------------------

def evolve_manifest(config: OptimizerConfig, task: TaskSpec, n_nodes: int) -> dict:
    return {"command": "evolve", "config": config.to_dict(), "task": task.to_dict(), "n_nodes": int(n_nodes)}


def archive_evolve(config: OptimizerConfig, task: TaskSpec, n_nodes: int, out) -> tuple[RunRecord, dict]:
    archive = RunArchive(out)
    record = run(config, task, task.template(n_nodes))
    archive.add_record("run", record, task)
    archive.write_json("run/network.json", record.network.to_dict(), record.seed, "network")
    archive.write_json("run/controllability.json", controllability_report(record.network).to_dict(), record.seed,
                       "controllability")
    return record, archive.finalize(evolve_manifest(config, task, n_nodes))


def _record_or_error(archive, prefix, rec, task, responses=True):
    if isinstance(rec, RunRecord):
        archive.add_record(prefix, rec, task, responses)
    else:
        archive.write_json(f"{prefix}/error.json", rec, rec.get("seed"), "trial_error")


def _write_convergence(archive: RunArchive, result: ConvergenceResult):
    m = result.manifest
    for (algo, n), recs in result.records.items():
        for i, rec in enumerate(recs):
            _record_or_error(archive, f"{algo}/n{n}/trial{i:03d}", rec, m.task, responses=False)
        archive.write(f"{algo}/n{n}/mean_curve.csv", _csv_text(["evaluations", "mean_elite_cost"],
                                                              result.mean_curves[(algo, n)]), None, "curve_csv")
    archive.write_json("summary.json", result.summary(), None, "summary")


def _write_multiplex(archive: RunArchive, result: MultiplexResult):
    for j, r in enumerate(result.runs):
        prefix = f"{r.task.scenario.kind}/n{r.n_nodes}/run{j:03d}"
        _record_or_error(archive, prefix, r.record, r.task, responses=True)
    archive.write_json("summary.json", result.summary(), None, "summary")


def _write_transfer(archive: RunArchive, result: TransferResult):
    m = result.manifest
    for t in result.trials:
        for phase in ("scratch", "source", "transfer"):
            _record_or_error(archive, f"trial{t.index:03d}/{phase}", getattr(t, phase), m.task, responses=False)
    archive.write_json("summary.json", result.summary(), None, "summary")


def _write_scaling(archive: RunArchive, result: ScalingResult):
    m = result.manifest
    for e in result.entries:
        prefix = f"n{e.n_nodes}"
        if e.skipped:
            continue
        _record_or_error(archive, prefix, e.record, m.task, responses=True)
        if isinstance(e.record, RunRecord):
            archive.write_json(f"{prefix}/network.json", e.record.network.to_dict(), e.record.seed, "network")
    archive.write_json("summary.json", result.summary(), None, "summary")


WRITERS = {
    ConvergenceResult: _write_convergence,
    MultiplexResult: _write_multiplex,
    TransferResult: _write_transfer,
    ScalingResult: _write_scaling,
}


def archive_experiment(manifest: ExperimentManifest, out):
    archive = RunArchive(out)
    result = run_study(manifest)
    WRITERS[type(result)](archive, result)
    return result, archive.finalize({"command": "experiment", "manifest": manifest.to_dict()})


# --- replay ----------------------------------------------------------------

@dataclass
class ReplayReport:
    archive: str
    artifacts: int = 0
    corrupted: list = field(default_factory=list)     # stored file no longer matches its index hash
    missing: list = field(default_factory=list)
    mismatched: list = field(default_factory=list)    # regenerated artifact differs
    extra: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.corrupted or self.missing or self.mismatched or self.extra)

    def to_dict(self) -> dict:
        return {"archive": self.archive, "artifacts": self.artifacts, "ok": self.ok, "corrupted": self.corrupted,
                "missing": self.missing, "mismatched": self.mismatched, "extra": self.extra}


def verify_hashes(root) -> ReplayReport:
    root = Path(root)
    index = RunArchive.read_index(root)
    rep = ReplayReport(str(root), len(index["artifacts"]))
    for entry in index["artifacts"]:
        path = root / entry["path"]
        if not path.exists():
            rep.missing.append(entry["path"])
        elif sha256_file(path) != entry["sha256"]:
            rep.corrupted.append(entry["path"])
    return rep


def regenerate(manifest: dict, out):
    if manifest.get("command") == "evolve":
        cfg = OptimizerConfig.from_dict(manifest["config"])
        task = TaskSpec.from_dict(manifest["task"])
        return archive_evolve(cfg, task, manifest["n_nodes"], out)[1]
    if manifest.get("command") == "experiment":
        return archive_experiment(ExperimentManifest.from_dict(manifest["manifest"]), out)[1]
    raise ConfigError("command", f"archive manifest has unknown command {manifest.get('command')!r}")


def replay(root) -> ReplayReport:
    """Check stored hashes, rerun the archived manifest and compare every artifact."""
    root = Path(root)
    rep = verify_hashes(root)
    manifest = json.loads((root / MANIFEST_FILE).read_text())
    old = {e["path"]: e["sha256"] for e in RunArchive.read_index(root)["artifacts"]}
    tmp = tempfile.mkdtemp(prefix="replay-")
    try:
        new = {e["path"]: e["sha256"] for e in regenerate(manifest, tmp)["artifacts"]}
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    rep.mismatched = sorted(p for p in old if p in new and new[p] != old[p])
    rep.missing = sorted(set(rep.missing) | {p for p in old if p not in new})
    rep.extra = sorted(p for p in new if p not in old)
    return rep


def read_network(path) -> Network:
    """A network from a network document or from a run record that embeds one."""
    doc = load_document(os.fspath(path))
    if "network" in doc and isinstance(doc["network"], dict):
        doc = doc["network"]
    try:
        return Network.from_dict(doc)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError("net", str(exc)) from None
