"""The generation loop shared by every backend, and the record it produces."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..dynamics import Network
from ..tasks import TaskSpec, is_learned, population_loss
from .acor import ACOR
from .baselines import GradientDescent, RandomSearch
from .cmaes import CMAESBackend
from .config import OptimizerConfig
from .pso import SPSO2011
from .sga import SGA

BACKENDS = {
    "random_search": RandomSearch,
    "sga": SGA,
    "cmaes": CMAESBackend,
    "spso2011": SPSO2011,
    "acor": ACOR,
    "gd": GradientDescent,
}


def trial_seed(base_seed: int, index: int) -> int:
    """Seed of trial ``index``; a pure function of both arguments."""
    return int(np.random.SeedSequence([int(base_seed), int(index)]).generate_state(1, np.uint64)[0])


@dataclass
class RunRecord:
    config: OptimizerConfig
    trajectory: list            # [generation, evaluations, elite_cost] per generation
    evaluations: int
    generations_used: int
    converged: bool
    network: Network
    elite_per_channel: list
    flags: dict = field(default_factory=dict)
    duration: float = 0.0
    snapshots: list = field(default_factory=list, repr=False)
    final_population: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def elite_costs(self) -> np.ndarray:
        return np.array([row[2] for row in self.trajectory])

    @property
    def initial_elite_cost(self) -> float:
        return float(self.trajectory[0][2])

    @property
    def final_cost(self) -> float:
        return float(self.trajectory[-1][2]) if self.trajectory else float("inf")

    def to_dict(self, timing: bool = False) -> dict:
        """Serializable form; wall-clock time only when ``timing`` is set."""
        doc = {
            "config": self.config.to_dict(),
            "seed": self.seed,
            "generations_used": self.generations_used,
            "evaluations": self.evaluations,
            "converged": self.converged,
            "elite_per_channel": list(self.elite_per_channel),
            "trajectory": [list(row) for row in self.trajectory],
            "flags": dict(self.flags),
            "network": self.network.to_dict(),
        }
        if timing:
            doc["duration"] = self.duration
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RunRecord":
        return cls(
            config=OptimizerConfig.from_dict(doc["config"]),
            trajectory=[[int(g), int(e), float(c)] for g, e, c in doc["trajectory"]],
            evaluations=int(doc["evaluations"]),
            generations_used=int(doc["generations_used"]),
            converged=bool(doc["converged"]),
            network=Network.from_dict(doc["network"]),
            elite_per_channel=list(doc["elite_per_channel"]),
            flags=dict(doc.get("flags", {})),
            duration=float(doc.get("duration", 0.0)),
        )


def run(config: OptimizerConfig, task: TaskSpec, template: Network, initial_population=None,
        callback=None) -> RunRecord:
    """Search weight matrices for ``template`` until the elite learns ``task``.

    The elite is the best candidate evaluated so far. The run stops once every
    channel of the elite is below tolerance, after ``max_generations``, or
    before a generation that would exceed ``max_evaluations``.
    ``callback(generation, elite_cost, elite_genome)`` is called after every
    generation when given.
    """
    config.validate()
    n = template.n_nodes
    D = n * n
    b = task.b
    rng = np.random.default_rng(np.random.SeedSequence(int(config.seed)))
    backend = BACKENDS[config.algorithm](D, config, rng, initial_population)
    start = time.perf_counter()
    elite = None
    elite_cost = np.inf
    elite_per = None
    trajectory = []
    snapshots = []
    evaluations = 0
    converged = False
    for g in range(1, int(config.max_generations) + 1):
        X = backend.ask()
        if config.max_evaluations is not None and evaluations + len(X) > config.max_evaluations:
            break
        pl = population_loss(X.reshape(-1, n, n), template, task)
        evaluations += len(X)
        backend.tell(X, pl.total, pl.diverged.any(axis=1))
        i = int(np.argmin(pl.total))
        if pl.total[i] < elite_cost:
            elite_cost = float(pl.total[i])
            elite = X[i].copy()
            elite_per = pl.per_channel[i].tolist()
        trajectory.append([g, evaluations, elite_cost])
        if config.keep_snapshots:
            snapshots.append(template.with_weights(elite))
        if callback is not None:
            callback(g, elite_cost, elite)
        if is_learned(elite_per, b):
            converged = True
            break
    if elite is None:
        raise ValueError("evaluation budget is smaller than one generation")
    return RunRecord(
        config=config,
        trajectory=trajectory,
        evaluations=evaluations,
        generations_used=len(trajectory),
        converged=converged,
        network=template.with_weights(elite),
        elite_per_channel=elite_per,
        flags=dict(getattr(backend, "flags", {})),
        duration=time.perf_counter() - start,
        snapshots=snapshots,
        final_population=backend.final_population(),
    )
