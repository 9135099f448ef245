"""Optimizer configuration with field-level validation."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

ALGORITHMS = ("random_search", "sga", "cmaes", "spso2011", "acor", "gd")
ALIASES = {"rs": "random_search", "pso": "spso2011", "ga": "sga"}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message

    def to_dict(self) -> dict:
        return {"error": "config", "field": self.field, "message": self.message}


@dataclass
class SGAParams:
    selection_pressure: float = 4.0
    mutation_rate: float = 0.05
    mutation_sigma: float = 0.1


@dataclass
class CMAESParams:
    initial_sigma: Optional[float] = None  # None: 0.3 * band width
    popsize: Optional[int] = None          # None: 4 + floor(3 ln D)


@dataclass
class PSOParams:
    swarm_size: int = 40
    informants: int = 3


@dataclass
class ACORParams:
    archive_size: int = 50
    locality: float = 0.1
    convergence_speed: float = 0.85
    ants: int = 40


@dataclass
class GDParams:
    learning_rate: float = 0.5
    fd_step: float = 1e-4


_SECTIONS = {"sga": SGAParams, "cmaes": CMAESParams, "pso": PSOParams, "acor": ACORParams, "gd": GDParams}


@dataclass
class OptimizerConfig:
    algorithm: str = "sga"
    population_size: int = 224       # sga and random_search; other backends size themselves
    max_generations: int = 2000
    max_evaluations: Optional[int] = None
    seed: int = 0
    weight_band: tuple[float, float] = (-10.0, 10.0)
    init_range: tuple[float, float] = (0.0, 1.0)
    keep_snapshots: bool = False
    sga: SGAParams = field(default_factory=SGAParams)
    cmaes: CMAESParams = field(default_factory=CMAESParams)
    pso: PSOParams = field(default_factory=PSOParams)
    acor: ACORParams = field(default_factory=ACORParams)
    gd: GDParams = field(default_factory=GDParams)

    def __post_init__(self):
        self.algorithm = ALIASES.get(self.algorithm, self.algorithm)
        self.weight_band = tuple(float(v) for v in self.weight_band)
        self.init_range = tuple(float(v) for v in self.init_range)
        for name, cls in _SECTIONS.items():
            if isinstance(getattr(self, name), dict):
                setattr(self, name, _build(cls, getattr(self, name), name))
        self.validate()

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError("algorithm", f"must be one of {ALGORITHMS}, got {self.algorithm!r}")
        min_pop = 1 if self.algorithm in ("random_search", "gd") else 2
        if int(self.population_size) < min_pop:
            raise ConfigError("population_size", f"must be at least {min_pop}")
        if int(self.max_generations) < 1:
            raise ConfigError("max_generations", "must be at least 1")
        if self.max_evaluations is not None and int(self.max_evaluations) < 1:
            raise ConfigError("max_evaluations", "must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")
        lo, hi = self.weight_band
        if not lo < hi:
            raise ConfigError("weight_band", "lower bound must be below upper bound")
        ilo, ihi = self.init_range
        if not (lo <= ilo < ihi <= hi):
            raise ConfigError("init_range", "must be a nonempty interval inside weight_band")
        s = self.sga
        if not s.selection_pressure >= 1:
            raise ConfigError("sga.selection_pressure", "must be >= 1")
        if not 0 <= s.mutation_rate <= 1:
            raise ConfigError("sga.mutation_rate", "must lie in [0, 1]")
        if not s.mutation_sigma >= 0:
            raise ConfigError("sga.mutation_sigma", "must be nonnegative")
        c = self.cmaes
        if c.initial_sigma is not None and not c.initial_sigma > 0:
            raise ConfigError("cmaes.initial_sigma", "must be positive")
        if c.popsize is not None and int(c.popsize) < 2:
            raise ConfigError("cmaes.popsize", "must be at least 2")
        p = self.pso
        if int(p.swarm_size) < 2:
            raise ConfigError("pso.swarm_size", "must be at least 2")
        if int(p.informants) < 1:
            raise ConfigError("pso.informants", "must be at least 1")
        a = self.acor
        if int(a.archive_size) < 2:
            raise ConfigError("acor.archive_size", "must be at least 2")
        if not a.locality > 0:
            raise ConfigError("acor.locality", "must be positive")
        if not a.convergence_speed > 0:
            raise ConfigError("acor.convergence_speed", "must be positive")
        if int(a.ants) < 1:
            raise ConfigError("acor.ants", "must be at least 1")
        g = self.gd
        if not g.learning_rate >= 0:
            raise ConfigError("gd.learning_rate", "must be nonnegative")
        if not g.fd_step > 0:
            raise ConfigError("gd.fd_step", "must be positive")

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["weight_band"] = list(self.weight_band)
        doc["init_range"] = list(self.init_range)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "OptimizerConfig":
        return _build(cls, doc, None)

    def replace(self, **changes) -> "OptimizerConfig":
        doc = self.to_dict()
        doc.update(changes)
        return OptimizerConfig.from_dict(doc)


def _build(cls, doc: dict, prefix):
    if not isinstance(doc, dict):
        raise ConfigError(prefix or cls.__name__, "expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    for key in doc:
        if key not in names:
            raise ConfigError(f"{prefix}.{key}" if prefix else key, "unknown key")
    try:
        return cls(**doc)
    except TypeError as exc:
        raise ConfigError(prefix or cls.__name__, str(exc)) from None
