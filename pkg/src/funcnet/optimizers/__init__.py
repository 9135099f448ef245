"""Search backends for learning network weight matrices."""
from .acor import ACOR, acor_sample, kernel_deviations, rank_weights, update_archive
from .baselines import GradientDescent, RandomSearch, gd_step, gradient_from_probes, probe_matrix
from .cmaes import CMAES, CMAESBackend, default_popsize
from .config import (ACORParams, CMAESParams, ConfigError, GDParams, OptimizerConfig, PSOParams,
                     SGAParams)
from .pso import C_ACCEL, SPSO2011, W_INERTIA, hypersphere_centers, random_topology, spso_step
from .search import BACKENDS, RunRecord, run, trial_seed
from .sga import SGA, sga_generation
