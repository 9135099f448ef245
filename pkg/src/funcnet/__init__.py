"""Evolving functional networks whose steady states compute input-output functions."""
from .dynamics import (DivergenceError, Network, SimulationSettings, euler_step, sigmoid,
                       simulate_batch, simulate_to_steady_state)
from .tasks import TaskSpec, evaluate_loss, is_learned, make_target

__version__ = "0.1.0"
