"""Jacobian, equilibrium class and perturbation decay of a learned network."""
import numpy as np

from funcnet import TaskSpec
from funcnet.optimizers import OptimizerConfig, run
from funcnet.stability import classify_2d, lyapunov_check, stability_report

print(classify_2d(-np.eye(2)))
print(classify_2d([[0, -1], [1, 0]]))
print(lyapunov_check(0.5 * np.eye(2)).P)

task = TaskSpec.build()
rec = run(OptimizerConfig(algorithm="acor", seed=2, max_generations=300), task, task.template(3))
for level in (0.1, 0.5, 0.9):
    rep = stability_report(rec.network, level)
    # a continuous-time stable point can still defeat unit Euler steps when rho(I+J) > 1
    print(f"input {level}: converged={rep.converged} {rep.kind:14s} tau={rep.trace:.3f} det={rep.determinant:.3f} "
          f"rho(I+J)={rep.euler_radius:.3f} measured={rep.contraction:.3f} "
          f"lyapunov PD={rep.lyapunov.positive_definite}")
