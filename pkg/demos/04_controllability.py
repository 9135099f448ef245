"""Driver nodes of an evolved network under node and edge dynamics."""
import numpy as np

from funcnet import TaskSpec
from funcnet.controllability import (DirectedGraph, controllability_report, kalman_rank, lndm_driver_count,
                                     sbd_driver_count)
from funcnet.optimizers import OptimizerConfig, run

# small graphs first
path = DirectedGraph.from_edges(3, [(0, 1), (1, 2)])
print("path  N_L", lndm_driver_count(path)[0], " N_S", sbd_driver_count(path)[0])
ring = DirectedGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
print("ring  N_L", lndm_driver_count(ring)[0], " N_S", sbd_driver_count(ring)[0])
print("rank of (I, e1):", kalman_rank(np.eye(2), [0]))

task = TaskSpec.build()
rec = run(OptimizerConfig(algorithm="cmaes", seed=5, max_generations=500), task, task.template(10))
print("learned:", rec.converged)
for theta in (1e-3, 0.1, 0.5):
    rep = controllability_report(rec.network, theta)
    print(f"theta={theta:g}  e={rep.e:.3f}  N_L={rep.N_L}  n_S={rep.n_S:.2f}  kalman_full={rep.kalman_full}")
