"""Random search on ten nodes: the elite stalls far above tolerance."""
from funcnet import TaskSpec
from funcnet.optimizers import OptimizerConfig, run

task = TaskSpec.build()
cfg = OptimizerConfig(algorithm="rs", population_size=224, max_generations=200, seed=1)
rec = run(cfg, task, task.template(10))
for g, evals, cost in rec.trajectory[::20]:
    print(g, evals, round(cost, 4))
print("learned:", rec.converged, "final elite cost:", round(rec.final_cost, 4))
