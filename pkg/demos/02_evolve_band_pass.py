"""Learning the band-pass function on three nodes with four search methods."""
from funcnet import TaskSpec
from funcnet.optimizers import OptimizerConfig, run
from funcnet.tasks import tolerance

task = TaskSpec.build("one_in_one_out", ["band_pass"])
template = task.template(3)
print("tolerance per channel:", tolerance(task.b))

budget = 448_000
for algo in ("cmaes", "spso2011", "acor", "sga"):
    cfg = OptimizerConfig(algorithm=algo, max_evaluations=budget, seed=3)
    rec = run(cfg, task, template)
    print(f"{algo:9s} learned={rec.converged} generations={rec.generations_used} "
          f"evaluations={rec.evaluations} cost={rec.final_cost:.3f}")

# the learned curve against its target
target = task.scenario.channels[0].target
from funcnet.tasks import evaluate_loss
res = evaluate_loss(rec.network, task)
for x, want, got in zip(target.levels, target.outputs, res.outputs[0]):
    print(f"{x:.3f}  target {want:.1f}  output {got:.3f}")
