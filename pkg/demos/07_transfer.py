"""Peak first, then band-pass, against band-pass from scratch."""
from funcnet.experiments import ExperimentManifest, transfer_study

m = ExperimentManifest(kind="transfer", trials=4, node_counts=(10,), algorithms=[{"max_generations": 600}])
res = transfer_study(m)
print("scratch generations :", res.scratch_generations)
print("peak generations    :", res.source_generations)
print("transfer generations:", res.transfer_generations)
print("initial elite cost, random vs from peak:", round(res.mean_random_initial, 3),
      round(res.mean_transferred_initial, 3))
print("rank-sum p:", res.p_value)
