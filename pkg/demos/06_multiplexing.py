"""One output node, two binary-encoded inputs, three functions."""
import numpy as np

from funcnet.experiments import ExperimentManifest, multiplex_study

m = ExperimentManifest(kind="multiplex", node_counts=(20,), base_seed=2027,
                       algorithms=[{"algorithm": "sga", "max_generations": 1000, "population_size": 224}])
res = multiplex_study(m)
r = res.runs[0]
print("learned:", r.record.converged, "per channel:", np.round(r.record.elite_per_channel, 3))
for label, curve in r.responses.items():
    print(f"{label}  range {np.ptp(curve):.3f}  first {curve[0]:.3f}  middle {curve[16]:.3f}  last {curve[-1]:.3f}")
