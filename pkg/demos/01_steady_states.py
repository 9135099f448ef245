"""A three-node network settling to its steady state, one input level at a time."""
import numpy as np

from funcnet import Network, SimulationSettings, simulate_to_steady_state
from funcnet.dynamics import fixed_point_residual, trajectory

rng = np.random.default_rng(7)
net = Network.random(3, rng)
print("weights\n", net.weights.round(3))

# one Euler trajectory from rest, input 0.5 on node 0
inputs = np.array([0.5, 0.0, 0.0])
path = trajectory(net, np.zeros(3), inputs, 8)
for t, y in enumerate(path):
    print(t, y.round(6))

ss = simulate_to_steady_state(net, inputs)
print("converged:", ss.converged, "after", ss.steps, "steps")
print("residual:", fixed_point_residual(net, ss.state, inputs))

# the input-output curve read off the last node
levels = np.linspace(0, 1, 11)
outs = [simulate_to_steady_state(net, [x, 0, 0]).state[-1] for x in levels]
for x, y in zip(levels, outs):
    print(f"{x:.1f}  {y:.4f}")

# halving the step size barely moves the fixed point
fine = simulate_to_steady_state(net, inputs, SimulationSettings(dt=0.5, max_steps=2000))
print("dt=0.5 gap:", np.abs(fine.state - ss.state).max())
