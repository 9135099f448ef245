"""Functional networks and their steady-state node dynamics.

Each node follows

    dy_i/dt = k1_i * (f(sum_j W_ij y_j) + I_i) - k2_i * y_i

with ``f`` the logistic sigmoid, integrated by forward Euler from y(0) = 0
until the largest per-step change drops below ``convergence_eps``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numba
import numpy as np

DEFAULT_WEIGHT_BAND = (-10.0, 10.0)
DIVERGENCE_LIMIT = 1e6


class DivergenceError(RuntimeError):
    """Raised when a simulated state becomes non-finite or unbounded."""

    def __init__(self, step: int):
        super().__init__(f"simulation diverged at step {step}")
        self.step = step


@dataclass(frozen=True, eq=False)
class Network:
    weights: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    input_nodes: tuple[int, ...] = (0,)
    output_nodes: tuple[int, ...] = (-1,)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise ValueError(f"weights must be a non-empty square matrix, got shape {w.shape}")
        n = w.shape[0]
        k1 = np.array(self.k1, dtype=float).reshape(-1)
        k2 = np.array(self.k2, dtype=float).reshape(-1)
        if k1.shape != (n,) or k2.shape != (n,):
            raise ValueError("k1 and k2 must have one entry per node")
        if not (np.all(k1 > 0) and np.all(k2 > 0)):
            raise ValueError("k1 and k2 must be strictly positive")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        ins = tuple(int(i) % n for i in self.input_nodes)
        outs = tuple(int(i) % n for i in self.output_nodes)
        if set(ins) & set(outs):
            raise ValueError("input and output nodes must be disjoint")
        if len(set(ins)) != len(ins) or len(set(outs)) != len(outs):
            raise ValueError("node designations must not repeat")
        for name, value in [("weights", w), ("k1", k1), ("k2", k2)]:
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "input_nodes", ins)
        object.__setattr__(self, "output_nodes", outs)

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_weights(cls, weights, input_nodes=(0,), output_nodes=(-1,), k1=None, k2=None):
        """Build a network with unit rates unless ``k1``/``k2`` are given."""
        n = np.shape(weights)[0]
        return cls(
            weights=weights,
            k1=np.ones(n) if k1 is None else k1,
            k2=np.ones(n) if k2 is None else k2,
            input_nodes=tuple(input_nodes),
            output_nodes=tuple(output_nodes),
        )

    @classmethod
    def random(cls, n_nodes: int, rng: np.random.Generator, input_nodes=(0,), output_nodes=(-1,),
               low: float = 0.0, high: float = 1.0):
        return cls.from_weights(rng.uniform(low, high, (n_nodes, n_nodes)), input_nodes, output_nodes)

    def with_weights(self, weights) -> "Network":
        return Network(np.asarray(weights, dtype=float).reshape(self.n_nodes, self.n_nodes),
                       self.k1, self.k2, self.input_nodes, self.output_nodes)

    def within_band(self, band=DEFAULT_WEIGHT_BAND) -> bool:
        return bool(np.all(self.weights >= band[0]) and np.all(self.weights <= band[1]))

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (np.array_equal(self.weights, other.weights)
                and np.array_equal(self.k1, other.k1)
                and np.array_equal(self.k2, other.k2)
                and self.input_nodes == other.input_nodes
                and self.output_nodes == other.output_nodes)

    # serialization: floats go through repr() in json, which round-trips exactly
    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "weights": self.weights.tolist(),
            "k1": self.k1.tolist(),
            "k2": self.k2.tolist(),
            "input_nodes": list(self.input_nodes),
            "output_nodes": list(self.output_nodes),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Network":
        unknown = set(doc) - {"n_nodes", "weights", "k1", "k2", "input_nodes", "output_nodes"}
        if unknown:
            raise ValueError(f"unknown network fields: {sorted(unknown)}")
        net = cls(np.array(doc["weights"], dtype=float), doc["k1"], doc["k2"],
                  tuple(doc["input_nodes"]), tuple(doc["output_nodes"]))
        if "n_nodes" in doc and doc["n_nodes"] != net.n_nodes:
            raise ValueError("n_nodes does not match the weight matrix")
        return net

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Network":
        return cls.from_dict(json.loads(text))

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "Network":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class SimulationSettings:
    dt: float = 1.0
    max_steps: int = 500
    convergence_eps: float = 1e-6

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.max_steps) < 1:
            raise ValueError("max_steps must be at least 1")
        if not self.convergence_eps >= 0:
            raise ValueError("convergence_eps must be nonnegative")


def sigmoid(x):
    """Logistic function, saturating without overflow warnings."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        out = 1.0 / (1.0 + np.exp(-x))
    return out if out.ndim else float(out)


def vector_field(net: Network, y, inputs) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return net.k1 * (sigmoid(net.weights @ y) + inputs) - net.k2 * y


def euler_step(net: Network, state, inputs, dt: float = 1.0) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    n = net.n_nodes
    if state.shape != (n,) or inputs.shape != (n,):
        raise ValueError(f"state and input must have shape ({n},), got {state.shape} and {inputs.shape}")
    return state + dt * vector_field(net, state, inputs)


def fixed_point_residual(net: Network, y, inputs) -> float:
    return float(np.max(np.abs(vector_field(net, y, inputs))))


@numba.njit(cache=True)
def _settle(W, I, k1, k2, dt, max_steps, eps, limit):
    # W: (P, n, n); I: (P, B, n). Every (p, b) row stops at its own convergence
    # step, so a row's result never depends on the rest of the batch.
    P, n, _ = W.shape
    B = I.shape[1]
    Y = np.zeros((P, B, n))
    steps = np.zeros((P, B), np.int64)
    conv = np.zeros((P, B), np.bool_)
    div = np.zeros((P, B), np.bool_)
    for p in range(P):
        Wt = np.ascontiguousarray(W[p].T)
        y = np.zeros((B, n))
        Ip = I[p]
        active = np.ones(B, np.bool_)
        nact = B
        for s in range(max_steps):
            u = y @ Wt
            for b in range(B):
                if not active[b]:
                    continue
                dmax = 0.0
                bad = False
                for i in range(n):
                    v = y[b, i] + dt * (k1[i] * (1.0 / (1.0 + np.exp(-u[b, i])) + Ip[b, i]) - k2[i] * y[b, i])
                    if not abs(v) <= limit:
                        bad = True
                    d = abs(v - y[b, i])
                    if d > dmax:
                        dmax = d
                    y[b, i] = v
                steps[p, b] = s + 1
                if bad:
                    div[p, b] = True
                    active[b] = False
                    nact -= 1
                elif dmax < eps:
                    conv[p, b] = True
                    active[b] = False
                    nact -= 1
            if nact == 0:
                break
        Y[p] = y
    return Y, conv, steps, div


class BatchResult(NamedTuple):
    states: np.ndarray      # (P, B, n)
    converged: np.ndarray   # (P, B) bool
    steps: np.ndarray       # (P, B) int
    diverged: np.ndarray    # (P, B) bool


def simulate_batch(weights, inputs, k1, k2, settings: SimulationSettings = SimulationSettings(),
                   limit: float = DIVERGENCE_LIMIT) -> BatchResult:
    """Settle P weight matrices under B input vectors each.

    ``weights`` is (P, n, n); ``inputs`` is (B, n), shared by every
    candidate, or (P, B, n).
    """
    W = np.ascontiguousarray(weights, dtype=float)
    if W.ndim == 2:
        W = W[None]
    P, n, _ = W.shape
    I = np.asarray(inputs, dtype=float)
    if I.ndim == 2:
        I = np.broadcast_to(I, (P,) + I.shape)
    if I.shape[0] != P or I.shape[2] != n:
        raise ValueError(f"inputs of shape {I.shape} do not match {P} networks of {n} nodes")
    I = np.ascontiguousarray(I)
    k1 = np.ascontiguousarray(k1, dtype=float)
    k2 = np.ascontiguousarray(k2, dtype=float)
    return BatchResult(*_settle(W, I, k1, k2, float(settings.dt), int(settings.max_steps),
                                float(settings.convergence_eps), float(limit)))


class SteadyState(NamedTuple):
    state: np.ndarray
    converged: bool
    steps: int


def simulate_to_steady_state(net: Network, inputs, settings: SimulationSettings = SimulationSettings()) -> SteadyState:
    inputs = np.asarray(inputs, dtype=float)
    if inputs.shape != (net.n_nodes,):
        raise ValueError(f"input must have shape ({net.n_nodes},), got {inputs.shape}")
    res = simulate_batch(net.weights, inputs[None], net.k1, net.k2, settings)
    if res.diverged[0, 0]:
        raise DivergenceError(int(res.steps[0, 0]))
    return SteadyState(res.states[0, 0].copy(), bool(res.converged[0, 0]), int(res.steps[0, 0]))


def trajectory(net: Network, y0, inputs, n_steps: int, dt: float = 1.0) -> np.ndarray:
    """Return the (n_steps + 1, n) Euler trajectory starting at ``y0``."""
    out = np.empty((n_steps + 1, net.n_nodes))
    out[0] = y0
    for t in range(n_steps):
        out[t + 1] = euler_step(net, out[t], inputs, dt)
    return out
