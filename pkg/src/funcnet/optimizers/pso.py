"""Standard PSO 2011 with hypersphere sampling and an adaptive random topology."""
from __future__ import annotations

import math

import numpy as np

C_ACCEL = 0.5 + math.log(2)
W_INERTIA = 1 / (2 * math.log(2))


def hypersphere_centers(x, p, l, own_best):
    """Centers G_i; ``own_best[i]`` marks particles whose personal best is the neighbourhood best."""
    three = x + (C_ACCEL / 3) * (p + l - 2 * x)
    two = x + (C_ACCEL / 2) * (p - x)
    return np.where(np.asarray(own_best)[:, None], two, three)


def spso_step(x, v, p, l, own_best, rng, band=None):
    """One SPSO2011 move for every particle.

    Returns ``(x_new, v_new, samples, centers)``; ``samples`` are the points
    drawn inside each hypersphere before the inertia term is added.
    """
    x = np.asarray(x, dtype=float)
    G = hypersphere_centers(x, p, l, own_best)
    radius = np.linalg.norm(G - x, axis=1)
    direction = rng.standard_normal(x.shape)
    norms = np.linalg.norm(direction, axis=1, keepdims=True)
    direction = np.divide(direction, norms, out=np.zeros_like(direction), where=norms > 0)
    r = rng.uniform(0.0, 1.0, len(x)) * radius
    samples = G + r[:, None] * direction
    v_new = W_INERTIA * v + samples - x
    x_new = x + v_new
    if band is not None:
        out = (x_new < band[0]) | (x_new > band[1])
        np.clip(x_new, band[0], band[1], out=x_new)
        v_new[out] = 0.0
    return x_new, v_new, samples, G


def random_topology(n, k, rng):
    """links[j, i] is True when particle j informs particle i; everyone informs itself."""
    links = np.eye(n, dtype=bool)
    targets = rng.integers(0, n, (n, k))
    for j in range(n):
        links[j, targets[j]] = True
    return links


class SPSO2011:
    def __init__(self, dim, config, rng, initial=None):
        self.rng = rng
        self.band = config.weight_band
        self.k = int(config.pso.informants)
        S = int(config.pso.swarm_size)
        lo, hi = config.init_range
        if initial is None:
            self.x = rng.uniform(lo, hi, (S, dim))
        else:
            initial = np.asarray(initial, dtype=float).reshape(-1, dim)
            self.x = np.clip(initial[np.arange(S) % len(initial)], *self.band)
        self.v = rng.uniform(lo - self.x, hi - self.x)
        self.p = self.x.copy()
        self.pcost = np.full(S, np.inf)
        self.best = np.inf
        self.links = random_topology(S, self.k, rng)

    def ask(self):
        return self.x

    def neighbourhood_best(self):
        masked = np.where(self.links, self.pcost[:, None], np.inf)
        return np.argmin(masked, axis=0)

    def tell(self, X, costs, diverged=None):
        improved = costs < self.pcost
        self.p[improved] = X[improved]
        self.pcost[improved] = costs[improved]
        best = float(self.pcost.min())
        if not best < self.best:
            self.links = random_topology(len(self.x), self.k, self.rng)
        self.best = min(self.best, best)
        li = self.neighbourhood_best()
        own = li == np.arange(len(self.x))
        self.x, self.v, _, _ = spso_step(self.x, self.v, self.p, self.p[li], own, self.rng, self.band)

    def final_population(self):
        return self.p[np.argsort(self.pcost, kind="stable")]
