"""Reference searches: uniform random search and finite-difference gradient descent."""
from __future__ import annotations

import numpy as np


class RandomSearch:
    """Fresh i.i.d. uniform candidates every generation, ignoring all past costs."""

    def __init__(self, dim, config, rng, initial=None):
        self.rng = rng
        self.dim = dim
        self.size = int(config.population_size)
        self.low, self.high = config.init_range
        self.last = None

    def ask(self):
        return self.rng.uniform(self.low, self.high, (self.size, self.dim))

    def tell(self, X, costs, diverged=None):
        self.last = X[np.argsort(costs, kind="stable")]

    def final_population(self):
        return self.last


def probe_matrix(genome, h):
    """Rows: the genome, then genome + h e_i for each i, then genome - h e_i."""
    genome = np.asarray(genome, dtype=float)
    D = len(genome)
    eye = h * np.eye(D)
    return np.vstack([genome[None], genome + eye, genome - eye])


def gradient_from_probes(costs, h, diverged=None):
    """Central differences from costs laid out as in :func:`probe_matrix`.

    Coordinates whose probes diverged get a zero gradient; the returned mask
    marks them.
    """
    costs = np.asarray(costs, dtype=float)
    D = (len(costs) - 1) // 2
    grad = (costs[1:D + 1] - costs[D + 1:]) / (2 * h)
    if diverged is None:
        bad = ~np.isfinite(grad)
    else:
        diverged = np.asarray(diverged, dtype=bool)
        bad = diverged[1:D + 1] | diverged[D + 1:] | ~np.isfinite(grad)
    grad[bad] = 0.0
    return grad, bad


def gd_step(genome, loss_fn, learning_rate, h, band=None):
    """One descent step with a finite-difference gradient of a black-box loss.

    ``loss_fn`` maps an (m, D) matrix of genomes to m costs, or to a pair
    ``(costs, diverged)``.
    """
    X = probe_matrix(genome, h)
    out = loss_fn(X)
    costs, diverged = out if isinstance(out, tuple) else (out, None)
    grad, _ = gradient_from_probes(costs, h, diverged)
    new = np.asarray(genome, dtype=float) - learning_rate * grad
    if band is not None:
        np.clip(new, band[0], band[1], out=new)
    return new


class GradientDescent:
    def __init__(self, dim, config, rng, initial=None):
        self.h = config.gd.fd_step
        self.lr = config.gd.learning_rate
        self.band = config.weight_band
        if initial is None:
            self.genome = rng.uniform(*config.init_range, dim)
        else:
            self.genome = np.clip(np.asarray(initial, dtype=float).reshape(-1, dim)[0], *self.band)
        self.zeroed = 0

    def ask(self):
        return probe_matrix(self.genome, self.h)

    def tell(self, X, costs, diverged=None):
        grad, bad = gradient_from_probes(costs, self.h, diverged)
        self.zeroed += int(bad.sum())
        self.genome = np.clip(self.genome - self.lr * grad, *self.band)

    def final_population(self):
        return self.genome[None]

    @property
    def flags(self):
        return {"zeroed_gradient_coordinates": self.zeroed}
