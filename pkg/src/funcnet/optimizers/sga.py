"""Simple genetic algorithm: truncation selection, cloning, Gaussian mutation, elitism.

There is no crossover.
"""
from __future__ import annotations

import numpy as np


def sga_generation(population, costs, selection_pressure, mutation_rate, sigma, rng, band=(-10.0, 10.0)):
    """Produce the next population from an evaluated one.

    The top ``P / selection_pressure`` individuals are cloned round-robin to
    refill ``P`` slots, every gene mutates with probability ``mutation_rate``
    by N(0, sigma), and slot 0 receives the unmutated best individual.
    """
    population = np.asarray(population, dtype=float)
    P = len(population)
    ranked = population[np.argsort(costs, kind="stable")]
    n_keep = max(1, int(P // selection_pressure))
    new = ranked[np.arange(P) % n_keep]
    mask = rng.random(new.shape) < mutation_rate
    new[mask] += rng.normal(0.0, sigma, int(mask.sum()))
    np.clip(new, band[0], band[1], out=new)
    new[0] = ranked[0]
    return new


class SGA:
    def __init__(self, dim, config, rng, initial=None):
        self.rng = rng
        self.params = config.sga
        self.band = config.weight_band
        P = int(config.population_size)
        if initial is None:
            self.population = rng.uniform(*config.init_range, (P, dim))
        else:
            initial = np.asarray(initial, dtype=float).reshape(-1, dim)
            # clone-pad (or truncate) a carried-over population to size P
            self.population = np.clip(initial[np.arange(P) % len(initial)], *self.band)
        self.evaluated = None

    def ask(self):
        return self.population

    def tell(self, X, costs, diverged=None):
        order = np.argsort(costs, kind="stable")
        self.evaluated = X[order]
        p = self.params
        self.population = sga_generation(X, costs, p.selection_pressure, p.mutation_rate,
                                         p.mutation_sigma, self.rng, self.band)

    def final_population(self):
        return self.evaluated if self.evaluated is not None else self.population
