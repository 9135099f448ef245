"""Continuous ant colony optimization over a sorted top-k solution archive."""
from __future__ import annotations

import math

import numpy as np


def rank_weights(k: int, q: float) -> np.ndarray:
    """Kernel weight of the archive solution at each rank (best first)."""
    ranks = np.arange(k)
    return np.exp(-ranks ** 2 / (2 * q ** 2 * k ** 2)) / (q * k * math.sqrt(2 * math.pi))


def kernel_deviations(archive, xi: float) -> np.ndarray:
    """sigma[l, i] = xi * mean distance from solution l to the others along dimension i."""
    archive = np.asarray(archive, dtype=float)
    k = len(archive)
    dist = np.empty_like(archive)
    for l in range(k):
        dist[l] = np.abs(archive - archive[l]).sum(axis=0)
    return xi * dist / (k - 1)


def acor_sample(archive, q, xi, m, rng, band=None):
    """Draw ``m`` solutions; each coordinate picks its own kernel component."""
    archive = np.asarray(archive, dtype=float)
    k, D = archive.shape
    w = rank_weights(k, q)
    comp = rng.choice(k, size=(m, D), p=w / w.sum())
    dims = np.arange(D)
    mu = archive[comp, dims]
    sd = kernel_deviations(archive, xi)[comp, dims]
    x = rng.normal(mu, sd)
    if band is not None:
        np.clip(x, band[0], band[1], out=x)
    return x


def update_archive(archive, costs, new, new_costs, k):
    """Merge, sort ascending by cost (archive first on ties) and keep the top ``k``."""
    allx = np.concatenate([archive, new])
    allc = np.concatenate([costs, new_costs])
    order = np.argsort(allc, kind="stable")[:k]
    return allx[order], allc[order]


class ACOR:
    def __init__(self, dim, config, rng, initial=None):
        self.rng = rng
        self.band = config.weight_band
        p = config.acor
        self.k, self.q, self.xi, self.m = int(p.archive_size), p.locality, p.convergence_speed, int(p.ants)
        if initial is None:
            self.pending = rng.uniform(*config.init_range, (self.k, dim))
        else:
            initial = np.asarray(initial, dtype=float).reshape(-1, dim)
            self.pending = np.clip(initial[np.arange(self.k) % len(initial)], *self.band)
        self.archive = None
        self.costs = None

    def ask(self):
        if self.archive is None:
            return self.pending
        return acor_sample(self.archive, self.q, self.xi, self.m, self.rng, self.band)

    def tell(self, X, costs, diverged=None):
        if self.archive is None:
            order = np.argsort(costs, kind="stable")
            self.archive, self.costs = X[order].copy(), np.asarray(costs)[order].copy()
        else:
            self.archive, self.costs = update_archive(self.archive, self.costs, X, costs, self.k)

    def final_population(self):
        return self.archive
