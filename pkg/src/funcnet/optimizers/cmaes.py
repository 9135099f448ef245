"""CMA-ES with weighted recombination, rank-one plus rank-mu covariance
update and cumulative step-size adaptation (Hansen's tutorial defaults).
"""
from __future__ import annotations

import math

import numpy as np


def default_popsize(dim: int) -> int:
    return 4 + int(math.floor(3 * math.log(dim)))


class CMAES:
    def __init__(self, mean, sigma, rng, popsize=None, band=None):
        self.mean = np.array(mean, dtype=float)
        N = self.dim = len(self.mean)
        self.sigma = float(sigma)
        self.rng = rng
        self.band = band
        self.lam = int(popsize) if popsize else default_popsize(N)
        self.mu = self.lam // 2
        w = math.log(self.mu + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / np.sum(self.weights ** 2)
        mueff = self.mueff
        self.cc = (4 + mueff / N) / (N + 4 + 2 * mueff / N)
        self.cs = (mueff + 2) / (N + mueff + 5)
        self.c1 = 2 / ((N + 1.3) ** 2 + mueff)
        self.cmu = min(1 - self.c1, 2 * (mueff - 2 + 1 / mueff) / ((N + 2) ** 2 + mueff))
        self.damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (N + 1)) - 1) + self.cs
        self.chiN = math.sqrt(N) * (1 - 1 / (4 * N) + 1 / (21 * N ** 2))
        self.pc = np.zeros(N)
        self.ps = np.zeros(N)
        self.C = np.eye(N)
        self.B = np.eye(N)
        self.D = np.ones(N)
        self.generation = 0
        self.repairs = 0

    def ask(self):
        z = self.rng.standard_normal((self.lam, self.dim))
        x = self.mean + self.sigma * (z * self.D) @ self.B.T
        if self.band is not None:
            np.clip(x, self.band[0], self.band[1], out=x)
        return x

    def tell(self, X, costs):
        N = self.dim
        idx = np.argsort(costs, kind="stable")[: self.mu]
        old = self.mean
        y = (np.asarray(X)[idx] - old) / self.sigma
        yw = self.weights @ y
        self.mean = old + self.sigma * yw
        self.generation += 1
        invsqrt_yw = self.B @ ((self.B.T @ yw) / self.D)
        cs, cc = self.cs, self.cc
        self.ps = (1 - cs) * self.ps + math.sqrt(cs * (2 - cs) * self.mueff) * invsqrt_yw
        ps_norm = np.linalg.norm(self.ps)
        hsig = ps_norm / math.sqrt(1 - (1 - cs) ** (2 * self.generation)) / self.chiN < 1.4 + 2 / (N + 1)
        self.pc = (1 - cc) * self.pc + hsig * math.sqrt(cc * (2 - cc) * self.mueff) * yw
        rank_mu = (y.T * self.weights) @ y
        C = ((1 - self.c1 - self.cmu) * self.C
             + self.c1 * (np.outer(self.pc, self.pc) + (1 - hsig) * cc * (2 - cc) * self.C)
             + self.cmu * rank_mu)
        self.C = (C + C.T) / 2
        self.sigma *= math.exp((cs / self.damps) * (ps_norm / self.chiN - 1))
        self._decompose()

    def _decompose(self):
        evals, B = np.linalg.eigh(self.C)
        floor = 1e-14 * max(float(evals.max()), 1e-300)
        if evals.min() <= floor:
            evals = np.maximum(evals, floor)
            C = (B * evals) @ B.T
            self.C = (C + C.T) / 2
            self.repairs += 1
        self.B = B
        self.D = np.sqrt(evals)


class CMAESBackend:
    def __init__(self, dim, config, rng, initial=None):
        lo, hi = config.weight_band
        p = config.cmaes
        sigma = p.initial_sigma if p.initial_sigma is not None else 0.3 * (hi - lo)
        mean = np.full(dim, (lo + hi) / 2) if initial is None else np.asarray(initial, float).reshape(-1, dim)[0]
        self.es = CMAES(mean, sigma, rng, p.popsize, config.weight_band)
        self.evaluated = None

    def ask(self):
        return self.es.ask()

    def tell(self, X, costs, diverged=None):
        self.evaluated = X[np.argsort(costs, kind="stable")]
        self.es.tell(X, costs)

    def final_population(self):
        return self.evaluated

    @property
    def flags(self):
        return {"covariance_repairs": self.es.repairs}
