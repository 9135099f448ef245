import math

import numpy as np
import pytest

from funcnet.optimizers import (C_ACCEL, CMAES, SPSO2011, W_INERTIA, ConfigError, OptimizerConfig, acor_sample,
                                default_popsize, gd_step, hypersphere_centers, rank_weights, run, sga_generation,
                                spso_step, trial_seed, update_archive)
from funcnet.tasks import TaskSpec, tolerance

BAND = (-10.0, 10.0)


# --- SGA -------------------------------------------------------------------

def test_sga_elite_survives_bit_identical(rng):
    pop = rng.uniform(0, 1, (20, 9))
    costs = rng.uniform(0, 5, 20)
    new = sga_generation(pop, costs, 4, 0.5, 0.3, rng)
    assert new[0].tobytes() == pop[np.argmin(costs)].tobytes()
    assert new.shape == pop.shape


def test_sga_without_mutation_is_truncated_clones(rng):
    pop = rng.uniform(0, 1, (16, 4))
    costs = rng.uniform(0, 5, 16)
    new = sga_generation(pop, costs, 4, 0.0, 0.3, rng)
    top = pop[np.argsort(costs)[:4]]
    for row in new:
        assert any(np.array_equal(row, t) for t in top)
    assert {tuple(r) for r in new} == {tuple(t) for t in top}


def test_sga_clamps(rng):
    pop = np.full((8, 3), 9.99)
    new = sga_generation(pop, np.arange(8.0), 2, 1.0, 5.0, rng)
    assert np.all(new <= 10) and np.all(new >= -10)


# --- CMA-ES ----------------------------------------------------------------

def test_cmaes_default_popsize():
    assert default_popsize(9) == 4 + math.floor(3 * math.log(9)) == 10


def test_cmaes_quadratic_converges_and_stays_spd():
    target = np.array([0.3, -1.2, 2.0, 0.5, -0.7])
    es = CMAES(np.zeros(5), 1.0, np.random.default_rng(3), band=BAND)
    evals = 0
    while np.max(np.abs(es.mean - target)) > 1e-6 and evals < 20_000:
        X = es.ask()
        es.tell(X, np.sum((X - target) ** 2, axis=1))
        evals += len(X)
        assert np.max(np.abs(es.C - es.C.T)) <= 1e-12
        assert np.linalg.eigvalsh(es.C).min() > 0
    assert np.max(np.abs(es.mean - target)) <= 1e-6
    assert evals < 20_000


def test_cmaes_samples_respect_band():
    es = CMAES(np.zeros(4), 50.0, np.random.default_rng(0), band=BAND)
    X = es.ask()
    assert np.all(np.abs(X) <= 10)


# --- SPSO2011 --------------------------------------------------------------

def test_pso_constants():
    assert C_ACCEL == pytest.approx(1.193, abs=5e-4)
    assert W_INERTIA == pytest.approx(0.721, abs=5e-4)


def test_pso_centres():
    x = np.array([[0.0, 0.0]])
    p = np.array([[1.0, 0.0]])
    l = np.array([[0.0, 1.0]])
    np.testing.assert_allclose(hypersphere_centers(x, p, l, [False]), [[C_ACCEL / 3, C_ACCEL / 3]])
    np.testing.assert_allclose(hypersphere_centers(x, p, p, [True]), [[C_ACCEL / 2, 0.0]])


def test_pso_samples_inside_hypersphere(rng):
    for _ in range(50):
        x, v, p, l = (rng.uniform(-5, 5, (40, 7)) for _ in range(4))
        own = rng.random(40) < 0.3
        _, _, samples, G = spso_step(x, v, p, l, own, rng)
        assert np.all(np.linalg.norm(samples - G, axis=1) <= np.linalg.norm(G - x, axis=1) + 1e-12)


def test_pso_velocity_and_position_update(rng):
    x, v, p, l = (rng.uniform(-1, 1, (5, 3)) for _ in range(4))
    state = np.random.default_rng(9)
    x2, v2, samples, _ = spso_step(x, v, p, l, np.zeros(5, bool), state)
    np.testing.assert_allclose(v2, W_INERTIA * v + samples - x)
    np.testing.assert_allclose(x2, W_INERTIA * v + samples)


def test_pso_bound_handling(rng):
    x = np.full((3, 2), 9.9)
    v = np.full((3, 2), 50.0)
    x2, v2, _, _ = spso_step(x, v, x, x, np.ones(3, bool), rng, BAND)
    assert np.all(x2 == 10.0) and np.all(v2 == 0.0)


def test_pso_default_swarm_size():
    assert OptimizerConfig().pso.swarm_size == 40


# --- ACOR ------------------------------------------------------------------

def test_acor_weights_concentrate_as_locality_shrinks():
    w = rank_weights(50, 1e-3)
    assert w[0] / w.sum() == pytest.approx(1.0)
    w = rank_weights(50, 0.1)
    assert np.all(np.diff(w) < 0)


def test_acor_archive_update_keeps_k_sorted(rng):
    archive = rng.uniform(0, 1, (10, 3))
    costs = np.sort(rng.uniform(1, 2, 10))
    best = [costs[0]]
    for _ in range(20):
        new = acor_sample(archive, 0.1, 0.85, 6, rng, BAND)
        archive, costs = update_archive(archive, costs, new, rng.uniform(0, 2, 6), 10)
        assert len(archive) == 10 and np.all(np.diff(costs) >= 0)
        assert costs[0] <= best[-1]
        best.append(costs[0])


def test_acor_sample_from_single_point_archive_is_that_point():
    archive = np.tile([0.2, 0.4], (5, 1))
    x = acor_sample(archive, 0.1, 0.85, 4, np.random.default_rng(0))
    np.testing.assert_array_equal(x, np.tile([0.2, 0.4], (4, 1)))


# --- gradient descent ------------------------------------------------------

def test_fd_gradient_of_quadratic(rng):
    W = rng.normal(0, 1, 9)
    h = 1e-3
    lr = 0.25
    new = gd_step(W, lambda X: np.sum(X ** 2, axis=1), lr, h)
    # central differences are exact for quadratics up to rounding
    np.testing.assert_allclose((W - new) / lr, 2 * W, atol=1e-6)


def test_gd_zero_learning_rate(rng):
    W = rng.normal(0, 1, 4)
    assert np.array_equal(gd_step(W, lambda X: np.sum(X ** 2, axis=1), 0.0, 1e-4), W)


def test_gd_step_lowers_network_loss():
    task = TaskSpec.build()
    tmpl = task.template(3)
    from funcnet.tasks import population_loss

    def loss(X):
        pl = population_loss(X.reshape(-1, 3, 3), tmpl, task)
        return pl.total, pl.diverged.any(axis=1)

    W = np.random.default_rng(2).uniform(0, 1, 9)
    before = loss(W[None])[0][0]
    after = loss(gd_step(W, loss, 0.05, 1e-5, BAND)[None])[0][0]
    assert after < before


# --- configuration ---------------------------------------------------------

def test_config_errors_name_the_field():
    with pytest.raises(ConfigError) as e:
        OptimizerConfig(population_size=-1)
    assert e.value.field == "population_size"
    with pytest.raises(ConfigError) as e:
        OptimizerConfig.from_dict({"sga": {"mutation_rate": 2}})
    assert e.value.field == "sga.mutation_rate"
    with pytest.raises(ConfigError) as e:
        OptimizerConfig.from_dict({"colour": "red"})
    assert e.value.field == "colour"


def test_config_roundtrip():
    cfg = OptimizerConfig(algorithm="pso", seed=7, max_evaluations=1000)
    assert cfg.algorithm == "spso2011"
    assert OptimizerConfig.from_dict(cfg.to_dict()) == cfg


def test_trial_seed_is_pure():
    assert trial_seed(1, 3) == trial_seed(1, 3)
    assert len({trial_seed(1, i) for i in range(100)}) == 100


# --- the shared loop -------------------------------------------------------

ALGOS = ["random_search", "sga", "cmaes", "spso2011", "acor", "gd"]


@pytest.fixture(scope="module")
def small_task():
    return TaskSpec.build()


@pytest.mark.parametrize("algo", ALGOS)
def test_run_invariants(algo, small_task):
    cfg = OptimizerConfig(algorithm=algo, population_size=16, max_generations=15, seed=5)
    tmpl = small_task.template(3)
    rec = run(cfg, small_task, tmpl)
    costs = rec.elite_costs
    assert np.all(np.diff(costs) <= 0)
    assert rec.generations_used == len(rec.trajectory)
    assert [row[0] for row in rec.trajectory] == list(range(1, rec.generations_used + 1))
    assert rec.evaluations == rec.trajectory[-1][1]
    assert rec.network.within_band(cfg.weight_band)
    assert rec.final_cost == pytest.approx(sum(rec.elite_per_channel))
    if rec.converged:
        assert max(rec.elite_per_channel) < tolerance(32)
    again = run(cfg, small_task, tmpl)
    assert again.to_dict() == rec.to_dict()


@pytest.mark.parametrize("algo, per_gen", [("random_search", 16), ("sga", 16), ("cmaes", 10), ("spso2011", 40),
                                           ("gd", 19)])
def test_evaluation_accounting(algo, per_gen, small_task):
    cfg = OptimizerConfig(algorithm=algo, population_size=16, max_generations=6, seed=1)
    rec = run(cfg, small_task, small_task.template(3))
    assert rec.evaluations == rec.generations_used * per_gen


def test_acor_accounting(small_task):
    cfg = OptimizerConfig(algorithm="acor", max_generations=6, seed=1)
    rec = run(cfg, small_task, small_task.template(3))
    assert rec.evaluations == 50 + (rec.generations_used - 1) * 40


def test_evaluation_budget_is_never_exceeded(small_task):
    cfg = OptimizerConfig(algorithm="sga", population_size=16, max_generations=100, max_evaluations=100, seed=1)
    rec = run(cfg, small_task, small_task.template(3))
    assert rec.evaluations <= 100 and rec.generations_used == 6 or rec.converged


def test_initial_population_is_uniform_unit(small_task):
    cfg = OptimizerConfig(algorithm="sga", population_size=64, max_generations=1, seed=2, keep_snapshots=True)
    rec = run(cfg, small_task, small_task.template(3))
    pop = rec.final_population
    assert np.all((pop >= 0) & (pop <= 1))


def test_random_search_ignores_costs(small_task):
    from funcnet.optimizers import RandomSearch
    cfg = OptimizerConfig(algorithm="random_search", population_size=8)
    a = RandomSearch(9, cfg, np.random.default_rng(0))
    b = RandomSearch(9, cfg, np.random.default_rng(0))
    Xa = a.ask()
    a.tell(Xa, np.arange(8.0))
    Xb = b.ask()
    b.tell(Xb, -np.arange(8.0))
    assert np.array_equal(a.ask(), b.ask())


def test_pso_backend_tracks_personal_bests(small_task):
    cfg = OptimizerConfig(algorithm="pso")
    swarm = SPSO2011(4, cfg, np.random.default_rng(0))
    X = swarm.ask().copy()
    swarm.tell(X, np.arange(40.0))
    np.testing.assert_array_equal(swarm.p, X)
    X2 = swarm.ask().copy()
    swarm.tell(X2, np.full(40, 100.0))
    np.testing.assert_array_equal(swarm.p, X)
