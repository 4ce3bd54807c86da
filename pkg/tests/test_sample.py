import math

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import seeds
from identreg.errors import BadMomentOrder, EmptyData, OutOfRange, ValidationError
from identreg.population import perturbation_size
from identreg.sample import (
    Dataset,
    complexity_report,
    parallel_map,
    perturbation_event_check,
    sample_moments,
    trial_rng,
)
from identreg.simulation import SimConfig, generate_simulation
from identreg.toy import ToyConfig, toy_generator, toy_population


def test_sample_moments_identity():
    hat = sample_moments(Dataset(np.eye(2), np.array([1.0, 0.0])), center=False)
    assert np.allclose(hat.sigma_mat.matrix, np.eye(2) / 2)
    assert np.allclose(hat.sigma_vec, [0.5, 0.0])


def test_sample_moments_duplicated_rows(rng):
    x, y = rng.standard_normal((30, 4)), rng.standard_normal(30)
    a = sample_moments(Dataset(x, y))
    b = sample_moments(Dataset(np.vstack([x, x]), np.r_[y, y]))
    assert np.allclose(a.sigma_mat.matrix, b.sigma_mat.matrix) and np.allclose(a.sigma_vec, b.sigma_vec)


def test_sample_covariance_concentrates_on_toy():
    cfg = ToyConfig(1.0, 0.0, 0.5)
    gen, pop = toy_generator(cfg), toy_population(cfg)
    ok = 0
    for seed in range(100):
        x, y = gen(np.random.default_rng(seed), 100_000)
        hat = sample_moments(Dataset(x, y), center=False)
        ok += np.linalg.norm(hat.sigma_mat.matrix - pop.sigma_mat.matrix, 2) <= 0.05 * pop.sigma_mat.op_norm
    assert ok >= 95


@given(seeds)
def test_sample_vector_in_range(seed):
    r = np.random.default_rng(seed)
    n, p = int(r.integers(2, 15)), int(r.integers(1, 20))
    x, y = r.standard_normal((n, p)), r.standard_normal(n)
    hat = sample_moments(Dataset(x, y))
    assert hat.sigma_mat.range_residual(hat.sigma_vec) <= 1e-10 or hat.sigma_mat.rank == 0


def test_dataset_validation():
    with pytest.raises(EmptyData):
        Dataset(np.zeros((0, 3)), np.zeros(0))
    with pytest.raises(ValidationError):
        Dataset(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(ValidationError):
        Dataset(np.array([[np.inf]]), np.array([1.0]))
    with pytest.raises(ValidationError):
        Dataset(np.ones((3, 1)), np.ones(3), centered=True)


def test_equal_norm_rows_rho_xn_independent_of_q(rng):
    x = rng.standard_normal((50, 6))
    x = 3.0 * x / np.linalg.norm(x, axis=1, keepdims=True)
    data = Dataset(x, rng.standard_normal(50))
    reps = [complexity_report(data, q, center=False) for q in (5.0, 8.0, 20.0)]
    op = sample_moments(data, center=False).sigma_mat.op_norm
    for rep in reps:
        assert math.isclose(rep.rho_xn_hat, 9.0 / op, rel_tol=1e-12)


def test_simulated_design_has_small_effective_rank():
    data, _, _ = generate_simulation(SimConfig(reps=1), 0)
    rep = complexity_report(data, n_directions=16)
    assert 1.5 <= rep.rho_x <= 2.5


@settings(max_examples=40)
@given(seeds)
def test_heavy_tail_rate_dominates_delta_n(seed):
    r = np.random.default_rng(seed)
    n, p = int(r.integers(5, 200)), int(r.integers(1, 10))
    x = r.standard_t(3, (n, p)) * r.uniform(0.1, 3, p)
    data = Dataset(x, x @ r.standard_normal(p) + r.standard_normal(n))
    for q in (4.5, 8.0, 16.0):
        rep = complexity_report(data, q, n_directions=8, seed=seed)
        assert rep.delta_n <= rep.heavy_tail_rate * (1 + 1e-12)
        assert rep.rho_x <= rep.rho_xn_hat * (1 + 1e-12)


def test_complexity_report_row_permutation_invariant(rng):
    x, y = rng.standard_normal((40, 5)), rng.standard_normal(40)
    perm = rng.permutation(40)
    a = complexity_report(Dataset(x, y), seed=3)
    b = complexity_report(Dataset(x[perm], y[perm]), seed=3)
    for k, v in a.to_dict().items():
        if isinstance(v, float):
            assert math.isclose(v, getattr(b, k), rel_tol=1e-9), k


def test_complexity_report_guards(rng):
    data = Dataset(rng.standard_normal((10, 2)), rng.standard_normal(10))
    for q in (4.0, 2.0, math.inf):
        with pytest.raises(BadMomentOrder):
            complexity_report(data, q)
    with pytest.raises(OutOfRange):
        complexity_report(data, constant_c=0.5)


def test_k_hat_at_least_constant(rng):
    data = Dataset(rng.standard_normal((30, 3)), rng.standard_normal(30))
    assert complexity_report(data, constant_c=2.0).K_hat >= 2.0


def test_event_frequency_toy():
    cfg = ToyConfig()
    gen, pop = toy_generator(cfg), toy_population(cfg)
    x, y = gen(trial_rng(99, 0), 500)
    K = complexity_report(Dataset(x, y), population=pop, center=False).K_hat
    rep = perturbation_event_check(gen, pop, 500, 0.25, K, 200, seed=1)
    assert rep.frequency >= 0.5 and rep.meets_target
    near_half = perturbation_event_check(gen, pop, 500, 0.499, K, 50, seed=1)
    assert near_half.frequency >= near_half.target
    low = perturbation_event_check(gen, pop, 500, 0.25, 0.05, 100, seed=2)
    high = perturbation_event_check(gen, pop, 500, 0.25, 0.10, 100, seed=2)
    assert high.frequency >= low.frequency


def test_event_check_deterministic_across_threads():
    cfg = ToyConfig()
    gen, pop = toy_generator(cfg), toy_population(cfg)
    a = perturbation_event_check(gen, pop, 200, 0.1, 1.0, 20, seed=5, threads=1)
    b = perturbation_event_check(gen, pop, 200, 0.1, 1.0, 20, seed=5, threads=4)
    assert a == b


def test_event_check_guards():
    cfg = ToyConfig()
    gen, pop = toy_generator(cfg), toy_population(cfg)
    with pytest.raises(OutOfRange):
        perturbation_event_check(gen, pop, 100, 0.5, 1.0, 5, seed=0)
    with pytest.raises(EmptyData):
        perturbation_event_check(gen, pop, 0, 0.1, 1.0, 5, seed=0)


def test_sample_error_shrinks_with_n():
    cfg = ToyConfig()
    gen, pop = toy_generator(cfg), toy_population(cfg)

    def median_eps(n):
        out = []
        for s in range(40):
            x, y = gen(trial_rng(s, n), n)
            hat = sample_moments(Dataset(x, y), center=False)
            out.append(perturbation_size(hat.sigma_mat, hat.sigma_vec, pop.sigma_mat, pop.sigma_vec))
        return np.median(out)

    assert median_eps(4000) < median_eps(250)


def test_parallel_map_preserves_order():
    assert parallel_map(lambda i: i * i, range(20), threads=4) == [i * i for i in range(20)]
