import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_psd, seeds
from identreg.errors import ConfigInvalid, NotPsd, NotSymmetric, ValidationError, ZeroMatrix
from identreg.spectral import (
    DEFAULT_TOL,
    SymPsd,
    ToleranceConfig,
    condition_number,
    effective_rank,
    eigendecompose,
    pseudoinverse,
    sym_op_norm,
)


def toy_sigma(rho):
    return np.array([[1, rho, 0], [rho, 1, 0], [0, 0, 2.0]])


def test_eigendecompose_diag_clusters():
    s = eigendecompose(np.diag([2.0, 1.0, 1.0]))
    assert np.allclose(s.eigenvalues, [2, 1, 1])
    assert s.clusters == ((0, 1), (1, 3))
    assert s.rank == 3 and s.degree == 2


def test_eigendecompose_toy():
    s = eigendecompose(toy_sigma(0.98))
    assert np.allclose(s.eigenvalues, [2.0, 1.98, 0.02], atol=1e-14)
    assert s.rank == 3


def test_eigendecompose_recovers_planted_spectrum(rng):
    q, _ = np.linalg.qr(rng.standard_normal((7, 7)))
    lam = np.array([9.0, 5, 3, 2, 1, 0.5, 0.0])
    s = eigendecompose((q * lam) @ q.T)
    assert np.max(np.abs(s.eigenvalues - lam)) <= 1e-10 * lam[0]
    assert s.rank == 6


@given(seeds)
def test_decomposition_invariants(seed):
    r = np.random.default_rng(seed)
    p = int(r.integers(1, 12))
    a = random_psd(r, p, int(r.integers(1, p + 1)), repeat=bool(seed % 2))
    s = eigendecompose(a)
    v = s.eigenvectors
    rec = (v * s.eigenvalues) @ v.T
    norm = sym_op_norm(a)
    assert sym_op_norm(rec - a) <= 1e3 * DEFAULT_TOL.rec_tol * norm
    assert np.linalg.norm(v.T @ v - np.eye(p), 2) <= DEFAULT_TOL.ortho_tol
    assert np.all(np.diff(s.eigenvalues) <= 0)
    # cluster boundaries partition the positive eigenvalues
    assert s.clusters[0][0] == 0 and s.clusters[-1][1] == s.rank
    # 1 <= effective rank <= rank <= p
    rho = effective_rank(a)
    assert 1 - 1e-12 <= rho <= s.rank + 1e-9 and s.rank <= p


def test_clusters_merge_close_eigenvalues():
    s = eigendecompose(np.diag([1.0, 1.0 - 1e-12, 0.5]))
    assert s.clusters == ((0, 2), (2, 3))


def test_zero_cutoff():
    s = eigendecompose(np.diag([1.0, 1e-12, 0.0]))
    assert s.rank == 1 and s.eigenvalues[1] == 0.0


def test_pseudoinverse_examples():
    assert np.allclose(pseudoinverse(np.eye(4)).matrix, np.eye(4))
    sy = np.array([[1.0, 1, 0], [1, 1, 0], [0, 0, 0]])
    pinv = pseudoinverse(sy).matrix
    assert np.allclose(pinv, [[0.25, 0.25, 0], [0.25, 0.25, 0], [0, 0, 0]], atol=1e-15)
    assert np.allclose(pseudoinverse(np.diag([4.0, 0.0])).matrix, np.diag([0.25, 0.0]))


def test_penrose_axioms_on_random_matrices():
    worst = 0.0
    for i in range(1000):
        r = np.random.default_rng([90, i])
        p = int(r.integers(1, 10))
        a = random_psd(r, p, int(r.integers(1, p + 1)))
        g = pseudoinverse(a).matrix
        n = max(1.0, np.linalg.norm(a, 2) * np.linalg.norm(g, 2))
        errs = [
            np.linalg.norm(a @ g @ a - a, 2) / np.linalg.norm(a, 2),
            np.linalg.norm(g @ a @ g - g, 2) / np.linalg.norm(g, 2),
            np.linalg.norm(a @ g - (a @ g).T, 2) / n,
            np.linalg.norm(g @ a - (g @ a).T, 2) / n,
        ]
        worst = max(worst, *errs)
        # (A+)+ = A
        back = pseudoinverse(g).matrix
        worst = max(worst, np.linalg.norm(back - a, 2) / np.linalg.norm(a, 2))
    assert worst <= 1e-8


def test_condition_number_examples():
    for rho in (0.0, 0.5, 0.98):
        sy = np.array([[1, rho], [rho, 1.0]])
        assert math.isclose(condition_number(sy), (1 + rho) / (1 - rho), rel_tol=1e-12)
    assert condition_number(np.eye(5)) == 1.0
    with pytest.raises(ZeroMatrix):
        condition_number(np.zeros((3, 3)))


@given(seeds, st.floats(1e-3, 1e3))
def test_condition_number_scale_invariant(seed, c):
    r = np.random.default_rng(seed)
    a = random_psd(r, 5, 4)
    assert math.isclose(condition_number(c * a), condition_number(a), rel_tol=1e-9)


def test_effective_rank_examples():
    for rho in (0.0, 0.3, 0.98):
        assert math.isclose(effective_rank(toy_sigma(rho)), 2.0, rel_tol=1e-14)
    assert math.isclose(effective_rank(np.eye(6)), 6.0)


def test_validation_errors():
    with pytest.raises(NotSymmetric):
        SymPsd(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(NotPsd):
        SymPsd(np.diag([1.0, -0.5]))
    with pytest.raises(ValidationError):
        SymPsd(np.ones((2, 3)))
    with pytest.raises(ValidationError):
        SymPsd(np.array([[np.nan]]))


def test_sym_psd_is_read_only():
    a = SymPsd(np.eye(2))
    with pytest.raises(ValueError):
        a.matrix[0, 0] = 3.0


def test_tolerance_config_sources():
    tol = ToleranceConfig.from_env({"IDENTREG_RANK_TOL": "1e-8", "UNRELATED": "x"})
    assert tol.rank_tol == 1e-8 and tol.cluster_tol == DEFAULT_TOL.cluster_tol
    assert ToleranceConfig.from_mapping({"psd_tol": 1e-6}, tol).rank_tol == 1e-8
    with pytest.raises(ConfigInvalid):
        ToleranceConfig.from_mapping({"bogus": 1e-3})
    with pytest.raises(ConfigInvalid):
        ToleranceConfig(rank_tol=0.0)


@settings(max_examples=30)
@given(seeds)
def test_sqrt_and_pinv_consistent(seed):
    from identreg.spectral import pinv_sqrt_psd, sqrt_psd

    r = np.random.default_rng(seed)
    a = random_psd(r, 6, 4)
    h = sqrt_psd(a)
    assert np.allclose(h @ h, a, atol=1e-10 * np.linalg.norm(a, 2))
    g = pinv_sqrt_psd(a)
    assert np.allclose(g @ g, pseudoinverse(a).matrix, rtol=1e-8, atol=1e-8 * np.linalg.norm(g @ g, 2))


@given(seeds)
def test_pseudoinverse_matches_scipy(seed):
    from scipy.linalg import pinvh
    r = np.random.default_rng(seed)
    p = int(r.integers(1, 10))
    a = random_psd(r, p, int(r.integers(1, p + 1)))
    ours = pseudoinverse(a).matrix
    ref = pinvh(a, atol=1e-10 * np.linalg.norm(a, 2))
    assert np.linalg.norm(ours - ref, 2) <= 1e-6 * np.linalg.norm(ref, 2)
