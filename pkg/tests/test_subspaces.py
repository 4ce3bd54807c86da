import math

import numpy as np
import pytest
from hypothesis import given

from conftest import planted_pair, random_psd, seeds
from identreg.errors import IncompatibleSubspaces, NotInRange, ValidationError, ZeroVector
from identreg.population import relevant_subspace
from identreg.subspaces import (
    Subspace,
    embedding_angle,
    krylov_basis,
    krylov_degree,
    principal_angle,
    projector,
    projector_distance,
)

E = np.eye(3)


def test_projector_examples(rng):
    v = np.array([1.0, 1.0, 0.0]) / math.sqrt(2)
    assert np.allclose(projector(Subspace(v[:, None])).matrix, [[0.5, 0.5, 0], [0.5, 0.5, 0], [0, 0, 0]])
    assert not np.any(projector(Subspace.zero(4)).matrix)
    q, _ = np.linalg.qr(rng.standard_normal((8, 3)))
    p = projector(Subspace(q)).matrix
    assert np.linalg.norm(p @ p - p, 2) <= 1e-12


def test_principal_angle_examples():
    e1 = Subspace(np.array([[1.0], [0.0]]))
    e2 = Subspace(np.array([[0.0], [1.0]]))
    diag = Subspace(np.array([[1.0], [1.0]]) / math.sqrt(2))
    assert principal_angle(e1, e1) == 0.0
    assert math.isclose(principal_angle(e1, e2), math.pi / 2)
    assert math.isclose(principal_angle(e1, diag), math.pi / 4, rel_tol=1e-12)


@given(seeds)
def test_principal_angle_metric_properties(seed):
    r = np.random.default_rng(seed)
    p, d = int(r.integers(2, 8)), 1
    d = int(r.integers(1, p))
    spaces = [Subspace(np.linalg.qr(r.standard_normal((p, d)))[0]) for _ in range(3)]
    a, b, c = spaces
    assert math.isclose(principal_angle(a, b), principal_angle(b, a), abs_tol=1e-12)
    assert principal_angle(a, a) <= 1e-7
    ab, bc, ac = principal_angle(a, b), principal_angle(b, c), principal_angle(a, c)
    if ab + bc <= math.pi / 2:
        assert ac <= ab + bc + 1e-10
    assert math.isclose(projector_distance(a, b), math.sin(ab), abs_tol=1e-12)


def test_angle_rejects_mismatched_spaces():
    with pytest.raises(IncompatibleSubspaces):
        principal_angle(Subspace(E[:, :1]), Subspace(E[:, :2]))
    with pytest.raises(IncompatibleSubspaces):
        principal_angle(Subspace(E[:, :1]), Subspace(np.eye(2)[:, :1]))


def test_subspace_requires_orthonormal_basis():
    with pytest.raises(ValidationError):
        Subspace(np.array([[1.0, 1.0], [0.0, 1.0]]))
    s = Subspace.span(np.array([[1.0, 2.0], [0.0, 0.0], [1.0, 2.0]]))
    assert s.dim == 1


def test_embedding_and_contains():
    small = Subspace(E[:, :1])
    big = Subspace(E[:, :2])
    assert embedding_angle(small, big) == 0.0 and big.contains(small)
    assert not small.contains(Subspace(E[:, 2:]))
    assert math.isclose(projector_distance(small, big), 1.0)


def test_krylov_eigenvector_is_one_dimensional():
    a = np.diag([3.0, 2.0, 1.0])
    for t in (1, 2, 3):
        k = krylov_basis(a, np.array([0.0, 2.0, 0.0]), t)
        assert k.dim == 1 and np.allclose(np.abs(k.basis[:, 0]), [0, 1, 0])


def test_krylov_toy_first_direction():
    rho = 0.98
    sigma = np.array([[1, rho, 0], [rho, 1, 0], [0, 0, 2.0]])
    k = krylov_basis(sigma, sigma @ np.array([1.0, 0.0, 0.0]), 1)
    u = np.array([1.0, rho, 0.0]) / math.sqrt(1 + rho * rho)
    assert principal_angle(k, Subspace(u[:, None])) < 1e-12


def test_krylov_full_dimension_vandermonde():
    a = np.diag([3.0, 2.0, 1.0])
    b = np.ones(3) / math.sqrt(3)
    assert np.linalg.matrix_rank(np.column_stack([b, a @ b, a @ a @ b])) == 3
    assert krylov_basis(a, b, 3).dim == 3
    assert krylov_degree(a, b) == 3


def test_krylov_sign_convention():
    a = np.diag([3.0, 2.0, 1.0])
    b = np.array([1.0, 1.0, 1.0])
    q = krylov_basis(a, b, 3).basis
    assert q[:, 0] @ b > 0
    for k in range(1, 3):
        assert q[:, k] @ (a @ q[:, k - 1]) > 0


@given(seeds)
def test_krylov_nesting(seed):
    r = np.random.default_rng(seed)
    p = int(r.integers(2, 10))
    a = random_psd(r, p)
    b = a @ r.standard_normal(p)
    prev = krylov_basis(a, b, 1)
    for t in range(2, p + 1):
        cur = krylov_basis(a, b, t)
        assert embedding_angle(prev, cur) <= 1e-8
        prev = cur


def test_krylov_invariant_under_relevant_split():
    for i in range(50):
        pair = planted_pair(np.random.default_rng([11, i]))
        rel = relevant_subspace(pair)
        full = krylov_basis(pair.sigma_mat, pair.sigma_vec, pair.dim)
        red = krylov_basis(rel.sigma_y, rel.sigma_vec_y, pair.dim, check_range=False)
        assert full.dim == red.dim == rel.dim
        assert principal_angle(full, red) < 1e-8
        for t in range(1, rel.dim + 1):
            assert principal_angle(krylov_basis(pair.sigma_mat, pair.sigma_vec, t),
                                   krylov_basis(rel.sigma_y, rel.sigma_vec_y, t, check_range=False)) < 1e-8


def test_krylov_guards():
    with pytest.raises(ZeroVector):
        krylov_basis(np.eye(2), np.zeros(2), 2)
    with pytest.raises(NotInRange):
        krylov_basis(np.diag([1.0, 0.0]), np.array([0.0, 1.0]), 2)
    assert krylov_basis(np.eye(2), np.ones(2), 0).dim == 0


@given(seeds)
def test_principal_angle_matches_scipy(seed):
    from scipy.linalg import subspace_angles
    r = np.random.default_rng(seed)
    p = int(r.integers(2, 10))
    k = int(r.integers(1, p + 1))
    a, b = r.standard_normal((p, k)), r.standard_normal((p, k))
    s1, s2 = Subspace(np.linalg.qr(a)[0]), Subspace(np.linalg.qr(b)[0])
    assert abs(principal_angle(s1, s2) - subspace_angles(a, b).max()) <= 1e-7
