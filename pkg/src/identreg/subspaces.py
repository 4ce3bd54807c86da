"""Orthonormal bases, projectors, principal angles and Krylov spans."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import IncompatibleSubspaces, NotInRange, ValidationError, ZeroVector
from .spectral import DEFAULT_TOL, SymPsd, ToleranceConfig, as_sym_psd


@dataclass(frozen=True, eq=False)
class Subspace:
    """Column span of an orthonormal ``p x d`` basis."""

    basis: np.ndarray
    tol: ToleranceConfig = DEFAULT_TOL

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2:
            raise ValidationError("basis must be a 2-d array")
        if b.shape[1]:
            gram_err = np.max(np.abs(b.T @ b - np.eye(b.shape[1])))
            if gram_err > self.tol.ortho_tol * max(1, b.shape[1]):
                raise ValidationError(f"basis is not orthonormal (error {gram_err:.2e})")
        if b is not self.basis or b.flags.writeable:
            b = b.view()
            b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @classmethod
    def zero(cls, p: int, tol: ToleranceConfig = DEFAULT_TOL) -> "Subspace":
        return cls(np.zeros((p, 0)), tol)

    @classmethod
    def span(cls, vectors, tol: ToleranceConfig = DEFAULT_TOL) -> "Subspace":
        """Orthonormal basis of the column span, rank decided by ``rank_tol``."""
        v = np.asarray(vectors, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[1] == 0:
            return cls.zero(v.shape[0], tol)
        u, s, _ = np.linalg.svd(v, full_matrices=False)
        if s.size == 0 or s[0] == 0.0:
            return cls.zero(v.shape[0], tol)
        k = int(np.sum(s > tol.rank_tol * s[0]))
        return cls(u[:, :k], tol)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @cached_property
    def projector_matrix(self) -> np.ndarray:
        p = self.basis @ self.basis.T
        p.setflags(write=False)
        return p

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.basis @ (self.basis.T @ np.asarray(x, dtype=float))

    def residual_norm(self, vectors) -> float:
        """Operator norm of ``(I - P) V``."""
        v = np.asarray(vectors, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[1] == 0:
            return 0.0
        r = v - self.basis @ (self.basis.T @ v)
        return float(np.linalg.norm(r, 2))

    def contains(self, other: "Subspace", tol: float | None = None) -> bool:
        tol = self.tol.krylov_tol * 100 if tol is None else tol
        _check_ambient(self, other)
        return embedding_angle(other, self) <= tol


def _check_ambient(s1: Subspace, s2: Subspace):
    if s1.ambient_dim != s2.ambient_dim:
        raise IncompatibleSubspaces(f"ambient dimensions differ: {s1.ambient_dim} vs {s2.ambient_dim}")


def projector(space: Subspace) -> SymPsd:
    return SymPsd(space.projector_matrix, space.tol, validate=False)


def principal_angle(s1: Subspace, s2: Subspace) -> float:
    """Largest principal angle, ``arcsin ||P1 - P2||`` for equal dimensions."""
    _check_ambient(s1, s2)
    if s1.dim != s2.dim:
        raise IncompatibleSubspaces(f"dimensions differ: {s1.dim} vs {s2.dim}")
    if s1.dim == 0:
        return 0.0
    # for equal dimensions ||P1 - P2|| = ||(I - P2) B1||
    return float(np.arcsin(min(1.0, s2.residual_norm(s1.basis))))


def projector_distance(s1: Subspace, s2: Subspace) -> float:
    """``||P1 - P2||`` in operator norm, any dimensions."""
    _check_ambient(s1, s2)
    if s1.dim == s2.dim:
        return float(np.sin(principal_angle(s1, s2)))
    d = s1.projector_matrix - s2.projector_matrix
    w = np.linalg.eigvalsh(d)
    return float(max(abs(w[0]), abs(w[-1])))


def embedding_angle(small: Subspace, big: Subspace) -> float:
    """Largest angle between ``small`` and its image inside ``big``.

    Zero exactly when ``small`` is contained in ``big``.
    """
    _check_ambient(small, big)
    return float(np.arcsin(min(1.0, big.residual_norm(small.basis))))


def envelope_directions(matrix, b, tol: ToleranceConfig = DEFAULT_TOL) -> tuple:
    """Unit images of ``b`` in the eigenspaces of ``A`` that carry it.

    Returns ``(directions, eigenvalues)`` with eigenvalues descending. An
    eigenspace counts when the image norm exceeds ``envelope_tol * ||b||``.
    """
    a = as_sym_psd(matrix, tol)
    b = np.asarray(b, dtype=float)
    spec = a.spectrum
    nb = np.linalg.norm(b)
    dirs, vals = [], []
    for i in range(spec.degree):
        basis = spec.cluster_basis(i)
        w = basis @ (basis.T @ b)
        nw = np.linalg.norm(w)
        if nw > tol.envelope_tol * nb:
            dirs.append(w / nw)
            vals.append(spec.cluster_value(i))
    d = np.column_stack(dirs) if dirs else np.zeros((a.dim, 0))
    return d, np.array(vals, dtype=float)


def krylov_basis(matrix, b, t: int, tol: ToleranceConfig = DEFAULT_TOL, *, check_range: bool = True) -> Subspace:
    """Orthonormal basis of ``span{b, Ab, ..., A^(t-1) b}``.

    Arnoldi recursion with a full second Gram-Schmidt pass. Every product
    ``A q`` is first projected onto the envelope of ``b`` (see
    :func:`envelope_directions`); in exact arithmetic this changes nothing,
    but it keeps rounding errors from being amplified along eigenvectors
    that ``b`` does not touch. For the same reason the start vector is the
    envelope projection of ``b`` unless ``b`` has a non-negligible part
    outside the envelope (possible only off the range of ``A``). The
    recursion stops once the orthogonalised direction falls below
    ``krylov_tol * ||A||`` or the envelope dimension is reached, so the
    returned dimension may be less than ``t``. Each new direction has a
    positive inner product with the raw vector it was generated from.
    """
    a = as_sym_psd(matrix, tol)
    b = np.asarray(b, dtype=float)
    p = a.dim
    if b.shape != (p,):
        raise ValidationError(f"vector has shape {b.shape}, expected ({p},)")
    nb = np.linalg.norm(b)
    if nb == 0.0:
        raise ZeroVector("Krylov generator is the zero vector")
    if check_range and a.range_residual(b) > tol.range_tol:
        raise NotInRange("generator vector is not in the range of the matrix")
    if t <= 0:
        return Subspace.zero(p, tol)
    env, _ = envelope_directions(a, b, tol)
    outside = np.linalg.norm(b - env @ (env.T @ b)) > tol.envelope_tol * nb
    cap = env.shape[1] + int(outside)
    start = b if outside else env @ (env.T @ b)
    q = np.zeros((p, min(t, p, max(cap, 1))))
    q[:, 0] = start / np.linalg.norm(start)
    k = 1
    scale = a.op_norm
    while k < q.shape[1]:
        w = a.matrix @ q[:, k - 1]
        for _ in range(2):
            w = env @ (env.T @ w)
            w = w - q[:, :k] @ (q[:, :k].T @ w)
        nw = np.linalg.norm(w)
        if nw <= tol.krylov_tol * scale:
            break
        q[:, k] = w / nw
        k += 1
    return Subspace(q[:, :k].copy(), tol)


def krylov_degree(matrix, b, tol: ToleranceConfig = DEFAULT_TOL) -> int:
    a = as_sym_psd(matrix, tol)
    return krylov_basis(a, b, a.dim, tol).dim
