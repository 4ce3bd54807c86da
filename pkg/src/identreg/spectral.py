"""Symmetric PSD matrices, eigen-clusters, pseudoinverses and condition numbers."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigInvalid, NotPsd, NotSymmetric, ValidationError, ZeroMatrix

ENV_PREFIX = "IDENTREG_"


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical thresholds shared by every operation.

    Every value is relative: rank and cluster decisions are relative to the
    largest eigenvalue, range and envelope decisions to the vector norm.
    """

    rank_tol: float = 1e-10
    cluster_tol: float = 1e-8
    sym_tol: float = 1e-10
    psd_tol: float = 1e-10
    rec_tol: float = 1e-10
    ortho_tol: float = 1e-10
    krylov_tol: float = 1e-10
    range_tol: float = 1e-6
    envelope_tol: float = 1e-8
    tie_tol: float = 1e-12

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or not (0.0 < float(v) < 1.0):
                raise ConfigInvalid(f"{f.name} must lie in (0, 1), got {v!r}")

    def replace(self, **changes) -> "ToleranceConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, mapping: dict, base: "ToleranceConfig | None" = None) -> "ToleranceConfig":
        base = base or cls()
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(mapping) - names
        if unknown:
            raise ConfigInvalid(f"unknown tolerance keys: {sorted(unknown)}")
        try:
            values = {k: float(v) for k, v in mapping.items()}
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(str(exc)) from exc
        return base.replace(**values)

    @classmethod
    def from_env(cls, environ=None, base: "ToleranceConfig | None" = None) -> "ToleranceConfig":
        """Overrides read from IDENTREG_RANK_TOL, IDENTREG_CLUSTER_TOL, ..."""
        environ = os.environ if environ is None else environ
        found = {}
        for f in dataclasses.fields(cls):
            key = ENV_PREFIX + f.name.upper()
            if key in environ:
                found[f.name] = environ[key]
        return cls.from_mapping(found, base)


DEFAULT_TOL = ToleranceConfig()


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues in descending order with orthonormal eigenvectors.

    ``clusters`` lists index ranges ``(start, stop)`` of distinct positive
    eigenvalues; indices ``rank:`` form the zero cluster.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    clusters: tuple
    rank: int

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[0]) if self.eigenvalues.size else 0.0

    @property
    def degree(self) -> int:
        return len(self.clusters)

    @property
    def positive_values(self) -> np.ndarray:
        return self.eigenvalues[: self.rank]

    @property
    def range_basis(self) -> np.ndarray:
        return self.eigenvectors[:, : self.rank]

    def cluster_value(self, i: int) -> float:
        start, stop = self.clusters[i]
        return float(np.mean(self.eigenvalues[start:stop]))

    def cluster_basis(self, i: int) -> np.ndarray:
        start, stop = self.clusters[i]
        return self.eigenvectors[:, start:stop]


def _cluster(values: np.ndarray, cluster_tol: float) -> tuple:
    clusters = []
    start = 0
    for i in range(1, values.size):
        if values[i - 1] - values[i] > cluster_tol * values[i - 1]:
            clusters.append((start, i))
            start = i
    if values.size:
        clusters.append((start, values.size))
    return tuple(clusters)


def _as_array(matrix) -> np.ndarray:
    if isinstance(matrix, SymPsd):
        return matrix.matrix
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix has non-finite entries")
    return a


def eigendecompose(matrix, tol: ToleranceConfig = DEFAULT_TOL, *, check_psd: bool = True) -> SpectralDecomposition:
    a = _as_array(matrix)
    p = a.shape[0]
    if p == 0:
        return SpectralDecomposition(np.zeros(0), np.zeros((0, 0)), (), 0)
    w, v = np.linalg.eigh((a + a.T) / 2.0)
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    scale = max(abs(w[0]), abs(w[-1]))
    if check_psd and w[-1] < -tol.psd_tol * max(scale, np.finfo(float).tiny):
        raise NotPsd(f"smallest eigenvalue {w[-1]:.3e} is negative (scale {scale:.3e})")
    if scale == 0.0:
        return SpectralDecomposition(np.zeros(p), v, (), 0)
    rank = int(np.sum(w > tol.rank_tol * w[0]))
    w = w.copy()
    w[rank:] = 0.0
    # deterministic sign convention: largest-magnitude entry positive
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(p)])
    signs[signs == 0] = 1.0
    v = v * signs
    w.setflags(write=False)
    v.setflags(write=False)
    return SpectralDecomposition(w, v, _cluster(w[:rank], tol.cluster_tol), rank)


class SymPsd:
    """Validated symmetric PSD matrix with a lazily cached spectrum."""

    def __init__(self, matrix, tol: ToleranceConfig = DEFAULT_TOL, *, validate: bool = True):
        a = np.array(_as_array(matrix), dtype=float, copy=True)
        if validate:
            scale = np.max(np.abs(a)) if a.size else 0.0
            asym = np.max(np.abs(a - a.T)) if a.size else 0.0
            if asym > tol.sym_tol * max(scale, 1e-300):
                raise NotSymmetric(f"asymmetry {asym:.3e} exceeds tolerance")
        a = (a + a.T) / 2.0
        a.setflags(write=False)
        self.matrix = a
        self.tol = tol
        if validate:
            _ = self.spectrum

    @cached_property
    def spectrum(self) -> SpectralDecomposition:
        return eigendecompose(self.matrix, self.tol)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def op_norm(self) -> float:
        return self.spectrum.lambda_max

    @property
    def rank(self) -> int:
        return self.spectrum.rank

    @property
    def degree(self) -> int:
        return self.spectrum.degree

    @cached_property
    def pinv(self) -> np.ndarray:
        return pseudoinverse(self).matrix

    def range_residual(self, b: np.ndarray) -> float:
        """Relative distance of ``b`` from the range."""
        b = np.asarray(b, dtype=float)
        nb = np.linalg.norm(b)
        if nb == 0.0:
            return 0.0
        basis = self.spectrum.range_basis
        return float(np.linalg.norm(b - basis @ (basis.T @ b)) / nb)

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __repr__(self):
        return f"SymPsd(dim={self.dim})"


def as_sym_psd(matrix, tol: ToleranceConfig = DEFAULT_TOL) -> SymPsd:
    if isinstance(matrix, SymPsd):
        return matrix
    return SymPsd(matrix, tol)


def _from_spectrum(values: np.ndarray, vectors: np.ndarray, tol: ToleranceConfig) -> SymPsd:
    return SymPsd((vectors * values) @ vectors.T, tol, validate=False)


def pseudoinverse(matrix, tol: ToleranceConfig = DEFAULT_TOL) -> SymPsd:
    a = as_sym_psd(matrix, tol)
    s = a.spectrum
    return _from_spectrum(1.0 / s.positive_values, s.range_basis, tol)


def sqrt_psd(matrix, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    s = as_sym_psd(matrix, tol).spectrum
    return (s.range_basis * np.sqrt(s.positive_values)) @ s.range_basis.T


def pinv_sqrt_psd(matrix, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    s = as_sym_psd(matrix, tol).spectrum
    return (s.range_basis / np.sqrt(s.positive_values)) @ s.range_basis.T


def condition_number(matrix, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """lambda_max over the smallest positive eigenvalue."""
    s = as_sym_psd(matrix, tol).spectrum
    if s.rank == 0:
        raise ZeroMatrix("condition number of the zero matrix is undefined")
    return float(s.eigenvalues[0] / s.eigenvalues[s.rank - 1])


def effective_rank(matrix, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Sum of retained eigenvalues over the largest one."""
    s = as_sym_psd(matrix, tol).spectrum
    if s.rank == 0:
        raise ZeroMatrix("effective rank of the zero matrix is undefined")
    return float(np.sum(s.positive_values) / s.eigenvalues[0])


def sym_op_norm(matrix) -> float:
    """Operator norm of a symmetric (not necessarily PSD) matrix."""
    a = np.asarray(matrix, dtype=float)
    if a.size == 0:
        return 0.0
    w = np.linalg.eigvalsh((a + a.T) / 2.0)
    return float(max(abs(w[0]), abs(w[-1])))
