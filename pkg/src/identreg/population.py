"""Population moment pairs, relevant subspaces and identifiable parameters."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    DegenerateLevel,
    NoIdentifiableLevel,
    NotInRange,
    OutOfRange,
    ValidationError,
    ZeroReference,
    ZeroVector,
)
from .spectral import DEFAULT_TOL, SymPsd, ToleranceConfig, as_sym_psd, sym_op_norm
from .subspaces import Subspace, envelope_directions


@dataclass(frozen=True, eq=False)
class PopulationPair:
    """Second moments ``Sigma = E xx'`` and ``sigma = E xy`` of a regression."""

    sigma_mat: SymPsd
    sigma_vec: np.ndarray
    tol: ToleranceConfig = DEFAULT_TOL
    validate: bool = True

    def __post_init__(self):
        mat = as_sym_psd(self.sigma_mat, self.tol)
        vec = np.array(self.sigma_vec, dtype=float, copy=True).reshape(-1)
        if vec.shape[0] != mat.dim:
            raise ValidationError(f"vector length {vec.shape[0]} does not match matrix size {mat.dim}")
        if not np.all(np.isfinite(vec)):
            raise ValidationError("vector has non-finite entries")
        vec.setflags(write=False)
        object.__setattr__(self, "sigma_mat", mat)
        object.__setattr__(self, "sigma_vec", vec)
        if self.validate:
            if not np.any(vec):
                raise ZeroVector("cross-covariance vector is zero")
            if mat.range_residual(vec) > self.tol.range_tol:
                raise NotInRange("cross-covariance is not in the range of the covariance")

    @property
    def dim(self) -> int:
        return self.sigma_mat.dim

    @cached_property
    def beta_ls(self) -> np.ndarray:
        return least_squares(self)


def least_squares(pair: PopulationPair) -> np.ndarray:
    """Minimum-norm solution of ``Sigma beta = sigma``."""
    beta = pair.sigma_mat.pinv @ pair.sigma_vec
    nv = np.linalg.norm(pair.sigma_vec)
    if pair.validate and nv > 0:
        resid = np.linalg.norm(pair.sigma_mat.matrix @ beta - pair.sigma_vec) / nv
        if resid > pair.tol.range_tol:
            raise NotInRange(f"normal equations residual {resid:.2e}")
    beta.setflags(write=False)
    return beta


@dataclass(frozen=True, eq=False)
class RelevantDecomposition:
    """Relevant directions, one per eigenspace that carries ``sigma``.

    ``directions[:, i]`` spans the image of ``sigma`` in the i-th such
    eigenspace and ``eigenvalues[i]`` is its eigenvalue (descending).
    """

    pair: PopulationPair
    directions: np.ndarray
    eigenvalues: np.ndarray

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @cached_property
    def subspace(self) -> Subspace:
        return Subspace(self.directions, self.pair.tol)

    @cached_property
    def sigma_y(self) -> np.ndarray:
        d = self.directions
        return (d * self.eigenvalues) @ d.T

    @cached_property
    def sigma_vec_y(self) -> np.ndarray:
        return self.subspace.project(self.pair.sigma_vec)

    @cached_property
    def relevant_pair(self) -> PopulationPair:
        return PopulationPair(SymPsd(self.sigma_y, self.pair.tol, validate=False), self.sigma_vec_y,
                              self.pair.tol, validate=False)

    @cached_property
    def irrelevant_part(self) -> np.ndarray:
        return self.pair.sigma_mat.matrix - self.sigma_y

    @property
    def irrelevant_dim(self) -> int:
        return self.pair.sigma_mat.rank - self.dim


def relevant_subspace(pair: PopulationPair) -> RelevantDecomposition:
    if not np.any(pair.sigma_vec):
        raise ZeroVector("cross-covariance vector is zero")
    d, v = envelope_directions(pair.sigma_mat, pair.sigma_vec, pair.tol)
    d.setflags(write=False)
    v.setflags(write=False)
    return RelevantDecomposition(pair, d, v)


@dataclass(frozen=True)
class Level:
    """One rung ``s`` of the truncation ladder."""

    s: int
    basis: np.ndarray
    sigma_s: np.ndarray
    sigma_vec_s: np.ndarray
    beta_s: np.ndarray
    beta_perp: np.ndarray
    kappa: float
    kappa_next: float
    risk: float
    risk_bound: float

    @property
    def kappa_half(self) -> float:
        return math.sqrt(self.kappa)

    @property
    def kappa_half_next(self) -> float:
        return math.sqrt(self.kappa_next)

    @property
    def pair(self) -> PopulationPair:
        return PopulationPair(SymPsd(self.sigma_s, validate=False), self.sigma_vec_s, validate=False)

    @property
    def subspace(self) -> Subspace:
        return Subspace(self.basis)


@dataclass(frozen=True, eq=False)
class TruncationLadder:
    relevant: RelevantDecomposition
    levels: tuple

    def __len__(self):
        return len(self.levels)

    def level(self, s: int) -> Level:
        if not 1 <= s <= len(self.levels):
            raise OutOfRange(f"level {s} outside 1..{len(self.levels)}")
        return self.levels[s - 1]

    @property
    def kappa_half(self) -> np.ndarray:
        return np.array([lv.kappa_half for lv in self.levels])


def truncation_ladder(rel: RelevantDecomposition) -> TruncationLadder:
    lam = rel.eigenvalues
    d = rel.directions
    sig = rel.sigma_vec_y
    beta = rel.pair.beta_ls
    beta_y = d @ (d.T @ beta)
    nb2 = float(beta_y @ beta_y)
    sy = rel.sigma_y
    sy_norm = float(lam[0]) if lam.size else 0.0
    levels = []
    for s in range(1, rel.dim + 1):
        ds = d[:, :s]
        sig_s = ds @ (ds.T @ sig)
        if np.linalg.norm(sig_s) == 0.0:
            raise DegenerateLevel(f"level {s} carries no cross-covariance")
        mat_s = (ds * lam[:s]) @ ds.T
        coef = (ds.T @ sig) / lam[:s]
        beta_s = ds @ coef
        # the full relevant span reproduces beta_y, so the top level has no remainder
        perp = beta_y - beta_s if s < rel.dim else np.zeros_like(beta_s)
        kappa = float(lam[0] / lam[s - 1])
        kappa_next = float(lam[0] / lam[s]) if s < rel.dim else math.inf
        risk = float(perp @ sy @ perp) / (sy_norm * nb2)
        bound = 0.0 if math.isinf(kappa_next) else float(perp @ perp) / (kappa_next * nb2)
        for arr in (mat_s, sig_s, beta_s, perp):
            arr.setflags(write=False)
        levels.append(Level(s, ds, mat_s, sig_s, beta_s, perp, kappa, kappa_next, risk, bound))
    return TruncationLadder(rel, tuple(levels))


@dataclass(frozen=True)
class IdentifiabilityReport:
    tau: float
    s_star: int
    dof: int
    beta: np.ndarray
    kappa_half: float
    kappa_half_next: float
    risk: float
    risk_bound: float
    guarantee: float
    ladder_kappa_half: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "s_star": self.s_star,
            "dof": self.dof,
            "beta": self.beta.tolist(),
            "kappa_half": self.kappa_half,
            "kappa_half_next": self.kappa_half_next,
            "risk": self.risk,
            "risk_bound": self.risk_bound,
            "guarantee": self.guarantee,
            "ladder_kappa_half": list(self.ladder_kappa_half),
        }


def identifiable_parameter(ladder: TruncationLadder, tau: float) -> IdentifiabilityReport:
    """Largest level whose half-condition number stays below ``tau``."""
    if not (tau > 1.0) or math.isinf(tau) or math.isnan(tau):
        raise OutOfRange(f"tau must be a finite number above 1, got {tau}")
    chosen = None
    for lv in ladder.levels:
        if lv.kappa_half < tau:
            chosen = lv
    if chosen is None:
        raise NoIdentifiableLevel(f"no level has half-condition number below {tau}")
    return IdentifiabilityReport(
        tau=float(tau),
        s_star=chosen.s,
        dof=chosen.s,
        beta=chosen.beta_s,
        kappa_half=chosen.kappa_half,
        kappa_half_next=chosen.kappa_half_next,
        risk=chosen.risk,
        risk_bound=chosen.risk_bound,
        guarantee=tau ** -2,
        ladder_kappa_half=tuple(float(k) for k in ladder.kappa_half),
    )


def identify(pair: PopulationPair, tau: float) -> IdentifiabilityReport:
    return identifiable_parameter(truncation_ladder(relevant_subspace(pair)), tau)


def perturbation_size(pert_mat, pert_vec, ref_mat, ref_vec) -> float:
    """``max(||A~ - A|| / ||A||, ||b~ - b|| / ||b||)`` relative to the reference pair."""
    a_ref = np.asarray(ref_mat.matrix if isinstance(ref_mat, SymPsd) else ref_mat, dtype=float)
    a_pert = np.asarray(pert_mat.matrix if isinstance(pert_mat, SymPsd) else pert_mat, dtype=float)
    b_ref = np.asarray(ref_vec, dtype=float)
    b_pert = np.asarray(pert_vec, dtype=float)
    if a_ref.shape != a_pert.shape or b_ref.shape != b_pert.shape:
        raise ValidationError("perturbed and reference pairs have different shapes")
    na = sym_op_norm(a_ref)
    nb = float(np.linalg.norm(b_ref))
    if na == 0.0 or nb == 0.0:
        raise ZeroReference("reference matrix or vector is zero")
    return max(sym_op_norm(a_pert - a_ref) / na, float(np.linalg.norm(b_pert - b_ref)) / nb)


def rel_eps_bound(ladder: TruncationLadder, s: int) -> float:
    """Upper bound on the distance between the relevant pair and level ``s``."""
    lv = ladder.level(s)
    if math.isinf(lv.kappa_next):
        return 0.0
    ratio = float(np.linalg.norm(lv.beta_perp) / np.linalg.norm(lv.beta_s))
    return max(1.0 / lv.kappa_next, lv.kappa / lv.kappa_next * ratio)


def relative_prediction_risk(pair: PopulationPair, coef) -> float:
    """``(b_LS - c)' Sigma (b_LS - c) / (||Sigma|| ||b_LS||^2)``."""
    beta = pair.beta_ls
    d = beta - np.asarray(coef, dtype=float)
    nb2 = float(beta @ beta)
    if nb2 == 0.0:
        raise ZeroReference("least-squares coefficients vanish")
    return float(d @ pair.sigma_mat.matrix @ d) / (pair.sigma_mat.op_norm * nb2)
