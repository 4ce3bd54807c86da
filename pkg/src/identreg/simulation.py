"""Latent-factor simulation with an ill-posed relevant block and large irrelevant variance."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .algorithms import Kind, SolutionRule, fit_at_dof
from .errors import ConfigInvalid, ValidationError
from .population import PopulationPair
from .sample import Dataset, parallel_map, sample_moments, trial_rng
from .spectral import DEFAULT_TOL, SymPsd, ToleranceConfig


def _log_ladder(start: float, stop: float, k: int, shape: float = 1.0) -> np.ndarray:
    """Strictly decreasing ladder from ``start`` to ``stop``.

    ``log10`` of the entries moves along ``t ** shape`` for ``t`` evenly
    spaced in ``[0, 1]``; ``shape = 1`` is plain log-linear spacing.
    """
    if k == 1:
        return np.array([start], dtype=float)
    t = np.linspace(0.0, 1.0, k) ** shape
    return 10.0 ** (math.log10(start) + (math.log10(stop) - math.log10(start)) * t)


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings; defaults reproduce the full-scale study.

    ``perp_shape`` bends the irrelevant ladder (see ``_log_ladder``). The
    default 0.42 keeps both endpoints and gives a population effective rank
    close to 2; plain log-linear spacing (1.0) gives about 29.
    """

    n: int = 200
    p: int = 1000
    r_y: int = 100
    r: int = 5
    reps: int = 50
    sigma_q_range: tuple = (5.0, 1.0)
    sigma0_range: tuple = (1e-1, 1e-6)
    sigma_perp_range: tuple = (10.0, 1e-6)
    perp_shape: float = 0.42
    sigma0_scale: float = 1.0
    noise_sd: float = 1.0
    rotation_seed: int = 0
    data_seed: int = 0

    def __post_init__(self):
        for name in ("n", "p", "r_y", "r", "reps"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigInvalid(f"{name} must be a positive integer, got {v!r}")
        if not self.r <= self.r_y <= self.p:
            raise ConfigInvalid("need r <= r_y <= p")
        for name in ("sigma_q_range", "sigma0_range", "sigma_perp_range"):
            hi, lo = getattr(self, name)
            if not (hi > lo > 0):
                raise ConfigInvalid(f"{name} must be strictly decreasing and positive")
        if not (self.perp_shape > 0 and self.sigma0_scale > 0 and self.noise_sd >= 0):
            raise ConfigInvalid("perp_shape and sigma0_scale must be positive, noise_sd non-negative")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "SimConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(mapping) - names
        if unknown:
            raise ConfigInvalid(f"unknown simulation keys: {sorted(unknown)}")
        vals = dict(mapping)
        for k in ("sigma_q_range", "sigma0_range", "sigma_perp_range"):
            if k in vals:
                vals[k] = tuple(float(x) for x in vals[k])
        return cls(**vals)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k in ("sigma_q_range", "sigma0_range", "sigma_perp_range"):
            d[k] = list(d[k])
        return d

    @property
    def sigma_q(self) -> np.ndarray:
        hi, lo = self.sigma_q_range
        return np.linspace(hi, lo, self.r) if self.r > 1 else np.array([hi])

    @property
    def sigma0(self) -> np.ndarray:
        return self.sigma0_scale * _log_ladder(*self.sigma0_range, self.r_y)

    @property
    def sigma_perp(self) -> np.ndarray:
        return _log_ladder(*self.sigma_perp_range, self.p - self.r_y, self.perp_shape)

    @property
    def alpha(self) -> np.ndarray:
        return np.arange(1, self.r + 1, dtype=float)

    @property
    def latent_variances(self) -> np.ndarray:
        """Diagonal of the latent feature covariance, relevant block first."""
        s0 = self.sigma0 ** 2
        rel = s0.copy()
        rel[: self.r] += self.sigma_q ** 2
        return np.concatenate([rel, self.sigma_perp ** 2])


@lru_cache(maxsize=4)
def _rotation(p: int, seed: int) -> np.ndarray:
    g = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED])).standard_normal((p, p))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))
    q.setflags(write=False)
    return q


def rotation(cfg: SimConfig) -> np.ndarray:
    """Deterministic orthonormal ``p x p`` matrix (seeded QR, positive R diagonal)."""
    return _rotation(cfg.p, cfg.rotation_seed)


def oracle_beta(cfg: SimConfig) -> np.ndarray:
    return rotation(cfg)[:, : cfg.r] @ cfg.alpha


def population_moments(cfg: SimConfig, tol: ToleranceConfig = DEFAULT_TOL) -> PopulationPair:
    u = rotation(cfg)
    d = cfg.latent_variances
    cov = (u * d) @ u.T
    vec = u[:, : cfg.r] @ (cfg.sigma_q ** 2 * cfg.alpha)
    return PopulationPair(SymPsd(cov, tol, validate=False), vec, tol, validate=False)


def population_summary(cfg: SimConfig) -> dict:
    d = cfg.latent_variances
    sq = cfg.sigma_q
    return {
        "rho_x": float(d.sum() / d.max()),
        "kappa_half_q": float(sq[0] / sq[-1]),
        "beta_norm": float(np.linalg.norm(cfg.alpha)),
        "sigma0_max": float(cfg.sigma0[0]),
        "gap_bound": float(5 * cfg.sigma0[0] ** 2),
    }


def generate_simulation(cfg: SimConfig, rep: int = 0):
    """One dataset, the oracle coefficients and a population summary."""
    rng = trial_rng(cfg.data_seed, rep)
    n, r, ry, p = cfg.n, cfg.r, cfg.r_y, cfg.p
    q = rng.standard_normal((n, r)) * cfg.sigma_q
    qy = rng.standard_normal((n, ry)) * cfg.sigma0
    qy[:, :r] += q
    qperp = rng.standard_normal((n, p - ry)) * cfg.sigma_perp
    x = np.hstack([qy, qperp]) @ rotation(cfg).T
    y = q @ cfg.alpha + cfg.noise_sd * rng.standard_normal(n)
    return Dataset(x, y), oracle_beta(cfg), population_summary(cfg)


@dataclass(frozen=True)
class StudyResult:
    config: dict
    s_star: int
    methods: tuple
    records: tuple
    metadata: dict = field(default_factory=dict)

    def values(self, method: str, metric: str) -> np.ndarray:
        return np.array([v for m, _, k, v in self.records if m == method and k == metric])

    def summary(self) -> dict:
        out = {}
        for m in self.methods:
            for metric in ("estimation_error", "approximation_error"):
                v = self.values(m, metric)
                out[f"{m}.{metric}"] = {
                    "median": float(np.median(v)),
                    "q25": float(np.quantile(v, 0.25)),
                    "q75": float(np.quantile(v, 0.75)),
                    "min": float(v.min()),
                    "max": float(v.max()),
                }
        return out

    def to_rows(self) -> list:
        return [{"method": m, "rep": rep, "metric": k, "value": v} for m, rep, k, v in self.records]


def run_study(cfg: SimConfig, methods=("pls", "pcr", "fss"), s_star: int = 5, *, threads: int = 1,
              rule=SolutionRule.REDUCED, center: bool = True, tol: ToleranceConfig = DEFAULT_TOL) -> StudyResult:
    """Fit each method at dof ``s_star`` on every replication.

    Coefficients use the restricted least-squares rule, the usual fitted
    estimator for all three methods.
    """
    if s_star < 1:
        raise ValidationError("s_star must be at least 1")
    kinds = tuple(Kind(m) for m in methods)

    def one(rep):
        data, beta, _ = generate_simulation(cfg, rep)
        hat = sample_moments(data, center=center, tol=tol)
        xb = data.X @ beta
        rows = []
        for kind in kinds:
            step = fit_at_dof(kind, hat.sigma_mat, hat.sigma_vec, s_star, tol, rule=rule, check_range=False)
            est = float(np.linalg.norm(step.solution - beta) / np.linalg.norm(beta))
            app = float(np.linalg.norm(data.X @ step.solution - xb) / np.linalg.norm(xb))
            rows.append((kind.value, rep, "estimation_error", est))
            rows.append((kind.value, rep, "approximation_error", app))
            rows.append((kind.value, rep, "dof", float(step.dof)))
        return rows

    per_rep = parallel_map(one, range(cfg.reps), threads)
    records = tuple(row for rows in per_rep for row in rows)
    meta = {
        "sparse_method": "fss (forward selection at matched dof, standing in for elastic net)",
        "coefficient_rule": SolutionRule(rule).value,
        "centered": center,
    }
    return StudyResult(cfg.to_dict(), int(s_star), tuple(k.value for k in kinds), records, meta)
