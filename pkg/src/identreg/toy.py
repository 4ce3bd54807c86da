"""Three-feature toy model with a nearly collinear pair and a dominant irrelevant feature.

``Sigma(rho) = [[1, rho, 0], [rho, 1, 0], [0, 0, 2]]`` and the response
depends only on the first two features through ``(beta1, beta2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .algorithms import Kind, SolutionRule, run
from .errors import ConfigInvalid, UnsupportedBranch
from .population import PopulationPair, relative_prediction_risk, relevant_subspace, truncation_ladder
from .spectral import SymPsd


@dataclass(frozen=True)
class ToyConfig:
    beta1: float = 1.0
    beta2: float = 0.0
    rho: float = 0.98
    noise_var: float = 1.0

    def __post_init__(self):
        for name in ("beta1", "beta2", "rho", "noise_var"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigInvalid(f"{name} must be finite")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigInvalid(f"rho must lie in [0, 1], got {self.rho}")
        if self.noise_var <= 0:
            raise ConfigInvalid("noise_var must be positive")
        if self.beta1 == 0 and self.beta2 == 0:
            raise ConfigInvalid("beta1 and beta2 cannot both vanish")

    @property
    def beta(self) -> np.ndarray:
        return np.array([self.beta1, self.beta2, 0.0])

    @property
    def covariance(self) -> np.ndarray:
        r = self.rho
        return np.array([[1.0, r, 0.0], [r, 1.0, 0.0], [0.0, 0.0, 2.0]])


def toy_population(cfg: ToyConfig) -> PopulationPair:
    cov = cfg.covariance
    return PopulationPair(SymPsd(cov), cov @ cfg.beta)


def toy_identifiability(cfg: ToyConfig) -> dict:
    """Closed-form half-condition numbers and the level-1 risk bound."""
    r, b1, b2 = cfg.rho, cfg.beta1, cfg.beta2
    kappa2 = math.inf if r == 1.0 else (1 + r) / (1 - r)
    return {
        "kappa_half_1": 1.0,
        "kappa_half_2": math.sqrt(kappa2),
        "kappa_sigma_y": kappa2,
        "eps1_bound": (1 - r) / (1 + r) * (b1 - b2) ** 2 / (2 * (b1 ** 2 + b2 ** 2)),
        "limit_gap": (1 - r) * (b1 - b2) ** 2 / 2,
    }


def toy_oracle(cfg: ToyConfig) -> dict:
    """Closed-form dof-1 errors of PCR, sparse selection and PLS.

    Only the branch ``beta2 = 0`` has closed forms; errors are relative to
    the level-1 parameter ``(beta1 / 2)(1, 1, 0)``.
    """
    if cfg.beta2 != 0.0:
        raise UnsupportedBranch("closed-form errors are available only for beta2 = 0")
    r = cfg.rho
    out = {
        "delta_pcr": 1.0,
        "delta_spr": 1.0,
        "delta_pls": (1 - r) * math.sqrt((1 + r) ** 2 + (1 - r) ** 2) / (math.sqrt(2) * (1 + r * r)),
        "eps_pcr": 0.5,
        "eps_spr": 0.0,
        "eps_pls": r * r * (1 - r * r) / (2 * (1 + r * r) ** 2),
        "beta_1": [cfg.beta1 / 2, cfg.beta1 / 2, 0.0],
        "beta_pls": [cfg.beta1 / (1 + r * r), r * cfg.beta1 / (1 + r * r), 0.0],
    }
    out.update(toy_identifiability(cfg))
    return out


def toy_framework(cfg: ToyConfig, rule=SolutionRule.PROJECTED) -> dict:
    """The same dof-1 errors computed by running the algorithms.

    The closed forms project the least-squares solution onto each
    algorithm's first subspace, hence the default coefficient rule.
    """
    pair = toy_population(cfg)
    ladder = truncation_ladder(relevant_subspace(pair))
    target = ladder.level(1).beta_s
    out = {}
    for kind, name in ((Kind.PCR, "pcr"), (Kind.FSS, "spr"), (Kind.PLS, "pls")):
        coef = run(kind, pair.sigma_mat, pair.sigma_vec, rule=rule).step_at_dof(1, allow_next=True).solution
        out[f"delta_{name}"] = float(np.linalg.norm(coef - target) / np.linalg.norm(target))
        out[f"eps_{name}"] = relative_prediction_risk(pair, coef)
    return out


def toy_generator(cfg: ToyConfig):
    """Sampler ``(rng, n) -> (X, y)`` for Gaussian features and noise."""
    chol = np.linalg.cholesky(cfg.covariance + 1e-300) if cfg.rho < 1 else None
    beta = cfg.beta
    sd = math.sqrt(cfg.noise_var)
    cov = cfg.covariance

    def draw(rng: np.random.Generator, n: int):
        z = rng.standard_normal((n, 3))
        if chol is not None:
            x = z @ chol.T
        else:
            w, v = np.linalg.eigh(cov)
            x = z @ (v * np.sqrt(np.clip(w, 0, None))).T
        y = x @ beta + sd * rng.standard_normal(n)
        return x, y

    return draw
