"""Datasets, sample moments and empirical complexity diagnostics."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import BadMomentOrder, EmptyData, OutOfRange, ValidationError
from .population import PopulationPair, perturbation_size
from .spectral import DEFAULT_TOL, SymPsd, ToleranceConfig, effective_rank


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix ``X`` (rows are observations) and response ``y``."""

    X: np.ndarray
    y: np.ndarray
    centered: bool = False

    def __post_init__(self):
        x = np.array(self.X, dtype=float, copy=True)
        y = np.array(self.y, dtype=float, copy=True).reshape(-1)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise ValidationError("X must be two-dimensional")
        if x.shape[0] == 0 or x.shape[1] == 0:
            raise EmptyData("dataset has no rows or no columns")
        if y.shape[0] != x.shape[0]:
            raise ValidationError(f"X has {x.shape[0]} rows but y has {y.shape[0]} entries")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValidationError("dataset has non-finite entries")
        if self.centered:
            scale = max(1.0, float(np.max(np.abs(x))), float(np.max(np.abs(y))))
            if np.max(np.abs(x.mean(axis=0))) > 1e-8 * scale or abs(y.mean()) > 1e-8 * scale:
                raise ValidationError("dataset is flagged centered but its means are not zero")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def center(self) -> "Dataset":
        if self.centered:
            return self
        return Dataset(self.X - self.X.mean(axis=0), self.y - self.y.mean(), centered=True)


def sample_moments(data: Dataset, *, center: bool = True, tol: ToleranceConfig = DEFAULT_TOL) -> PopulationPair:
    """``(X'X / n, X'y / n)`` after optional centering."""
    d = data.center() if center else data
    x, y = d.X, d.y
    mat = x.T @ x / d.n
    vec = x.T @ y / d.n
    return PopulationPair(SymPsd(mat, tol, validate=False), vec, tol, validate=False)


def moment_ratio(z: np.ndarray, q: float) -> float:
    """``mean(|z|^q)^(1/q) / mean(z^2)^(1/2)`` along the first axis."""
    z = np.abs(np.asarray(z, dtype=float))
    m2 = np.mean(z * z, axis=0)
    # rescale before powering to avoid overflow
    s = np.max(z, axis=0)
    s = np.where(s > 0, s, 1.0)
    mq = np.mean((z / s) ** q, axis=0) ** (1.0 / q) * s
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(m2 > 0, mq / np.sqrt(m2), np.nan)


@dataclass(frozen=True)
class ComplexityReport:
    n: int
    p: int
    q: float
    r_x: int
    rho_x: float
    rho_xn_hat: float
    delta_n: float
    L_y_hat: float
    L_x_hat: float
    L_norm_hat: float
    sigma_y: float
    K_hat: float
    heavy_tail_rate: float
    constant_c: float
    n_directions: int
    seed: int
    L_x_label: str = "lower-bound estimate"

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def complexity_report(data: Dataset, q: float = 8.0, *, population: PopulationPair | None = None,
                      n_directions: int = 256, seed: int = 0, constant_c: float = 1.0, center: bool = True,
                      tol: ToleranceConfig = DEFAULT_TOL) -> ComplexityReport:
    """Plug-in effective ranks, complexity rate and moment ratios.

    With ``population`` the effective rank, operator norm and ``||sigma||``
    come from the supplied moments; otherwise from the sample moments.
    """
    if not (q > 4) or math.isinf(q):
        raise BadMomentOrder(f"moment order must be a finite number above 4, got {q}")
    if constant_c < 1:
        raise OutOfRange("the absolute constant must be at least 1")
    d = data.center() if center else data
    x, y = d.X, d.y
    n, p = x.shape
    hat = sample_moments(d, center=False, tol=tol)
    ref = population if population is not None else hat
    sig_mat = ref.sigma_mat
    op = sig_mat.op_norm
    if op == 0.0:
        raise EmptyData("covariance is zero; complexity undefined")
    rho_x = effective_rank(sig_mat, tol)
    row_sq = np.einsum("ij,ij->i", x, x)
    rho_xn = float(np.max(row_sq)) / op
    delta_n = math.sqrt(rho_x / n) + rho_xn / n

    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((p, n_directions))
    dirs /= np.linalg.norm(dirs, axis=0)
    ratios = moment_ratio(x @ np.hstack([dirs, np.eye(p)]), q)
    L_x = float(np.nanmax(ratios)) if np.any(np.isfinite(ratios)) else float("nan")
    L_y = float(moment_ratio(y[:, None], q)[0])
    norms = np.sqrt(row_sq)
    L_norm = float(moment_ratio(norms[:, None], q)[0] ** 2)
    sigma_y = float(np.sqrt(np.mean(y * y)))
    nvec = float(np.linalg.norm(ref.sigma_vec))
    k_data = L_y * L_x * sigma_y * math.sqrt(op) / nvec if nvec > 0 else math.inf
    K = max(constant_c, k_data)
    rate = math.sqrt(rho_x / n) * (1.0 + L_norm * math.sqrt(rho_x / n ** ((q - 4.0) / q)))
    return ComplexityReport(
        n=n, p=p, q=float(q), r_x=sig_mat.rank, rho_x=rho_x, rho_xn_hat=rho_xn, delta_n=delta_n,
        L_y_hat=L_y, L_x_hat=L_x, L_norm_hat=L_norm, sigma_y=sigma_y, K_hat=K, heavy_tail_rate=rate,
        constant_c=float(constant_c), n_directions=int(n_directions), seed=int(seed),
    )


@dataclass(frozen=True)
class EventReport:
    n: int
    nu: float
    K: float
    delta_n: float
    threshold: float
    n_trials: int
    frequency: float
    target: float
    seed: int
    epsilons: tuple

    @property
    def meets_target(self) -> bool:
        return self.frequency >= self.target

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["epsilons"] = list(self.epsilons)
        out["meets_target"] = self.meets_target
        return out


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for trial ``index`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def parallel_map(fn, items, threads: int = 1) -> list:
    """Order-preserving map; results never depend on ``threads``."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def perturbation_event_check(generator, pair: PopulationPair, n: int, nu: float, K: float, n_trials: int,
                             seed: int, *, q: float = 8.0, delta_n: float | None = None, center: bool = False,
                             threads: int = 1) -> EventReport:
    """Monte Carlo frequency of ``{eps_hat <= K delta_n / nu}``.

    ``generator(rng, n)`` returns ``(X, y)``. Unless given, ``delta_n`` uses
    the population effective rank and a Monte Carlo estimate of the uniform
    effective rank pooled over the same trials.
    """
    if not 0 < nu < 0.5:
        raise OutOfRange("nu must lie in (0, 1/2)")
    if n < 1 or n_trials < 1:
        raise EmptyData("need at least one observation and one trial")
    if not (q > 4):
        raise BadMomentOrder("moment order must exceed 4")

    def one(i):
        x, y = generator(trial_rng(seed, i), n)
        hat = sample_moments(Dataset(x, y), center=center)
        eps = perturbation_size(hat.sigma_mat, hat.sigma_vec, pair.sigma_mat, pair.sigma_vec)
        max_norm = float(np.max(np.linalg.norm(np.asarray(x, dtype=float), axis=1)))
        return eps, max_norm

    results = parallel_map(one, range(n_trials), threads)
    eps = np.array([r[0] for r in results])
    if delta_n is None:
        op = pair.sigma_mat.op_norm
        rho_x = effective_rank(pair.sigma_mat)
        maxes = np.array([r[1] for r in results])
        scale = np.max(maxes)
        rho_xn = (np.mean((maxes / scale) ** q) ** (2.0 / q)) * scale ** 2 / op
        delta_n = math.sqrt(rho_x / n) + rho_xn / n
    threshold = K * delta_n / nu
    freq = float(np.mean(eps <= threshold))
    return EventReport(n, float(nu), float(K), float(delta_n), float(threshold), int(n_trials), freq,
                       1.0 - 2.0 * nu, int(seed), tuple(float(e) for e in eps))
