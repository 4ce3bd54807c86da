"""Stability constants and evaluation of the perturbation bounds.

Every check returns a :class:`BoundReport`. A bound is only asserted when
its preconditions hold; otherwise ``holds`` is ``None``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .algorithms import Kind, SolutionRule, check_adaptive, check_parsimonious, run
from .errors import DegenerateProjection, DofNotAttained, NotInterpretable, OutOfRange, ThresholdViolated
from .population import (
    PopulationPair,
    identifiable_parameter,
    perturbation_size,
    relevant_subspace,
    truncation_ladder,
)
from .sample import Dataset, complexity_report, parallel_map, sample_moments, trial_rng
from .spectral import DEFAULT_TOL, SymPsd, ToleranceConfig, as_sym_psd, condition_number, sym_op_norm
from .subspaces import Subspace, principal_angle, projector_distance

# relative slack when comparing an observed error to a bound in floating point
FP_SLACK = 1e-9
ABS_SLACK = 1e-12


@dataclass(frozen=True)
class BoundReport:
    name: str
    epsilon: float
    m_constant: float
    bound_value: float
    observed_error: float
    precondition_met: bool
    status: str = "ok"
    extra: dict = field(default_factory=dict)

    @property
    def holds(self):
        if not self.precondition_met:
            return None
        return bool(self.observed_error <= self.bound_value * (1 + FP_SLACK) + ABS_SLACK)

    @property
    def ratio(self) -> float:
        if self.bound_value > 0:
            return self.observed_error / self.bound_value
        return 0.0 if self.observed_error <= ABS_SLACK else math.inf

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "epsilon": self.epsilon,
            "m_constant": self.m_constant,
            "bound_value": self.bound_value,
            "observed_error": self.observed_error,
            "precondition_met": self.precondition_met,
            "holds": self.holds,
            "status": self.status,
            "extra": self.extra,
        }


def _rel_err(new, ref) -> float:
    nr = float(np.linalg.norm(ref))
    d = float(np.linalg.norm(np.asarray(new) - np.asarray(ref)))
    if nr == 0.0:
        return 0.0 if d == 0.0 else math.inf
    return d / nr


def sample_perturbation(matrix, vector, eps: float, rng: np.random.Generator, *, preserve_range: bool = True,
                        tol: ToleranceConfig = DEFAULT_TOL):
    """Random perturbation of relative size ``eps`` of a PSD pair.

    The matrix direction is a GOE draw scaled to ``eps * ||A||`` in operator
    norm; the vector direction is uniform on the sphere scaled to
    ``eps * ||b||``. With ``preserve_range`` both directions are restricted
    to the range of ``A``. Negative eigenvalues are clipped to keep the
    result PSD.
    """
    a = as_sym_psd(matrix, tol)
    b = np.asarray(vector, dtype=float)
    p = a.dim
    g = rng.standard_normal((p, p))
    e = (g + g.T) / 2.0
    d = rng.standard_normal(p)
    if preserve_range:
        basis = a.spectrum.range_basis
        e = basis @ (basis.T @ e @ basis) @ basis.T
        d = basis @ (basis.T @ d)
    ne = sym_op_norm(e)
    nd = float(np.linalg.norm(d))
    e = e * (eps * a.op_norm / ne) if ne > 0 else e * 0.0
    d = d * (eps * np.linalg.norm(b) / nd) if nd > 0 else d * 0.0
    new = a.matrix + e
    w, v = np.linalg.eigh((new + new.T) / 2.0)
    if w[0] < 0:
        new = (v * np.clip(w, 0.0, None)) @ v.T
    return SymPsd(new, tol, validate=False), b + d


def wei_bound_check(matrix, vector, matrix_pert, vector_pert, tol: ToleranceConfig = DEFAULT_TOL) -> BoundReport:
    """Least-squares perturbation bound ``5 kappa(A) eps``."""
    a = as_sym_psd(matrix, tol)
    at = as_sym_psd(matrix_pert, tol)
    b = np.asarray(vector, dtype=float)
    bt = np.asarray(vector_pert, dtype=float)
    eps = perturbation_size(at, bt, a, b)
    kappa = condition_number(a, tol)
    zeta = a.pinv @ b
    zeta_t = at.pinv @ bt
    rank_ok = a.rank == at.rank
    in_range = at.range_residual(bt) <= tol.range_tol
    small = eps <= 1.0 / (2.0 * kappa)
    return BoundReport(
        name="wei",
        epsilon=eps,
        m_constant=5.0 * kappa,
        bound_value=5.0 * kappa * eps,
        observed_error=_rel_err(zeta_t, zeta),
        precondition_met=bool(rank_ok and in_range and small),
        extra={"kappa": kappa, "rank_equal": rank_ok, "in_range": in_range, "eps_small": small},
    )


@dataclass(frozen=True)
class StabilityEstimate:
    kind: str
    r: int
    c_hat: float
    d_hat: float
    n_samples: int
    n_preserved: int
    eps_probe: float
    seed: int
    max_ratio_witness: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _probe(kind, a, b, r, base_sub, eps, rng, tol, preserve_range):
    at, bt = sample_perturbation(a, b, eps, rng, preserve_range=preserve_range, tol=tol)
    actual = perturbation_size(at, bt, a, b)
    try:
        step = run(kind, at, bt, tol, check_range=False).step_at_dof(r)
    except DofNotAttained:
        return None
    if actual == 0.0:
        return 0.0, 0.0, actual
    dev = projector_distance(step.subspace, base_sub)
    ang = principal_angle(step.subspace, base_sub)
    return dev / actual, ang / actual, actual


def estimate_stability_constant(kind, matrix, vector, r: int, eps_probe: float = 1e-6, n_samples: int = 64,
                                seed: int = 0, *, tol: ToleranceConfig = DEFAULT_TOL, threads: int = 1,
                                preserve_range: bool = True) -> StabilityEstimate:
    """Seeded Monte Carlo lower estimate of the stability constants at dof ``r``.

    ``c_hat`` is ``1`` or the largest ``||U~ - U|| / eps`` over the probes,
    ``d_hat`` the same for the largest principal angle. Probes whose
    perturbed path skips dof ``r`` are counted but otherwise ignored.
    """
    kind = Kind(kind)
    a = as_sym_psd(matrix, tol)
    b = np.asarray(vector, dtype=float)
    base = run(kind, a, b, tol, check_range=False).step_at_dof(r).subspace

    def one(i):
        return _probe(kind, a, b, r, base, eps_probe, trial_rng(seed, i), tol, preserve_range)

    results = parallel_map(one, range(n_samples), threads)
    kept = [(i, res) for i, res in enumerate(results) if res is not None]
    c_hat, d_hat, witness = 1.0, 1.0, -1
    for i, (rc, rd, _) in kept:
        if rc > c_hat:
            c_hat, witness = rc, i
        d_hat = max(d_hat, rd)
    fp = hashlib.sha256(f"{seed}:{witness}:{eps_probe}".encode()).hexdigest()[:16]
    return StabilityEstimate(kind.value, int(r), float(c_hat), float(d_hat), int(n_samples), len(kept),
                             float(eps_probe), int(seed), fp if witness >= 0 else "none")


def _as_subspace(u, p: int, tol: ToleranceConfig) -> Subspace:
    if isinstance(u, Subspace):
        return u
    m = np.asarray(u, dtype=float)
    if m.shape == (p, p):
        w, v = np.linalg.eigh((m + m.T) / 2)
        return Subspace(v[:, w > 0.5], tol)
    return Subspace(m, tol)


def m_constant(c_a: float, matrix, vector, u, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """``2 kappa(A_U) (4 c + 1) max(||A|| / ||A_U||, ||b|| / ||b_U||)``.

    ``u`` is a :class:`Subspace`, an orthonormal basis or a projector.
    """
    a = as_sym_psd(matrix, tol)
    b = np.asarray(vector, dtype=float)
    sub = _as_subspace(u, a.dim, tol)
    if sub.dim == 0:
        raise DegenerateProjection("empty subspace")
    small = sub.basis.T @ a.matrix @ sub.basis
    w = np.linalg.eigvalsh((small + small.T) / 2)[::-1]
    bu = np.linalg.norm(sub.basis.T @ b)
    if w[0] <= 0 or bu == 0.0:
        raise DegenerateProjection("projected matrix or vector vanishes")
    pos = w[w > tol.rank_tol * w[0]]
    kappa_u = float(pos[0] / pos[-1])
    ratio = max(a.op_norm / w[0], float(np.linalg.norm(b)) / bu)
    return 2.0 * kappa_u * (4.0 * float(c_a) + 1.0) * ratio


def algorithm_perturbation_check(kind, matrix, vector, matrix_pert, vector_pert, r: int, c_a: float,
                                 tol: ToleranceConfig = DEFAULT_TOL, *, rule=SolutionRule.REDUCED) -> BoundReport:
    """Bound ``(5/2) M eps`` on the coefficient error at dof ``r``."""
    kind = Kind(kind)
    a = as_sym_psd(matrix, tol)
    at = as_sym_psd(matrix_pert, tol)
    b = np.asarray(vector, dtype=float)
    bt = np.asarray(vector_pert, dtype=float)
    eps = perturbation_size(at, bt, a, b)
    base = run(kind, a, b, tol, rule=rule, check_range=False).step_at_dof(r)
    try:
        pert = run(kind, at, bt, tol, rule=rule, check_range=False).step_at_dof(r)
    except DofNotAttained:
        return BoundReport("algorithm", eps, math.nan, math.nan, math.nan, False, "dof_not_preserved",
                           {"kind": kind.value, "r": r})
    m = m_constant(c_a, a, b, base.subspace, tol)
    dev = projector_distance(pert.subspace, base.subspace)
    ang = principal_angle(pert.subspace, base.subspace)

    def proj_rank(mat, sub):
        small = sub.basis.T @ mat.matrix @ sub.basis
        w = np.linalg.eigvalsh((small + small.T) / 2)
        return int(np.sum(w > tol.rank_tol * max(w[-1], 1e-300))) if w.size else 0

    rank_ok = proj_rank(a, base.subspace) == proj_rank(at, pert.subspace) == r
    stable = dev <= c_a * eps * (1 + FP_SLACK) + 1e-15
    small = m * eps < 1.0
    return BoundReport(
        name="algorithm",
        epsilon=eps,
        m_constant=m,
        bound_value=2.5 * m * eps,
        observed_error=_rel_err(pert.solution, base.solution),
        precondition_met=bool(rank_ok and stable and small),
        status="ok" if small else "threshold_violated",
        extra={"kind": kind.value, "r": int(r), "c_a": float(c_a), "projector_deviation": dev,
               "c_eps": c_a * eps, "principal_angle": ang, "d_eps": math.pi / 2 * c_a * eps,
               "rank_preserved": rank_ok, "stable": stable, "rule": SolutionRule(rule).value},
    )


def _oracle(kind, pair: PopulationPair, tau: float, rule, c_a, n_samples, eps_probe, seed):
    ladder = truncation_ladder(relevant_subspace(pair))
    ident = identifiable_parameter(ladder, tau)
    lv = ladder.level(ident.s_star)
    mat_s = SymPsd(lv.sigma_s, pair.tol, validate=False)
    oracle = run(kind, mat_s, lv.sigma_vec_s, pair.tol, rule=rule, check_range=False)
    r_star = oracle.terminal.dof
    if c_a is None:
        c_a = estimate_stability_constant(kind, mat_s, lv.sigma_vec_s, r_star, eps_probe, n_samples, seed,
                                          tol=pair.tol).c_hat
    m_star = m_constant(c_a, mat_s, lv.sigma_vec_s, oracle.terminal.subspace, pair.tol)
    rel = ladder.relevant
    eps_star = perturbation_size(rel.sigma_y, rel.sigma_vec_y, lv.sigma_s, lv.sigma_vec_s)
    return ladder, ident, lv, oracle, r_star, float(c_a), m_star, eps_star


def oracle_terminal_dof(kind, pair: PopulationPair, tau: float, rule=SolutionRule.PROJECTED) -> int:
    """Terminal dof of the algorithm run on the identifiable level's pair."""
    ladder = truncation_ladder(relevant_subspace(pair))
    lv = ladder.level(identifiable_parameter(ladder, tau).s_star)
    path = run(kind, SymPsd(lv.sigma_s, pair.tol, validate=False), lv.sigma_vec_s, pair.tol, rule=rule,
               check_range=False)
    return path.terminal.dof


def population_error_report(kind, pair: PopulationPair, tau: float, *, rule=None, c_a: float | None = None,
                            n_samples: int = 32, eps_probe: float = 1e-6, seed: int = 0,
                            strict: bool = False) -> BoundReport:
    """Population error against the identifiable parameter, bound ``(5/2) M* eps*``.

    Requires the algorithm to be adaptive and parsimonious at the chosen
    level; otherwise the observed error is still reported, flagged
    ``not_interpretable``. ``strict`` turns failed checks into exceptions.
    """
    kind = Kind(kind)
    ladder, ident, lv, oracle, r_star, c_a, m_star, eps_star = _oracle(
        kind, pair, tau, rule, c_a, n_samples, eps_probe, seed)
    adaptive = check_adaptive(kind, pair, rule=rule)
    parsimonious = check_parsimonious(kind, pair, [ident.s_star], rule=rule)
    full = run(kind, pair.sigma_mat, pair.sigma_vec, pair.tol, rule=rule, check_range=False)
    step = full.step_at_dof(r_star, allow_next=True)
    observed = _rel_err(step.solution, lv.beta_s)
    interpretable = adaptive.holds and parsimonious.holds
    small = m_star * eps_star < 1.0
    status = "ok" if interpretable and small else ("not_interpretable" if not interpretable else "threshold_violated")
    if strict and not interpretable:
        raise NotInterpretable(f"{kind.value} is not adaptive and parsimonious at level {ident.s_star}")
    if strict and not small:
        raise ThresholdViolated(f"M* eps* = {m_star * eps_star:.3g} is not below 1")
    return BoundReport(
        name="population",
        epsilon=eps_star,
        m_constant=m_star,
        bound_value=2.5 * m_star * eps_star,
        observed_error=observed,
        precondition_met=bool(interpretable and small),
        status=status,
        extra={"kind": kind.value, "tau": float(tau), "s_star": ident.s_star, "r_star": r_star,
               "dof_used": step.dof, "c_a": c_a, "adaptive": adaptive.holds, "parsimonious": parsimonious.holds},
    )


def sample_error_report(kind, pair: PopulationPair, data: Dataset, r: int, nu: float, *, c_a: float,
                        K: float | None = None, q: float = 8.0, center: bool = False, seed: int = 0,
                        rule=SolutionRule.REDUCED) -> BoundReport:
    """Sample error against the population algorithm at dof ``r``.

    The bound ``(5/2) M eps_hat`` is asserted on the event
    ``eps_hat <= K delta_n / nu`` with ``K M delta_n < nu < 1/2``.
    """
    if not 0 < nu < 0.5:
        raise OutOfRange("nu must lie in (0, 1/2)")
    hat = sample_moments(data, center=center, tol=pair.tol)
    comp = complexity_report(data, q, population=pair, seed=seed, center=center, tol=pair.tol)
    K = comp.K_hat if K is None else float(K)
    rep = algorithm_perturbation_check(kind, pair.sigma_mat, pair.sigma_vec, hat.sigma_mat, hat.sigma_vec,
                                       r, c_a, pair.tol, rule=rule)
    threshold = K * comp.delta_n / nu
    event = rep.epsilon <= threshold
    large_n = K * rep.m_constant * comp.delta_n < nu if math.isfinite(rep.m_constant) else False
    extra = dict(rep.extra)
    extra.update({"K": K, "delta_n": comp.delta_n, "nu": float(nu), "event": event, "threshold": threshold,
                  "large_n": large_n})
    return BoundReport("sample", rep.epsilon, rep.m_constant, rep.bound_value, rep.observed_error,
                       bool(rep.precondition_met and event and large_n), rep.status, extra)


def early_stopping_report(kind, pair: PopulationPair, r: int, target_dof: int | None = None, *, tau: float = 10.0,
                          rule=SolutionRule.PROJECTED, c_a: float | None = None, data: Dataset | None = None,
                          nu: float = 0.1, K: float | None = None, q: float = 8.0, n_samples: int = 32,
                          eps_probe: float = 1e-6, seed: int = 0) -> BoundReport:
    """Error after stopping at dof ``r`` before the terminal dof.

    Population form: ``||beta^(r) - beta_s|| / ||beta_s||`` against
    ``sqrt(r* - r) + (5/2) M* eps*``. With ``data`` the sample form:
    ``||beta_hat^(r) - beta_A|| / ||beta_A||`` against
    ``sqrt(r_A - r) + (5/2) K M {sqrt(rho_x / (n nu^2)) + rho_xn / (n nu)}``.
    """
    kind = Kind(kind)
    if data is None:
        ladder, ident, lv, oracle, r_star, c_a, m_star, eps_star = _oracle(
            kind, pair, tau, rule, c_a, n_samples, eps_probe, seed)
        top = r_star if target_dof is None else int(target_dof)
        if not 0 <= r <= top:
            raise OutOfRange(f"r = {r} outside 0..{top}")
        full = run(kind, pair.sigma_mat, pair.sigma_vec, pair.tol, rule=rule, check_range=False)
        coef = full.step_at_dof(r).solution
        observed = _rel_err(coef, lv.beta_s)
        small = m_star * eps_star < 1.0
        bound = math.sqrt(top - r) + 2.5 * m_star * eps_star
        return BoundReport("early_stopping_population", eps_star, m_star, bound, observed, bool(small),
                           "ok" if small else "threshold_violated",
                           {"kind": kind.value, "r": int(r), "target_dof": top, "c_a": c_a})
    full = run(kind, pair.sigma_mat, pair.sigma_vec, pair.tol, rule=rule, check_range=False)
    top = full.terminal.dof if target_dof is None else int(target_dof)
    if not 0 <= r <= top:
        raise OutOfRange(f"r = {r} outside 0..{top}")
    target = full.step_at_dof(top)
    if c_a is None:
        c_a = estimate_stability_constant(kind, pair.sigma_mat, pair.sigma_vec, top, eps_probe, n_samples, seed,
                                          tol=pair.tol).c_hat
    m = m_constant(c_a, pair.sigma_mat, pair.sigma_vec, target.subspace, pair.tol)
    comp = complexity_report(data, q, population=pair, seed=seed, center=False, tol=pair.tol)
    K = comp.K_hat if K is None else float(K)
    hat = sample_moments(data, center=False, tol=pair.tol)
    try:
        coef = run(kind, hat.sigma_mat, hat.sigma_vec, pair.tol, rule=rule, check_range=False).step_at_dof(r).solution
    except DofNotAttained:
        return BoundReport("early_stopping_sample", math.nan, m, math.nan, math.nan, False, "dof_not_preserved", {})
    eps_hat = perturbation_size(hat.sigma_mat, hat.sigma_vec, pair.sigma_mat, pair.sigma_vec)
    n = data.n
    rate = math.sqrt(comp.rho_x / (n * nu * nu)) + comp.rho_xn_hat / (n * nu)
    bound = math.sqrt(top - r) + 2.5 * K * m * rate
    event = eps_hat <= K * comp.delta_n / nu
    large_n = K * m * comp.delta_n < 0.5
    return BoundReport("early_stopping_sample", eps_hat, m, bound, _rel_err(coef, target.solution),
                       bool(event and large_n), "ok",
                       {"kind": kind.value, "r": int(r), "target_dof": top, "K": K, "event": event,
                        "large_n": large_n, "c_a": float(c_a)})


def ladder_risk_reports(pair: PopulationPair) -> list:
    """Relative prediction risk of each truncation level against its bound."""
    ladder = truncation_ladder(relevant_subspace(pair))
    return [BoundReport("relative_risk", math.nan, lv.kappa_next, lv.risk_bound, lv.risk, True,
                        extra={"s": lv.s}) for lv in ladder.levels]
