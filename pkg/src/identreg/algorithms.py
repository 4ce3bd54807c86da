"""Nested-subspace reduction algorithms: PCR, PLS and forward selection.

A run produces subspaces ``C_0 = {0} ⊆ C_1 ⊆ ...`` with ``dim C_s <= s`` and
a coefficient vector in each. Two coefficient rules are available:

``reduced``
    least squares restricted to the subspace, ``(U A U)^+ U b``.
``projected``
    orthogonal projection of the full least-squares solution, ``U A^+ b``.

They coincide when the subspace is invariant under ``A`` (always for PCR)
and at the terminal step; elsewhere they differ in general.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DofNotAttained, NotInRange, ValidationError, ZeroVector
from .population import PopulationPair, relevant_subspace, truncation_ladder
from .spectral import DEFAULT_TOL, SymPsd, ToleranceConfig, as_sym_psd, pinv_sqrt_psd, sqrt_psd
from .subspaces import Subspace, embedding_angle, krylov_basis, principal_angle


class Kind(str, Enum):
    PCR = "pcr"
    PLS = "pls"
    FSS = "fss"


class SolutionRule(str, Enum):
    REDUCED = "reduced"
    PROJECTED = "projected"


DEFAULT_RULE = {Kind.PCR: SolutionRule.REDUCED, Kind.PLS: SolutionRule.REDUCED, Kind.FSS: SolutionRule.PROJECTED}


@dataclass(frozen=True, eq=False)
class ReductionStep:
    s: int
    subspace: Subspace
    solution: np.ndarray

    @property
    def dof(self) -> int:
        return self.subspace.dim

    @property
    def projector(self) -> np.ndarray:
        return self.subspace.projector_matrix


@dataclass(frozen=True, eq=False)
class ReductionPath:
    kind: Kind
    rule: SolutionRule
    steps: tuple
    complete: bool
    zeta_ls: np.ndarray = field(repr=False)

    @property
    def dofs(self) -> list:
        return sorted({st.dof for st in self.steps})

    @property
    def terminal(self) -> ReductionStep:
        return self.steps[-1]

    def step_at_dof(self, r: int, *, allow_next: bool = False) -> ReductionStep:
        for st in self.steps:
            if st.dof == r or (allow_next and st.dof > r):
                return st
        raise DofNotAttained(f"{self.kind.value} path never reaches dof {r} (dofs {self.dofs})")

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.kind.value}|{self.rule.value}|{len(self.steps)}".encode())
        for st in self.steps:
            h.update(np.ascontiguousarray(st.subspace.basis).tobytes())
            h.update(np.ascontiguousarray(st.solution).tobytes())
        return h.hexdigest()

    def representation_gap(self) -> float:
        """Largest relative gap between the reduced and projected coefficients."""
        gap = 0.0
        for st in self.steps:
            proj = st.subspace.project(self.zeta_ls)
            denom = max(np.linalg.norm(proj), np.linalg.norm(st.solution), 1e-300)
            gap = max(gap, float(np.linalg.norm(proj - st.solution) / denom) if st.dof else 0.0)
        return gap


def _pcr_dims(a: SymPsd, max_steps: int) -> tuple:
    spec = a.spectrum
    cum = np.array([stop for _, stop in spec.clusters], dtype=int)
    dims = []
    for s in range(max_steps + 1):
        ok = cum[cum <= s]
        dims.append(int(ok[-1]) if ok.size else 0)
    return spec.eigenvectors[:, : spec.rank], dims, max_steps >= spec.rank


def _pls_dims(a: SymPsd, b: np.ndarray, max_steps: int, tol, check_range) -> tuple:
    q = krylov_basis(a, b, max_steps, tol, check_range=check_range).basis
    deg = q.shape[1]
    dims = [min(s, deg) for s in range(max_steps + 1)]
    return q, dims, deg < max_steps or max_steps >= a.dim


def _fss_order(a: SymPsd, b: np.ndarray, zeta: np.ndarray, max_steps: int, tol: ToleranceConfig) -> tuple:
    amax = np.max(np.abs(zeta)) if zeta.size else 0.0
    support = np.flatnonzero(np.abs(zeta) > tol.envelope_tol * amax) if amax > 0 else np.array([], dtype=int)
    mat = a.matrix
    diag = np.diag(mat)
    av = np.zeros(a.dim)
    remaining = list(support)
    order = []
    while remaining and len(order) < max_steps:
        idx = np.array(remaining)
        c = zeta[idx]
        # change in E(y - x'v)^2 when coordinate j joins with coefficient c_j
        delta = 2 * c * av[idx] + c * c * diag[idx] - 2 * c * b[idx]
        best = np.min(delta)
        thresh = tol.tie_tol * max(np.max(np.abs(delta)), 1e-300)
        j = int(idx[np.flatnonzero(delta <= best + thresh)[0]])
        order.append(j)
        remaining.remove(j)
        av = av + mat[:, j] * zeta[j]
    return order, len(order) == len(support)


def _reduced_solution(a: SymPsd, b: np.ndarray, basis: np.ndarray, tol: ToleranceConfig) -> np.ndarray:
    if basis.shape[1] == 0:
        return np.zeros(a.dim)
    small = basis.T @ a.matrix @ basis
    w, v = np.linalg.eigh((small + small.T) / 2)
    keep = w > tol.rank_tol * max(w[-1], 1e-300)
    coef = v[:, keep] @ ((v[:, keep].T @ (basis.T @ b)) / w[keep])
    return basis @ coef


def run(kind, matrix, vector, tol: ToleranceConfig = DEFAULT_TOL, *, max_steps: int | None = None,
        rule=None, check_range: bool = True) -> ReductionPath:
    """Run a reduction algorithm on ``(A, b)`` for steps ``0..max_steps``.

    ``max_steps`` defaults to the ambient dimension, which always reaches
    the terminal subspace.
    """
    kind = Kind(kind)
    rule = DEFAULT_RULE[kind] if rule is None else SolutionRule(rule)
    a = as_sym_psd(matrix, tol)
    b = np.asarray(vector, dtype=float).reshape(-1)
    p = a.dim
    if b.shape != (p,):
        raise ValidationError(f"vector length {b.shape[0]} does not match matrix size {p}")
    if not np.any(b):
        raise ZeroVector("cross-covariance vector is zero")
    if check_range and a.range_residual(b) > tol.range_tol:
        raise NotInRange("vector is not in the range of the matrix")
    steps_total = p if max_steps is None else int(max_steps)
    if steps_total < 0:
        raise ValidationError("max_steps must be non-negative")
    zeta_ls = a.pinv @ b

    if kind is Kind.PCR:
        cols, dims, complete = _pcr_dims(a, steps_total)
    elif kind is Kind.PLS:
        cols, dims, complete = _pls_dims(a, b, steps_total, tol, check_range)
    else:
        order, complete = _fss_order(a, b, zeta_ls, steps_total, tol)
        cols = np.eye(p)[:, order] if order else np.zeros((p, 0))
        dims = [min(s, len(order)) for s in range(steps_total + 1)]

    cache = {}
    steps = []
    for s, r in enumerate(dims):
        if r not in cache:
            sub = Subspace(np.ascontiguousarray(cols[:, :r]), tol)
            if rule is SolutionRule.REDUCED:
                sol = _reduced_solution(a, b, sub.basis, tol)
            else:
                sol = sub.project(zeta_ls)
            sol.setflags(write=False)
            cache[r] = (sub, sol)
        sub, sol = cache[r]
        steps.append(ReductionStep(s, sub, sol))
    zeta_ls.setflags(write=False)
    return ReductionPath(kind, rule, tuple(steps), bool(complete), zeta_ls)


def fit_at_dof(kind, matrix, vector, dof: int, tol: ToleranceConfig = DEFAULT_TOL, *, rule=None,
               check_range: bool = True, allow_next: bool = True) -> ReductionStep:
    """Coefficients at a target dof, running only as many steps as needed.

    When the target is skipped (a PCR cluster straddles it) the first step
    whose dof exceeds the target is returned if ``allow_next`` is set.
    """
    a = as_sym_psd(matrix, tol)
    path = run(kind, a, vector, tol, max_steps=min(dof, a.dim), rule=rule, check_range=check_range)
    if dof not in path.dofs and not path.complete:
        path = run(kind, a, vector, tol, rule=rule, check_range=check_range)
    return path.step_at_dof(dof, allow_next=allow_next)


def coefficients_at_dof(path: ReductionPath, r: int, *, allow_next: bool = False) -> np.ndarray:
    return path.step_at_dof(r, allow_next=allow_next).solution


def solution_representations(matrix, vector, subspace: Subspace, tol: ToleranceConfig = DEFAULT_TOL) -> dict:
    """Three candidate formulas for the coefficients on a subspace.

    ``reduced``: ``(U A U)^+ U b``; ``sqrt``: ``(A^(1/2) U)^+ A^(+/2) b``;
    ``projected``: ``U A^+ b``.
    """
    a = as_sym_psd(matrix, tol)
    b = np.asarray(vector, dtype=float)
    u = subspace.projector_matrix
    uau = SymPsd(u @ a.matrix @ u, tol, validate=False)
    reduced = uau.pinv @ (u @ b)
    m = sqrt_psd(a, tol) @ u
    sq = np.linalg.pinv(m, rcond=np.sqrt(tol.rank_tol)) @ (pinv_sqrt_psd(a, tol) @ b)
    projected = u @ (a.pinv @ b)
    return {"reduced": reduced, "sqrt": sq, "projected": projected}


@dataclass(frozen=True)
class Verdict:
    holds: bool
    max_angle: float
    max_solution_gap: float
    detail: dict = field(default_factory=dict)

    def __bool__(self):
        return self.holds


def _rel(x, y) -> float:
    d = np.linalg.norm(x - y)
    n = max(np.linalg.norm(x), np.linalg.norm(y))
    return 0.0 if n == 0 else float(d / n)


def check_adaptive(kind, pair: PopulationPair, *, rule=None, angle_tol: float = 1e-8,
                   solution_tol: float = 1e-8) -> Verdict:
    """Does the run on ``(Sigma, sigma)`` match the run on the relevant pair?"""
    rel = relevant_subspace(pair)
    full = run(kind, pair.sigma_mat, pair.sigma_vec, pair.tol, rule=rule, check_range=False)
    red = run(kind, rel.relevant_pair.sigma_mat, rel.sigma_vec_y, pair.tol, rule=rule, check_range=False)
    same_dofs = full.dofs == red.dofs
    max_angle = 0.0
    max_gap = 0.0
    for r in sorted(set(full.dofs) & set(red.dofs)):
        s1, s2 = full.step_at_dof(r), red.step_at_dof(r)
        max_angle = max(max_angle, principal_angle(s1.subspace, s2.subspace))
        max_gap = max(max_gap, _rel(s1.solution, s2.solution))
    holds = same_dofs and max_angle <= angle_tol and max_gap <= solution_tol
    return Verdict(holds, max_angle, max_gap, {"dofs_full": full.dofs, "dofs_relevant": red.dofs})


def check_parsimonious(kind, pair: PopulationPair, levels=None, *, rule=None, angle_tol: float = 1e-8) -> Verdict:
    """Is the terminal subspace on each truncated pair inside its level subspace?"""
    ladder = truncation_ladder(relevant_subspace(pair))
    levels = range(1, len(ladder) + 1) if levels is None else levels
    worst = 0.0
    per_level = {}
    for s in levels:
        lv = ladder.level(s)
        path = run(kind, SymPsd(lv.sigma_s, pair.tol, validate=False), lv.sigma_vec_s, pair.tol,
                   rule=rule, check_range=False)
        ang = embedding_angle(path.terminal.subspace, Subspace(lv.basis, pair.tol))
        per_level[s] = ang
        worst = max(worst, ang)
    return Verdict(worst <= angle_tol, worst, 0.0, {"angles": per_level})
