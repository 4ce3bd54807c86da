"""Command-line interface.

Exit codes: 0 on success, 2 on invalid input, 1 on numerical failure.
Tolerances come from defaults, then ``IDENTREG_*`` environment variables,
then a ``--config`` JSON file, then explicit flags.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import io
from .algorithms import Kind, SolutionRule, run
from .bounds import (
    algorithm_perturbation_check,
    early_stopping_report,
    estimate_stability_constant,
    ladder_risk_reports,
    oracle_terminal_dof,
    population_error_report,
    sample_perturbation,
    wei_bound_check,
)
from .errors import ConfigInvalid, DofNotAttained, NumericalError, ValidationError
from .population import PopulationPair, identify, relevant_subspace, truncation_ladder
from .sample import complexity_report, sample_moments, trial_rng
from .simulation import SimConfig, run_study
from .spectral import DEFAULT_TOL, SymPsd, ToleranceConfig
from .toy import ToyConfig, toy_framework, toy_identifiability, toy_oracle, toy_population

TOL_FLAGS = [f for f in DEFAULT_TOL.to_dict()]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ValidationError(f"{self.prog}: {message}")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with defaults for any flag (flags win)")
    common.add_argument("--output", "-o", help="write output here instead of stdout")
    common.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    for name in TOL_FLAGS:
        common.add_argument("--" + name.replace("_", "-"), type=float, default=None, dest=name)

    parser = _Parser(prog="identreg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    parser.subparsers = sub.choices

    def moments_args(p):
        p.add_argument("--data", help="dataset CSV (response in the last or --response column)")
        p.add_argument("--response", help="name of the response column")
        p.add_argument("--sigma", help="covariance matrix CSV")
        p.add_argument("--sigvec", help="cross-covariance vector CSV")
        p.add_argument("--no-center", action="store_true", help="do not center the dataset")

    p = sub.add_parser("fit", parents=[common], help="fit PCR, PLS or forward selection")
    moments_args(p)
    p.add_argument("--method", choices=[k.value for k in Kind], required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--dof", type=int)
    g.add_argument("--tau", type=float)
    p.add_argument("--rule", choices=[r.value for r in SolutionRule], default=None)
    p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("identify", parents=[common], help="identifiable parameter for a threshold")
    moments_args(p)
    p.add_argument("--tau", type=float, required=True)

    p = sub.add_parser("diagnose", parents=[common], help="complexity diagnostics of a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--response")
    p.add_argument("--q", type=float, default=8.0)
    p.add_argument("--directions", type=int, default=256)
    p.add_argument("--constant-c", type=float, default=1.0)
    p.add_argument("--no-center", action="store_true")
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("simulate", parents=[common], help="latent-factor simulation study (tidy CSV)")
    p.add_argument("--seed", type=int, required=True, help="data seed")
    p.add_argument("--rotation-seed", type=int, default=None)
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--r-y", type=int, dest="r_y")
    p.add_argument("--r", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--perp-shape", type=float, dest="perp_shape")
    p.add_argument("--s-star", type=int, default=None, dest="s_star")
    p.add_argument("--methods", default="pls,pcr,fss")
    p.add_argument("--summary", help="also write a JSON summary here")

    p = sub.add_parser("verify-bounds", parents=[common], help="Monte Carlo checks of the perturbation bounds")
    p.add_argument("--theorem", choices=["wei", "algorithm", "ladder-risk", "population", "early-stopping"],
                   required=True)
    p.add_argument("--source", choices=["toy", "random", "file"], default="random")
    p.add_argument("--sigma")
    p.add_argument("--sigvec")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--kind", choices=[k.value for k in Kind], default="pls")
    p.add_argument("--eps-max", type=float, default=1e-2)
    p.add_argument("--max-dim", type=int, default=8)
    p.add_argument("--tau", type=float, default=10.0)
    p.add_argument("--rho", type=float, default=0.98)
    p.add_argument("--beta1", type=float, default=1.0)
    p.add_argument("--beta2", type=float, default=0.0)

    p = sub.add_parser("toy", parents=[common], help="closed forms of the three-feature toy model")
    p.add_argument("--rho", type=float, default=0.98)
    p.add_argument("--beta1", type=float, default=1.0)
    p.add_argument("--beta2", type=float, default=0.0)
    return parser


def _merge_config(args, parser_defaults: dict):
    """Fill flags left at their defaults from the JSON config file."""
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigInvalid("config file must hold a JSON object")
    for key, value in cfg.items():
        key = key.replace("-", "_")
        if not hasattr(args, key):
            raise ConfigInvalid(f"unknown config key {key!r}")
        if getattr(args, key) == parser_defaults.get(key):
            setattr(args, key, value)
    return args


def _tolerances(args) -> ToleranceConfig:
    tol = ToleranceConfig.from_env()
    given = {k: getattr(args, k) for k in TOL_FLAGS if getattr(args, k, None) is not None}
    return ToleranceConfig.from_mapping(given, tol)


def _emit(args, text: str):
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _moments(args, tol) -> PopulationPair:
    if args.data:
        return sample_moments(io.read_dataset(args.data, args.response), center=not args.no_center, tol=tol)
    if args.sigma and args.sigvec:
        return PopulationPair(SymPsd(io.read_matrix(args.sigma), tol), io.read_vector(args.sigvec), tol)
    raise ValidationError("give --data or both --sigma and --sigvec")


def _cmd_fit(args, tol):
    pair = _moments(args, tol)
    if args.dof is not None:
        if args.dof < 0:
            raise ValidationError("--dof must be non-negative")
        target, tau_report = args.dof, None
    else:
        tau_report = identify(pair, args.tau)
        target = tau_report.dof
    path = run(args.method, pair.sigma_mat, pair.sigma_vec, tol, rule=args.rule, check_range=False)
    step = path.step_at_dof(target, allow_next=True)
    if args.format == "csv":
        rows = [{"index": i, "coefficient": float(c)} for i, c in enumerate(step.solution)]
        return io.rows_to_csv(rows, ["index", "coefficient"], io.provenance("fit", None, tol))
    out = {
        "provenance": io.provenance("fit", None, tol),
        "method": args.method,
        "rule": path.rule.value,
        "target_dof": target,
        "dof": step.dof,
        "dofs": path.dofs,
        "coefficients": step.solution,
        "fingerprint": path.fingerprint,
    }
    if tau_report is not None:
        out["identification"] = tau_report.to_dict()
    return io.dumps(out)


def _cmd_identify(args, tol):
    pair = _moments(args, tol)
    report = identify(pair, args.tau)
    rel = relevant_subspace(pair)
    out = {"provenance": io.provenance("identify", None, tol), "relevant_dim": rel.dim,
           "relevant_eigenvalues": rel.eigenvalues, **report.to_dict()}
    return io.dumps(out)


def _cmd_diagnose(args, tol):
    data = io.read_dataset(args.data, args.response)
    rep = complexity_report(data, args.q, n_directions=args.directions, seed=args.seed,
                            constant_c=args.constant_c, center=not args.no_center, tol=tol)
    return io.dumps({"provenance": io.provenance("diagnose", args.seed, tol), **rep.to_dict()})


def _cmd_simulate(args, tol):
    fields = {k: getattr(args, k) for k in ("n", "p", "r_y", "r", "reps", "perp_shape") if getattr(args, k) is not None}
    fields["data_seed"] = args.seed
    if args.rotation_seed is not None:
        fields["rotation_seed"] = args.rotation_seed
    cfg = SimConfig.from_mapping(fields)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    for m in methods:
        if m not in {k.value for k in Kind}:
            raise ValidationError(f"unknown method {m!r}")
    s_star = cfg.r if args.s_star is None else args.s_star
    res = run_study(cfg, methods, s_star, threads=args.threads, tol=tol)
    head = io.provenance("simulate", args.seed, tol)
    head["config"] = cfg.to_dict()
    head["s_star"] = s_star
    if args.summary:
        with open(args.summary, "w") as fh:
            fh.write(io.dumps({"provenance": head, "summary": res.summary(), "metadata": res.metadata}))
    return io.rows_to_csv(res.to_rows(), ["method", "rep", "metric", "value"], head)


def _random_pair(rng, max_dim: int, tol) -> PopulationPair:
    p = int(rng.integers(2, max_dim + 1))
    k = int(rng.integers(1, p + 1))
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    lam = np.zeros(p)
    lam[:k] = np.exp(rng.uniform(-3, 1, k))
    a = (q * lam) @ q.T
    return PopulationPair(SymPsd(a, tol, validate=False), a @ rng.standard_normal(p), tol, validate=False)


def _cmd_verify(args, tol):
    if args.samples < 1:
        raise ValidationError("--samples must be positive")
    if args.source == "toy":
        base = toy_population(ToyConfig(args.beta1, args.beta2, args.rho))
    elif args.source == "file":
        if not (args.sigma and args.sigvec):
            raise ValidationError("--source file needs --sigma and --sigvec")
        base = PopulationPair(SymPsd(io.read_matrix(args.sigma), tol), io.read_vector(args.sigvec), tol)
    else:
        base = None
    reports = []
    for i in range(args.samples):
        rng = trial_rng(args.seed, i)
        pair = base if base is not None else _random_pair(rng, args.max_dim, tol)
        a, b = pair.sigma_mat, pair.sigma_vec
        if args.theorem == "wei":
            eps = 10 ** rng.uniform(-8, math.log10(args.eps_max))
            at, bt = sample_perturbation(a, b, eps, rng, tol=tol)
            reports.append(wei_bound_check(a, b, at, bt, tol))
        elif args.theorem == "algorithm":
            path = run(args.kind, a, b, tol, check_range=False)
            dofs = [d for d in path.dofs if d > 0 and np.any(path.step_at_dof(d).solution)]
            r = int(rng.choice(dofs))
            eps = 10 ** rng.uniform(-8, math.log10(args.eps_max))
            at, bt = sample_perturbation(a, b, eps, rng, tol=tol)
            est = estimate_stability_constant(args.kind, a, b, r, eps, 16, int(rng.integers(2 ** 31)), tol=tol)
            try:
                c = est.c_hat
                reports.append(algorithm_perturbation_check(args.kind, a, b, at, bt, r, c, tol))
            except DofNotAttained:
                continue
        elif args.theorem == "ladder-risk":
            reports.extend(ladder_risk_reports(pair))
        elif args.theorem == "population":
            reports.append(population_error_report(args.kind, pair, args.tau, seed=args.seed + i))
        else:
            try:
                top = oracle_terminal_dof(args.kind, pair, args.tau)
                r = int(rng.integers(0, top + 1))
                reports.append(early_stopping_report(args.kind, pair, r, tau=args.tau, seed=args.seed + i))
            except NumericalError:
                continue
        if base is not None and args.theorem in ("ladder-risk", "population"):
            break
    checked = [r for r in reports if r.precondition_met]
    ratios = [r.ratio for r in checked]
    summary = {
        "theorem": args.theorem,
        "n_reports": len(reports),
        "n_checked": len(checked),
        "holds_rate": (sum(bool(r.holds) for r in checked) / len(checked)) if checked else None,
        "worst_ratio": max(ratios) if ratios else None,
    }
    sys.stderr.write(f"{args.theorem}: checked {summary['n_checked']}/{summary['n_reports']}, "
                     f"holds_rate={summary['holds_rate']}, worst_ratio={summary['worst_ratio']}\n")
    return io.dumps({"provenance": io.provenance("verify-bounds", args.seed, tol), "summary": summary,
                     "reports": [r.to_dict() for r in reports]})


def _cmd_toy(args, tol):
    cfg = ToyConfig(args.beta1, args.beta2, args.rho)
    out = {"provenance": io.provenance("toy", None, tol), "rho": cfg.rho, "beta1": cfg.beta1, "beta2": cfg.beta2}
    if cfg.beta2 == 0.0:
        out.update(toy_oracle(cfg))
        out["framework"] = toy_framework(cfg)
    else:
        out.update(toy_identifiability(cfg))
    pair = toy_population(cfg)
    ladder = truncation_ladder(relevant_subspace(pair))
    out["ladder"] = [{"s": lv.s, "kappa_half": lv.kappa_half, "risk": lv.risk, "risk_bound": lv.risk_bound}
                     for lv in ladder.levels]
    return io.dumps(out)


COMMANDS = {
    "fit": _cmd_fit,
    "identify": _cmd_identify,
    "diagnose": _cmd_diagnose,
    "simulate": _cmd_simulate,
    "verify-bounds": _cmd_verify,
    "toy": _cmd_toy,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        sub_defaults = {a.dest: a.default for a in parser.subparsers[args.command]._actions}
        args = _merge_config(args, sub_defaults)
        if args.threads < 1:
            raise ValidationError("--threads must be at least 1")
        tol = _tolerances(args)
        text = COMMANDS[args.command](args, tol)
        _emit(args, text)
        return 0
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
