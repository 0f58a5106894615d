"""Command-line front end: run experiments, verify convergence
certificates, and compare fixed points against the reference oracles.

All outputs are deterministic functions of the configuration (seeds
included): re-running a command never changes a written file.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import monitor, oracles, problems
from .elements import dissipativity_probe
from .engine import DelayBank, run
from .interconnect import check_orthonormal
from .pairs import gather

__all__ = ["main", "RunConfig"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str = "lasso_huber"
    mode: str = "sync"
    p: float = 0.1
    gamma: float = 0.5
    seed: int = 0
    tol: float = 1e-8
    max_iters: int = 200000
    out: str = "."
    instance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.problem not in problems.PROBLEM_NAMES:
            raise ConfigError(
                f"unknown problem {self.problem!r}; choose from {', '.join(problems.PROBLEM_NAMES)}"
            )
        if self.mode not in ("sync", "async"):
            raise ConfigError(f"mode must be 'sync' or 'async', got {self.mode!r}")
        if not 0.0 < self.p <= 1.0:
            raise ConfigError(f"p must lie in (0, 1], got {self.p}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.tol <= 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 0:
            raise ConfigError(f"max_iters must be nonnegative, got {self.max_iters}")

    def as_dict(self) -> dict:
        return {
            "problem": self.problem,
            "mode": self.mode,
            "p": self.p,
            "gamma": self.gamma,
            "seed": self.seed,
            "tol": self.tol,
            "max_iters": self.max_iters,
            "out": self.out,
            "instance": self.instance,
        }

    def delay_bank(self) -> DelayBank:
        mode = "asynchronous" if self.mode == "async" else "synchronous"
        return DelayBank(mode=mode, p=self.p if self.mode == "async" else 1.0, seed=self.seed)

    def built_problem(self) -> problems.BuiltProblem:
        try:
            inst = problems.default_instance(self.problem, seed=self.seed, params=self.instance)
            built = problems.build(self.problem, inst, params=self.instance)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid instance parameters: {exc}") from exc
        built.system.gamma = self.gamma
        return built


def _load_config(args) -> RunConfig:
    data = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    overrides = {
        "problem": args.problem,
        "mode": args.mode,
        "p": args.p,
        "gamma": args.gamma,
        "seed": args.seed,
        "tol": args.tol,
        "max_iters": args.max_iters,
        "out": args.out,
    }
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
    return RunConfig(**data)


def _fmt(x) -> str:
    return repr(float(x))


def _write_trace(path: Path, trace) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "normalized_iter", "self_residual", "oracle_residual", "objective"])
        for i in range(len(trace)):
            writer.writerow([
                int(trace.iters[i]),
                _fmt(trace.normalized_iters[i]),
                _fmt(trace.self_residual[i]),
                _fmt(trace.oracle_residual[i]) if trace.oracle_residual is not None else "",
                _fmt(trace.objective[i]) if trace.objective is not None else "",
            ])


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_run(cfg: RunConfig) -> int:
    built = cfg.built_problem()
    result = run(
        built.system,
        cfg.delay_bank(),
        tol=cfg.tol,
        max_iters=cfg.max_iters,
        objective=built.objective,
    )
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_trace(out / "trace.csv", result.trace)
    summary = {
        "config": cfg.as_dict(),
        "converged": result.converged,
        "iterations": int(result.state.iter),
        "normalized_iterations": float(result.state.normalized_iter),
        "final_residual": float(result.trace.self_residual[-1]) if len(result.trace) else None,
        "readout": {"a": result.a.tolist(), "b": result.b.tolist()},
        "seed": cfg.seed,
    }
    _write_json(out / "summary.json", summary)
    return 0 if result.converged else 2


def cmd_verify(cfg: RunConfig) -> int:
    built = cfg.built_problem()
    system = built.system
    d_star = monitor.reference_fixed_point(
        system, tol=min(cfg.tol, 1e-10), max_iters=max(cfg.max_iters, 500000)
    )
    ortho = check_orthonormal(system.interconnection.G)
    element_reports = []
    all_dissipative = all(el.dissipative for el in system.elements)
    required_ok = True
    for el in system.elements:
        rep = dissipativity_probe(
            el, gather(el.block, d_star), n=200, radius=1.0, seed=cfg.seed
        )
        informational = not el.dissipative
        if not informational:
            required_ok &= rep.passed
        element_reports.append({
            "kind": el.kind,
            "block": [el.block.offset, el.block.length],
            "max_ratio": rep.max_ratio,
            "passed": rep.passed,
            "informational": informational,
        })
    eq1 = monitor.certify_eq1(system, d_star, n=300, seed=cfg.seed)
    eq2 = monitor.certify_eq2(system, d_star, n=300, seed=cfg.seed)
    # the norm-reduction certificate presumes dissipative elements; report
    # it as informational when the system declares non-dissipative blocks
    eq2_required = all_dissipative
    passed = bool(
        ortho.passed and eq1.passed and required_ok and (eq2.passed or not eq2_required)
    )
    report = {
        "config": cfg.as_dict(),
        "orthonormality": {"max_deviation": ortho.max_deviation, "passed": ortho.passed},
        "elements": element_reports,
        "interconnection_neutrality": {
            "max_deviation": eq1.max_deviation, "samples": eq1.samples, "passed": eq1.passed,
        },
        "norm_reduction": {
            "max_ratio": eq2.max_ratio,
            "strict_reductions": eq2.strict_reductions,
            "samples": eq2.samples,
            "passed": eq2.passed,
            "informational": not eq2_required,
        },
        "passed": passed,
    }
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "verify.json", report)
    return 0 if passed else 2


def _solution_metrics(cfg: RunConfig, built, result) -> dict:
    z = built.primal(result.state.d)
    name = cfg.problem
    if name == "lasso_huber":
        ref = oracles.oracle_lasso_huber(built.instance)
        x = z[built.layout["coefficients"]]
        return {
            "max_coefficient_error": float(np.abs(x - ref.x).max()),
            "objective_gap": built.objective(z) - ref.value,
        }
    if name == "lasso_augmented":
        ref = oracles.oracle_lasso(built.instance)
        x = z[built.layout["coefficients"]]
        thr = 1e-6
        return {
            "max_coefficient_error": float(np.abs(x - ref.x).max()),
            "support_match": bool(
                np.array_equal(np.abs(x) > thr, np.abs(ref.x) > thr)
            ),
        }
    if name in ("minimax_fir", "minimax_fir_split"):
        ref = oracles.oracle_minimax_lp(built.instance)
        omega = built.extras["omega"]
        weights = built.extras["weights"]
        desired = built.extras["desired"]
        K = built.instance.half_taps
        if name == "minimax_fir":
            h = z[built.layout["coefficients"]]
        else:
            h = (z[built.layout["coefficients_pass"]] + z[built.layout["coefficients_stop"]]) / 2.0
        C = np.cos(np.outer(omega, np.arange(K)))
        err = float(np.abs(weights * (C @ h - desired)).max())
        return {
            "max_grid_error": err,
            "oracle_optimum": ref.value,
            "error_ratio": err / ref.value,
        }
    if name == "svm_consensus":
        ref = oracles.oracle_svm_qp(built.instance)
        w, b = problems.consensus_classifier(built, result.state.d)
        X = built.instance.features
        pred = np.sign(X @ w + b)
        pred_ref = np.sign(X @ ref.x + ref.extras["bias"])
        return {
            "classification_agreement": float(np.mean(pred == pred_ref)),
            "consensus_gap": problems.consensus_gap(built, result.state.d),
        }
    raise ConfigError(f"no oracle is available for problem {name!r}")


def cmd_compare(cfg: RunConfig) -> int:
    if cfg.problem == "sparse_equalizer":
        print(
            "compare: no independent oracle exists for sparse_equalizer "
            "(nonconvex); use `run` and inspect the trace instead",
            file=sys.stderr,
        )
        return 1
    built = cfg.built_problem()
    result = run(built.system, cfg.delay_bank(), tol=cfg.tol, max_iters=cfg.max_iters)
    metrics = _solution_metrics(cfg, built, result)
    report = {
        "config": cfg.as_dict(),
        "converged": result.converged,
        "iterations": int(result.state.iter),
        "metrics": metrics,
    }
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "compare.json", report)
    return 0 if result.converged else 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scatopt",
        description="Fixed-point optimization systems built from reflected "
        "proximal elements and a norm-preserving interconnection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("run", "run one experiment and write trace.csv / summary.json"),
        ("verify", "run the convergence certificates and write verify.json"),
        ("compare", "compare the fixed point against the oracle, write compare.json"),
    ):
        cmd = sub.add_parser(name, help=helptext)
        cmd.add_argument("--config", help="JSON configuration file")
        cmd.add_argument("--problem", choices=problems.PROBLEM_NAMES)
        cmd.add_argument("--mode", choices=("sync", "async"))
        cmd.add_argument("--p", type=float, help="asynchronous sampling probability")
        cmd.add_argument("--gamma", type=float, help="averaging parameter in (0, 1]")
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--tol", type=float)
        cmd.add_argument("--max-iters", dest="max_iters", type=int)
        cmd.add_argument("--out", help="output directory")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        return cmd_compare(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
