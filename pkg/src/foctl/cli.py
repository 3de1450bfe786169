"""Command-line front end.

Subcommands: ``gen``, ``simulate``, ``control``, ``identify``,
``complexity``, ``baseline``.  Every run is deterministic under a fixed seed
and configuration, writes machine-readable JSON/CSV results carrying a
provenance block (effective config, its hash, seed, toolkit version), and
the report-style commands additionally render a PNG figure next to the
delimited output.  Errors exit nonzero; with ``--json-errors`` they are also
emitted as one JSON object on standard error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import baseline_comparison
from .complexity import BoundInputs, b_cov_trace_closed, monte_carlo_gap
from .dataforge import (
    GenSpec,
    config_hash,
    cost_from_dict,
    dumps_json,
    generate,
    model_from_dict,
    random_cost,
    random_model,
    read_dataset,
    trajectory_csv_rows,
    write_csv,
    write_dataset,
)
from .dynamics import Convention, FoltiModel, propagators, simulate
from .errors import ToolkitError
from .glcore import FracOrder
from .lqr import CostSpec, build_lagrange, build_stacked
from .sysid import build_regression, estimate, estimator_covariance

__all__ = ["main"]


class ConfigError(ValueError):
    """Invalid configuration value; carries the offending field path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _parse_vector(text: str, field: str) -> np.ndarray:
    try:
        parts = text.replace(",", " ").split()
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise ConfigError(field, f"cannot parse vector from {text!r}") from exc


def _parse_matrix(text: str, field: str) -> np.ndarray:
    rows = [r for r in text.split(";") if r.strip()]
    try:
        mat = [[float(v) for v in r.replace(",", " ").split()] for r in rows]
    except ValueError as exc:
        raise ConfigError(field, f"cannot parse matrix from {text!r}") from exc
    widths = {len(r) for r in mat}
    if len(widths) != 1:
        raise ConfigError(field, "matrix rows have inconsistent lengths")
    return np.array(mat)


def _load_json(path: str, field: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(field, f"file not found: {path}")
    return json.loads(p.read_text(encoding="utf-8"))


def _model_from_args(args) -> FoltiModel:
    if args.model:
        return model_from_dict(_load_json(args.model, "model"))
    if args.a is None or args.b is None or args.alpha is None:
        raise ConfigError("model", "provide --model FILE or all of --a, --b, --alpha")
    return FoltiModel(
        a=_parse_matrix(args.a, "a"),
        b=_parse_matrix(args.b, "b"),
        order=FracOrder(_parse_vector(args.alpha, "alpha")),
    )


def _cost_from_args(args, n: int, m: int) -> CostSpec:
    if args.cost:
        return cost_from_dict(_load_json(args.cost, "cost"))
    if args.q is None or args.r is None:
        raise ConfigError("cost", "provide --cost FILE or --q and --r (and optionally --qf)")
    q = _parse_matrix(args.q, "q")
    r = _parse_matrix(args.r, "r")
    q_f = _parse_matrix(args.qf, "qf") if args.qf else q
    if q.shape != (n, n) or r.shape != (m, m):
        raise ConfigError("cost", f"expected Q {n}x{n} and R {m}x{m}, got {q.shape} and {r.shape}")
    return CostSpec(q=q, r=r, q_f=q_f)


def _provenance(command: str, args, keys: list[str]) -> dict:
    config = {}
    for key in keys:
        value = getattr(args, key)
        config[key] = value
    return {
        "toolkit_version": __version__,
        "command": command,
        "seed": getattr(args, "seed", None),
        "config": config,
        "config_hash": config_hash(config),
    }


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit_summary(args, summary: dict) -> None:
    if args.format == "csv":
        for key, value in summary.items():
            print(f"{key},{value}")
    else:
        print(dumps_json(summary, indent=2), end="")


def _matrix_list(mat) -> list:
    arr = np.atleast_2d(np.asarray(mat, dtype=float))
    return [[float(v) for v in row] for row in arr]


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get("FOCTL_WORKERS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


# ---------------------------------------------------------------- commands


def cmd_gen(args) -> int:
    alpha = tuple(_parse_vector(args.alpha, "alpha")) if args.alpha else None
    mode = args.alpha_mode or ("fixed" if alpha is not None else "sampled")
    try:
        spec = GenSpec(
            n=args.n,
            m=args.m,
            horizon=args.T,
            n_trajectories=args.traj,
            alpha=alpha,
            alpha_mode=mode,
            noise_family=args.noise,
            noise_scale=args.sigma,
            seed=args.seed,
            store_noise=args.store_noise,
        )
    except ValueError as exc:
        raise ConfigError("gen", str(exc)) from exc
    dataset = generate(spec, workers=_workers(args))
    dataset.provenance["cli"] = _provenance(
        "gen", args,
        ["n", "m", "T", "traj", "noise", "sigma", "alpha", "alpha_mode", "store_noise", "seed"],
    )
    out = _out_dir(args)
    manifest = write_dataset(dataset, out)
    _emit_summary(
        args,
        {
            "manifest": str(manifest),
            "n_trajectories": len(dataset),
            "horizon": spec.horizon,
            "config_hash": dataset.provenance["cli"]["config_hash"],
        },
    )
    return 0


def cmd_simulate(args) -> int:
    model = _model_from_args(args)
    x0 = _parse_vector(args.x0, "x0") if args.x0 else np.zeros(model.n)
    if args.inputs:
        rows = Path(args.inputs).read_text(encoding="utf-8").strip().splitlines()[1:]
        inputs = np.array([[float(v) for v in r.split(",")[1:]] for r in rows])
    elif args.steps:
        inputs = np.zeros((args.steps, model.m))
    else:
        raise ConfigError("inputs", "provide --inputs FILE or --steps T")
    traj = simulate(model, x0, inputs, convention=Convention(args.convention))
    out = _out_dir(args)
    header, rows = trajectory_csv_rows(traj)
    write_csv(out / "trajectory.csv", header, rows)
    result = {
        "provenance": _provenance("simulate", args, ["model", "a", "b", "alpha", "x0", "steps", "convention", "seed"]),
        "horizon": traj.horizon,
        "final_state": [float(v) for v in traj.states[-1]],
        "trajectory_file": "trajectory.csv",
    }
    (out / "result.json").write_text(dumps_json(result), encoding="utf-8")
    _emit_summary(args, {"horizon": traj.horizon, "out": str(out)})
    return 0


def cmd_control(args) -> int:
    from .lqr import solve_lagrange, solve_least_squares

    model = _model_from_args(args)
    cost = _cost_from_args(args, model.n, model.m)
    x0 = _parse_vector(args.x0, "x0")
    if x0.shape != (model.n,):
        raise ConfigError("x0", f"expected length {model.n}, got {x0.shape[0]}")
    horizon = args.T
    props = propagators(model, horizon, Convention(args.convention))

    solutions = {}
    if args.method in ("ls", "both"):
        stacked = build_stacked(model, props, cost, horizon)
        solutions["ls"] = solve_least_squares(stacked, x0)
    if args.method in ("lagrange", "both"):
        lsys = build_lagrange(model, props, cost, horizon)
        solutions["lagrange"] = solve_lagrange(lsys, model, x0, solver=args.solver, tol=args.tol)
    primary = solutions.get("ls") or solutions["lagrange"]

    traj = simulate(model, x0, primary.u_seq, convention=Convention(args.convention))
    out = _out_dir(args)
    header, rows = trajectory_csv_rows(traj)
    write_csv(out / "trajectory.csv", header, rows)
    write_csv(
        out / "controls.csv",
        ["k"] + [f"u_{i}" for i in range(model.m)],
        [[k] + [float(v) for v in primary.u_seq[k]] for k in range(horizon)],
    )
    result = {
        "provenance": _provenance(
            "control", args,
            ["model", "a", "b", "alpha", "cost", "q", "r", "qf", "x0", "T", "method", "solver", "tol", "convention", "seed"],
        ),
        "method": primary.method,
        "cost": primary.cost,
        "u_seq": _matrix_list(primary.u_seq),
        "trajectory_file": "trajectory.csv",
        "controls_file": "controls.csv",
    }
    if len(solutions) == 2:
        gap = float(np.max(np.abs(solutions["ls"].u_seq - solutions["lagrange"].u_seq)))
        result["solver_discrepancy_inf"] = gap
        result["cost_lagrange"] = solutions["lagrange"].cost
    (out / "solution.json").write_text(dumps_json(result), encoding="utf-8")
    summary = {"cost": primary.cost, "method": primary.method, "out": str(out)}
    if "solver_discrepancy_inf" in result:
        summary["solver_discrepancy_inf"] = result["solver_discrepancy_inf"]
    _emit_summary(args, summary)
    return 0


def cmd_identify(args) -> int:
    dataset = read_dataset(args.data)
    if len(dataset) == 0:
        raise ConfigError("data", "dataset holds no trajectories")
    if not dataset.shared_model:
        raise ConfigError("data", "identification requires a dataset generated from a single model")
    true_model = (
        model_from_dict(_load_json(args.true_model, "true_model"))
        if args.true_model
        else dataset.model_for(0)
    )
    known_diag = (
        _parse_vector(args.known_diag_a, "known_diag_a")
        if args.known_diag_a
        else np.diag(true_model.a)
    )
    convention = Convention(args.convention) if args.convention else dataset.convention

    from .baseline import first_transitions
    from .sysid import RegressionData

    sliced = first_transitions(dataset, range(len(dataset)))
    data = RegressionData(x0=sliced.x0, u0=sliced.u0, x1=sliced.x1, known_diag_a=known_diag)
    est = estimate(data, convention=convention)

    result = {
        "provenance": _provenance(
            "identify", args, ["data", "known_diag_a", "true_model", "convention", "seed"]
        ),
        "n_samples": data.p,
        "convention": convention.value,
        "a_alpha_hat": _matrix_list(est.a_alpha_hat),
        "b_hat": _matrix_list(est.b_hat),
        "alpha_hat": [float(v) for v in est.alpha_hat],
        "residual_norm": est.residual_norm,
    }
    sigma = dataset.spec.noise_scale
    if dataset.spec.noise_family == "gaussian":
        xi, _ = build_regression(data)
        cov = estimator_covariance(xi, sigma**2 * np.eye(data.n))
        n, m = data.n, data.m
        b_block = cov[n * n :, n * n :]
        result["predicted_theta_cov_trace"] = float(np.trace(cov))
        result["predicted_b_error_rms"] = float(np.sqrt(np.trace(b_block)))
    if true_model is not None:
        b_err = float(np.linalg.norm(est.b_hat - true_model.b))
        alpha_err = float(np.linalg.norm(est.alpha_hat - true_model.order.alpha))
        result["b_error_fro"] = b_err
        result["alpha_error_2"] = alpha_err
    out = _out_dir(args)
    (out / "identify.json").write_text(dumps_json(result), encoding="utf-8")
    summary = {"residual_norm": est.residual_norm, "out": str(out)}
    if "b_error_fro" in result:
        summary["b_error_fro"] = result["b_error_fro"]
    _emit_summary(args, summary)
    return 0


def cmd_complexity(args) -> int:
    n_values = [int(v) for v in args.n_values.split(",") if v.strip()]
    if not n_values:
        raise ConfigError("n_values", "at least one batch count is required")
    if args.p <= args.m + 1:
        raise ConfigError("p", f"need p > m + 1 for the covariance trace (p={args.p}, m={args.m})")
    b_cov_trace_closed(args.n, args.m, args.sigma, 1, args.p)  # validate early

    rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(0,)))
    if args.model:
        model = model_from_dict(_load_json(args.model, "model"))
    else:
        spec = GenSpec(n=args.n, m=args.m, horizon=args.T, n_trajectories=0,
                       alpha=None, alpha_mode="sampled", seed=args.seed)
        model = random_model(spec, rng)
    cost = random_cost(model.n, model.m, rng)
    cost = CostSpec(q=cost.q, r=cost.r, q_f=cost.q)  # terminal weight equals running weight
    x0 = rng.standard_normal(model.n)

    inputs = BoundInputs.assemble(
        model, cost, x0, args.T, sigma_w=args.sigma, p=args.p, n_batches=n_values[0]
    )
    report = monte_carlo_gap(inputs, n_values, args.replicates, args.seed, workers=_workers(args))

    out = _out_dir(args)
    payload = {
        "provenance": _provenance(
            "complexity", args,
            ["n", "m", "T", "p", "sigma", "n_values", "replicates", "model", "seed"],
        ),
        "model": {"a": _matrix_list(model.a), "b": _matrix_list(model.b),
                  "alpha": [float(v) for v in model.order.alpha]},
        "x0": [float(v) for v in x0],
        "report": report.to_dict(),
    }
    (out / "complexity.json").write_text(dumps_json(payload), encoding="utf-8")
    rows = report.csv_rows()
    write_csv(out / "complexity.csv", rows[0], rows[1:])
    if not args.no_plot:
        from .plots import complexity_figure

        complexity_figure(report, out / "complexity.png")
    _emit_summary(
        args,
        {"loglog_slope": report.loglog_slope, "out": str(out),
         "max_gap": max(report.gap_mean), "min_gap": min(report.gap_mean)},
    )
    return 0


def cmd_baseline(args) -> int:
    dataset = read_dataset(args.data)
    report = baseline_comparison(dataset, holdout_fraction=args.holdout)
    out = _out_dir(args)
    payload = {
        "provenance": _provenance("baseline", args, ["data", "holdout", "seed"]),
        "report": report.to_dict(),
    }
    (out / "baseline.json").write_text(dumps_json(payload), encoding="utf-8")
    write_csv(
        out / "baseline.csv",
        ["step", "folti_mse", "lti_mse"],
        [[k + 1, report.per_step_folti[k], report.per_step_lti[k]]
         for k in range(len(report.per_step_folti))],
    )
    if not args.no_plot:
        from .plots import baseline_figure

        baseline_figure(report, out / "baseline.png")
    _emit_summary(
        args,
        {"folti_mse": report.folti_mse, "lti_mse": report.lti_mse,
         "ratio": report.ratio, "out": str(out)},
    )
    return 0


# ---------------------------------------------------------------- parser


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--format", choices=["json", "csv"], default="json",
                        help="stdout summary format")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker threads (default: FOCTL_WORKERS or 1)")
    parser.add_argument("--json-errors", action="store_true",
                        help="emit errors as JSON on stderr")


def _add_model_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", help="model JSON file with fields a, b, alpha")
    parser.add_argument("--a", help="inline A matrix, rows separated by ';'")
    parser.add_argument("--b", help="inline B matrix, rows separated by ';'")
    parser.add_argument("--alpha", help="inline fractional-order vector")
    parser.add_argument("--convention", choices=[c.value for c in Convention],
                        default=Convention.A_MINUS_DIAG.value,
                        help="one-step sign convention (default: a_minus_diag)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="foctl",
        description="Fractional-order LTI control toolkit command-line front end.",
    )
    parser.add_argument("--version", action="version", version=f"foctl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--T", type=int, required=True, help="trajectory horizon")
    p.add_argument("--traj", type=int, required=True, help="number of trajectories")
    p.add_argument("--noise", default="gaussian",
                   choices=["gaussian", "cauchy", "gamma", "sinc_squared", "uniform", "poisson"])
    p.add_argument("--sigma", type=float, default=0.01, help="noise scale")
    p.add_argument("--alpha", help="fixed fractional-order vector")
    p.add_argument("--alpha-mode", choices=["fixed", "sampled"], default=None)
    p.add_argument("--store-noise", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("simulate", help="roll a model forward")
    _add_model_args(p)
    p.add_argument("--x0", help="initial state vector (default zeros)")
    p.add_argument("--inputs", help="CSV of inputs (k, u_0..)")
    p.add_argument("--steps", type=int, help="horizon with zero inputs")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("control", help="solve the finite-horizon control problem")
    _add_model_args(p)
    p.add_argument("--cost", help="cost JSON file with fields q, r, q_f")
    p.add_argument("--q", help="inline Q matrix")
    p.add_argument("--r", help="inline R matrix")
    p.add_argument("--qf", help="inline terminal weight (default: Q)")
    p.add_argument("--x0", required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--method", choices=["ls", "lagrange", "both"], default="ls")
    p.add_argument("--solver", choices=["dense", "iterative"], default="dense")
    p.add_argument("--tol", type=float, default=1e-10)
    _add_common(p)
    p.set_defaults(func=cmd_control)

    p = sub.add_parser("identify", help="estimate parameters from a dataset")
    p.add_argument("--data", required=True, help="dataset directory or manifest path")
    p.add_argument("--known-diag-a", help="known diagonal of A (default: dataset model)")
    p.add_argument("--true-model", help="model JSON to compare against (default: dataset model)")
    p.add_argument("--convention", choices=[c.value for c in Convention], default=None,
                   help="one-step convention of the data (default: dataset provenance)")
    _add_common(p)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("complexity", help="run the sample-complexity experiment")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--T", type=int, default=8)
    p.add_argument("--p", type=int, default=10, help="samples per batch")
    p.add_argument("--sigma", type=float, default=0.1, help="identification noise std")
    p.add_argument("--n-values", default="10,20,50,100,200,500,1000")
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--model", help="model JSON file (default: drawn from seed)")
    p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    _add_common(p)
    p.set_defaults(func=cmd_complexity)

    p = sub.add_parser("baseline", help="fractional vs plain-LTI held-out comparison")
    p.add_argument("--data", required=True, help="dataset directory or manifest path")
    p.add_argument("--holdout", type=float, default=0.25, help="held-out fraction")
    p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    _add_common(p)
    p.set_defaults(func=cmd_baseline)

    return parser


def _report_error(args, exc: Exception, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        payload["field"] = exc.field
    for attr in ("null_space_dim", "cond_estimate", "residual", "iterations"):
        if hasattr(exc, attr):
            payload[attr] = getattr(exc, attr)
    if getattr(args, "json_errors", False):
        print(json.dumps(payload), file=sys.stderr)
    else:
        print(f"error: {payload['message']}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _report_error(args, exc, 2)
    except (FileNotFoundError, ValueError) as exc:
        return _report_error(args, exc, 2)
    except ToolkitError as exc:
        return _report_error(args, exc, 1)


if __name__ == "__main__":
    sys.exit(main())
