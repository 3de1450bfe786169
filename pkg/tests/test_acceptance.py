"""Acceptance suite: one test per release criterion, each printing a verdict line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdict lines;
tolerances are pinned here and nowhere else.
"""

import subprocess
import sys
from pathlib import Path

import numpy as np
from scipy.special import gammaln, gammasgn

from conftest import random_cost_spec, random_folti
from foctl.complexity import BoundInputs, b_cov_trace_closed, monte_carlo_gap
from foctl.dataforge import GenSpec, generate, random_cost, random_model
from foctl.dynamics import closed_form_trajectory, propagators, simulate
from foctl.glcore import gl_coeff_row
from foctl.baseline import baseline_comparison
from foctl.lqr import (
    CostSpec,
    build_lagrange,
    build_stacked,
    riccati_oracle,
    solve_lagrange,
    solve_least_squares,
)
from foctl.sysid import RegressionData, estimate
from foctl import toeplitz


def verdict(num: int, name: str, ok: bool, detail: str) -> None:
    print(f"[criterion {num:2d}] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


def draw_instance(rng, t_max=32, alpha_range=(0.1, 0.9), qf_equals_q=True, ridge=1e-4):
    horizon = int(rng.integers(2, t_max + 1))
    model = random_folti(rng, alpha_range=alpha_range, prop_bound=4.0, horizon=horizon)
    cost = random_cost_spec(rng, model.n, model.m, qf_equals_q=qf_equals_q, ridge=ridge)
    x0 = rng.standard_normal(model.n)
    return model, cost, horizon, x0


def test_criterion_1_cross_solver_equivalence():
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(200):
        model, cost, horizon, x0 = draw_instance(rng)
        props = propagators(model, horizon)
        ls = solve_least_squares(build_stacked(model, props, cost, horizon), x0)
        lag = solve_lagrange(build_lagrange(model, props, cost, horizon), model, x0)
        rel = np.max(np.abs(ls.u_seq - lag.u_seq)) / (1.0 + np.max(np.abs(ls.u_seq)))
        worst = max(worst, rel)
    verdict(1, "cross-solver equivalence", worst <= 1e-8,
            f"worst scaled inf-norm diff {worst:.3e} <= 1e-08 over 200 instances")


def test_criterion_2_optimality_stationarity():
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(100):
        model = random_folti(rng, n=int(rng.integers(1, 4)), m=int(rng.integers(1, 4)))
        horizon = int(rng.integers(2, 13))
        cost = random_cost_spec(rng, model.n, model.m)
        x0 = rng.standard_normal(model.n)
        props = propagators(model, horizon)
        sys = build_stacked(model, props, cost, horizon)
        sol = solve_least_squares(sys, x0)
        u = sol.stacked
        grad_inf = 0.0
        for i in range(u.size):
            step = 1e-6 * (1.0 + abs(u[i]))
            up, dn = u.copy(), u.copy()
            up[i] += step
            dn[i] -= step
            grad_inf = max(grad_inf, abs(sys.cost_of(up, x0) - sys.cost_of(dn, x0)) / (2 * step))
        worst = max(worst, grad_inf / (1.0 + abs(sol.cost)))
    verdict(2, "optimality stationarity", worst <= 1e-5,
            f"worst scaled FD-gradient inf-norm {worst:.3e} <= 1e-05 over 100 instances")


def test_criterion_3_integer_order_oracle():
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(100):
        model, cost, horizon, x0 = draw_instance(rng, t_max=16, alpha_range=(1.0, 1.0))
        props = propagators(model, horizon)
        ls = solve_least_squares(build_stacked(model, props, cost, horizon), x0)
        lag = solve_lagrange(build_lagrange(model, props, cost, horizon), model, x0)
        dp = riccati_oracle(model.a - np.eye(model.n), model.b, cost, horizon, x0)
        worst = max(worst, np.max(np.abs(ls.u_seq - dp.u_seq)), np.max(np.abs(lag.u_seq - dp.u_seq)))
    verdict(3, "integer-order oracle", worst <= 1e-8,
            f"worst inf-norm deviation from dynamic programming {worst:.3e} <= 1e-08")


def test_criterion_4_path_equivalence():
    rng = np.random.default_rng(104)
    worst = 0.0
    for _ in range(200):
        horizon = int(rng.integers(1, 65))
        model = random_folti(rng, alpha_range=(0.05, 0.999), prop_bound=4.0, horizon=horizon)
        x0 = rng.standard_normal(model.n)
        u = rng.uniform(-1, 1, (horizon, model.m))
        sim = simulate(model, x0, u)
        cf = closed_form_trajectory(propagators(model, horizon), model, x0, u)
        worst = max(worst, float(np.max(np.abs(sim.states - cf.states))))
    verdict(4, "recursion vs closed form", worst <= 1e-9,
            f"worst per-step abs deviation {worst:.3e} <= 1e-09 over 200 instances, T <= 64")


def test_criterion_5_gl_coefficient_correctness():
    worst = 0.0
    for alpha in np.arange(0.1, 0.95, 0.1):
        row = gl_coeff_row(float(alpha), 64)
        for j in range(65):
            sign = gammasgn(j - alpha) * gammasgn(-alpha)
            ref = sign * np.exp(gammaln(j - alpha) - gammaln(-alpha) - gammaln(j + 1))
            worst = max(worst, abs(row[j] - ref) / abs(ref))
    integer_row = gl_coeff_row(1.0, 64)
    exact_zero = bool(np.all(integer_row[2:] == 0.0))
    verdict(5, "GL coefficients", worst <= 1e-10 and exact_zero,
            f"worst relative gamma-ratio deviation {worst:.3e} <= 1e-10, "
            f"integer-order tail exactly zero: {exact_zero}")


def test_criterion_6_identification_exactness_and_rate():
    rng = np.random.default_rng(106)
    n, m = 2, 1
    a_alpha = rng.uniform(-1, 1, (n, n))
    b = rng.uniform(-1, 1, (n, m))
    diag_a = np.diag(a_alpha) - 0.5

    # exactness on noiseless samples
    x0 = rng.standard_normal((2 * (n + m), n))
    u0 = rng.standard_normal((2 * (n + m), m))
    x1 = x0 @ a_alpha.T + u0 @ b.T
    est = estimate(RegressionData(x0, u0, x1, diag_a))
    exact_err = max(
        float(np.max(np.abs(est.a_alpha_hat - a_alpha))),
        float(np.max(np.abs(est.b_hat - b))),
        float(np.max(np.abs(est.alpha_hat - 0.5))),
    )

    # error-rate slope under Gaussian noise
    p_values = [8, 16, 32, 64, 128, 256, 512]
    sigma, reps = 0.05, 1000
    means = []
    for p in p_values:
        errs = np.empty(reps)
        for r in range(reps):
            rr = np.random.default_rng(np.random.SeedSequence([106, p, r]))
            x0 = rr.standard_normal((p, n))
            u0 = rr.standard_normal((p, m))
            w = sigma * rr.standard_normal((p, n))
            x1 = x0 @ a_alpha.T + u0 @ b.T + w
            fit = estimate(RegressionData(x0, u0, x1, diag_a))
            errs[r] = np.linalg.norm(fit.b_hat - b)
        means.append(errs.mean())
    slope = float(np.polyfit(np.log(p_values), np.log(means), 1)[0])
    ok = exact_err <= 1e-10 and -0.6 <= slope <= -0.4
    verdict(6, "identification exactness and rate", ok,
            f"noiseless error {exact_err:.3e} <= 1e-10, slope {slope:.3f} in [-0.6, -0.4]")


def test_criterion_7_covariance_trace_closed_form():
    n, m, p, n_batches, sigma = 2, 2, 53, 1, 0.1
    draws = 10_000
    rng = np.random.default_rng(107)
    b = rng.uniform(-1, 1, (n, m))
    total = 0.0
    for chunk in range(10):
        u = rng.standard_normal((draws // 10, p, m))
        w = sigma * rng.standard_normal((draws // 10, p, n))
        resid = u @ b.T + w
        gram = np.einsum("dpi,dpj->dij", u, u)
        cross = np.einsum("dpi,dpj->dij", u, resid)
        b_hat = np.linalg.solve(gram, cross).transpose(0, 2, 1)
        total += float(np.sum((b_hat - b) ** 2))
    empirical = total / draws
    closed = b_cov_trace_closed(n, m, sigma, n_batches, p)
    rel = abs(empirical - closed) / closed
    verdict(7, "closed-form covariance trace", rel <= 0.10,
            f"empirical {empirical:.4e} vs closed form {closed:.4e}, rel err {rel:.3f} <= 0.10")


def test_criterion_8_gap_bound_and_rate():
    seed = 2026
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    spec = GenSpec(n=2, m=2, horizon=8, n_trajectories=0, alpha=None,
                   alpha_mode="sampled", seed=seed)
    model = random_model(spec, rng)
    cost = random_cost(2, 2, rng)
    cost = CostSpec(q=cost.q, r=cost.r, q_f=cost.q)
    x0 = rng.standard_normal(2)
    inputs = BoundInputs.assemble(model, cost, x0, 8, sigma_w=0.1, p=10, n_batches=10)

    n_values = [10, 20, 50, 100, 200, 500, 1000]
    report = monte_carlo_gap(inputs, n_values, replicates=300, seed=seed)
    dominated = all(
        mean - 2 * se <= bound
        for mean, se, bound in zip(report.gap_mean, report.gap_se, report.bound_ls)
    )
    slope_ok = -0.6 <= report.loglog_slope <= -0.4
    verdict(8, "gap bound and convergence rate", dominated and slope_ok,
            f"bound dominates at every N within 2 SE: {dominated}, "
            f"slope {report.loglog_slope:.3f} in [-0.6, -0.4]")


def test_criterion_9_structured_solver_equivalence():
    rng = np.random.default_rng(109)
    worst = 0.0
    count = 0
    while count < 100:
        model, cost, horizon, x0 = draw_instance(rng, ridge=1e-2)
        props = propagators(model, horizon)
        lsys = build_lagrange(model, props, cost, horizon)
        if np.linalg.cond(lsys.system.to_dense()) > 1e4:
            continue  # the criterion targets well-conditioned systems
        rhs = 2.0 * (lsys.x0_forcing @ x0)
        dense = toeplitz.solve(lsys.system, rhs, method="dense")
        iterative = toeplitz.solve(lsys.system, rhs, method="iterative", tol=1e-12)
        scale = np.linalg.norm(dense)
        if scale == 0.0:
            continue
        worst = max(worst, float(np.linalg.norm(dense - iterative) / scale))
        count += 1
    verdict(9, "structured solver equivalence", worst <= 1e-8,
            f"worst relative dense/iterative deviation {worst:.3e} <= 1e-08 over 100 systems")


def test_criterion_10_baseline_direction():
    spec = GenSpec(n=2, m=1, horizon=64, n_trajectories=40, alpha=(0.5, 0.5),
                   noise_family="gaussian", noise_scale=1e-3, seed=110)
    report = baseline_comparison(generate(spec), holdout_fraction=0.25)
    ok = report.folti_mse < report.lti_mse
    verdict(10, "memory-aware estimator beats plain LTI", ok,
            f"fractional MSE {report.folti_mse:.3e} < LTI MSE {report.lti_mse:.3e} "
            f"(ratio {report.ratio:.3f})")


def test_criterion_11_cli_determinism(tmp_path):
    def run(*args):
        res = subprocess.run([sys.executable, "-m", "foctl", *args],
                             capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        return res

    def snapshot(root: Path) -> dict:
        return {str(p.relative_to(root)): p.read_bytes()
                for p in sorted(root.rglob("*")) if p.is_file()}

    ds = tmp_path / "ds"
    commands = {
        "gen": ["gen", "--n", "2", "--m", "1", "--T", "12", "--traj", "8",
                "--noise", "uniform", "--sigma", "0.01", "--alpha", "0.5,0.5",
                "--seed", "42", "--out", str(ds)],
        "simulate": ["simulate", "--a", "0.3", "--b", "1", "--alpha", "0.5",
                     "--x0", "1", "--steps", "6", "--out", str(tmp_path / "sim")],
        "control": ["control", "--a", "0.2 0.4; -0.3 0.1", "--b", "1; 0.5",
                    "--alpha", "0.4,0.7", "--q", "1 0; 0 2", "--r", "0.5",
                    "--x0", "1,-1", "--T", "6", "--method", "both",
                    "--out", str(tmp_path / "ctl")],
        "identify": ["identify", "--data", str(ds), "--out", str(tmp_path / "id")],
        "complexity": ["complexity", "--n", "2", "--m", "2", "--T", "4", "--p", "6",
                       "--sigma", "0.1", "--n-values", "5,20", "--replicates", "6",
                       "--seed", "4", "--out", str(tmp_path / "cx")],
        "baseline": ["baseline", "--data", str(ds), "--out", str(tmp_path / "bl")],
    }
    mismatches = []
    for name, args in commands.items():
        run(*args)
        out_dir = Path(args[args.index("--out") + 1])
        first = snapshot(out_dir)
        run(*args)
        if snapshot(out_dir) != first:
            mismatches.append(name)
    verdict(11, "CLI determinism", not mismatches,
            "all commands byte-identical on re-run"
            if not mismatches else f"mismatched outputs: {mismatches}")
