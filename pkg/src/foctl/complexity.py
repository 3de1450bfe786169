"""Sample-complexity bounds and the Monte-Carlo gap experiment.

Evaluates the closed-form and general traces of the input-matrix estimator
covariance, the two upper bounds on the expected optimal-cost gap (one per
solver construction), and runs the end-to-end Monte-Carlo experiment: draw
identification batches, estimate B with A and the orders known, solve the
control problem with the estimate, and measure how far the resulting cost
lands from the true optimum as the number of batches grows.

Two gap readings are produced per replicate: the plug-in form (optimal cost
of the estimated model, the quantity the bounds control) and the rollout
form (cost of applying the estimated controller to the true system).  The
bound comparison uses the plug-in form.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Convention, FoltiModel, effective_transition, propagators
from .errors import SingularSystemError, ToolkitError
from .lqr import CostSpec, LagrangeSystem, StackedSystem, build_lagrange, build_stacked

__all__ = [
    "BoundInputs",
    "LagrangeBound",
    "ComplexityReport",
    "b_cov_trace_closed",
    "b_cov_trace_general",
    "gap_bound_least_squares",
    "gap_bound_lagrange",
    "monte_carlo_gap",
]


def _spectral_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, 2))


def b_cov_trace_closed(n: int, m: int, sigma_w: float, n_batches: int, p: int) -> float:
    """Closed-form covariance trace for standard-normal input designs.

    Valid for p > m + 1; below that the mean of the inverted design gram
    matrix does not exist.
    """
    if p <= m + 1:
        raise ValueError(
            f"closed-form trace needs p > m + 1 samples per batch, got p={p}, m={m}"
        )
    if n_batches < 1:
        raise ValueError(f"n_batches must be positive, got {n_batches}")
    if sigma_w < 0:
        raise ValueError(f"noise scale must be non-negative, got {sigma_w}")
    return n * m * sigma_w**2 / (n_batches * (p - m - 1))


def b_cov_trace_general(
    input_design: np.ndarray, noise_cov: np.ndarray, n_batches: int = 1
) -> float:
    """Trace of the estimator covariance for an explicit stacked input design.

    ``input_design`` is the block design built from the per-sample inputs
    (shape (p*n, n*m)); ``noise_cov`` is the per-sample noise covariance.
    """
    phi = np.asarray(input_design, dtype=float)
    k_w = np.atleast_2d(np.asarray(noise_cov, dtype=float))
    n = k_w.shape[0]
    if phi.shape[0] % n:
        raise ValueError(
            f"design with {phi.shape[0]} rows is not a stack of {n}-row sample blocks"
        )
    if n_batches < 1:
        raise ValueError(f"n_batches must be positive, got {n_batches}")
    p = phi.shape[0] // n
    gram = phi.T @ phi
    try:
        ginv = np.linalg.inv(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"input design gram matrix is singular: {exc}", cond_estimate=float("inf")
        ) from exc
    middle = phi.T @ np.kron(np.eye(p), k_w) @ phi
    return float(np.trace(ginv @ middle @ ginv)) / float(n_batches)


def input_design_from_samples(u0: np.ndarray, n: int) -> np.ndarray:
    """Stacked block-diagonal input design: state row r of sample i carries u0_i'."""
    u0 = np.atleast_2d(np.asarray(u0, dtype=float))
    p, m = u0.shape
    phi = np.zeros((p * n, n * m))
    for i in range(p):
        for r in range(n):
            phi[i * n + r, r * m : (r + 1) * m] = u0[i]
    return phi


@dataclass(frozen=True)
class BoundInputs:
    """Problem instance plus the stacked operators both bounds draw on.

    ``projected_free_response`` is the free state response weighted and
    pulled back through the disturbance map; ``disturbance_gram`` its Gram
    matrix under the state weight.  ``weighted_prop_tri`` is the lower
    block-triangular weighted propagator matrix and ``memory_adjoint_tri``
    the strictly upper transposed-kernel matrix from the multiplier system.
    """

    model: FoltiModel
    cost: CostSpec
    x0: np.ndarray
    horizon: int
    sigma_w: float
    p: int
    n_batches: int
    stacked: StackedSystem
    lagrange: LagrangeSystem
    projected_free_response: np.ndarray
    disturbance_gram: np.ndarray
    weighted_prop_tri: np.ndarray
    memory_adjoint_tri: np.ndarray
    free_quad: float

    @classmethod
    def assemble(
        cls,
        model: FoltiModel,
        cost: CostSpec,
        x0,
        horizon: int,
        sigma_w: float,
        p: int,
        n_batches: int = 1,
        convention: Convention = Convention.A_MINUS_DIAG,
    ) -> "BoundInputs":
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        props = propagators(model, horizon, convention)
        stacked = build_stacked(model, props, cost, horizon)
        lagrange = build_lagrange(model, props, cost, horizon)

        free = stacked.x0_to_state @ x0
        z = stacked.disturbance_to_state.T @ stacked.state_weight.T @ free
        gram = (
            stacked.disturbance_to_state.T
            @ stacked.state_weight
            @ stacked.disturbance_to_state
        )

        t, n = int(horizon), model.n
        prop_tri = np.zeros((t * n, t * n))
        for i in range(t):
            for j in range(i + 1):
                prop_tri[i * n : (i + 1) * n, j * n : (j + 1) * n] = cost.q @ props.matrices[i - j]
        adjoint_tri = np.zeros((t * n, t * n))
        for i in range(t):
            for j in range(i + 1, t):
                adjoint_tri[i * n : (i + 1) * n, j * n : (j + 1) * n] = props.kernel[j - i - 1].T

        return cls(
            model=model,
            cost=cost,
            x0=x0,
            horizon=int(horizon),
            sigma_w=float(sigma_w),
            p=int(p),
            n_batches=int(n_batches),
            stacked=stacked,
            lagrange=lagrange,
            projected_free_response=z,
            disturbance_gram=gram,
            weighted_prop_tri=prop_tri,
            memory_adjoint_tri=adjoint_tri,
            free_quad=float(free @ stacked.state_weight @ free),
        )

    @property
    def x0_forcing(self) -> np.ndarray:
        return self.lagrange.x0_forcing

    def input_block_diag(self, b: np.ndarray) -> np.ndarray:
        """Block-diagonal lift of an input matrix over the horizon."""
        return np.kron(np.eye(self.horizon), b)

    def plugin_cost(self, b_est: np.ndarray) -> float:
        """Optimal cost of the model with input matrix ``b_est`` (A, orders true)."""
        p_lift = self.input_block_diag(b_est)
        s, rbar = self.disturbance_gram, self.stacked.input_weight
        z = self.projected_free_response
        inner = np.linalg.solve(p_lift.T @ s @ p_lift + rbar, p_lift.T @ z)
        return self.free_quad - float(z @ p_lift @ inner)

    def rollout_cost(self, b_est: np.ndarray) -> float:
        """Cost of applying the controller built from ``b_est`` to the true system."""
        p_lift = self.input_block_diag(b_est)
        rbar = self.stacked.input_weight
        z = self.projected_free_response
        u = -np.linalg.solve(p_lift.T @ self.disturbance_gram @ p_lift + rbar, p_lift.T @ z)
        return self.stacked.cost_of(u, self.x0)


@dataclass(frozen=True)
class LagrangeBound:
    """Bound value for the multiplier construction, or a tagged assumption failure.

    ``value`` is None when the positive-semidefiniteness assumption on the
    symmetrized weighted-propagator pullback fails; the minimum symmetric-part
    and real eigenvalues are reported either way, since the assumption's
    intended notion of definiteness for the nonsymmetric matrix is ambiguous.
    """

    value: float | None
    assumption_ok: bool
    min_sym_eig: float
    min_real_eig: float


def gap_bound_least_squares(inputs: BoundInputs, cov_trace: float) -> float:
    """Upper bound on the expected plug-in cost gap, least-squares construction."""
    if cov_trace < 0:
        raise ValueError(f"covariance trace must be non-negative, got {cov_trace}")
    z_sq = float(inputs.projected_free_response @ inputs.projected_free_response)
    r_inv_norm = _spectral_norm(np.linalg.inv(inputs.cost.r))
    b_norm = _spectral_norm(inputs.model.b)
    s_norm = _spectral_norm(inputs.disturbance_gram)
    return (
        z_sq
        * r_inv_norm
        * (1.0 + b_norm**2 * r_inv_norm * s_norm)
        * (cov_trace + 2.0 * b_norm * np.sqrt(cov_trace))
    )


def gap_bound_lagrange(inputs: BoundInputs, cov_trace: float) -> LagrangeBound:
    """Upper bound for the multiplier construction, guarded by its PSD assumption.

    The assumption concerns the (generally nonsymmetric) product of the
    inverted weighted-propagator matrix with I minus the memory adjoint; the
    check tests the symmetric part and additionally reports the minimum real
    eigenvalue.  The inverse of I minus the memory adjoint contributes a unit
    factor to the bound value.
    """
    if cov_trace < 0:
        raise ValueError(f"covariance trace must be non-negative, got {cov_trace}")
    l_qg = inputs.weighted_prop_tri
    cond = np.linalg.cond(l_qg, 2)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularSystemError(
            f"weighted propagator matrix is singular or unusable (cond ~ {cond:.3e})",
            cond_estimate=float(cond),
        )
    pullback = np.linalg.solve(l_qg, np.eye(l_qg.shape[0]) - inputs.memory_adjoint_tri)
    sym = 0.5 * (pullback + pullback.T)
    min_sym = float(np.linalg.eigvalsh(sym)[0])
    min_real = float(np.min(np.linalg.eigvals(pullback).real))
    tol = 1e-10 * max(1.0, float(np.abs(sym).max()))
    ok = min_sym >= -tol
    if not ok:
        return LagrangeBound(value=None, assumption_ok=False, min_sym_eig=min_sym, min_real_eig=min_real)

    z_norm = float(np.linalg.norm(inputs.projected_free_response))
    forcing_norm = float(np.linalg.norm(inputs.x0_forcing @ inputs.x0))
    r_inv_norm = _spectral_norm(np.linalg.inv(inputs.cost.r))
    b_norm = _spectral_norm(inputs.model.b)
    l_norm = _spectral_norm(l_qg)
    l_factor = float(cond)  # ||L^-1||_2 ||L||_2
    value = (
        z_norm
        * forcing_norm
        * r_inv_norm
        * l_factor
        * (1.0 + b_norm**2 * r_inv_norm * l_factor * l_norm)
        * (cov_trace + 2.0 * b_norm * np.sqrt(cov_trace))
    )
    return LagrangeBound(value=value, assumption_ok=True, min_sym_eig=min_sym, min_real_eig=min_real)


@dataclass(frozen=True)
class ComplexityReport:
    """Per-batch-count Monte-Carlo gap statistics next to the evaluated bounds."""

    n_values: list[int]
    gap_mean: list[float]
    gap_se: list[float]
    rollout_gap_mean: list[float]
    rollout_gap_se: list[float]
    bound_ls: list[float]
    bound_lagrange: list[float | None]
    lagrange_assumption_ok: bool
    cov_trace: list[float]
    loglog_slope: float
    replicates: int
    failed_replicates: dict[int, int] = field(default_factory=dict)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "n_values": list(self.n_values),
            "gap_mean": list(self.gap_mean),
            "gap_se": list(self.gap_se),
            "rollout_gap_mean": list(self.rollout_gap_mean),
            "rollout_gap_se": list(self.rollout_gap_se),
            "bound_ls": list(self.bound_ls),
            "bound_lagrange": list(self.bound_lagrange),
            "lagrange_assumption_ok": self.lagrange_assumption_ok,
            "cov_trace": list(self.cov_trace),
            "loglog_slope": self.loglog_slope,
            "replicates": self.replicates,
            "failed_replicates": {str(k): v for k, v in self.failed_replicates.items()},
            "seed": self.seed,
        }

    def csv_rows(self) -> list[list]:
        header = ["N", "gap_mean", "gap_se", "bound_ls", "bound_lagrange", "trace_kb"]
        rows: list[list] = [header]
        for i, n in enumerate(self.n_values):
            bl = self.bound_lagrange[i]
            rows.append(
                [n, self.gap_mean[i], self.gap_se[i], self.bound_ls[i],
                 "" if bl is None else bl, self.cov_trace[i]]
            )
        return rows


def _estimate_b_batches(
    inputs: BoundInputs, n_batches: int, rng: np.random.Generator
) -> np.ndarray:
    """Average of per-batch least-squares estimates of B over fresh designs.

    Each batch draws p initial states and standard-normal inputs, advances
    one step under the true dynamics with isotropic Gaussian noise, removes
    the known state contribution, and regresses the remainder on the inputs.
    """
    n, m, p = inputs.model.n, inputs.model.m, inputs.p
    a_eff = effective_transition(inputs.model, inputs.lagrange.convention)
    x0 = rng.standard_normal((n_batches, p, n))
    u = rng.standard_normal((n_batches, p, m))
    w = inputs.sigma_w * rng.standard_normal((n_batches, p, n))
    x1 = x0 @ a_eff.T + u @ inputs.model.b.T + w
    resid = x1 - x0 @ a_eff.T
    gram = np.einsum("bpi,bpj->bij", u, u)
    cross = np.einsum("bpi,bpj->bij", u, resid)
    coeffs = np.linalg.solve(gram, cross)  # (n_batches, m, n)
    return coeffs.transpose(0, 2, 1).mean(axis=0)


def monte_carlo_gap(
    inputs: BoundInputs,
    n_values: list[int],
    replicates: int,
    seed: int,
    workers: int = 1,
) -> ComplexityReport:
    """Monte-Carlo estimate of the cost gap across batch counts.

    Every (batch count, replicate) pair derives its own random stream from
    the seed, so serial and parallel runs produce bit-identical reports.
    Replicates whose solve fails are dropped and counted.
    """
    if replicates < 1:
        raise ValueError(f"replicates must be positive, got {replicates}")
    n_values = [int(v) for v in n_values]
    for v in n_values:
        if v < 1:
            raise ValueError(f"batch counts must be positive, got {v}")

    true_cost = inputs.plugin_cost(inputs.model.b)

    def one_replicate(n_batches: int, rep: int) -> tuple[float, float] | None:
        rng = np.random.default_rng(np.random.SeedSequence([seed, n_batches, rep]))
        try:
            b_hat = _estimate_b_batches(inputs, n_batches, rng)
            plug = abs(inputs.plugin_cost(b_hat) - true_cost)
            roll = abs(inputs.rollout_cost(b_hat) - true_cost)
        except (ToolkitError, np.linalg.LinAlgError):
            return None
        return plug, roll

    gap_mean, gap_se, roll_mean, roll_se = [], [], [], []
    failures: dict[int, int] = {}
    for n_batches in n_values:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(lambda r: one_replicate(n_batches, r), range(replicates)))
        else:
            results = [one_replicate(n_batches, r) for r in range(replicates)]
        ok = [r for r in results if r is not None]
        failed = replicates - len(ok)
        if failed:
            failures[n_batches] = failed
        if not ok:
            raise ToolkitError(f"all {replicates} replicates failed at N={n_batches}")
        plug = np.array([r[0] for r in ok])
        roll = np.array([r[1] for r in ok])
        gap_mean.append(float(plug.mean()))
        gap_se.append(float(plug.std(ddof=1) / np.sqrt(len(ok))) if len(ok) > 1 else 0.0)
        roll_mean.append(float(roll.mean()))
        roll_se.append(float(roll.std(ddof=1) / np.sqrt(len(ok))) if len(ok) > 1 else 0.0)

    traces = [
        b_cov_trace_closed(inputs.model.n, inputs.model.m, inputs.sigma_w, nv, inputs.p)
        for nv in n_values
    ]
    bounds_ls = [gap_bound_least_squares(inputs, tr) for tr in traces]
    lag_results = [gap_bound_lagrange(inputs, tr) for tr in traces]
    lag_ok = all(r.assumption_ok for r in lag_results)
    bounds_lag = [r.value for r in lag_results]

    logn = np.log(np.array(n_values, dtype=float))
    logg = np.log(np.maximum(np.array(gap_mean), 1e-300))
    slope = float(np.polyfit(logn, logg, 1)[0]) if len(n_values) > 1 else float("nan")

    return ComplexityReport(
        n_values=n_values,
        gap_mean=gap_mean,
        gap_se=gap_se,
        rollout_gap_mean=roll_mean,
        rollout_gap_se=roll_se,
        bound_ls=bounds_ls,
        bound_lagrange=bounds_lag,
        lagrange_assumption_ok=lag_ok,
        cov_trace=traces,
        loglog_slope=slope,
        replicates=replicates,
        failed_replicates=failures,
        seed=seed,
    )
