"""Finite-horizon LQR for fractional-order LTI systems.

Two independent constructions of the same optimal control sequence:

* stacked least squares over the whole horizon, solved through a
  symmetric positive-definite factorization of the normal matrix, and
* the multiplier stationarity system, a block-Toeplitz linear system in
  the stacked multipliers, solved dense or iteratively.

A classical backward dynamic-programming recursion is included as the
integer-order oracle.

The multiplier system is assembled from the same history-convolution kernel
that drives the dynamics, so both solvers agree under either sign convention;
the blocks above the diagonal are the transposed kernel terms.  When the
terminal weight differs from the running state weight, the final block row
of the system deviates from the Toeplitz pattern and is carried as a
last-row correction on the structured operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dynamics import Convention, FoltiModel, PropagatorSet, Trajectory, simulate
from .errors import SingularSystemError
from .toeplitz import BlockToeplitz, LastRowCorrected
from . import toeplitz

__all__ = [
    "CostSpec",
    "StackedSystem",
    "LagrangeSystem",
    "ControlSolution",
    "build_stacked",
    "solve_least_squares",
    "build_lagrange",
    "solve_lagrange",
    "eval_cost",
    "riccati_oracle",
]

_SYM_TOL = 1e-10


def _check_symmetric(mat: np.ndarray, name: str) -> np.ndarray:
    m = np.atleast_2d(np.asarray(mat, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max()))
    if not np.allclose(m, m.T, rtol=0.0, atol=_SYM_TOL * scale):
        raise ValueError(f"{name} must be symmetric")
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class CostSpec:
    """Quadratic weights (Q, R, Q_f): running state, input, and terminal state.

    Q and Q_f must be positive semidefinite.  R must be strictly positive
    definite: the multiplier construction inverts it, so a semidefinite R is
    rejected up front.
    """

    q: np.ndarray
    r: np.ndarray
    q_f: np.ndarray

    def __post_init__(self):
        q = _check_symmetric(self.q, "Q")
        r = _check_symmetric(self.r, "R")
        q_f = _check_symmetric(self.q_f, "Q_f")
        for name, m in (("Q", q), ("Q_f", q_f)):
            min_eig = float(np.linalg.eigvalsh(m)[0])
            if min_eig < -_SYM_TOL * max(1.0, float(np.abs(m).max())):
                raise ValueError(f"{name} must be positive semidefinite (min eig {min_eig:.3e})")
        min_eig_r = float(np.linalg.eigvalsh(r)[0])
        if min_eig_r <= 0.0:
            raise ValueError(
                f"R must be strictly positive definite (min eig {min_eig_r:.3e}); "
                "a semidefinite input weight cannot be inverted by the multiplier solver"
            )
        for m in (q, r, q_f):
            m.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "q_f", q_f)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def m(self) -> int:
        return self.r.shape[0]


@dataclass(frozen=True)
class StackedSystem:
    """Whole-horizon stacked form of the control problem.

    ``input_to_state`` maps the stacked inputs to the stacked states
    (first block row zero, blocks G_{k-1-j} B), ``x0_to_state`` maps the
    initial state (blocks I, G_1..G_T), and ``disturbance_to_state`` is the
    input map with the B factor stripped, i.e. the response to arbitrary
    per-step additive disturbances.  ``state_weight`` and ``input_weight``
    are the block-diagonal stacked weights, with the terminal block of
    ``state_weight`` holding Q_f.
    """

    input_to_state: np.ndarray
    disturbance_to_state: np.ndarray
    x0_to_state: np.ndarray
    state_weight: np.ndarray
    input_weight: np.ndarray
    horizon: int
    n: int
    m: int

    def states_for(self, u_stacked: np.ndarray, x0: np.ndarray) -> np.ndarray:
        return self.input_to_state @ u_stacked + self.x0_to_state @ x0

    def cost_of(self, u_stacked: np.ndarray, x0: np.ndarray) -> float:
        x = self.states_for(u_stacked, x0)
        return float(x @ self.state_weight @ x + u_stacked @ self.input_weight @ u_stacked)


@dataclass(frozen=True)
class LagrangeSystem:
    """Stationarity system of the multiplier construction.

    The stacked multipliers solve ``(I - coupling) lambda = 2 x0_forcing x0``;
    ``system`` is the structured operator for I - coupling (block Toeplitz,
    plus a last-row correction when Q_f != Q).
    """

    coupling: np.ndarray
    x0_forcing: np.ndarray
    system: BlockToeplitz | LastRowCorrected
    cost: CostSpec
    convention: Convention
    horizon: int
    n: int
    m: int


@dataclass(frozen=True)
class ControlSolution:
    """Optimal input sequence with its cost and the method that produced it."""

    u_seq: np.ndarray
    cost: float
    method: str

    def __post_init__(self):
        u = np.array(self.u_seq, dtype=float)
        u.setflags(write=False)
        object.__setattr__(self, "u_seq", u)
        object.__setattr__(self, "cost", float(self.cost))

    @property
    def stacked(self) -> np.ndarray:
        return self.u_seq.reshape(-1)


def _check_problem(model: FoltiModel, props: PropagatorSet, cost: CostSpec, horizon: int) -> None:
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    if props.horizon < horizon:
        raise ValueError(f"propagators cover horizon {props.horizon}, need {horizon}")
    if cost.n != model.n or cost.m != model.m:
        raise ValueError(
            f"cost dimensions ({cost.n}, {cost.m}) do not match model ({model.n}, {model.m})"
        )


def build_stacked(
    model: FoltiModel, props: PropagatorSet, cost: CostSpec, horizon: int
) -> StackedSystem:
    """Assemble the stacked whole-horizon system for ``horizon`` steps."""
    _check_problem(model, props, cost, horizon)
    t, n, m = int(horizon), model.n, model.m
    g = props.matrices

    dist = np.zeros(((t + 1) * n, t * n))
    for k in range(1, t + 1):
        for j in range(k):
            dist[k * n : (k + 1) * n, j * n : (j + 1) * n] = g[k - 1 - j]
    inp = np.zeros(((t + 1) * n, t * m))
    for k in range(1, t + 1):
        for j in range(k):
            inp[k * n : (k + 1) * n, j * m : (j + 1) * m] = g[k - 1 - j] @ model.b

    free = np.zeros(((t + 1) * n, n))
    for k in range(t + 1):
        free[k * n : (k + 1) * n] = g[k]

    state_w = np.zeros(((t + 1) * n, (t + 1) * n))
    for k in range(t):
        state_w[k * n : (k + 1) * n, k * n : (k + 1) * n] = cost.q
    state_w[t * n :, t * n :] = cost.q_f
    input_w = np.kron(np.eye(t), cost.r)

    return StackedSystem(
        input_to_state=inp,
        disturbance_to_state=dist,
        x0_to_state=free,
        state_weight=state_w,
        input_weight=input_w,
        horizon=t,
        n=n,
        m=m,
    )


def solve_least_squares(sys: StackedSystem, x0) -> ControlSolution:
    """Minimize the stacked quadratic cost through the normal equations.

    The normal matrix is positive definite whenever the input weight is, so
    it is factorized symmetrically; no inverse is formed.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (sys.n,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({sys.n},)")
    g, qbar, rbar = sys.input_to_state, sys.state_weight, sys.input_weight
    normal = g.T @ qbar @ g + rbar
    rhs = g.T @ qbar.T @ (sys.x0_to_state @ x0)
    try:
        chol = scipy.linalg.cho_factor(normal, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"normal matrix is not positive definite: {exc}", cond_estimate=float("inf")
        ) from exc
    u = -scipy.linalg.cho_solve(chol, rhs)
    cost = sys.cost_of(u, x0)
    return ControlSolution(u_seq=u.reshape(sys.horizon, sys.m), cost=cost, method="least-squares")


def _r_inverse(cost: CostSpec) -> np.ndarray:
    try:
        chol = scipy.linalg.cho_factor(cost.r, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystemError(f"R is singular: {exc}", cond_estimate=float("inf")) from exc
    return scipy.linalg.cho_solve(chol, np.eye(cost.m))


def build_lagrange(
    model: FoltiModel, props: PropagatorSet, cost: CostSpec, horizon: int
) -> LagrangeSystem:
    """Assemble the multiplier stationarity system for ``horizon`` steps."""
    _check_problem(model, props, cost, horizon)
    t, n = int(horizon), model.n
    g = props.matrices
    brb = model.b @ _r_inverse(cost) @ model.b.T

    # Generators of the Toeplitz part (running weight Q throughout).
    col = np.empty((t, n, n))
    for d in range(t):
        col[d] = -cost.q @ g[d] @ brb
    row = np.empty((t, n, n))
    row[0] = col[0]
    for d in range(1, t):
        row[d] = props.kernel[d - 1].T

    coupling = np.empty((t * n, t * n))
    for i in range(t):
        q_row = cost.q_f if i == t - 1 else cost.q
        for j in range(t):
            if j <= i:
                block = -q_row @ g[i - j] @ brb
            else:
                block = props.kernel[j - i - 1].T
            coupling[i * n : (i + 1) * n, j * n : (j + 1) * n] = block

    forcing = np.empty((t * n, n))
    for i in range(t - 1):
        forcing[i * n : (i + 1) * n] = cost.q @ g[i + 1]
    forcing[(t - 1) * n :] = cost.q_f @ g[t]

    eye_col = np.zeros((t, n, n))
    eye_col[0] = np.eye(n)
    base = BlockToeplitz(first_block_col=eye_col - col, first_block_row=eye_col - row)
    if np.array_equal(cost.q_f, cost.q):
        system: BlockToeplitz | LastRowCorrected = base
    else:
        last_row = np.eye(t * n)[(t - 1) * n :] - coupling[(t - 1) * n :]
        system = LastRowCorrected(base=base, last_block_row=last_row)

    return LagrangeSystem(
        coupling=coupling,
        x0_forcing=forcing,
        system=system,
        cost=cost,
        convention=props.convention,
        horizon=t,
        n=n,
        m=model.m,
    )


def solve_lagrange(
    lsys: LagrangeSystem,
    model: FoltiModel,
    x0,
    solver: str = "dense",
    tol: float = 1e-10,
) -> ControlSolution:
    """Solve the multiplier system and map the multipliers back to inputs.

    Block k of the solution is the multiplier attached to the step-(k+1)
    constraint, so u_k reads block k.  The reported cost comes from
    simulating the returned inputs on the model.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (lsys.n,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({lsys.n},)")
    rhs = 2.0 * (lsys.x0_forcing @ x0)
    lam = toeplitz.solve(lsys.system, rhs, method=solver, tol=tol)
    rinv_bt = _r_inverse(lsys.cost) @ model.b.T
    u = np.empty((lsys.horizon, lsys.m))
    for k in range(lsys.horizon):
        u[k] = -0.5 * rinv_bt @ lam[k * lsys.n : (k + 1) * lsys.n]
    traj = simulate(model, x0, u, convention=lsys.convention)
    return ControlSolution(u_seq=u, cost=eval_cost(traj, lsys.cost), method="lagrange")


def eval_cost(trajectory: Trajectory, cost: CostSpec) -> float:
    """Quadratic trajectory cost: running state and input terms plus the terminal term."""
    if trajectory.n != cost.n:
        raise ValueError(f"trajectory states have length {trajectory.n}, cost expects {cost.n}")
    if trajectory.horizon and trajectory.m != cost.m:
        raise ValueError(f"trajectory inputs have length {trajectory.m}, cost expects {cost.m}")
    x, u = trajectory.states, trajectory.inputs
    total = float(x[-1] @ cost.q_f @ x[-1])
    for k in range(trajectory.horizon):
        total += float(x[k] @ cost.q @ x[k] + u[k] @ cost.r @ u[k])
    return total


def riccati_oracle(a_eff, b, cost: CostSpec, horizon: int, x0) -> ControlSolution:
    """Classical finite-horizon LQR by backward dynamic programming.

    Operates on a plain one-step transition matrix; serves as the oracle the
    fractional solvers must match when every order equals one.  Returns the
    open-loop unrolled input sequence.
    """
    a_eff = np.atleast_2d(np.asarray(a_eff, dtype=float))
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    t, n, m = int(horizon), a_eff.shape[0], b.shape[1]

    gains = np.empty((t, m, n))
    p = cost.q_f.copy()
    for k in range(t - 1, -1, -1):
        s = cost.r + b.T @ p @ b
        try:
            gains[k] = np.linalg.solve(s, b.T @ p @ a_eff)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(
                f"R + B'PB singular at step {k}: {exc}", cond_estimate=float("inf")
            ) from exc
        closed = a_eff - b @ gains[k]
        p = cost.q + gains[k].T @ cost.r @ gains[k] + closed.T @ p @ closed
        p = 0.5 * (p + p.T)

    states = np.empty((t + 1, n))
    inputs = np.empty((t, m))
    states[0] = x0
    for k in range(t):
        inputs[k] = -gains[k] @ states[k]
        states[k + 1] = a_eff @ states[k] + b @ inputs[k]
    traj = Trajectory(states=states, inputs=inputs)
    return ControlSolution(u_seq=inputs, cost=eval_cost(traj, cost), method="riccati-oracle")
