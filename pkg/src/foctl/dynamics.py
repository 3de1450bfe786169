"""Discrete fractional-order LTI dynamics.

Two equivalent state representations are provided: the step-by-step
recursion over the full state history, and the closed-form propagator
expansion x_k = G_k x_0 + sum_j G_{k-1-j} B u_j.  Both are driven by the
same history-convolution kernel

    x_{k+1} = sum_{j=0..k} K_j x_{k-j} + B u_k,

so they agree to rounding at every step.

Two sign conventions circulate in the literature for how the first-lag
memory coefficient folds into the one-step transition matrix, differing
only in the j = 0 kernel term:

* ``A_MINUS_DIAG`` (default): K_0 = A - diag(alpha).  This matches the
  propagator recursion and is what every other module of the toolkit uses.
* ``A_PLUS_DIAG``: K_0 = A + diag(alpha), obtained by applying the
  first-lag memory weight with the opposite sign.  Exposed for
  experimentation only.

Deeper kernel terms K_j = -diag(c(alpha, j+1)), j >= 1, are identical under
both conventions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .glcore import FracOrder, GlCoeffTable

__all__ = [
    "Convention",
    "FoltiModel",
    "Trajectory",
    "PropagatorSet",
    "update_kernel",
    "propagators",
    "simulate",
    "closed_form_state",
    "closed_form_trajectory",
    "effective_transition",
]


class Convention(str, enum.Enum):
    """Sign convention for the j = 0 term of the update kernel."""

    A_MINUS_DIAG = "a_minus_diag"
    A_PLUS_DIAG = "a_plus_diag"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FoltiModel:
    """State-space triple (A, B, alpha) of a fractional-order LTI system."""

    a: np.ndarray
    b: np.ndarray
    order: FracOrder

    def __post_init__(self):
        a = _frozen(np.atleast_2d(self.a))
        b = np.asarray(self.b, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        b = _frozen(b)
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"A must be square, got shape {a.shape}")
        if a.shape[0] != self.order.n:
            raise ValueError(
                f"A is {a.shape[0]}x{a.shape[1]} but alpha has length {self.order.n}"
            )
        if b.shape[0] != a.shape[0]:
            raise ValueError(f"B has {b.shape[0]} rows, expected {a.shape[0]}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]


@dataclass(frozen=True)
class Trajectory:
    """States x_0..x_T and inputs u_0..u_{T-1} of one rollout."""

    states: np.ndarray
    inputs: np.ndarray

    def __post_init__(self):
        states = _frozen(np.atleast_2d(self.states))
        inputs = np.asarray(self.inputs, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs[:, None] if inputs.size else inputs.reshape(0, 1)
        inputs = _frozen(inputs)
        if states.shape[0] != inputs.shape[0] + 1:
            raise ValueError(
                f"{states.shape[0]} states require {states.shape[0] - 1} inputs, "
                f"got {inputs.shape[0]}"
            )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)

    @property
    def horizon(self) -> int:
        return self.inputs.shape[0]

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def m(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class PropagatorSet:
    """Propagator matrices G_0..G_T plus the kernel K_0..K_{T-1} they came from.

    G_0 = I and G_k = sum_{j=0..k-1} K_j G_{k-1-j}; the propagators play the
    role the powers of the transition matrix play for plain LTI systems.
    Read-only and safe to share.
    """

    matrices: np.ndarray
    kernel: np.ndarray
    convention: Convention

    @property
    def horizon(self) -> int:
        return self.matrices.shape[0] - 1

    @property
    def n(self) -> int:
        return self.matrices.shape[1]


def effective_transition(model: FoltiModel, convention: Convention = Convention.A_MINUS_DIAG) -> np.ndarray:
    """One-step transition matrix (the j = 0 kernel term) under a convention."""
    d = np.diag(model.order.alpha)
    if convention == Convention.A_MINUS_DIAG:
        return model.a - d
    return model.a + d


def update_kernel(
    model: FoltiModel,
    horizon: int,
    convention: Convention = Convention.A_MINUS_DIAG,
) -> np.ndarray:
    """History-convolution kernel K_0..K_{T-1} as an array of shape (T, n, n)."""
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    table = GlCoeffTable.build(model.order, horizon)
    kernel = np.empty((int(horizon), model.n, model.n))
    kernel[0] = effective_transition(model, convention)
    for j in range(1, int(horizon)):
        kernel[j] = -np.diag(table.coeffs[:, j + 1])
    kernel.setflags(write=False)
    return kernel


def propagators(
    model: FoltiModel,
    horizon: int,
    convention: Convention = Convention.A_MINUS_DIAG,
) -> PropagatorSet:
    """Propagators G_0..G_T by the O(T^2) block convolution recursion."""
    if horizon < 0:
        raise ValueError(f"horizon must be non-negative, got {horizon}")
    n = model.n
    g = np.empty((int(horizon) + 1, n, n))
    g[0] = np.eye(n)
    if horizon == 0:
        kernel = np.empty((0, n, n))
    else:
        kernel = update_kernel(model, horizon, convention)
        for k in range(1, int(horizon) + 1):
            acc = np.zeros((n, n))
            for j in range(k):
                acc += kernel[j] @ g[k - 1 - j]
            g[k] = acc
    g.setflags(write=False)
    return PropagatorSet(matrices=g, kernel=kernel, convention=convention)


def simulate(
    model: FoltiModel,
    x0,
    inputs,
    noise=None,
    convention: Convention = Convention.A_MINUS_DIAG,
    memory: int | None = None,
) -> Trajectory:
    """Roll the recursion forward over the full state history.

    ``noise``, when given, holds one additive disturbance vector per step.
    ``memory`` optionally truncates the history sum to the most recent
    ``memory`` kernel terms; the default keeps the entire history.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    u = np.asarray(inputs, dtype=float)
    if u.ndim == 1:
        u = u[:, None] if u.size else u.reshape(0, model.m)
    horizon = u.shape[0]
    if x0.shape[0] != model.n:
        raise ValueError(f"x0 has length {x0.shape[0]}, expected {model.n}")
    if u.shape[1] != model.m:
        raise ValueError(f"inputs have width {u.shape[1]}, expected {model.m}")
    if noise is not None:
        w = np.asarray(noise, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        if w.shape != (horizon, model.n):
            raise ValueError(f"noise must have shape ({horizon}, {model.n}), got {w.shape}")
    else:
        w = None
    if memory is not None and memory < 1:
        raise ValueError(f"memory length must be positive, got {memory}")

    states = np.empty((horizon + 1, model.n))
    states[0] = x0
    if horizon:
        kernel = update_kernel(model, horizon, convention)
        for k in range(horizon):
            depth = k + 1 if memory is None else min(k + 1, memory)
            x_next = model.b @ u[k]
            for j in range(depth):
                x_next += kernel[j] @ states[k - j]
            if w is not None:
                x_next += w[k]
            states[k + 1] = x_next
    return Trajectory(states=states, inputs=u)


def closed_form_state(props: PropagatorSet, model: FoltiModel, x0, inputs, k: int) -> np.ndarray:
    """State x_k from the propagator expansion G_k x_0 + sum_j G_{k-1-j} B u_j."""
    if not (0 <= k <= props.horizon):
        raise ValueError(f"step {k} outside propagator horizon {props.horizon}")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    u = np.asarray(inputs, dtype=float)
    if u.ndim == 1:
        u = u[:, None] if u.size else u.reshape(0, model.m)
    if u.shape[0] < k:
        raise ValueError(f"need {k} inputs to reach step {k}, got {u.shape[0]}")
    x = props.matrices[k] @ x0
    for j in range(k):
        x += props.matrices[k - 1 - j] @ (model.b @ u[j])
    return x


def closed_form_trajectory(props: PropagatorSet, model: FoltiModel, x0, inputs) -> Trajectory:
    """Whole trajectory from the propagator expansion (noise-free by construction)."""
    u = np.asarray(inputs, dtype=float)
    if u.ndim == 1:
        u = u[:, None] if u.size else u.reshape(0, model.m)
    horizon = u.shape[0]
    states = np.empty((horizon + 1, model.n))
    for k in range(horizon + 1):
        states[k] = closed_form_state(props, model, x0, u, k)
    return Trajectory(states=states, inputs=u)
