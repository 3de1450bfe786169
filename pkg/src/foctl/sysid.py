"""Least-squares identification from one-step trajectory samples.

The regression fits the coupled one-step transition matrix (in which the
system matrix A and the fractional orders are entangled) together with the
input matrix B.  Only first transitions (x_0, u_0) -> x_1 enter: later
transitions involve deeper memory terms the linear regression does not
model.  The orders themselves are recovered from the diagonal of the
coupled estimate once diag(A) is known; A and alpha are not jointly
identifiable, so the diagonal must come from the caller.

The sign used for that extraction depends on the dynamics convention of the
data.  Under ``A_PLUS_DIAG`` (the default here, matching the one-step map of
the classic identification protocol) the coupled matrix is A + diag(alpha);
under ``A_MINUS_DIAG`` it is A - diag(alpha) and the extraction flips sign.
Dataset-driven callers should pass the convention recorded alongside the
data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Convention
from .errors import IdentifiabilityError

__all__ = [
    "RegressionData",
    "IdentifiedParams",
    "build_regression",
    "estimate",
    "alpha_from_coupled_diag",
    "estimator_covariance",
]


@dataclass(frozen=True)
class RegressionData:
    """One-step samples (x0_i, u0_i, x1_i) plus the known diagonal of A."""

    x0: np.ndarray
    u0: np.ndarray
    x1: np.ndarray
    known_diag_a: np.ndarray

    def __post_init__(self):
        x0 = np.atleast_2d(np.asarray(self.x0, dtype=float))
        u0 = np.atleast_2d(np.asarray(self.u0, dtype=float))
        x1 = np.atleast_2d(np.asarray(self.x1, dtype=float))
        diag = np.atleast_1d(np.asarray(self.known_diag_a, dtype=float))
        if x0.shape[0] < 1:
            raise ValueError("at least one sample is required")
        if x0.shape != x1.shape:
            raise ValueError(f"x0 and x1 shapes disagree: {x0.shape} vs {x1.shape}")
        if u0.shape[0] != x0.shape[0]:
            raise ValueError(f"{x0.shape[0]} samples but {u0.shape[0]} inputs")
        if diag.shape[0] != x0.shape[1]:
            raise ValueError(
                f"known diag(A) has length {diag.shape[0]}, states have length {x0.shape[1]}"
            )
        for name, arr in (("x0", x0), ("u0", u0), ("x1", x1), ("known_diag_a", diag)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def p(self) -> int:
        return self.x0.shape[0]

    @property
    def n(self) -> int:
        return self.x0.shape[1]

    @property
    def m(self) -> int:
        return self.u0.shape[1]


@dataclass(frozen=True)
class IdentifiedParams:
    """Estimates of the coupled transition matrix, B, and the extracted orders."""

    a_alpha_hat: np.ndarray
    b_hat: np.ndarray
    alpha_hat: np.ndarray
    residual_norm: float
    theta_cov: np.ndarray | None = None


def build_regression(data: RegressionData) -> tuple[np.ndarray, np.ndarray]:
    """Full design matrix and stacked target of the one-step regression.

    Row block i is block-diagonal in the state rows: each of the n rows of
    sample i carries [x0_i', u0_i'] in its own column block, so the design
    has shape (p*n, n^2 + n*m) and the target stacks the x1_i.
    """
    p, n, m = data.p, data.n, data.m
    xi = np.zeros((p * n, n * n + n * m))
    for i in range(p):
        for r in range(n):
            row = i * n + r
            xi[row, r * n : (r + 1) * n] = data.x0[i]
            xi[row, n * n + r * m : n * n + (r + 1) * m] = data.u0[i]
    return xi, data.x1.reshape(p * n)


def alpha_from_coupled_diag(
    coupled_diag: np.ndarray,
    known_diag_a: np.ndarray,
    convention: Convention = Convention.A_PLUS_DIAG,
) -> np.ndarray:
    """Fractional orders from the diagonal of the coupled one-step matrix."""
    coupled_diag = np.asarray(coupled_diag, dtype=float)
    known_diag_a = np.asarray(known_diag_a, dtype=float)
    if convention == Convention.A_PLUS_DIAG:
        return coupled_diag - known_diag_a
    return known_diag_a - coupled_diag


def estimate(
    data: RegressionData,
    convention: Convention = Convention.A_PLUS_DIAG,
    noise_cov: np.ndarray | None = None,
    n_repeats: int = 1,
) -> IdentifiedParams:
    """Least-squares estimate of the coupled transition matrix and B.

    Solved through an orthogonal factorization of the design rather than the
    normal equations; because every state row of a sample shares the same
    regressor [x0', u0'], the big block-diagonal regression decouples into a
    single multi-target solve.  The estimated orders are extracted from the
    coupled diagonal per ``convention`` and are not clamped.  When the
    per-sample noise covariance is known, the estimator covariance is attached.
    """
    p, n, m = data.p, data.n, data.m
    z = np.hstack([data.x0, data.u0])  # shared per-sample regressor rows
    rank = np.linalg.matrix_rank(z)
    if rank < n + m:
        null_dim = n * (n + m - rank)
        raise IdentifiabilityError(
            f"design is rank deficient: {p} samples span rank {rank} of {n + m} "
            f"regressor directions, leaving a null space of dimension {null_dim}",
            null_space_dim=null_dim,
        )
    coeffs, _, _, _ = np.linalg.lstsq(z, data.x1, rcond=None)
    a_alpha_hat = coeffs[:n].T
    b_hat = coeffs[n:].T
    residual = float(np.linalg.norm(z @ coeffs - data.x1))
    alpha_hat = alpha_from_coupled_diag(np.diag(a_alpha_hat), data.known_diag_a, convention)
    theta_cov = None
    if noise_cov is not None:
        xi, _ = build_regression(data)
        theta_cov = estimator_covariance(xi, noise_cov, n_repeats)
    return IdentifiedParams(
        a_alpha_hat=a_alpha_hat,
        b_hat=b_hat,
        alpha_hat=alpha_hat,
        residual_norm=residual,
        theta_cov=theta_cov,
    )


def estimator_covariance(xi: np.ndarray, noise_cov: np.ndarray, n_repeats: int = 1) -> np.ndarray:
    """Covariance of the stacked estimate for known per-sample noise covariance.

    Evaluates (1/N) (xi'xi)^-1 xi' (I_p kron K_w) xi (xi'xi)^-1 for a design
    held fixed across the N repeated batches.
    """
    xi = np.asarray(xi, dtype=float)
    k_w = np.atleast_2d(np.asarray(noise_cov, dtype=float))
    n = k_w.shape[0]
    if xi.shape[0] % n:
        raise ValueError(f"design with {xi.shape[0]} rows is not a stack of {n}-row sample blocks")
    if n_repeats < 1:
        raise ValueError(f"n_repeats must be positive, got {n_repeats}")
    p = xi.shape[0] // n
    gram = xi.T @ xi
    try:
        ginv = np.linalg.inv(gram)
    except np.linalg.LinAlgError as exc:
        raise IdentifiabilityError(
            f"design gram matrix is singular: {exc}",
            null_space_dim=xi.shape[1] - np.linalg.matrix_rank(gram),
        ) from exc
    middle = xi.T @ np.kron(np.eye(p), k_w) @ xi
    return (ginv @ middle @ ginv) / float(n_repeats)
