"""Grunwald-Letnikov difference operator core.

Coefficient tables for the discrete fractional difference, the per-lag
diagonal weight matrices, and the backward difference itself.  Coefficients
are generated with the stable multiplicative recurrence

    c(a, 0) = 1,    c(a, j) = c(a, j - 1) * (j - 1 - a) / j,

equivalent to the gamma-ratio definition but free of the overflow and
cancellation that direct gamma evaluation hits for large lags.  At a = 1 the
recurrence yields exact zeros for every lag j >= 2, so the integer-order
special case carries no rounding residue.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FracOrder",
    "GlCoeffTable",
    "gl_coeff",
    "gl_coeff_row",
    "lag_matrix",
    "gl_difference",
]


def _check_order_scalar(alpha: float) -> float:
    a = float(alpha)
    if not (0.0 < a <= 1.0):
        raise ValueError(f"fractional order must lie in (0, 1], got {a}")
    return a


@dataclass(frozen=True)
class FracOrder:
    """Vector of per-state fractional orders, each in (0, 1]."""

    alpha: np.ndarray

    def __post_init__(self):
        arr = np.atleast_1d(np.asarray(self.alpha, dtype=float)).copy()
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError(f"alpha must be a non-empty vector, got shape {arr.shape}")
        if not np.all((arr > 0.0) & (arr <= 1.0)):
            raise ValueError(f"every fractional order must lie in (0, 1], got {arr}")
        arr.setflags(write=False)
        object.__setattr__(self, "alpha", arr)

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    def __len__(self) -> int:
        return self.n


def gl_coeff(alpha: float, j: int) -> float:
    """Scalar GL coefficient at lag ``j`` for a single order ``alpha``."""
    a = _check_order_scalar(alpha)
    if j < 0:
        raise ValueError(f"lag index must be non-negative, got {j}")
    c = 1.0
    for i in range(1, int(j) + 1):
        c *= (i - 1 - a) / i
    return c


def gl_coeff_row(alpha: float, horizon: int) -> np.ndarray:
    """All GL coefficients of one order up to lag ``horizon``, via the recurrence."""
    a = _check_order_scalar(alpha)
    if horizon < 0:
        raise ValueError(f"horizon must be non-negative, got {horizon}")
    out = np.empty(int(horizon) + 1)
    out[0] = 1.0
    for j in range(1, int(horizon) + 1):
        out[j] = out[j - 1] * (j - 1 - a) / j
    return out


@dataclass(frozen=True)
class GlCoeffTable:
    """Precomputed GL coefficients for a fractional-order vector.

    ``coeffs[i, j]`` is the lag-``j`` coefficient of state component ``i``.
    Built once per (order, horizon) pair and shared read-only; all consumers
    treat it as immutable.
    """

    order: FracOrder
    horizon: int
    coeffs: np.ndarray

    @classmethod
    def build(cls, order: FracOrder, horizon: int) -> "GlCoeffTable":
        if horizon < 0:
            raise ValueError(f"horizon must be non-negative, got {horizon}")
        rows = np.vstack([gl_coeff_row(a, horizon) for a in order.alpha])
        rows.setflags(write=False)
        return cls(order=order, horizon=int(horizon), coeffs=rows)

    def lag_matrix(self, j: int) -> np.ndarray:
        """Diagonal matrix of the lag-``j`` coefficients (identity at j = 0)."""
        if not (0 <= j <= self.horizon):
            raise ValueError(f"lag {j} outside table horizon {self.horizon}")
        return np.diag(self.coeffs[:, j])


def lag_matrix(order: FracOrder, j: int) -> np.ndarray:
    """Diagonal matrix whose entries are the per-component GL coefficients at lag ``j``."""
    if j < 0:
        raise ValueError(f"lag index must be non-negative, got {j}")
    return np.diag([gl_coeff(a, j) for a in order.alpha])


def gl_difference(table: GlCoeffTable, history) -> np.ndarray:
    """Backward fractional difference of the newest state in ``history``.

    ``history`` holds states x_0 .. x_k (oldest first); the result is
    sum_{j=0..k} diag(coeffs[:, j]) x_{k-j}.
    """
    hist = np.atleast_2d(np.asarray(history, dtype=float))
    k = hist.shape[0] - 1
    if hist.shape[1] != table.order.n:
        raise ValueError(
            f"history vectors have length {hist.shape[1]}, expected {table.order.n}"
        )
    if k > table.horizon:
        raise ValueError(f"history length {k + 1} exceeds table horizon {table.horizon} + 1")
    # coeffs[:, j] weights x_{k-j}; flip the history so lags align columnwise
    weights = table.coeffs[:, : k + 1]
    return np.einsum("ij,ji->i", weights, hist[::-1])
