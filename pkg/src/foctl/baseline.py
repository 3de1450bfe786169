"""Held-out prediction comparison: fractional estimator vs. plain LTI.

Both estimators consume the same one-step transitions from the training
trajectories, which makes the regressions identical; what differs is the
rollout model.  The fractional rollout keeps the memory terms implied by
the extracted orders, the LTI rollout iterates the one-step matrix alone.
Multi-step mean squared prediction error on held-out trajectories then
isolates the value of modeling the memory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataforge import Dataset
from .dynamics import Convention, FoltiModel, simulate
from .glcore import FracOrder
from .sysid import IdentifiedParams, RegressionData, estimate

__all__ = ["BaselineReport", "first_transitions", "rollout_model_from_estimate", "baseline_comparison"]

_ALPHA_FLOOR = 1e-6


@dataclass(frozen=True)
class BaselineReport:
    """Multi-step held-out MSE of both estimators and their ratio."""

    folti_mse: float
    lti_mse: float
    ratio: float
    per_step_folti: list[float]
    per_step_lti: list[float]
    n_train: int
    n_holdout: int
    alpha_hat: list[float]
    alpha_clipped: bool

    def to_dict(self) -> dict:
        return {
            "folti_mse": self.folti_mse,
            "lti_mse": self.lti_mse,
            "ratio": self.ratio,
            "per_step_folti": list(self.per_step_folti),
            "per_step_lti": list(self.per_step_lti),
            "n_train": self.n_train,
            "n_holdout": self.n_holdout,
            "alpha_hat": list(self.alpha_hat),
            "alpha_clipped": self.alpha_clipped,
        }


def first_transitions(dataset: Dataset, indices) -> RegressionData:
    """One-step regression samples sliced from the first transition of each trajectory."""
    model = dataset.model_for(0)
    x0 = np.array([dataset.trajectories[i].states[0] for i in indices])
    u0 = np.array([dataset.trajectories[i].inputs[0] for i in indices])
    x1 = np.array([dataset.trajectories[i].states[1] for i in indices])
    return RegressionData(x0=x0, u0=u0, x1=x1, known_diag_a=np.diag(model.a))


def rollout_model_from_estimate(
    est: IdentifiedParams, convention: Convention
) -> tuple[FoltiModel, bool]:
    """Fractional model whose one-step map equals the estimated coupled matrix.

    The estimated orders are clipped into (0, 1] for the memory coefficients;
    A is reconstructed so the clipping never perturbs the one-step map itself.
    """
    alpha = np.asarray(est.alpha_hat, dtype=float)
    clipped = bool(np.any(alpha < _ALPHA_FLOOR) or np.any(alpha > 1.0))
    alpha_sim = np.clip(alpha, _ALPHA_FLOOR, 1.0)
    if convention == Convention.A_MINUS_DIAG:
        a_sim = est.a_alpha_hat + np.diag(alpha_sim)
    else:
        a_sim = est.a_alpha_hat - np.diag(alpha_sim)
    return FoltiModel(a=a_sim, b=est.b_hat, order=FracOrder(alpha_sim)), clipped


def _lti_fit(data: RegressionData) -> tuple[np.ndarray, np.ndarray]:
    z = np.hstack([data.x0, data.u0])
    coeffs, _, _, _ = np.linalg.lstsq(z, data.x1, rcond=None)
    n = data.n
    return coeffs[:n].T, coeffs[n:].T


def baseline_comparison(
    dataset: Dataset,
    holdout_fraction: float = 0.25,
) -> BaselineReport:
    """Fit both estimators on the training split, score rollouts on the rest."""
    if not dataset.shared_model:
        raise ValueError("baseline comparison needs a dataset generated from a single model")
    total = len(dataset)
    if total < 2:
        raise ValueError(f"baseline comparison needs at least 2 trajectories, got {total}")
    if not (0.0 < holdout_fraction < 1.0):
        raise ValueError(f"holdout fraction must lie in (0, 1), got {holdout_fraction}")
    n_hold = max(1, int(round(total * holdout_fraction)))
    n_train = total - n_hold
    if n_train < 1:
        raise ValueError(f"holdout fraction {holdout_fraction} leaves no training trajectories")

    convention = dataset.convention
    train_data = first_transitions(dataset, range(n_train))
    est = estimate(train_data, convention=convention)
    frac_model, clipped = rollout_model_from_estimate(est, convention)
    a_lti, b_lti = _lti_fit(train_data)

    horizon = dataset.spec.horizon
    sq_frac = np.zeros(horizon)
    sq_lti = np.zeros(horizon)
    for i in range(n_train, total):
        traj = dataset.trajectories[i]
        pred_frac = simulate(frac_model, traj.states[0], traj.inputs, convention=convention)
        states_lti = np.empty_like(traj.states)
        states_lti[0] = traj.states[0]
        for k in range(horizon):
            states_lti[k + 1] = a_lti @ states_lti[k] + b_lti @ traj.inputs[k]
        err_frac = pred_frac.states[1:] - traj.states[1:]
        err_lti = states_lti[1:] - traj.states[1:]
        sq_frac += np.mean(err_frac**2, axis=1)
        sq_lti += np.mean(err_lti**2, axis=1)
    per_step_frac = sq_frac / n_hold
    per_step_lti = sq_lti / n_hold
    mse_frac = float(per_step_frac.mean())
    mse_lti = float(per_step_lti.mean())

    return BaselineReport(
        folti_mse=mse_frac,
        lti_mse=mse_lti,
        ratio=mse_frac / mse_lti if mse_lti > 0 else float("inf"),
        per_step_folti=[float(v) for v in per_step_frac],
        per_step_lti=[float(v) for v in per_step_lti],
        n_train=n_train,
        n_holdout=n_hold,
        alpha_hat=[float(v) for v in est.alpha_hat],
        alpha_clipped=clipped,
    )
