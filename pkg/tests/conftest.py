"""Shared helpers for the test suite: seeded random problem instances."""

from __future__ import annotations

import numpy as np
import pytest

from foctl.dynamics import FoltiModel
from foctl.glcore import FracOrder
from foctl.lqr import CostSpec


def random_folti(rng, n=None, m=None, alpha_range=(0.1, 0.9), radius=0.9,
                 prop_bound=None, horizon=None):
    """Random stable model with entries in [-1, 1] and orders inside ``alpha_range``.

    With ``prop_bound`` set, A is additionally shrunk until every propagator up
    to ``horizon`` stays below that norm; tolerance-bearing tests need instances
    whose trajectories do not blow up, since rounding scales with the state
    magnitudes.
    """
    from foctl.dynamics import propagators

    n = n if n is not None else int(rng.integers(1, 5))
    m = m if m is not None else int(rng.integers(1, 5))
    a = rng.uniform(-1.0, 1.0, (n, n))
    rho = float(np.max(np.abs(np.linalg.eigvals(a))))
    if rho > radius:
        a *= radius / rho
    b = rng.uniform(-1.0, 1.0, (n, m))
    alpha = rng.uniform(*alpha_range, n)
    model = FoltiModel(a=a, b=b, order=FracOrder(alpha))
    if prop_bound is not None:
        for _ in range(30):
            props = propagators(model, horizon)
            if float(np.max(np.abs(props.matrices))) <= prop_bound:
                break
            a = a * 0.7
            model = FoltiModel(a=a, b=b, order=FracOrder(alpha))
    return model


def random_cost_spec(rng, n, m, qf_equals_q=True, ridge=1e-4):
    mq = rng.uniform(-1.0, 1.0, (n, n))
    q = mq.T @ mq
    mr = rng.uniform(-1.0, 1.0, (m, m))
    r = mr.T @ mr + ridge * np.eye(m)
    if qf_equals_q:
        q_f = q
    else:
        mf = rng.uniform(-1.0, 1.0, (n, n))
        q_f = mf.T @ mf
    return CostSpec(q=q, r=r, q_f=q_f)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
