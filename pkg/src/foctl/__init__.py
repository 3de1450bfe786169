"""Fractional-order LTI control toolkit.

Library layout:

* ``glcore``      Grunwald-Letnikov coefficients and the fractional difference
* ``dynamics``    simulation and closed-form propagator solution
* ``lqr``         finite-horizon optimal control, two constructions plus the
                  dynamic-programming oracle
* ``toeplitz``    structured solvers for the multiplier system
* ``sysid``       one-step least-squares identification
* ``complexity``  gap bounds and the Monte-Carlo sample-complexity experiment
* ``dataforge``   synthetic dataset generation and interchange serialization
* ``baseline``    fractional vs. plain-LTI prediction comparison
* ``cli``         the ``foctl`` command-line front end
"""

__version__ = "0.1.0"

from .glcore import FracOrder, GlCoeffTable, gl_coeff, gl_difference, lag_matrix
from .dynamics import (
    Convention,
    FoltiModel,
    PropagatorSet,
    Trajectory,
    closed_form_state,
    closed_form_trajectory,
    propagators,
    simulate,
    update_kernel,
)
from .lqr import (
    ControlSolution,
    CostSpec,
    LagrangeSystem,
    StackedSystem,
    build_lagrange,
    build_stacked,
    eval_cost,
    riccati_oracle,
    solve_lagrange,
    solve_least_squares,
)

__all__ = [
    "__version__",
    "FracOrder",
    "GlCoeffTable",
    "gl_coeff",
    "gl_difference",
    "lag_matrix",
    "Convention",
    "FoltiModel",
    "PropagatorSet",
    "Trajectory",
    "closed_form_state",
    "closed_form_trajectory",
    "propagators",
    "simulate",
    "update_kernel",
    "ControlSolution",
    "CostSpec",
    "LagrangeSystem",
    "StackedSystem",
    "build_lagrange",
    "build_stacked",
    "eval_cost",
    "riccati_oracle",
    "solve_lagrange",
    "solve_least_squares",
]
