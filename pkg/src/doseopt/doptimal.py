"""Locally D-optimal designs.

Maximizes ``log det M`` by support-size growth starting from a saturated
(m-point) design; in this model family the optimum is saturated with
equal weights, which the growth loop discovers rather than assumes.
Every returned design passes the Kiefer-Wolfowitz bound check.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from doseopt.certificates import verify_d_optimality
from doseopt.designs import ContinuousDesign
from doseopt.errors import OptimizerFailureError
from doseopt.models import Model, Theta, gradient
from doseopt.optim import OptimizerConfig, grow_support

__all__ = ["solve_d_optimal", "verify_d_optimality"]


def _logdet_objective(model: Model, theta: Theta):
    def objective(points: np.ndarray, weights: np.ndarray) -> float:
        F = gradient(model, theta, points)
        if F.ndim == 1:
            F = F[:, None]
        M = (F * weights) @ F.T
        sign, logdet = np.linalg.slogdet(M)
        return logdet if sign > 0 else -np.inf

    return objective


def solve_d_optimal(
    model: Model,
    theta: Theta,
    space_upper: float,
    config: OptimizerConfig = OptimizerConfig(restarts=12),
) -> ContinuousDesign:
    """Locally D-optimal design for *model* at the nominal *theta*.

    For the constant model every design is optimal; the single point at
    the top dose is returned by convention.

    Raises
    ------
    OptimizerFailureError
        If no design passing the equivalence-theorem bound is found
        within the retry budget.
    """
    theta.validate_for(model)
    if model is Model.CONSTANT:
        return ContinuousDesign((space_upper,), (1.0,), space_upper)

    m = model.n_params
    objective = _logdet_objective(model, theta)
    heuristic = (
        space_upper * (np.arange(m) / (m - 1)) ** 2,
        np.full(m, 1.0 / m),
    )
    attempt_config = config
    for attempt in range(3):
        result = grow_support(
            objective,
            initial_size=m,
            space_upper=space_upper,
            config=attempt_config,
            initial_designs=[heuristic],
        )
        report = verify_d_optimality(result.best_design, model, theta)
        if report.passed:
            return result.best_design
        attempt_config = replace(
            attempt_config,
            restarts=2 * attempt_config.restarts,
            seed=attempt_config.seed + 1000,
        )
    raise OptimizerFailureError(
        f"D-optimal search for {model.value!r} failed its equivalence bound "
        f"(worst d(t) = {report.max_value:.6g} > {report.threshold:.6g} "
        f"at t = {report.arg_max:.6g})"
    )
