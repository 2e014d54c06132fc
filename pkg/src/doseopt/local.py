"""Locally optimal single-coordinate (discrimination) designs.

For the three richer models the locally optimal discriminating design is
supported at the m Chebyshev points of the model's gradient system, with
weights available in closed form from the design matrix F at those
points:

    w* = J F^{-1} e_k / (1^T J F^{-1} e_k),     J = diag(1, -1, 1, ...)

The solver searches over m-point supports, scoring each candidate by the
criterion value it achieves with those explicit weights, and certifies
the winner with the equivalence-theorem bound plus the equioscillation
check.  For the saturated-exponential model the middle support point has
a closed form and no search is run at all.

A generic single-coordinate solver (any parameter, any model) backs the
per-parameter efficiency reports; its optimum may be supported on fewer
than m points (the scale parameter is best estimated by the one-point
design at dose zero), which the same machinery handles by letting
weights vanish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from doseopt.certificates import chebyshev_alternation_check, verify_c_optimality
from doseopt.designs import ContinuousDesign
from doseopt.errors import (
    DomainError,
    NegativeWeightError,
    OptimizerFailureError,
    SingularSystemError,
    UnreachableConfigurationError,
    ValidationError,
)
from doseopt.models import Model, Theta, gradient
from doseopt.optim import OptimizerConfig, maximize

__all__ = [
    "LocalDesignProblem",
    "solve_local",
    "solve_c_optimal",
    "weights_from_points",
    "middle_point_closed_form",
    "rescale_design",
]

# Models whose discrimination designs this module can solve, with the
# admissible target parameters.
_DISCRIMINATION_TARGETS = {
    Model.EXP_POW: ("d",),
    Model.EXP_SAT: ("c",),
    Model.FULL: ("c", "d"),
}

_MIN_SEPARATION_FRACTION = 1e-6
_PENALTY = 1e9
_DROP_WEIGHT = 1e-7


@dataclass(frozen=True)
class LocalDesignProblem:
    """A locally optimal discriminating-design problem."""

    model: Model
    theta: Theta
    target: str
    space_upper: float

    def __post_init__(self):
        if self.model not in _DISCRIMINATION_TARGETS:
            raise ValidationError(
                f"no discrimination design theory for model {self.model.value!r}"
            )
        if self.target not in _DISCRIMINATION_TARGETS[self.model]:
            raise ValidationError(
                f"target {self.target!r} is not a discrimination parameter of "
                f"model {self.model.value!r}"
            )
        self.theta.validate_for(self.model)
        if not self.space_upper > 0:
            raise ValidationError("space_upper must be positive")
        if self.model is Model.EXP_SAT and self.theta.c == 1.0:
            # the closed form is stated for 0 <= c < 1 only
            raise DomainError(
                "saturated-exponential discrimination designs require c < 1"
            )


def middle_point_closed_form(b: float, t1: float, t3: float) -> float:
    """Middle support point of the saturated-exponential discriminating
    design with outer points *t1* and *t3*:

        t2 = 1/b + (t1 e^{-b t1} - t3 e^{-b t3}) / (e^{-b t1} - e^{-b t3})
    """
    if not b > 0:
        raise DomainError(f"b must be > 0, got {b}")
    if not 0 <= t1 < t3:
        raise DomainError("need 0 <= t1 < t3")
    e1 = math.exp(-b * t1)
    e3 = math.exp(-b * t3)
    return 1.0 / b + (t1 * e1 - t3 * e3) / (e1 - e3)


def weights_from_points(
    points, model: Model, theta: Theta, target: str
) -> np.ndarray:
    """Explicit optimal weights for a saturated support.

    Computes ``w = J F^{-1} e_k`` normalized to sum 1, with J the
    alternating-sign diagonal.  At the Chebyshev points all components
    are positive; elsewhere a nonpositive component signals that the
    points are not the optimal support.
    """
    pts = np.asarray(points, float)
    m = model.n_params
    k = model.param_index(target)
    if pts.size != m:
        raise ValidationError(f"need exactly {m} points, got {pts.size}")
    F = gradient(model, theta, pts)
    e = np.zeros(m)
    e[k] = 1.0
    try:
        l = np.linalg.solve(F, e)
    except np.linalg.LinAlgError:
        raise SingularSystemError("design matrix F is singular at these points")
    signs = np.array([(-1.0) ** i for i in range(m)])
    w = signs * l
    total = w.sum()
    if total < 0:
        w = -w
        total = -total
    if np.any(w <= 0):
        raise NegativeWeightError(
            "explicit weight formula produced nonpositive components; the "
            "points are not the optimal support"
        )
    return w / total


def _signed_l1_criterion(points: np.ndarray, model: Model, theta: Theta, k: int):
    """For a saturated support, the criterion value achievable with the
    best weights is (sum_i |l_i|)^2 where l = F^{-1} e_k; returns
    (value, l) or (None, None) when F is singular."""
    F = gradient(model, theta, points)
    e = np.zeros(model.n_params)
    e[k] = 1.0
    try:
        l = np.linalg.solve(F, e)
    except np.linalg.LinAlgError:
        return None, None
    if not np.all(np.isfinite(l)):
        return None, None
    return float(np.abs(l).sum() ** 2), l


def _alternates(l: np.ndarray) -> bool:
    signs = np.array([(-1.0) ** i for i in range(l.size)]) * l
    return bool(np.all(signs > 0) or np.all(signs < 0))


def _search_support(
    model: Model,
    theta: Theta,
    k: int,
    space_upper: float,
    config: OptimizerConfig,
    require_alternation: bool,
) -> np.ndarray:
    """Minimize the saturated-support criterion over m sorted points."""
    m = model.n_params
    min_gap = _MIN_SEPARATION_FRACTION * space_upper

    def objective(x):
        points = np.sort(x)
        if points.size > 1 and np.min(np.diff(points)) < min_gap:
            return -_PENALTY
        value, l = _signed_l1_criterion(points, model, theta, k)
        if value is None:
            return -_PENALTY
        if require_alternation and not _alternates(l):
            return -(value + _PENALTY)
        return -value

    # quadratically spaced heuristic start, shaped like the known optima
    heuristic = space_upper * (np.arange(m) / (m - 1)) ** 2
    bounds = [(0.0, space_upper)] * m
    x, _ = maximize(objective, heuristic, bounds, config)
    return np.sort(x)


def _certified(
    design: ContinuousDesign, model: Model, theta: Theta, target: str
) -> bool:
    report = verify_c_optimality(design, model, theta, target)
    if not report.passed:
        return False
    if design.n_points == model.n_params:
        return chebyshev_alternation_check(
            design.points, model, theta, design.space_upper
        )
    return True


def solve_local(
    problem: LocalDesignProblem, config: OptimizerConfig = OptimizerConfig()
) -> ContinuousDesign:
    """Locally optimal discriminating design for the problem's model pair.

    The returned design has exactly m support points with the explicit
    weights, and has passed both the equivalence-theorem bound and the
    equioscillation certificate.  Saturated-exponential problems use the
    closed-form middle point directly.

    Raises
    ------
    OptimizerFailureError
        If no certified design is found within the retry budget.
    """
    model, theta, target, T = (
        problem.model,
        problem.theta,
        problem.target,
        problem.space_upper,
    )
    if model is Model.EXP_SAT:
        points = np.array([0.0, middle_point_closed_form(theta.b, 0.0, T), T])
        weights = weights_from_points(points, model, theta, target)
        return ContinuousDesign(tuple(points), tuple(weights), T)

    k = model.param_index(target)
    attempt_config = config
    for attempt in range(3):
        points = _search_support(
            model, theta, k, T, attempt_config, require_alternation=True
        )
        try:
            weights = weights_from_points(points, model, theta, target)
            design = ContinuousDesign(tuple(points), tuple(weights), T)
        except (NegativeWeightError, SingularSystemError, ValidationError):
            design = None
        if design is not None and _certified(design, model, theta, target):
            return design
        attempt_config = replace(
            attempt_config,
            restarts=2 * attempt_config.restarts,
            seed=attempt_config.seed + 1000,
        )
    raise OptimizerFailureError(
        f"no certified locally optimal design found for {model.value!r} "
        f"target {target!r} after 3 attempts"
    )


def solve_c_optimal(
    model: Model,
    theta: Theta,
    param: str,
    space_upper: float,
    config: OptimizerConfig = OptimizerConfig(),
) -> ContinuousDesign:
    """Locally optimal design for estimating a single parameter of any
    model (the references behind per-parameter efficiencies).

    Unlike :func:`solve_local` this makes no alternation assumption: the
    optimum may put zero mass on some of the m searched points, leaving a
    degenerate support (for the scale parameter it is the single point at
    dose zero).  The result is certified against the c-optimality bound.
    """
    theta.validate_for(model)
    k = model.param_index(param)
    if model is Model.CONSTANT:
        return ContinuousDesign((space_upper,), (1.0,), space_upper)

    attempt_config = config
    for attempt in range(3):
        points = _search_support(
            model, theta, k, space_upper, attempt_config, require_alternation=False
        )
        value, l = _signed_l1_criterion(points, model, theta, k)
        design = None
        if value is not None:
            w = np.abs(l)
            keep = w > _DROP_WEIGHT * w.sum()
            try:
                design = ContinuousDesign.normalized(
                    points[keep], w[keep], space_upper
                ).merge_close(_MIN_SEPARATION_FRACTION * space_upper)
            except ValidationError:
                design = None
        if design is not None and _certified(design, model, theta, param):
            return design
        attempt_config = replace(
            attempt_config,
            restarts=2 * attempt_config.restarts,
            seed=attempt_config.seed + 1000,
        )
    raise OptimizerFailureError(
        f"no certified c-optimal design found for {model.value!r} "
        f"parameter {param!r} after 3 attempts"
    )


def rescale_design(
    design: ContinuousDesign,
    from_config: tuple[float, float, float],
    to_config: tuple[float, float, float],
    rtol: float = 1e-9,
) -> ContinuousDesign:
    """Transport an optimal design between (b, d, T) configurations.

    Composes the two exact transformations of the optimal-design family:
    the power map (d <-> 1, support points raised to a power) and the
    rate scaling (b -> rb, support points divided by r).  Weights are
    unchanged.  The target configuration must be reachable, i.e. the two
    maps must carry the source design space onto the target one.
    """
    b_from, d_from, T_from = from_config
    b_to, d_to, T_to = to_config
    if min(b_from, d_from, T_from, b_to, d_to, T_to) <= 0:
        raise DomainError("all of b, d, T must be positive")
    if not math.isclose(T_from, design.space_upper, rel_tol=1e-12):
        raise ValidationError(
            "from-configuration design space does not match the design"
        )
    pts = np.asarray(design.points, float)

    # to the d=1 frame: t -> t^d lives on [0, T^d]
    pts = pts**d_from
    space = T_from**d_from
    # rate scaling: t -> t * (b_from / b_to) lives on [0, space * b_from/b_to]
    ratio = b_from / b_to
    pts = pts * ratio
    space = space * ratio
    # to the d_to frame: t -> t^{1/d_to} lives on [0, space^{1/d_to}]
    pts = pts ** (1.0 / d_to)
    space = space ** (1.0 / d_to)

    if not math.isclose(space, T_to, rel_tol=rtol, abs_tol=rtol * max(1.0, T_to)):
        raise UnreachableConfigurationError(
            f"no composition of the power and rate maps carries {from_config} "
            f"onto {to_config}; the maps reach design space [0, {space:.6g}] "
            f"instead of [0, {T_to:.6g}]"
        )
    return ContinuousDesign(tuple(pts), design.weights, T_to)
