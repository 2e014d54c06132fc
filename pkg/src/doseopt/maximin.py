"""Maximin optimal discriminating designs.

The criterion is the smallest of the four discrimination efficiencies
over the nested model pairs

    (exp-pow, exp), (exp-sat, exp), (full, exp-pow), (full, exp-sat),

each efficiency measured against that pair's locally optimal
discriminating design.  A design needs at least four support points for
all four information matrices to be regular, so the search starts in the
class of 4-point designs and grows the support until the criterion stops
improving.

Note on reporting: discriminating (full, exp-pow) tests the saturation
fraction c, and (full, exp-sat) tests the power d.  Efficiencies are
keyed by the pair and always computed for that pair's own collapsing
parameter.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from doseopt.designs import ContinuousDesign, EfficiencyReport, em_variance
from doseopt.errors import ValidationError
from doseopt.local import LocalDesignProblem, solve_local
from doseopt.models import Model, Theta, discrimination_target, gradient
from doseopt.optim import GrowthResult, OptimizerConfig, grow_support

__all__ = ["DISCRIMINATION_PAIRS", "MaximinProblem", "reference_designs",
           "maximin_objective", "solve_maximin"]

DISCRIMINATION_PAIRS: tuple[tuple[Model, Model], ...] = (
    (Model.EXP_POW, Model.EXP),
    (Model.EXP_SAT, Model.EXP),
    (Model.FULL, Model.EXP_POW),
    (Model.FULL, Model.EXP_SAT),
)

_SINGULAR_SENTINEL = 0.0


@dataclass(frozen=True)
class MaximinProblem:
    """Maximin discrimination problem at a nominal parameter vector.

    theta must be valid for the full model; the four model pairs of the
    criterion are fixed.
    """

    theta: Theta
    space_upper: float
    pairs: tuple[tuple[Model, Model], ...] = DISCRIMINATION_PAIRS

    def __post_init__(self):
        self.theta.validate_for(Model.FULL)
        if not self.space_upper > 0:
            raise ValidationError("space_upper must be positive")
        if tuple(self.pairs) != DISCRIMINATION_PAIRS:
            raise ValidationError(
                "the maximin criterion is defined over the four fixed "
                "discrimination pairs"
            )


_reference_cache: dict = {}
_reference_lock = threading.Lock()


def _cache_key(problem: MaximinProblem, config: OptimizerConfig):
    t = problem.theta
    return (t.a, t.b, t.c, t.d, problem.space_upper, config.restarts, config.seed)


def reference_designs(
    problem: MaximinProblem, config: OptimizerConfig = OptimizerConfig()
) -> dict[tuple[Model, Model], ContinuousDesign]:
    """Locally optimal discriminating design for each criterion pair.

    Each reference is solved under the pair's parent model with the
    nominal theta restricted to that model's parameters.  Results are
    cached per (theta, space_upper) so repeated maximin evaluations reuse
    the same objects.
    """
    key = _cache_key(problem, config)
    with _reference_lock:
        if key in _reference_cache:
            return _reference_cache[key]
    refs = {}
    for parent, child in problem.pairs:
        target, _ = discrimination_target(parent, child)
        sub_problem = LocalDesignProblem(
            model=parent,
            theta=problem.theta.restrict_to(parent),
            target=target,
            space_upper=problem.space_upper,
        )
        refs[(parent, child)] = solve_local(sub_problem, config)
    with _reference_lock:
        _reference_cache.setdefault(key, refs)
        return _reference_cache[key]


def _reference_variances(problem: MaximinProblem, refs) -> np.ndarray:
    out = []
    for parent, child in problem.pairs:
        target, _ = discrimination_target(parent, child)
        out.append(
            em_variance(
                refs[(parent, child)], parent, problem.theta.restrict_to(parent), target
            )
        )
    return np.array(out)


def _nominal_evaluator(theta: Theta):
    """All four pair variances from one full-model information matrix.

    Valid when c = 0 and d = 1, where the parent-model gradients are row
    subsets of the full model's: rows (a, b, d) give the power model and
    rows (a, b, c) the saturated one.  Each variance is a ratio of
    principal minors of the 4x4 matrix.  Hand-rolled (no generic gradient
    call, explicit minors) because this sits in the optimizer's hot loop.
    """
    a, b = theta.a, theta.b

    def variances(points: np.ndarray, weights: np.ndarray) -> np.ndarray | None:
        decay = np.exp(-b * points)
        t_decay = points * decay
        log_t = np.log(np.where(points > 0, points, 1.0))
        F = np.empty((4, points.size))
        F[0] = decay
        F[1] = -a * t_decay
        F[2] = -a * b * t_decay * log_t
        F[3] = a * (1.0 - decay)
        M = ((F * weights) @ F.T).tolist()
        det_ab = M[0][0] * M[1][1] - M[0][1] ** 2
        det_abd = _minor3(M, 0, 1, 2)
        det_abc = _minor3(M, 0, 1, 3)
        det_full = _minor4(M)
        if min(det_ab, det_abd, det_abc, det_full) <= 0.0:
            return None
        return np.array(
            [
                det_ab / det_abd,    # (exp-pow, exp): var of d within (a, b, d)
                det_ab / det_abc,    # (exp-sat, exp): var of c within (a, b, c)
                det_abd / det_full,  # (full, exp-pow): var of c
                det_abc / det_full,  # (full, exp-sat): var of d
            ]
        )

    return variances


def _minor3(M, i, j, k):
    return (
        M[i][i] * (M[j][j] * M[k][k] - M[j][k] ** 2)
        - M[i][j] * (M[i][j] * M[k][k] - M[j][k] * M[i][k])
        + M[i][k] * (M[i][j] * M[j][k] - M[j][j] * M[i][k])
    )


def _minor4(M):
    total = 0.0
    for col in range(4):
        rest = [c for c in range(4) if c != col]
        sub = [[M[r][c] for c in rest] for r in (1, 2, 3)]
        det3 = (
            sub[0][0] * (sub[1][1] * sub[2][2] - sub[1][2] * sub[2][1])
            - sub[0][1] * (sub[1][0] * sub[2][2] - sub[1][2] * sub[2][0])
            + sub[0][2] * (sub[1][0] * sub[2][1] - sub[1][1] * sub[2][0])
        )
        total += ((-1.0) ** col) * M[0][col] * det3
    return total


def _pair_variances_generic(points, weights, problem: MaximinProblem) -> np.ndarray | None:
    out = np.empty(len(problem.pairs))
    for i, (parent, child) in enumerate(problem.pairs):
        target, _ = discrimination_target(parent, child)
        theta_parent = problem.theta.restrict_to(parent)
        F = gradient(parent, theta_parent, points)
        M = (F * weights) @ F.T
        k = parent.param_index(target)
        det_full = np.linalg.det(M)
        if det_full <= 0:
            return None
        minor_idx = [j for j in range(parent.n_params) if j != k]
        minor = M[np.ix_(minor_idx, minor_idx)]
        out[i] = np.linalg.det(minor) / det_full
    return out


def _variance_evaluator(problem: MaximinProblem):
    if problem.theta.c == 0.0 and problem.theta.d == 1.0:
        return _nominal_evaluator(problem.theta)
    return lambda p, w: _pair_variances_generic(p, w, problem)


def maximin_objective(
    design: ContinuousDesign,
    problem: MaximinProblem,
    references: dict[tuple[Model, Model], ContinuousDesign],
) -> float:
    """Smallest of the four pair efficiencies of *design*; 0 when any of
    the parent-model information matrices is singular."""
    ref_vars = _reference_variances(problem, references)
    variances = _variance_evaluator(problem)(*design.as_arrays())
    if variances is None or not np.all(np.isfinite(variances)):
        return _SINGULAR_SENTINEL
    return float(np.min(ref_vars / variances))


def solve_maximin(
    problem: MaximinProblem,
    config: OptimizerConfig = OptimizerConfig(restarts=14),
) -> tuple[ContinuousDesign, EfficiencyReport, GrowthResult]:
    """Maximin optimal discriminating design plus its efficiency vector.

    Grows the support from 4-point designs on the maximin criterion and
    reports the four pair efficiencies of the winner (their minimum is
    the criterion value).
    """
    refs = reference_designs(problem, config)
    ref_vars = _reference_variances(problem, refs)
    variances_of = _variance_evaluator(problem)

    def objective(points: np.ndarray, weights: np.ndarray) -> float:
        variances = variances_of(points, weights)
        if variances is None or not np.all(np.isfinite(variances)):
            return _SINGULAR_SENTINEL
        return float(np.min(ref_vars / variances))

    T = problem.space_upper
    starts = [
        (np.asarray(refs[(Model.FULL, Model.EXP_POW)].points),
         np.asarray(refs[(Model.FULL, Model.EXP_POW)].weights)),
        (np.asarray(refs[(Model.FULL, Model.EXP_SAT)].points),
         np.asarray(refs[(Model.FULL, Model.EXP_SAT)].weights)),
        (T * (np.arange(4) / 3.0) ** 2, np.full(4, 0.25)),
    ]
    growth = grow_support(
        objective,
        initial_size=4,
        space_upper=T,
        config=config,
        initial_designs=starts,
    )
    design = growth.best_design
    final_vars = variances_of(*design.as_arrays())
    report = EfficiencyReport(
        pair_effs={
            pair: float(rv / fv)
            for pair, rv, fv in zip(problem.pairs, ref_vars, final_vars)
        }
    )
    return design, report, growth
