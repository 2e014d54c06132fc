"""Locally optimal discriminating designs and their certificates."""

import numpy as np
import pytest
from scipy.optimize import linprog

from doseopt.certificates import chebyshev_alternation_check, verify_c_optimality
from doseopt.designs import ContinuousDesign, em_variance
from doseopt.errors import (
    DomainError,
    NegativeWeightError,
    UnreachableConfigurationError,
    ValidationError,
)
from doseopt.local import (
    LocalDesignProblem,
    middle_point_closed_form,
    rescale_design,
    solve_c_optimal,
    solve_local,
    weights_from_points,
)
from doseopt.models import Model, Theta, gradient
from doseopt.optim import OptimizerConfig

from conftest import (
    TABLE1_EXP_POW,
    TABLE1_EXP_SAT,
    TABLE2_POINTS,
    TABLE2_WEIGHTS_C,
    TABLE2_WEIGHTS_D,
    assert_design_close,
)


# ---------------------------------------------------------------------------
# closed-form middle point
# ---------------------------------------------------------------------------

def test_middle_point_values():
    assert middle_point_closed_form(1.0, 0.0, 1.0) == pytest.approx(0.418, abs=1e-3)
    assert middle_point_closed_form(0.1, 0.0, 1.0) == pytest.approx(0.492, abs=1e-3)


def test_middle_point_small_rate_limit():
    """As b -> 0 the middle point approaches the midpoint of the interval."""
    assert middle_point_closed_form(1e-6, 0.0, 1.0) == pytest.approx(0.5, abs=1e-4)


def test_middle_point_domain():
    with pytest.raises(DomainError):
        middle_point_closed_form(-1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        middle_point_closed_form(1.0, 0.5, 0.5)


# ---------------------------------------------------------------------------
# explicit weights
# ---------------------------------------------------------------------------

def test_weights_at_saturated_exponential_points():
    w = weights_from_points(
        (0.0, 0.418, 1.0), Model.EXP_SAT, Theta(a=1.0, b=1.0, c=0.0), "c"
    )
    np.testing.assert_allclose(w, (0.180, 0.469, 0.351), atol=2e-3)


def test_weights_table1_low_rate():
    w = weights_from_points(
        (0.0, 0.355, 1.0), Model.EXP_POW, Theta(a=1.0, b=0.1, d=1.0), "d"
    )
    np.testing.assert_allclose(w, (0.311, 0.500, 0.189), atol=2e-3)


@pytest.mark.parametrize("case", range(50))
def test_weights_sum_to_one(case):
    rng = np.random.default_rng(5150 + case)
    theta = Theta(a=1.0, b=float(rng.uniform(0.3, 3.0)), d=1.0)
    pts = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 1.0, 2))])
    try:
        w = weights_from_points(pts, Model.EXP_POW, theta, "d")
    except NegativeWeightError:
        return  # admissible outcome away from the optimal support
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(w > 0)


def test_weights_reject_bad_support():
    """A support whose sign pattern cannot carry the target coordinate
    yields nonpositive formula weights (here: the scale parameter with a
    point at dose zero already providing it exactly)."""
    with pytest.raises(NegativeWeightError):
        weights_from_points(
            (0.0, 0.3, 0.6, 1.0), Model.FULL, Theta(a=1.0, b=1.0, c=0.0, d=1.0), "a"
        )


# ---------------------------------------------------------------------------
# solve_local against the published designs
# ---------------------------------------------------------------------------

def test_solve_exp_pow_b1():
    design = solve_local(
        LocalDesignProblem(Model.EXP_POW, Theta(a=1.0, b=1.0, d=1.0), "d", 1.0)
    )
    assert_design_close(design, *TABLE1_EXP_POW[1.0], tol=2e-3)


def test_solve_exp_pow_b3_interior_endpoint():
    design = solve_local(
        LocalDesignProblem(Model.EXP_POW, Theta(a=1.0, b=3.0, d=1.0), "d", 1.0)
    )
    np.testing.assert_allclose(design.points, TABLE1_EXP_POW[3.0][0], atol=3e-3)
    assert design.points[-1] < 0.999  # right support point is interior


def test_solve_full_c_target():
    design = solve_local(
        LocalDesignProblem(Model.FULL, Theta(a=1.0, b=1.0, c=0.0, d=1.0), "c", 1.0)
    )
    assert_design_close(design, TABLE2_POINTS[1.0], TABLE2_WEIGHTS_C[1.0], tol=3e-3)


def test_solve_full_d_target_shares_support():
    theta = Theta(a=1.0, b=1.0, c=0.0, d=1.0)
    c_design = solve_local(LocalDesignProblem(Model.FULL, theta, "c", 1.0))
    d_design = solve_local(LocalDesignProblem(Model.FULL, theta, "d", 1.0))
    np.testing.assert_allclose(c_design.points, d_design.points, atol=1e-4)
    assert_design_close(d_design, TABLE2_POINTS[1.0], TABLE2_WEIGHTS_D[1.0], tol=3e-3)


def test_exp_sat_uses_closed_form_exactly():
    theta = Theta(a=1.0, b=0.7, c=0.0)
    design = solve_local(LocalDesignProblem(Model.EXP_SAT, theta, "c", 1.0))
    assert design.points[0] == 0.0
    assert design.points[2] == 1.0
    assert design.points[1] == middle_point_closed_form(0.7, 0.0, 1.0)


def test_exp_sat_c_one_rejected():
    with pytest.raises(DomainError):
        LocalDesignProblem(Model.EXP_SAT, Theta(a=1.0, b=1.0, c=1.0), "c", 1.0)


def test_problem_validation():
    with pytest.raises(ValidationError):
        LocalDesignProblem(Model.EXP, Theta(a=1.0, b=1.0), "b", 1.0)
    with pytest.raises(ValidationError):
        LocalDesignProblem(Model.EXP_POW, Theta(a=1.0, b=1.0, d=1.0), "c", 1.0)


def test_solved_weights_match_formula():
    """The optimizer's weights are by construction the explicit-formula
    weights at the solved support."""
    theta = Theta(a=1.0, b=2.0, d=1.0)
    design = solve_local(LocalDesignProblem(Model.EXP_POW, theta, "d", 1.0))
    w = weights_from_points(design.points, Model.EXP_POW, theta, "d")
    np.testing.assert_allclose(design.weights, w, atol=1e-8)


@pytest.mark.parametrize("a", [0.5, 1.0, 3.0])
def test_scale_parameter_independence(a):
    design = solve_local(
        LocalDesignProblem(Model.EXP_POW, Theta(a=a, b=1.0, d=1.0), "d", 1.0)
    )
    reference = TABLE1_EXP_POW[1.0]
    assert_design_close(design, *reference, tol=2e-3)


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

def test_certificates_pass_on_solved_design():
    theta = Theta(a=1.0, b=1.0, d=1.0)
    design = solve_local(LocalDesignProblem(Model.EXP_POW, theta, "d", 1.0))
    report = verify_c_optimality(design, Model.EXP_POW, theta, "d")
    assert report.passed
    assert chebyshev_alternation_check(design.points, Model.EXP_POW, theta, 1.0)


def test_bound_fails_for_uniform_design():
    theta = Theta(a=1.0, b=1.0, d=1.0)
    design = ContinuousDesign((0.0, 0.5, 1.0), (1 / 3, 1 / 3, 1 / 3), 1.0)
    report = verify_c_optimality(design, Model.EXP_POW, theta, "d")
    assert not report.passed
    assert report.max_value > 0


def test_bound_is_zero_at_support_points():
    theta = Theta(a=1.0, b=1.0, d=1.0)
    design = solve_local(LocalDesignProblem(Model.EXP_POW, theta, "d", 1.0))
    M = np.linalg.inv(
        sum(
            w * np.outer(gradient(Model.EXP_POW, theta, t), gradient(Model.EXP_POW, theta, t))
            for t, w in zip(design.points, design.weights)
        )
    )
    variance = M[2, 2]
    for t in design.points:
        f = gradient(Model.EXP_POW, theta, t)
        g = (f @ M[:, 2]) ** 2 - variance
        assert abs(g) <= 1e-6 * variance


def test_alternation_fails_for_wrong_points():
    theta = Theta(a=1.0, b=1.0, d=1.0)
    assert not chebyshev_alternation_check((0.0, 0.5, 0.9), Model.EXP_POW, theta, 1.0)


def test_alternation_sup_attained_at_input_points():
    theta = Theta(a=1.0, b=1.0, d=1.0)
    design = solve_local(LocalDesignProblem(Model.EXP_POW, theta, "d", 1.0))
    pts = np.asarray(design.points)
    F = gradient(Model.EXP_POW, theta, pts)
    coef = np.linalg.solve(F.T, np.array([(-1.0) ** (i + 1) for i in range(3)]))
    grid = np.linspace(0.0, 1.0, 2000)
    values = np.abs(coef @ gradient(Model.EXP_POW, theta, grid))
    top = grid[values >= values.max() - 1e-9]
    # every near-sup grid point sits within grid resolution of a support point
    for t in top:
        assert np.min(np.abs(pts - t)) < 2.0 / 1999


# ---------------------------------------------------------------------------
# rescaling (the two exact transformation maps)
# ---------------------------------------------------------------------------

def test_rescale_identity():
    design = solve_local(
        LocalDesignProblem(Model.EXP_POW, Theta(a=1.0, b=1.0, d=1.0), "d", 1.0)
    )
    same = rescale_design(design, (1.0, 1.0, 1.0), (1.0, 1.0, 1.0))
    assert same == design


def test_rescale_power_map_matches_direct_solve():
    """Raising support points to 1/2 carries the d=1 optimum onto the d=2
    one (same weights); a direct solve at d=2 agrees."""
    base = solve_local(
        LocalDesignProblem(Model.EXP_POW, Theta(a=1.0, b=1.0, d=1.0), "d", 1.0)
    )
    mapped = rescale_design(base, (1.0, 1.0, 1.0), (1.0, 2.0, 1.0))
    np.testing.assert_allclose(mapped.points, np.sqrt(base.points), atol=1e-12)
    np.testing.assert_allclose(mapped.points, (0.0, 0.501, 1.0), atol=2e-3)
    direct = solve_local(
        LocalDesignProblem(Model.EXP_POW, Theta(a=1.0, b=1.0, d=2.0), "d", 1.0)
    )
    np.testing.assert_allclose(direct.points, mapped.points, atol=1e-4)
    np.testing.assert_allclose(direct.weights, mapped.weights, atol=1e-4)


def test_rescale_rate_map_matches_closed_form():
    """The saturated-exponential optimum at (b=2, T=1) equals the (b=1,
    T=2) optimum with halved support points; the closed form satisfies
    this identity exactly."""
    design_b1_t2 = solve_local(
        LocalDesignProblem(Model.EXP_SAT, Theta(a=1.0, b=1.0, c=0.0), "c", 2.0)
    )
    mapped = rescale_design(design_b1_t2, (1.0, 1.0, 2.0), (2.0, 1.0, 1.0))
    direct_mid = middle_point_closed_form(2.0, 0.0, 1.0)
    assert mapped.points[1] == pytest.approx(direct_mid, abs=1e-10)
    assert mapped.points[1] == pytest.approx(design_b1_t2.points[1] / 2.0, abs=1e-15)


@pytest.mark.parametrize("r", [0.5, 2.0])
def test_scaling_closure(r):
    """Solving at (r*b, T) equals the rescaled solution of (b, r*T)."""
    b, T = 1.0, 1.0
    direct = solve_local(
        LocalDesignProblem(Model.EXP_POW, Theta(a=1.0, b=r * b, d=1.0), "d", T)
    )
    wide = solve_local(
        LocalDesignProblem(Model.EXP_POW, Theta(a=1.0, b=b, d=1.0), "d", r * T)
    )
    mapped = rescale_design(wide, (b, 1.0, r * T), (r * b, 1.0, T))
    np.testing.assert_allclose(direct.points, mapped.points, atol=1e-5)
    np.testing.assert_allclose(direct.weights, mapped.weights, atol=1e-5)


def test_rescale_unreachable():
    design = ContinuousDesign((0.0, 0.5, 1.0), (0.3, 0.4, 0.3), 1.0)
    with pytest.raises(UnreachableConfigurationError):
        rescale_design(design, (1.0, 1.0, 1.0), (1.0, 1.0, 2.0))


# ---------------------------------------------------------------------------
# the general single-coordinate solver, checked against an Elfving LP
# ---------------------------------------------------------------------------

def _lp_c_optimal_value(model, theta, param, T, grid=3001):
    """Independent oracle: on a dose grid, the smallest achievable variance
    for e_j is (min ||lambda||_1 s.t. sum lambda_i f(t_i) = e_j)^2."""
    ts = np.linspace(0.0, T, grid)
    F = gradient(model, theta, ts)
    m = model.n_params
    target = np.zeros(m)
    target[model.param_index(param)] = 1.0
    result = linprog(
        np.ones(2 * grid),
        A_eq=np.hstack([F, -F]),
        b_eq=target,
        method="highs",
    )
    assert result.status == 0
    return float(np.abs(result.x).sum() ** 2)


@pytest.mark.parametrize(
    "model,param",
    [
        (Model.EXP, "a"),
        (Model.EXP, "b"),
        (Model.EXP_POW, "b"),
        (Model.EXP_POW, "d"),
        (Model.EXP_SAT, "b"),
        (Model.FULL, "b"),
        (Model.FULL, "c"),
    ],
)
def test_c_optimal_matches_lp_oracle(model, param):
    theta = Theta(a=1.0, b=1.0, c=0.0, d=1.0).restrict_to(model)
    design = solve_c_optimal(model, theta, param, 1.0, OptimizerConfig(restarts=12))
    achieved = em_variance(design, model, theta, param)
    oracle = _lp_c_optimal_value(model, theta, param, 1.0)
    # the LP is grid-restricted, so it may sit slightly above the continuum
    # optimum; the solver must never do better than the oracle by more than
    # grid slack, nor worse
    assert achieved <= oracle * (1.0 + 1e-6)
    assert achieved >= oracle * (1.0 - 5e-3)


def test_c_optimal_scale_parameter_is_point_mass_at_zero():
    design = solve_c_optimal(Model.EXP, Theta(a=1.0, b=1.0), "a", 1.0)
    assert design.points == (0.0,)
    assert design.weights == (1.0,)
    assert em_variance(design, Model.EXP, Theta(a=1.0, b=1.0), "a") == pytest.approx(1.0)
