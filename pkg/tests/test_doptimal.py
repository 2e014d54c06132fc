"""Locally D-optimal designs and the Kiefer-Wolfowitz check."""

import itertools

import numpy as np
import pytest

from doseopt.certificates import verify_d_optimality
from doseopt.designs import ContinuousDesign, d_criterion, d_efficiency
from doseopt.doptimal import solve_d_optimal
from doseopt.errors import SingularInformationError
from doseopt.local import rescale_design
from doseopt.models import Model, Theta
from doseopt.optim import OptimizerConfig


def test_constant_model_convention():
    design = solve_d_optimal(Model.CONSTANT, Theta(a=1.0), 1.0)
    assert design.points == (1.0,)
    assert design.weights == (1.0,)


def test_exp_design_matches_grid_bruteforce():
    """Brute force over all point pairs on a 2001-point grid (equal
    weights are optimal for two points by symmetry of the determinant)."""
    theta = Theta(a=1.0, b=1.0)
    design = solve_d_optimal(Model.EXP, theta, 1.0)

    ts = np.linspace(0.0, 1.0, 2001)
    decay = np.exp(-ts)
    best_pair, best_val = None, -np.inf
    # det M for the pair (s, t) with equal weights is proportional to
    # (e^{-s} e^{-t} (t - s))^2 / 4
    for i, j in itertools.combinations(range(0, 2001, 10), 2):
        val = (decay[i] * decay[j] * (ts[j] - ts[i])) ** 2 / 4.0
        if val > best_val:
            best_val, best_pair = val, (ts[i], ts[j])
    np.testing.assert_allclose(design.points, best_pair, atol=2e-3)
    np.testing.assert_allclose(design.weights, [0.5, 0.5], atol=1e-5)


@pytest.mark.parametrize("model", [Model.EXP, Model.EXP_POW, Model.EXP_SAT, Model.FULL])
def test_saturated_equal_weights_at_unit_rate(model):
    """At b=1 the D-optimal design is saturated with equal weights (a
    classical property verified numerically, not assumed)."""
    theta = Theta(a=1.0, b=1.0, c=0.0, d=1.0).restrict_to(model)
    design = solve_d_optimal(model, theta, 1.0)
    m = model.n_params
    assert design.n_points == m
    np.testing.assert_allclose(design.weights, np.full(m, 1.0 / m), atol=1e-4)


def test_bound_holds_with_equality_at_support():
    theta = Theta(a=1.0, b=1.0)
    design = solve_d_optimal(Model.EXP, theta, 1.0)
    report = verify_d_optimality(design, Model.EXP, theta)
    assert report.passed
    from doseopt.designs import info_matrix
    from doseopt.models import gradient

    Minv = np.linalg.inv(info_matrix(design, Model.EXP, theta).entries)
    for t in design.points:
        f = gradient(Model.EXP, theta, t)
        assert f @ Minv @ f == pytest.approx(2.0, abs=1e-6)


def test_uniform_design_fails_bound():
    theta = Theta(a=1.0, b=1.0, d=1.0)
    pts = tuple(np.linspace(0.0, 1.0, 10))
    design = ContinuousDesign(pts, (0.1,) * 10, 1.0)
    report = verify_d_optimality(design, Model.EXP_POW, theta)
    assert not report.passed


def test_singular_design_raises():
    design = ContinuousDesign((0.5,), (1.0,), 1.0)
    with pytest.raises(SingularInformationError):
        verify_d_optimality(design, Model.EXP, Theta(a=1.0, b=1.0))


def test_competitors_do_not_beat_certified_design():
    theta = Theta(a=1.0, b=1.0, d=1.0)
    optimal = solve_d_optimal(Model.EXP_POW, theta, 1.0)
    rng = np.random.default_rng(3)
    for _ in range(50):
        pts = np.sort(rng.uniform(0.0, 1.0, 4))
        if np.min(np.diff(pts)) < 1e-3:
            continue
        candidate = ContinuousDesign.normalized(pts, rng.uniform(0.1, 1.0, 4), 1.0)
        assert d_efficiency(candidate, Model.EXP_POW, theta, optimal) <= 1.0 + 1e-9


@pytest.mark.parametrize("a", [0.5, 2.0])
@pytest.mark.parametrize("model", [Model.EXP, Model.EXP_POW, Model.EXP_SAT, Model.FULL])
def test_scale_parameter_does_not_move_argmax(a, model):
    theta_unit = Theta(a=1.0, b=1.0, c=0.0, d=1.0).restrict_to(model)
    theta_scaled = Theta(a=a, b=1.0, c=0.0, d=1.0).restrict_to(model)
    base = solve_d_optimal(model, theta_unit, 1.0)
    scaled = solve_d_optimal(model, theta_scaled, 1.0)
    np.testing.assert_allclose(scaled.points, base.points, atol=1e-4)
    np.testing.assert_allclose(scaled.weights, base.weights, atol=1e-4)


def test_power_map_carries_d_optimal_designs():
    """The determinant identity under t -> t^(1/d) maps the d=1 optimum
    onto the d=2 one for the power model."""
    theta1 = Theta(a=1.0, b=1.0, d=1.0)
    theta2 = Theta(a=1.0, b=1.0, d=2.0)
    base = solve_d_optimal(Model.EXP_POW, theta1, 1.0)
    mapped = rescale_design(base, (1.0, 1.0, 1.0), (1.0, 2.0, 1.0))
    direct = solve_d_optimal(Model.EXP_POW, theta2, 1.0)
    np.testing.assert_allclose(direct.points, mapped.points, atol=1e-4)
    np.testing.assert_allclose(direct.weights, mapped.weights, atol=1e-4)


def test_rate_map_carries_d_optimal_designs():
    theta_b2 = Theta(a=1.0, b=2.0, d=1.0)
    theta_b1 = Theta(a=1.0, b=1.0, d=1.0)
    wide = solve_d_optimal(Model.EXP_POW, theta_b1, 2.0)
    mapped = rescale_design(wide, (1.0, 1.0, 2.0), (2.0, 1.0, 1.0))
    direct = solve_d_optimal(Model.EXP_POW, theta_b2, 1.0)
    np.testing.assert_allclose(direct.points, mapped.points, atol=1e-4)
    np.testing.assert_allclose(direct.weights, mapped.weights, atol=1e-4)


def test_growth_does_not_extend_saturated_optimum():
    theta = Theta(a=1.0, b=1.0, c=0.0)
    design = solve_d_optimal(Model.EXP_SAT, theta, 1.0, OptimizerConfig(restarts=10))
    candidate = ContinuousDesign.normalized(
        np.linspace(0, 1, 5), np.full(5, 0.2), 1.0
    )
    assert d_criterion(candidate, Model.EXP_SAT, theta) < d_criterion(
        design, Model.EXP_SAT, theta
    )
