"""Shared fixtures: published table values and the (expensive) maximin
solutions, computed once per session."""

from __future__ import annotations

import numpy as np
import pytest

from doseopt.models import Model, Theta
from doseopt.maximin import MaximinProblem, solve_maximin
from doseopt.optim import OptimizerConfig

# ---------------------------------------------------------------------------
# published reference values (3 printed decimals)
# ---------------------------------------------------------------------------

# locally optimal discriminating designs on [0, 1]:
# b -> (points, weights)
TABLE1_EXP_POW = {
    0.1: ((0.0, 0.355, 1.0), (0.311, 0.500, 0.189)),
    0.5: ((0.0, 0.305, 1.0), (0.294, 0.493, 0.213)),
    1.0: ((0.0, 0.251, 1.0), (0.276, 0.473, 0.251)),
    2.0: ((0.0, 0.167, 1.0), (0.241, 0.403, 0.356)),
    3.0: ((0.0, 0.112, 0.751), (0.232, 0.381, 0.387)),
}
TABLE1_EXP_SAT = {
    0.1: ((0.0, 0.492, 1.0), (0.242, 0.500, 0.259)),
    0.5: ((0.0, 0.458, 1.0), (0.212, 0.492, 0.296)),
    1.0: ((0.0, 0.418, 1.0), (0.180, 0.469, 0.351)),
    2.0: ((0.0, 0.343, 1.0), (0.127, 0.384, 0.490)),
    3.0: ((0.0, 0.281, 1.0), (0.083, 0.267, 0.650)),
}

# four-point designs for the full model on [0, 1]: shared support, then
# the weight columns for the d-target (third coordinate) and c-target
# (fourth coordinate) criteria
TABLE2_POINTS = {
    0.1: (0.0, 0.131, 0.648, 1.0),
    0.5: (0.0, 0.123, 0.626, 1.0),
    1.0: (0.0, 0.113, 0.596, 1.0),
    2.0: (0.0, 0.094, 0.530, 1.0),
    3.0: (0.0, 0.079, 0.463, 1.0),
}
TABLE2_WEIGHTS_D = {
    0.1: (0.286, 0.416, 0.214, 0.084),
    0.5: (0.277, 0.410, 0.223, 0.090),
    1.0: (0.267, 0.403, 0.233, 0.097),
    2.0: (0.253, 0.392, 0.246, 0.108),
    3.0: (0.244, 0.382, 0.256, 0.118),
}
TABLE2_WEIGHTS_C = {
    0.1: (0.174, 0.328, 0.326, 0.172),
    0.5: (0.156, 0.302, 0.342, 0.200),
    1.0: (0.137, 0.272, 0.352, 0.239),
    2.0: (0.106, 0.215, 0.341, 0.338),
    3.0: (0.080, 0.163, 0.289, 0.468),
}

# maximin optimal discriminating designs on [0, 1] and their published
# efficiency columns.  NOTE on the last two columns: the published table
# heads them "(2.5)-(2.3)" and "(2.5)-(2.4)", but numerically the
# "(2.5)-(2.3)" column holds the d-target efficiency and "(2.5)-(2.4)"
# the c-target one, i.e. the labels are swapped relative to the pairs'
# actual collapsing parameters (c for full->exp-pow, d for full->exp-sat).
# We key the values by target parameter, which is unambiguous.
TABLE3 = {
    0.1: ((0.0, 0.175, 0.552, 1.0), (0.236, 0.255, 0.322, 0.187),
          {"exp-pow": 0.724, "exp-sat": 0.724, "full-d": 0.724, "full-c": 0.786}),
    0.5: ((0.0, 0.170, 0.531, 1.0), (0.220, 0.260, 0.308, 0.212),
          {"exp-pow": 0.719, "exp-sat": 0.719, "full-d": 0.719, "full-c": 0.787}),
    1.0: ((0.0, 0.160, 0.507, 1.0), (0.200, 0.265, 0.287, 0.249),
          {"exp-pow": 0.714, "exp-sat": 0.714, "full-d": 0.714, "full-c": 0.793}),
    2.0: ((0.0, 0.130, 0.468, 1.0), (0.161, 0.250, 0.249, 0.340),
          {"exp-pow": 0.705, "exp-sat": 0.702, "full-d": 0.702, "full-c": 0.848}),
    3.0: ((0.0, 0.105, 0.440, 1.0), (0.141, 0.233, 0.199, 0.427),
          {"exp-pow": 0.705, "exp-sat": 0.682, "full-d": 0.682, "full-c": 0.871}),
}

# D-efficiencies of the maximin designs, by model
TABLE4 = {
    0.1: {"exp": 0.710, "exp-pow": 0.851, "exp-sat": 0.851, "full": 0.963},
    0.5: {"exp": 0.737, "exp-pow": 0.862, "exp-sat": 0.861, "full": 0.968},
    1.0: {"exp": 0.786, "exp-pow": 0.873, "exp-sat": 0.869, "full": 0.972},
    2.0: {"exp": 0.703, "exp-pow": 0.864, "exp-sat": 0.860, "full": 0.959},
    3.0: {"exp": 0.525, "exp-pow": 0.716, "exp-sat": 0.820, "full": 0.917},
}

# per-parameter efficiencies of the maximin designs for the full model;
# same label swap as TABLE3: the printed "eff_3 (c)" column is the
# d-target value and "eff_4 (d)" the c-target one.
TABLE_PARAM_FULL = {
    0.1: {"a": 0.24, "b": 0.784, "d": 0.724, "c": 0.786},
    1.0: {"a": 0.20, "b": 0.760, "d": 0.714, "c": 0.793},
}

# simulated normalized variances (sigma=0.05, N=60, 1000 reps) of the
# published study, rows keyed (b, d, c); per design the columns are
# var(d | fit 2.3), var(c | fit 2.4), var(d | fit 2.5), var(c | fit 2.5)
TABLE5 = {
    (0.10, 1.0, 0.0): {"xi_mm": (58.85, 2.02, 71.07, 2.48),
                       "xi_u": (62.73, 5.53, 88.42, 7.81)},
    (0.10, 1.0, 0.2): {"xi_mm": (11.86, 1.96, 103.40, 2.79),
                       "xi_u": (18.43, 4.83, 138.97, 7.77)},
    (0.06, 1.0, 0.0): {"xi_mm": (61.67, 3.91, 103.78, 7.17),
                       "xi_u": (61.62, 11.35, 115.70, 23.33)},
}

MAXIMIN_B_VALUES = (0.1, 0.5, 1.0, 2.0, 3.0)


@pytest.fixture(scope="session")
def maximin_solutions():
    """Maximin designs for the five published b values (slow; shared)."""
    solutions = {}
    for b in MAXIMIN_B_VALUES:
        problem = MaximinProblem(Theta(a=1.0, b=b, c=0.0, d=1.0), 1.0)
        design, report, growth = solve_maximin(problem, OptimizerConfig(restarts=14))
        solutions[b] = (design, report, growth)
    return solutions


@pytest.fixture(scope="session")
def nominal_theta():
    return Theta(a=1.0, b=1.0, c=0.0, d=1.0)


def assert_design_close(design, points, weights, tol):
    __tracebackhide__ = True
    np.testing.assert_allclose(design.points, points, atol=tol)
    np.testing.assert_allclose(design.weights, weights, atol=tol)
