"""Optimal and maximin discriminating designs for nested exponential
dose-response models, with efficiency evaluation and a Monte-Carlo
validation harness."""

from doseopt._version import __version__  # noqa: F401

from doseopt.models import (  # noqa: F401
    Model,
    Theta,
    eval_mean,
    gradient,
    nests,
    discrimination_target,
)
from doseopt.designs import (  # noqa: F401
    ContinuousDesign,
    EfficiencyReport,
    InfoMatrix,
    d_criterion,
    d_efficiency,
    em_variance,
    info_matrix,
    pair_efficiency,
    param_efficiency,
)
from doseopt.optim import GrowthResult, OptimizerConfig, grow_support, maximize  # noqa: F401
from doseopt.certificates import (  # noqa: F401
    BoundReport,
    chebyshev_alternation_check,
    verify_c_optimality,
    verify_d_optimality,
)
from doseopt.local import (  # noqa: F401
    LocalDesignProblem,
    middle_point_closed_form,
    rescale_design,
    solve_c_optimal,
    solve_local,
    weights_from_points,
)
from doseopt.doptimal import solve_d_optimal  # noqa: F401
from doseopt.maximin import (  # noqa: F401
    DISCRIMINATION_PAIRS,
    MaximinProblem,
    maximin_objective,
    reference_designs,
    solve_maximin,
)
from doseopt.simulate import (  # noqa: F401
    ExactDesign,
    SimSpec,
    builtin_designs,
    compare_designs,
    simulate_fit,
)
