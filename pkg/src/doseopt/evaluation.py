"""Wires the solvers into the efficiency functionals.

The core efficiency functions take caller-supplied reference designs;
this layer computes those references (locally optimal discriminating,
D-optimal and single-parameter designs) on demand and caches them, so
interactive clients can re-evaluate candidate designs cheaply.
"""

from __future__ import annotations

import threading

from doseopt.designs import (
    ContinuousDesign,
    EfficiencyReport,
    d_efficiency,
    pair_efficiency,
    param_efficiency,
)
from doseopt.doptimal import solve_d_optimal
from doseopt.errors import SingularInformationError, ValidationError
from doseopt.local import solve_c_optimal
from doseopt.maximin import DISCRIMINATION_PAIRS, MaximinProblem, reference_designs
from doseopt.models import Model, Theta
from doseopt.optim import OptimizerConfig

__all__ = ["evaluate_design", "EVALUATED_MODELS", "clear_reference_caches"]

# the non-trivial models, in table order
EVALUATED_MODELS = (Model.EXP, Model.EXP_POW, Model.EXP_SAT, Model.FULL)

_cache: dict = {}
_cache_lock = threading.Lock()


def clear_reference_caches() -> None:
    with _cache_lock:
        _cache.clear()


def _cached(key, solve):
    with _cache_lock:
        if key in _cache:
            return _cache[key]
    value = solve()
    with _cache_lock:
        return _cache.setdefault(key, value)


def _theta_key(theta: Theta):
    return (theta.a, theta.b, theta.c, theta.d)


def _full_nominal(theta: Theta) -> Theta:
    """Fill the missing fields with the nesting null values so the theta
    can be restricted onto every model."""
    return Theta(
        a=theta.a if theta.a is not None else 1.0,
        b=theta.b,
        c=theta.c if theta.c is not None else 0.0,
        d=theta.d if theta.d is not None else 1.0,
    )


def evaluate_design(
    design: ContinuousDesign,
    theta: Theta,
    requests: tuple[str, ...] = ("pairs", "d", "params"),
    config: OptimizerConfig = OptimizerConfig(),
) -> EfficiencyReport:
    """Efficiency report of *design* at the nominal *theta*.

    requests selects the report sections: "pairs" (the four
    discrimination efficiencies), "d" (D-efficiencies under every model)
    and "params" (per-parameter efficiencies under every model).
    The references are the corresponding locally optimal designs at
    *theta*, solved on first use and cached.

    Entries the design cannot support (its information matrix under that
    model is singular, e.g. a 3-point design under the 4-parameter model)
    are omitted from the report rather than failing it.
    """
    unknown = set(requests) - {"pairs", "d", "params"}
    if unknown:
        raise ValidationError(f"unknown evaluation requests: {sorted(unknown)}")
    nominal = _full_nominal(theta)
    nominal.validate_for(Model.FULL)
    T = design.space_upper
    report = EfficiencyReport()

    if "pairs" in requests:
        problem = MaximinProblem(nominal, T)
        refs = _cached(
            ("pairs", _theta_key(nominal), T, config.restarts, config.seed),
            lambda: reference_designs(problem, config),
        )
        for parent, child in DISCRIMINATION_PAIRS:
            try:
                report.pair_effs[(parent, child)] = pair_efficiency(
                    design, parent, child, nominal, refs[(parent, child)]
                )
            except SingularInformationError:
                pass

    if "d" in requests:
        for model in EVALUATED_MODELS:
            restricted = nominal.restrict_to(model)
            ref = _cached(
                ("d-opt", model, _theta_key(restricted), T, config.restarts, config.seed),
                lambda m=model, r=restricted: solve_d_optimal(m, r, T, config),
            )
            try:
                report.d_effs[model] = d_efficiency(design, model, restricted, ref)
            except SingularInformationError:
                pass

    if "params" in requests:
        for model in EVALUATED_MODELS:
            restricted = nominal.restrict_to(model)
            for param in model.param_names:
                ref = _cached(
                    ("c-opt", model, param, _theta_key(restricted), T,
                     config.restarts, config.seed),
                    lambda m=model, p=param, r=restricted: solve_c_optimal(
                        m, r, p, T, config
                    ),
                )
                try:
                    report.param_effs[(model, param)] = param_efficiency(
                        design, model, restricted, param, ref
                    )
                except SingularInformationError:
                    pass
    return report
