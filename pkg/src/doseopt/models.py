"""The five nested exponential dose-response models.

All models describe a mean response on a dose interval ``[0, T]``:

========  =========================  ==========  =====================
name      mean response              params (m)  canonical ordering
========  =========================  ==========  =====================
CONSTANT  ``a``                      1           (a,)
EXP       ``a*exp(-b*t)``            2           (a, b)
EXP_POW   ``a*exp(-b*t**d)``         3           (a, b, d)
EXP_SAT   ``a*(c-(c-1)*exp(-b*t))``  3           (a, b, c)
FULL      ``a*(c-(c-1)*exp(-b*t**d))``  4        (a, b, d, c)
========  =========================  ==========  =====================

Constraints: ``a > 0`` and ``b > 0`` wherever present, ``c in [0, 1]``,
``d >= 1``.  The canonical parameter ordering of each model is the order
in which the partial derivatives appear in its gradient vector; note that
for FULL this is ``(a, b, d, c)``, i.e. the power parameter comes third
and the saturation fraction last.

The models are nested: fixing single parameters collapses a richer model
onto a simpler one (``FULL -> EXP_SAT`` via ``d=1``, ``FULL -> EXP_POW``
via ``c=0``, ``EXP_SAT -> EXP`` via ``c=0``, ``EXP_SAT -> CONSTANT`` via
``c=1``, ``EXP_POW -> EXP`` via ``d=1``) and every model collapses to
CONSTANT via ``b=0``.  Discriminating between a nested pair amounts to
estimating the collapsing parameter precisely.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from doseopt.errors import DomainError, InvalidParameterError, NoNestingError

__all__ = [
    "Model",
    "Theta",
    "eval_mean",
    "gradient",
    "mean_response_array",
    "gradient_array",
    "nests",
    "discrimination_target",
    "DISCRIMINATION_EDGES",
]


class Model(str, Enum):
    """Identifier of one of the five nested mean-response models."""

    CONSTANT = "constant"
    EXP = "exp"
    EXP_POW = "exp-pow"
    EXP_SAT = "exp-sat"
    FULL = "full"

    @property
    def param_names(self) -> tuple[str, ...]:
        return _PARAM_NAMES[self]

    @property
    def n_params(self) -> int:
        return len(_PARAM_NAMES[self])

    def param_index(self, name: str) -> int:
        """Canonical (0-based) index of a parameter in this model."""
        try:
            return _PARAM_NAMES[self].index(name)
        except ValueError:
            raise InvalidParameterError(
                f"model {self.value!r} has no parameter {name!r}; "
                f"its parameters are {_PARAM_NAMES[self]}"
            ) from None


_PARAM_NAMES: dict[Model, tuple[str, ...]] = {
    Model.CONSTANT: ("a",),
    Model.EXP: ("a", "b"),
    Model.EXP_POW: ("a", "b", "d"),
    Model.EXP_SAT: ("a", "b", "c"),
    Model.FULL: ("a", "b", "d", "c"),
}


@dataclass(frozen=True)
class Theta:
    """Named parameter set; fields not used by a model may stay ``None``.

    ``a`` is the response scale, ``b`` the decay rate, ``c`` the
    saturation fraction and ``d`` the dose power.
    """

    a: float | None = None
    b: float | None = None
    c: float | None = None
    d: float | None = None

    def validate_for(self, model: Model) -> None:
        """Raise :class:`InvalidParameterError` unless this parameter set is
        admissible for *model*.

        Boundary values ``c in {0, 1}`` and ``d = 1`` are admissible; they
        are exactly the nominal values used for discrimination problems.
        """
        for name in model.param_names:
            value = getattr(self, name)
            if value is None or not np.isfinite(value):
                raise InvalidParameterError(
                    f"model {model.value!r} requires a finite value for {name!r}"
                )
        if self.a is not None and not self.a > 0:
            raise InvalidParameterError(f"a must be > 0, got {self.a}")
        if model is not Model.CONSTANT and not self.b > 0:
            raise InvalidParameterError(f"b must be > 0, got {self.b}")
        if "c" in model.param_names and not 0.0 <= self.c <= 1.0:
            raise InvalidParameterError(f"c must lie in [0, 1], got {self.c}")
        if "d" in model.param_names and not self.d >= 1.0:
            raise InvalidParameterError(f"d must be >= 1, got {self.d}")

    def as_array(self, model: Model) -> np.ndarray:
        """Parameter values in the model's canonical ordering."""
        return np.array([getattr(self, name) for name in model.param_names], float)

    def replace(self, **kwargs) -> "Theta":
        values = {"a": self.a, "b": self.b, "c": self.c, "d": self.d}
        values.update(kwargs)
        return Theta(**values)

    @classmethod
    def from_array(cls, model: Model, values) -> "Theta":
        values = np.asarray(values, float)
        if values.shape != (model.n_params,):
            raise InvalidParameterError(
                f"expected {model.n_params} values for model {model.value!r}, "
                f"got shape {values.shape}"
            )
        return cls(**dict(zip(model.param_names, values.tolist())))

    def restrict_to(self, model: Model) -> "Theta":
        """Keep only the fields used by *model* (others reset to None)."""
        return Theta(**{name: getattr(self, name) for name in model.param_names})


def _check_dose(t: np.ndarray) -> None:
    if np.any(t < 0):
        raise DomainError("doses must be nonnegative")


def _pow_exp(t: np.ndarray, b: float, d: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (t**d, exp(-b*t**d), t**d * log(t)) with the log term extended
    by its limit 0 at t = 0 (valid for d >= 1)."""
    td = np.power(t, d)
    decay = np.exp(-b * td)
    with np.errstate(divide="ignore", invalid="ignore"):
        td_log = np.where(t > 0, td * np.log(np.where(t > 0, t, 1.0)), 0.0)
    return td, decay, td_log


def mean_response_array(model: Model, values: np.ndarray, t_arr: np.ndarray) -> np.ndarray:
    """Mean response from canonical parameter values, without validation.

    The unchecked entry point: the simulation harness uses it inside
    least-squares iterations and to generate data from "true" parameters
    that may sit outside the fitted model's constraint box.
    """
    if model is Model.CONSTANT:
        return np.full(t_arr.shape, values[0])
    if model is Model.EXP:
        return values[0] * np.exp(-values[1] * t_arr)
    if model is Model.EXP_POW:
        a, b, d = values
        return a * np.exp(-b * np.power(t_arr, d))
    if model is Model.EXP_SAT:
        a, b, c = values
        return a * (c - (c - 1.0) * np.exp(-b * t_arr))
    a, b, d, c = values
    return a * (c - (c - 1.0) * np.exp(-b * np.power(t_arr, d)))


def gradient_array(model: Model, values: np.ndarray, t_arr: np.ndarray) -> np.ndarray:
    """Gradient rows of shape (m, n) from canonical parameter values,
    without validation."""
    if model is Model.CONSTANT:
        return np.ones((1, t_arr.size))
    if model is Model.EXP:
        a, b = values
        decay = np.exp(-b * t_arr)
        return np.stack([decay, -a * t_arr * decay])
    if model is Model.EXP_POW:
        a, b, d = values
        td, decay, td_log = _pow_exp(t_arr, b, d)
        return np.stack([decay, -a * td * decay, -a * b * td_log * decay])
    if model is Model.EXP_SAT:
        a, b, c = values
        decay = np.exp(-b * t_arr)
        cm1 = c - 1.0
        return np.stack([c - cm1 * decay, a * cm1 * t_arr * decay, a * (1.0 - decay)])
    a, b, d, c = values
    td, decay, td_log = _pow_exp(t_arr, b, d)
    cm1 = c - 1.0
    return np.stack(
        [
            c - cm1 * decay,
            a * cm1 * td * decay,
            a * cm1 * b * td_log * decay,
            a * (1.0 - decay),
        ]
    )


def eval_mean(model: Model, theta: Theta, t) -> np.ndarray | float:
    """Mean response ``eta(t, theta)`` of *model* at dose(s) *t*.

    Parameters
    ----------
    model : Model
    theta : Theta
        Must be valid for *model*.
    t : float or array
        Dose value(s) in ``[0, inf)``.

    Returns
    -------
    float or ndarray matching the shape of *t*.
    """
    theta.validate_for(model)
    t_arr = np.asarray(t, float)
    _check_dose(t_arr)
    scalar = t_arr.ndim == 0
    out = mean_response_array(model, theta.as_array(model), np.atleast_1d(t_arr))
    return float(out[0]) if scalar else out


def gradient(model: Model, theta: Theta, t) -> np.ndarray:
    """Gradient ``f(t, theta)`` of the mean response w.r.t. the parameters.

    Components follow the model's canonical ordering (see module
    docstring).  The ``t**d * log(t)`` factor appearing in the power
    models is continuously extended by 0 at ``t = 0``.

    Returns
    -------
    ndarray of shape ``(m,)`` for scalar *t*, else ``(m, len(t))``.
    """
    theta.validate_for(model)
    t_arr = np.asarray(t, float)
    _check_dose(t_arr)
    scalar = t_arr.ndim == 0
    out = gradient_array(model, theta.as_array(model), np.atleast_1d(t_arr))
    return out[:, 0] if scalar else out


# Single-parameter restrictions that collapse a parent model onto a child.
# The b=0 collapse onto CONSTANT is deliberately excluded: b=0 is not an
# admissible rate, so it cannot serve as a discrimination null value.
DISCRIMINATION_EDGES: dict[tuple[Model, Model], tuple[str, float]] = {
    (Model.FULL, Model.EXP_SAT): ("d", 1.0),
    (Model.FULL, Model.EXP_POW): ("c", 0.0),
    (Model.EXP_SAT, Model.EXP): ("c", 0.0),
    (Model.EXP_SAT, Model.CONSTANT): ("c", 1.0),
    (Model.EXP_POW, Model.EXP): ("d", 1.0),
}


def nests(child: Model, parent: Model) -> bool:
    """True when *child* arises from *parent* by a listed restriction.

    Covers the five single-parameter edges plus the ``b = 0`` collapse of
    every non-constant model onto CONSTANT.
    """
    if (parent, child) in DISCRIMINATION_EDGES:
        return True
    return child is Model.CONSTANT and parent is not Model.CONSTANT


def discrimination_target(parent: Model, child: Model) -> tuple[str, float]:
    """Parameter name and null value whose restriction collapses *parent*
    onto *child*.

    Raises
    ------
    NoNestingError
        If the pair is not linked by a single-parameter restriction (the
        ``b = 0`` collapse does not qualify).
    """
    try:
        return DISCRIMINATION_EDGES[(parent, child)]
    except KeyError:
        raise NoNestingError(
            f"{child.value!r} does not nest in {parent.value!r} via a single "
            "parameter restriction"
        ) from None
