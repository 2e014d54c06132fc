"""Canonical design-document format and exact-design rounding.

One JSON schema feeds the CLI, the HTTP service and the browser
explorer.  All numeric values are serialized as decimal strings with 12
significant digits; parsing such a string and re-serializing it
reproduces it byte-for-byte, so documents round-trip losslessly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from doseopt._version import __version__
from doseopt.designs import ContinuousDesign
from doseopt.errors import ValidationError
from doseopt.models import Model, Theta
from doseopt.simulate import ExactDesign

__all__ = ["DesignDocument", "SCHEMA_VERSION", "round_design", "parse_model"]

SCHEMA_VERSION = "1"

_MODEL_ALIASES = {
    "2.1": Model.CONSTANT,
    "2.2": Model.EXP,
    "2.3": Model.EXP_POW,
    "2.4": Model.EXP_SAT,
    "2.5": Model.FULL,
}


def parse_model(token: str) -> Model:
    """Accept either a model name ('exp-pow') or its table label ('2.3')."""
    token = str(token).strip().lower()
    if token in _MODEL_ALIASES:
        return _MODEL_ALIASES[token]
    try:
        return Model(token)
    except ValueError:
        raise ValidationError(
            f"unknown model {token!r}; use one of "
            f"{sorted(m.value for m in Model)} or {sorted(_MODEL_ALIASES)}"
        ) from None


def _fmt(value: float) -> str:
    return format(float(value), ".12g")


@dataclass(frozen=True)
class DesignDocument:
    """A design plus everything needed to reproduce and evaluate it."""

    model: Model
    theta: Theta
    design: ContinuousDesign
    criterion: str
    config: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION
    tool_version: str = __version__

    @property
    def space_upper(self) -> float:
        return self.design.space_upper

    def to_jsonable(self) -> dict:
        theta = {
            name: _fmt(getattr(self.theta, name))
            for name in ("a", "b", "c", "d")
            if getattr(self.theta, name) is not None
        }
        return {
            "schema_version": self.schema_version,
            "model": self.model.value,
            "theta": theta,
            "space_upper": _fmt(self.design.space_upper),
            "design": {
                "points": [_fmt(p) for p in self.design.points],
                "weights": [_fmt(w) for w in self.design.weights],
            },
            "provenance": {
                "criterion": self.criterion,
                "config": self.config,
                "tool_version": self.tool_version,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_jsonable(), indent=2) + "\n"

    @classmethod
    def from_jsonable(cls, data: dict) -> "DesignDocument":
        try:
            model = parse_model(data["model"])
            theta = Theta(**{k: float(v) for k, v in data.get("theta", {}).items()})
            space_upper = float(data["space_upper"])
            design = ContinuousDesign(
                tuple(float(p) for p in data["design"]["points"]),
                tuple(float(w) for w in data["design"]["weights"]),
                space_upper,
            )
            provenance = data.get("provenance", {})
            return cls(
                model=model,
                theta=theta,
                design=design,
                criterion=provenance.get("criterion", "unknown"),
                config=provenance.get("config", {}),
                schema_version=str(data.get("schema_version", SCHEMA_VERSION)),
                tool_version=provenance.get("tool_version", __version__),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed design document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "DesignDocument":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"design document is not valid JSON: {exc}") from exc
        return cls.from_jsonable(data)


def round_design(design: ContinuousDesign, n_total: int) -> ExactDesign:
    """Largest-remainder rounding of a continuous design to N observations.

    Each dose gets floor(N * w) observations; leftovers go to the largest
    fractional remainders (ties resolved toward lower doses).  Doses that
    end up with zero observations are dropped.
    """
    if n_total < 1:
        raise ValidationError("N must be a positive integer")
    weights = np.asarray(design.weights, float)
    raw = n_total * weights
    counts = np.floor(raw).astype(int)
    remainder = raw - counts
    missing = n_total - counts.sum()
    if missing > 0:
        # stable sort keeps lower indices first among ties
        order = np.argsort(-remainder, kind="stable")
        counts[order[:missing]] += 1
    keep = counts > 0
    return ExactDesign(
        tuple(np.asarray(design.points)[keep].tolist()),
        tuple(counts[keep].tolist()),
    )
