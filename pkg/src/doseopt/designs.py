"""Continuous designs, information matrices and optimality criteria.

A continuous design is a probability measure with finitely many support
points on the dose interval ``[0, T]``.  The information matrix of a
design under a model is the weighted sum of outer products of the model's
parameter-gradient vectors over the support; its inverse is the
asymptotic covariance matrix of the standardized least-squares estimator.

Everything here is a pure function of its inputs; references required by
the efficiency functionals (the corresponding locally optimal designs)
are supplied by the caller, keeping this module free of solvers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from doseopt.errors import SingularInformationError, ValidationError
from doseopt.models import Model, Theta, discrimination_target, gradient

__all__ = [
    "ContinuousDesign",
    "InfoMatrix",
    "EfficiencyReport",
    "info_matrix",
    "em_variance",
    "pair_efficiency",
    "d_criterion",
    "d_efficiency",
    "param_efficiency",
]

# A matrix counts as singular when its smallest eigenvalue falls below
# this fraction of the largest one (scale-free across rate regimes).
SINGULARITY_RTOL = 1e-12

WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class ContinuousDesign:
    """Finite-support probability measure on ``[0, space_upper]``.

    points must be strictly increasing, weights positive and summing
    to 1 (within 1e-12).
    """

    points: tuple[float, ...]
    weights: tuple[float, ...]
    space_upper: float

    def __post_init__(self):
        pts = np.asarray(self.points, float)
        wts = np.asarray(self.weights, float)
        if pts.ndim != 1 or pts.shape != wts.shape or pts.size == 0:
            raise ValidationError("points and weights must be equal-length, non-empty")
        if not self.space_upper > 0:
            raise ValidationError(f"space_upper must be > 0, got {self.space_upper}")
        if np.any(pts < 0) or np.any(pts > self.space_upper * (1 + 1e-12)):
            raise ValidationError(
                f"support points must lie in [0, {self.space_upper}]"
            )
        if pts.size > 1 and np.any(np.diff(pts) <= 0):
            raise ValidationError("support points must be strictly increasing")
        if np.any(wts <= 0):
            raise ValidationError("weights must be strictly positive")
        if abs(wts.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(
                f"weights must sum to 1 within {WEIGHT_SUM_TOL}, got {wts.sum()!r}"
            )
        object.__setattr__(self, "points", tuple(pts.tolist()))
        object.__setattr__(self, "weights", tuple(wts.tolist()))

    @property
    def n_points(self) -> int:
        return len(self.points)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.points, float), np.asarray(self.weights, float)

    @classmethod
    def normalized(cls, points, weights, space_upper: float) -> "ContinuousDesign":
        """Build a design from raw masses: sorts points, merges duplicates,
        drops nonpositive masses and renormalizes."""
        pts = np.asarray(points, float)
        wts = np.asarray(weights, float)
        if pts.shape != wts.shape:
            raise ValidationError("points and weights must have the same length")
        keep = wts > 0
        pts, wts = pts[keep], wts[keep]
        if pts.size == 0:
            raise ValidationError("design has no positive mass")
        order = np.argsort(pts)
        pts, wts = pts[order], wts[order]
        uniq_pts, inverse = np.unique(pts, return_inverse=True)
        uniq_wts = np.zeros_like(uniq_pts)
        np.add.at(uniq_wts, inverse, wts)
        return cls(tuple(uniq_pts), tuple(uniq_wts / uniq_wts.sum()), space_upper)

    def merge_close(self, gap: float) -> "ContinuousDesign":
        """Merge support points closer than *gap* (weights summed, location
        at the weighted mean). Idempotent once all gaps exceed *gap*."""
        pts, wts = self.as_arrays()
        merged_p: list[float] = [pts[0]]
        merged_w: list[float] = [wts[0]]
        for p, w in zip(pts[1:], wts[1:]):
            if p - merged_p[-1] < gap:
                total = merged_w[-1] + w
                merged_p[-1] = (merged_p[-1] * merged_w[-1] + p * w) / total
                merged_w[-1] = total
            else:
                merged_p.append(p)
                merged_w.append(w)
        wsum = sum(merged_w)
        return ContinuousDesign(
            tuple(merged_p), tuple(w / wsum for w in merged_w), self.space_upper
        )


@dataclass(frozen=True)
class InfoMatrix:
    """Information matrix ``M(xi, theta)`` of a design under a model."""

    entries: np.ndarray
    model: Model
    theta: Theta

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def numerical_rank(self) -> int:
        eig = self.eigenvalues()
        top = eig[-1]
        if top <= 0:
            return 0
        return int(np.sum(eig > SINGULARITY_RTOL * top))

    def is_singular(self) -> bool:
        return self.numerical_rank() < self.m


def _info_entries(points: np.ndarray, weights: np.ndarray, model: Model, theta: Theta) -> np.ndarray:
    F = gradient(model, theta, points)
    if F.ndim == 1:
        F = F[:, None]
    M = (F * weights) @ F.T
    return 0.5 * (M + M.T)


def info_matrix(design: ContinuousDesign, model: Model, theta: Theta) -> InfoMatrix:
    """``M = sum_i w_i f(t_i) f(t_i)^T`` under *model* at *theta*.

    Singular matrices are representable; downstream criteria flag them.
    """
    pts, wts = design.as_arrays()
    return InfoMatrix(_info_entries(pts, wts, model, theta), model, theta)


def _variance_from_entries(M: np.ndarray, j: int, context: str) -> float:
    """``e_j^T M^{-1} e_j`` with a pseudo-inverse fallback for singular M
    when e_j is estimable (lies in the range of M)."""
    m = M.shape[0]
    eig, vec = np.linalg.eigh(M)
    top = eig[-1]
    rank = int(np.sum(eig > SINGULARITY_RTOL * max(top, 0.0))) if top > 0 else 0
    e = np.zeros(m)
    e[j] = 1.0
    if rank == m:
        return float(e @ np.linalg.solve(M, e))
    # e_j must lie in the span of the nonzero eigenvectors
    coords = vec.T @ e
    null_mass = np.linalg.norm(coords[: m - rank])
    if null_mass > 1e-8:
        raise SingularInformationError(
            f"information matrix is singular (rank {rank} of {m}) and the "
            f"target {context} is not estimable",
            rank=rank,
            size=m,
        )
    kept = coords[m - rank:]
    return float(np.sum(kept**2 / eig[m - rank:]))


def em_variance(
    design: ContinuousDesign, model: Model, theta: Theta, target: str
) -> float:
    """Asymptotic variance ``e_j^T M^{-1} e_j`` of one parameter's
    standardized estimator, with ``j`` the canonical index of *target*.

    For the last parameter this equals the determinant ratio
    ``det(M~)/det(M)`` where ``M~`` deletes the last row and column.

    Raises
    ------
    SingularInformationError
        When M is singular and the target is not estimable.  (Singular
        matrices with an estimable target arise for degenerate optimal
        reference designs, e.g. the one-point design that estimates the
        response scale; these are evaluated through the pseudo-inverse.)
    """
    j = model.param_index(target)
    M = info_matrix(design, model, theta)
    return _variance_from_entries(M.entries, j, f"parameter {target!r}")


def pair_efficiency(
    design: ContinuousDesign,
    parent: Model,
    child: Model,
    theta: Theta,
    reference: ContinuousDesign,
) -> float:
    """Efficiency of *design* for discriminating between the nested pair,
    relative to the locally optimal discriminating design *reference*.

    The value is the ratio of the reference's variance for the pair's
    discrimination parameter to the design's; it lies in ``(0, 1]`` when
    *reference* is optimal.
    """
    target, _ = discrimination_target(parent, child)
    theta_parent = theta.restrict_to(parent)
    v_ref = em_variance(reference, parent, theta_parent, target)
    v = em_variance(design, parent, theta_parent, target)
    return v_ref / v


def d_criterion(design: ContinuousDesign, model: Model, theta: Theta) -> float:
    """``log det M(xi, theta)``; ``-inf`` for singular M."""
    M = info_matrix(design, model, theta)
    if M.is_singular():
        return -np.inf
    sign, logdet = np.linalg.slogdet(M.entries)
    return logdet if sign > 0 else -np.inf


def d_efficiency(
    design: ContinuousDesign, model: Model, theta: Theta, reference: ContinuousDesign
) -> float:
    """``(det M(design) / det M(reference))^(1/m)`` relative to the locally
    D-optimal *reference*.

    The 1/m homogenization makes the value interpretable per observation:
    efficiency 0.5 means twice as many runs are needed.
    """
    ld = d_criterion(design, model, theta)
    ld_ref = d_criterion(reference, model, theta)
    if not np.isfinite(ld):
        M = info_matrix(design, model, theta)
        raise SingularInformationError(
            f"design is singular under model {model.value!r} "
            f"(rank {M.numerical_rank()} of {M.m})",
            rank=M.numerical_rank(),
            size=M.m,
        )
    if not np.isfinite(ld_ref):
        raise SingularInformationError("reference design is singular")
    return float(np.exp((ld - ld_ref) / model.n_params))


def param_efficiency(
    design: ContinuousDesign,
    model: Model,
    theta: Theta,
    param: str,
    reference: ContinuousDesign,
) -> float:
    """Efficiency of *design* for estimating one parameter, relative to the
    locally c-optimal (single-coordinate) *reference* design."""
    v_ref = em_variance(reference, model, theta, param)
    v = em_variance(design, model, theta, param)
    return v_ref / v


def _pair_key(parent: Model, child: Model) -> str:
    return f"{parent.value}/{child.value}"


@dataclass
class EfficiencyReport:
    """Efficiency summary of one design against caller-supplied references.

    Keys of ``pair_effs`` are (parent, child) model pairs; ``d_effs`` maps
    models to D-efficiencies; ``param_effs`` maps (model, parameter name)
    to single-coordinate efficiencies.
    """

    pair_effs: dict[tuple[Model, Model], float] = field(default_factory=dict)
    d_effs: dict[Model, float] = field(default_factory=dict)
    param_effs: dict[tuple[Model, str], float] = field(default_factory=dict)

    def min_pair_efficiency(self) -> float:
        return min(self.pair_effs.values())

    def to_jsonable(self) -> dict:
        return {
            "pair_effs": {
                _pair_key(p, c): v for (p, c), v in self.pair_effs.items()
            },
            "d_effs": {m.value: v for m, v in self.d_effs.items()},
            "param_effs": {
                f"{m.value}:{name}": v for (m, name), v in self.param_effs.items()
            },
        }

    @classmethod
    def from_jsonable(cls, data: dict) -> "EfficiencyReport":
        pair_effs = {}
        for key, v in data.get("pair_effs", {}).items():
            parent, child = key.split("/")
            pair_effs[(Model(parent), Model(child))] = v
        d_effs = {Model(k): v for k, v in data.get("d_effs", {}).items()}
        param_effs = {}
        for key, v in data.get("param_effs", {}).items():
            model, name = key.split(":")
            param_effs[(Model(model), name)] = v
        return cls(pair_effs, d_effs, param_effs)
