"""Derivative-free maximization engine.

A thin, reproducible layer over Nelder-Mead simplex search (standard
coefficients: reflection 1, expansion 2, contraction 0.5, shrink 0.5)
with three additions the design solvers need:

* seeded multi-start (Latin hypercube over the box, plus caller starts),
* iterated re-polish: the simplex is rebuilt at the incumbent until the
  value stops improving, which is what lets the search converge on the
  non-smooth min-of-efficiencies objectives,
* a support-size growth driver that optimizes n-point designs and
  increments n until the criterion stops improving.

Everything is deterministic for a fixed seed; out-of-box proposals are
clipped to the bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats.qmc import LatinHypercube

from doseopt.designs import ContinuousDesign
from doseopt.errors import NonFiniteObjectiveError

__all__ = ["OptimizerConfig", "GrowthResult", "maximize", "grow_support"]

# Logit box for the weight parameterization; exp(±30) is far beyond any
# weight ratio arising in these problems.
_LOGIT_BOUND = 30.0

# Support points closer than this fraction of the design space are merged
# (weights summed) before a grown design is returned.
MERGE_GAP_FRACTION = 1e-4


@dataclass(frozen=True)
class OptimizerConfig:
    """Tolerances and budgets for the simplex engine.

    f_tol is the absolute objective tolerance; it doubles as the
    "no further improvement" threshold when growing design support.
    """

    max_iter: int = 4000
    f_tol: float = 1e-10
    x_tol: float = 1e-9
    restarts: int = 20
    seed: int = 0
    polish_rounds: int = 8
    growth_tol: float = 1e-6
    max_support_growth: int = 3

    def __post_init__(self):
        if self.f_tol <= 0 or self.x_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


@dataclass
class GrowthResult:
    """Outcome of a support-size growth run."""

    best_design: ContinuousDesign
    best_value: float
    criterion_trace: list[tuple[int, float]] = field(default_factory=list)


def _nelder_mead_once(neg_objective, x0, bounds, config) -> tuple[np.ndarray, float]:
    res = minimize(
        neg_objective,
        x0,
        method="Nelder-Mead",
        bounds=bounds,
        options={
            "maxiter": config.max_iter,
            "maxfev": 2 * config.max_iter,
            "fatol": config.f_tol,
            "xatol": config.x_tol,
        },
    )
    return res.x, float(res.fun)


def _polish(neg_objective, x, fval, bounds, config) -> tuple[np.ndarray, float]:
    """Restart the simplex at the incumbent until it stops improving."""
    for _ in range(config.polish_rounds):
        x2, f2 = _nelder_mead_once(neg_objective, x, bounds, config)
        if f2 >= fval - config.f_tol:
            if f2 < fval:
                x, fval = x2, f2
            break
        x, fval = x2, f2
    return x, fval


def maximize(
    objective: Callable[[np.ndarray], float],
    start: np.ndarray,
    bounds: Sequence[tuple[float, float]],
    config: OptimizerConfig = OptimizerConfig(),
    extra_starts: Sequence[np.ndarray] = (),
) -> tuple[np.ndarray, float]:
    """Maximize *objective* over a box by multi-start Nelder-Mead.

    The start list is *start*, then *extra_starts*, then Latin-hypercube
    samples until config.restarts starts in total.  Returns the best
    (argmax, value); ties broken by the lexicographically smallest
    argmax so results do not depend on evaluation order.
    """
    lo = np.array([b[0] for b in bounds], float)
    hi = np.array([b[1] for b in bounds], float)
    start = np.clip(np.asarray(start, float), lo, hi)
    if not np.isfinite(objective(start)):
        raise NonFiniteObjectiveError("objective is not finite at the start point")

    def neg(x):
        val = objective(np.clip(x, lo, hi))
        return -val if np.isfinite(val) else np.inf

    starts = [start] + [np.clip(np.asarray(s, float), lo, hi) for s in extra_starts]
    n_random = max(0, config.restarts - len(starts))
    if n_random:
        sampler = LatinHypercube(d=start.size, seed=config.seed)
        samples = sampler.random(n_random)
        starts.extend(lo + samples * (hi - lo))

    best_x: np.ndarray | None = None
    best_f = np.inf
    for x0 in starts:
        x, f = _nelder_mead_once(neg, x0, bounds, config)
        x, f = _polish(neg, x, f, bounds, config)
        x = np.clip(x, lo, hi)
        if f < best_f - 1e-15 or (
            abs(f - best_f) <= 1e-15 and best_x is not None and tuple(x) < tuple(best_x)
        ):
            best_x, best_f = x, f
    return best_x, -best_f


def _decode(x: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """x = [n support points, n-1 weight logits] -> sorted points, simplex
    weights.  The first logit is pinned to 0 so the map is one-to-one."""
    points = np.sort(x[:n])
    logits = np.concatenate([[0.0], x[n:]])
    w = np.exp(logits - logits.max())
    return points, w / w.sum()


def _encode(points: np.ndarray, weights: np.ndarray) -> np.ndarray:
    logits = np.log(weights)
    return np.concatenate([points, (logits - logits[0])[1:]])


def _growth_starts(
    n: int,
    space_upper: float,
    previous: tuple[np.ndarray, np.ndarray] | None,
    initial_designs: Sequence[tuple[np.ndarray, np.ndarray]],
) -> list[np.ndarray]:
    """Warm starts for the n-point stage: caller-provided shapes padded or
    trimmed to n points, plus splits of the previous stage's solution."""
    starts = []
    candidates = list(initial_designs)
    if previous is not None:
        p, w = previous
        # split the heaviest point into a close pair
        k = int(np.argmax(w))
        eps = 0.02 * space_upper
        split_p = np.append(p, min(p[k] + eps, space_upper) if p[k] + eps <= space_upper else max(p[k] - eps, 0.0))
        split_w = np.append(w, w[k] / 2)
        split_w[k] /= 2
        candidates.append((split_p, split_w / split_w.sum()))
        # and a spread extra point at the largest gap
        gaps = np.diff(np.concatenate([[0.0], np.sort(p), [space_upper]]))
        g = int(np.argmax(gaps))
        edges = np.concatenate([[0.0], np.sort(p), [space_upper]])
        new_pt = 0.5 * (edges[g] + edges[g + 1])
        candidates.append(
            (np.append(p, new_pt), np.append(w * n / (n + 1), 1.0 / (n + 1)))
        )
    for pts, wts in candidates:
        pts = np.asarray(pts, float)
        wts = np.asarray(wts, float)
        if pts.size > n:
            order = np.argsort(wts)[::-1][:n]
            pts, wts = pts[order], wts[order]
        while pts.size < n:
            gaps = np.diff(np.concatenate([[0.0], np.sort(pts), [space_upper]]))
            edges = np.concatenate([[0.0], np.sort(pts), [space_upper]])
            g = int(np.argmax(gaps))
            pts = np.append(pts, 0.5 * (edges[g] + edges[g + 1]))
            wts = np.append(wts, wts.mean())
        order = np.argsort(pts)
        starts.append(_encode(pts[order], wts[order] / wts.sum()))
    if not starts:
        starts.append(
            _encode(
                space_upper * (np.arange(n) / max(n - 1, 1)) ** 2,
                np.full(n, 1.0 / n),
            )
        )
    return starts


def grow_support(
    design_objective: Callable[[np.ndarray, np.ndarray], float],
    initial_size: int,
    space_upper: float,
    config: OptimizerConfig = OptimizerConfig(),
    initial_designs: Sequence[tuple[np.ndarray, np.ndarray]] = (),
) -> GrowthResult:
    """Maximize a design criterion, growing the support one point at a time.

    Optimizes over n-point designs (points in the box, weights on the
    simplex through the logit map) starting at ``initial_size``; n is
    incremented while the best value improves by more than
    ``config.growth_tol``.  Near-duplicate support points of the winning
    design are merged before it is returned.

    design_objective(points, weights) is called with sorted points and
    strictly positive weights summing to one, and must return a finite
    value or ``-inf``/large negative for degenerate candidates.
    """
    trace: list[tuple[int, float]] = []
    best: tuple[np.ndarray, np.ndarray] | None = None
    best_value = -np.inf
    n = initial_size
    for stage in range(config.max_support_growth + 1):
        def objective(x, n=n):
            points, weights = _decode(x, n)
            return design_objective(points, weights)

        bounds = [(0.0, space_upper)] * n + [(-_LOGIT_BOUND, _LOGIT_BOUND)] * (n - 1)
        starts = _growth_starts(n, space_upper, best, initial_designs)
        # later stages are warm-started from the incumbent, so a lighter
        # random restart budget suffices
        stage_config = config if stage == 0 else replace(
            config, restarts=max(4, config.restarts // 3)
        )
        x0 = starts[0]
        x, value = maximize(objective, x0, bounds, stage_config, extra_starts=starts[1:])
        trace.append((n, value))
        if best is not None and value <= best_value + config.growth_tol:
            break
        if best is None or value > best_value:
            best = _decode(x, n)
            best_value = value
        n += 1

    points, weights = best
    design = ContinuousDesign.normalized(points, weights, space_upper).merge_close(
        MERGE_GAP_FRACTION * space_upper
    )
    # merging can only change the criterion below the growth tolerance;
    # report the merged design's own value for consistency
    merged_value = design_objective(*design.as_arrays())
    return GrowthResult(design, float(merged_value), trace)
