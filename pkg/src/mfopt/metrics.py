"""Campaign quality metrics and repetition statistics.

Errors against a known optimum are reported in normalized units: design
error relative to the unit-cube diagonal, objective error relative to
the high-fidelity range over the initial design, and their quadratic
aggregate.  Repetition campaigns are summarized by quartiles with the
usual 1.5*IQR outlier fences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ReferenceOptimum:
    """Known optimum in normalized coordinates plus the objective range
    used to normalize value errors (range of the noiseless highest
    fidelity over the initial training set)."""

    x_check: np.ndarray
    f_check: float
    r1_metric: float

    def __post_init__(self):
        object.__setattr__(self, "x_check", np.asarray(self.x_check, dtype=float))
        if self.r1_metric < 0:
            raise ValueError("r1_metric must be non-negative")


@dataclass(frozen=True)
class BoxStats:
    q1: float
    q2: float
    q3: float
    whisker_lo: float
    whisker_hi: float
    outliers: tuple[float, ...]

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def reference_for_stack(stack, initial_points_normalized: np.ndarray) -> ReferenceOptimum:
    """Reference optimum of a benchmark stack, with the value scale
    taken from the noiseless highest fidelity over the initial design."""
    ref = stack.reference_optimum_normalized()
    if ref is None:
        raise ValueError("stack has no known reference optimum")
    x_check, f_check = ref
    vals = [stack.true_high_fidelity_normalized(u) for u in np.atleast_2d(initial_points_normalized)]
    return ReferenceOptimum(x_check, f_check, float(max(vals) - min(vals)))


def reference_errors(
    x_star: np.ndarray, ref: ReferenceOptimum, stack
) -> tuple[float, float, float]:
    """Design-space, objective, and aggregate errors (e_x, e_f, e_t).

    The objective error re-evaluates the highest fidelity (noiseless
    for analytical problems) at the reported optimum.
    """
    x_star = np.asarray(x_star, dtype=float).ravel()
    dim = x_star.shape[0]
    if ref.r1_metric == 0:
        raise ValueError("objective error undefined: zero reference range")
    e_x = float(np.linalg.norm(x_star - ref.x_check) / np.sqrt(dim))
    f_at_star = stack.true_high_fidelity_normalized(x_star)
    e_f = float((f_at_star - ref.f_check) / ref.r1_metric)
    e_t = float(np.sqrt((e_x ** 2 + e_f ** 2) / 2.0))
    return e_x, e_f, e_t


def relative_improvements(
    x_star: np.ndarray, x0: np.ndarray, stack
) -> tuple[float, float]:
    """Shift from a baseline design: normalized distance moved and the
    relative objective change (negative means improvement)."""
    x_star = np.asarray(x_star, dtype=float).ravel()
    x0 = np.asarray(x0, dtype=float).ravel()
    dim = x_star.shape[0]
    delta_x = float(np.linalg.norm(x_star - x0) / np.sqrt(dim))
    f0 = stack.true_high_fidelity_normalized(x0)
    if f0 == 0:
        raise ValueError("relative objective change undefined: baseline value is zero")
    f_star = stack.true_high_fidelity_normalized(x_star)
    return delta_x, float((f_star - f0) / f0)


def prediction_error(
    surrogate_min: float, x_star: np.ndarray, ref: ReferenceOptimum, stack
) -> float:
    """Surrogate's own bias at its reported optimum, relative to the
    reference range; negative when the surrogate is over-optimistic."""
    if ref.r1_metric == 0:
        raise ValueError("prediction error undefined: zero reference range")
    f_at_star = stack.true_high_fidelity_normalized(np.asarray(x_star, dtype=float))
    return float((surrogate_min - f_at_star) / ref.r1_metric)


def aggregate_stats(values) -> BoxStats:
    """Quartiles (linear interpolation between order statistics),
    whiskers at the most extreme non-outliers, and 1.5*IQR outliers."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("cannot aggregate an empty sample")
    q1, q2, q3 = (float(q) for q in np.percentile(v, [25.0, 50.0, 75.0]))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    outliers = v[(v < lo_fence) | (v > hi_fence)]
    inliers = v[(v >= lo_fence) & (v <= hi_fence)]
    return BoxStats(
        q1=q1,
        q2=q2,
        q3=q3,
        whisker_lo=float(inliers.min()),
        whisker_hi=float(inliers.max()),
        outliers=tuple(float(o) for o in np.sort(outliers)),
    )
