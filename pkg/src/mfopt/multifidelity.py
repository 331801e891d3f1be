"""Hierarchical multi-fidelity surrogate.

The composite prediction is the lowest-fidelity surrogate plus a stack
of inter-level error surrogates, one per adjacent pair of levels:

    composite(x) = lowest(x) + sum_l error_l(x),   l = 1 .. N-1

where error_l models the discrepancy between level-l observations and
the composite of everything below it.  Training sets are nested: every
point observed at some level is also observed at all cheaper levels.
Uncertainties of the components combine as a root sum of squares.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .srbf import (
    Prediction,
    RbfEnsemble,
    SrbfConfig,
    TrainingSet,
    fit_ensemble,
    select_num_centers,
)
from .benchmarks import EvaluationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FidelityLevels:
    """Level count and cost ratios, ordered highest (level 1, cost 1)
    to lowest (level N, cheapest)."""

    beta: tuple[float, ...]

    def __post_init__(self):
        beta = tuple(float(b) for b in self.beta)
        if len(beta) < 1:
            raise ValueError("need at least one level")
        if beta[0] != 1.0:
            raise ValueError("the highest fidelity must have unit cost ratio")
        if any(not 0.0 < b <= 1.0 for b in beta):
            raise ValueError("cost ratios must lie in (0, 1]")
        if any(beta[i] < beta[i + 1] for i in range(len(beta) - 1)):
            logger.warning("cost ratios are not non-increasing: %s", beta)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def from_costs(cls, costs) -> "FidelityLevels":
        costs = [float(c) for c in costs]
        return cls(beta=tuple(c / costs[0] for c in costs))

    @property
    def n_levels(self) -> int:
        return len(self.beta)


@dataclass
class BudgetLedger:
    """Running cost account in units of one highest-fidelity evaluation."""

    beta: tuple[float, ...]
    budget: float
    counts: list[int] | None = None

    def __post_init__(self):
        if self.counts is None:
            self.counts = [0] * len(self.beta)
        if len(self.counts) != len(self.beta):
            raise ValueError("counts must have one entry per level")

    @property
    def cc(self) -> float:
        return float(np.dot(self.beta, self.counts))

    def add(self, l_star: int):
        """Charge one observation at ``l_star`` plus the nested
        evaluations at every cheaper level."""
        for l in range(l_star, len(self.beta) + 1):
            self.counts[l - 1] += 1

    def addition_cost(self, l_star: int) -> float:
        return float(sum(self.beta[l_star - 1:]))

    def copy(self) -> "BudgetLedger":
        return BudgetLedger(self.beta, self.budget, list(self.counts))


def computational_cost(ledger: BudgetLedger) -> float:
    """Total cost implied by the per-level counters."""
    return ledger.cc


def combine_uncertainties(components) -> float:
    """Root-sum-square combination of independent component bands."""
    c = np.asarray(components, dtype=float)
    return float(np.sqrt((c ** 2).sum()))


@dataclass(frozen=True)
class MfSurrogate:
    """Fitted hierarchy: one surrogate for the lowest fidelity and one
    per inter-level error.  Immutable; data changes produce a new
    instance via :func:`fit_hierarchy` or :func:`add_observation`.

    ``kstars[l-1]`` is the center count of the error model for level l
    (l < N) or of the lowest-fidelity model (l = N).
    """

    levels: FidelityLevels
    training: tuple[TrainingSet, ...]
    lowest_model: RbfEnsemble
    error_models: tuple[RbfEnsemble, ...]  # index l-1 holds error model for level l
    kstars: tuple[int, ...]

    @property
    def n_levels(self) -> int:
        return self.levels.n_levels

    @property
    def dim(self) -> int:
        return self.training[0].dim

    def all_points(self) -> np.ndarray:
        """Union of every level's design points.  With nested training
        sets this is exactly the lowest level's point set."""
        return self.training[-1].points

    def _component_stats(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Means and uncertainties of (error_1 .. error_{N-1}, lowest),
        each of shape (n_components, n_points)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        models = list(self.error_models) + [self.lowest_model]
        means = np.empty((len(models), x.shape[0]))
        uncs = np.empty_like(means)
        for i, model in enumerate(models):
            means[i], uncs[i] = model.predict_batch(x)
        return means, uncs

    def predict_mf_batch(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        means, uncs = self._component_stats(x)
        return means.sum(axis=0), np.sqrt((uncs ** 2).sum(axis=0))

    def predict_mf(self, x: np.ndarray) -> Prediction:
        m, u = self.predict_mf_batch(np.asarray(x, dtype=float)[None, :])
        return Prediction(float(m[0]), float(u[0]))

    def predict_level_batch(self, level: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Partial composite including the levels from ``level`` down."""
        if not 1 <= level <= self.n_levels:
            raise ValueError(f"level must be in [1, {self.n_levels}], got {level}")
        means, uncs = self._component_stats(x)
        sel = slice(level - 1, None)
        return means[sel].sum(axis=0), np.sqrt((uncs[sel] ** 2).sum(axis=0))

    def predict_level(self, level: int, x: np.ndarray) -> Prediction:
        m, u = self.predict_level_batch(level, np.asarray(x, dtype=float)[None, :])
        return Prediction(float(m[0]), float(u[0]))

    def component_uncertainties(self, x: np.ndarray) -> np.ndarray:
        """Per-component bands at one point, ordered (error_1, ...,
        error_{N-1}, lowest) to match the cost-ratio ordering."""
        _, uncs = self._component_stats(np.asarray(x, dtype=float)[None, :])
        return uncs[:, 0]


def check_nesting(training, tol: float = 1e-9):
    """Every point of a level must appear in the next-cheaper level."""
    for l in range(len(training) - 1):
        fine, coarse = training[l], training[l + 1]
        if fine.size == 0:
            continue
        if coarse.size == 0 or cdist(fine.points, coarse.points).min(axis=1).max() > tol:
            raise ValueError(
                f"nesting violated: level {l + 1} has points missing from level {l + 2}"
            )


def inter_level_errors(
    train_l: TrainingSet,
    lowest_model: RbfEnsemble | None,
    error_models: dict[int, RbfEnsemble],
    level: int,
    n_levels: int,
) -> TrainingSet:
    """Training set for the level's error surrogate: observed values
    minus the composite of the already-fitted cheaper levels.

    ``error_models`` must contain the error models for levels
    ``level+1 .. n_levels-1``; fitting must proceed bottom-up.
    """
    if train_l.size == 0:
        raise ValueError("cannot build inter-level errors from an empty training set")
    if lowest_model is None:
        raise RuntimeError("hierarchy must be fitted bottom-up: lowest model missing")
    missing = [l for l in range(level + 1, n_levels) if l not in error_models]
    if missing:
        raise RuntimeError(
            f"hierarchy must be fitted bottom-up: error models missing for levels {missing}"
        )
    composite = lowest_model.predict_batch(train_l.points)[0]
    for l in range(level + 1, n_levels):
        composite += error_models[l].predict_batch(train_l.points)[0]
    return TrainingSet(train_l.points, train_l.values - composite, train_l.duplicate_tol)


def fit_hierarchy(
    training,
    levels: FidelityLevels,
    prev_kstars: tuple[int, ...] | None = None,
    config: SrbfConfig = SrbfConfig(),
) -> MfSurrogate:
    """Fit the whole hierarchy bottom-up: the lowest-fidelity surrogate
    first, then each inter-level error surrogate from cheap to
    expensive.  ``prev_kstars`` constrains each surrogate's center
    search to the neighborhood of its previous choice."""
    training = tuple(training)
    n = levels.n_levels
    if len(training) != n:
        raise ValueError("one training set per level required")
    if training[-1].size < 3:
        raise ValueError("the lowest-fidelity training set needs at least 3 points")
    check_nesting(training)

    def prev(l):
        return None if prev_kstars is None else prev_kstars[l - 1]

    kstars = [0] * n
    kstars[n - 1] = select_num_centers(training[n - 1], prev(n), config)
    lowest = fit_ensemble(training[n - 1], kstars[n - 1], config)

    error_models: dict[int, RbfEnsemble] = {}
    for l in range(n - 1, 0, -1):
        err_set = inter_level_errors(training[l - 1], lowest, error_models, l, n)
        kstars[l - 1] = select_num_centers(err_set, prev(l), config)
        error_models[l] = fit_ensemble(err_set, kstars[l - 1], config)

    return MfSurrogate(
        levels=levels,
        training=training,
        lowest_model=lowest,
        error_models=tuple(error_models[l] for l in range(1, n)),
        kstars=tuple(kstars),
    )


def add_observation(
    model: MfSurrogate,
    ledger: BudgetLedger,
    x: np.ndarray,
    l_star: int,
    stack,
    config: SrbfConfig = SrbfConfig(),
) -> tuple[MfSurrogate, dict[int, float]]:
    """Observe a new point at ``l_star`` and at all cheaper levels,
    charge the ledger, and refit the hierarchy.

    All evaluations run before any state changes, so a failure at any
    level rolls the addition back completely.  Returns the refitted
    model and the observed values keyed by level.
    """
    n = model.n_levels
    if not 1 <= l_star <= n:
        raise ValueError(f"level must be in [1, {n}], got {l_star}")
    x = np.asarray(x, dtype=float).ravel()
    for l in range(l_star, n + 1):
        pts = model.training[l - 1].points
        if pts.shape[0] and cdist(x[None, :], pts).min() < config.duplicate_tol:
            raise ValueError(f"point duplicates an existing observation at level {l}")

    observed: dict[int, float] = {}
    for l in range(l_star, n + 1):
        try:
            observed[l] = stack.evaluate_normalized(l, x, ledger.counts[l - 1])
        except EvaluationError:
            raise
        except Exception as exc:  # pragma: no cover - defensive wrap
            raise EvaluationError(l, str(exc)) from exc

    new_training = tuple(
        t.append(x, observed[l]) if l >= l_star else t
        for l, t in enumerate(model.training, start=1)
    )
    new_model = fit_hierarchy(new_training, model.levels, model.kstars, config)
    ledger.add(l_star)
    return new_model, observed
