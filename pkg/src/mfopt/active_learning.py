"""Active-learning campaign loop.

Each iteration proposes the next design point by minimizing a penalized
lower-confidence-bound acquisition over the unit cube, picks the
fidelity with the best uncertainty-to-cost ratio at that point, adds
the observation (and its nested cheaper-level twins), and refits.  The
loop runs until the evaluation budget is spent, proposals stagnate on
already-sampled neighborhoods, or an evaluation fails.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from . import pso
from .benchmarks import EvaluationError
from .multifidelity import (
    BudgetLedger,
    FidelityLevels,
    MfSurrogate,
    add_observation,
    fit_hierarchy,
)
from .srbf import SrbfConfig, TrainingSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AcquisitionConfig:
    """Penalized lower-confidence-bound settings."""

    d0: float = 5.0e-3          # minimum acceptable distance to existing samples
    eps_pen: float = 1.0e-1     # penalty steepness: value at zero distance is 1/eps_pen
    lcb_weights: tuple[float, float] = (1.0, 1.0)  # (mean, uncertainty)

    def __post_init__(self):
        if self.d0 <= 0 or self.eps_pen <= 0:
            raise ValueError("d0 and eps_pen must be positive")
        if any(w < 0 for w in self.lcb_weights):
            raise ValueError("LCB weights must be non-negative")


@dataclass(frozen=True)
class CampaignConfig:
    stagnation_patience: int = 5
    duplicate_tol: float = 1e-12
    final_from_last_proposal: bool = False

    def __post_init__(self):
        if self.stagnation_patience < 1:
            raise ValueError("stagnation_patience must be >= 1")


@dataclass
class IterationRow:
    """One history entry: a design point, where it was evaluated, and
    the state of the ledger and surrogates afterwards.  Seed-design
    rows use index 0 and carry no center counts."""

    index: int
    x: np.ndarray
    level: int
    observed: dict[int, float]
    cc_after: float
    kstars: tuple[int, ...] | None = None


@dataclass
class CampaignRecord:
    problem: str
    dim: int
    n_levels: int
    seed: int
    budget: float
    beta: tuple[float, ...]
    rows: list[IterationRow] = field(default_factory=list)
    final_x_star: np.ndarray | None = None
    final_surrogate_min: float | None = None
    termination_reason: str = ""
    counts: tuple[int, ...] = ()
    cc: float = 0.0
    model: MfSurrogate | None = None


def penalty(x: np.ndarray, all_points: np.ndarray, config: AcquisitionConfig) -> float:
    """Distance penalty discouraging re-sampling: a linear ramp from
    1/eps at an existing point down to zero at distance d0."""
    x = np.asarray(x, dtype=float).ravel()
    d = float(np.linalg.norm(np.atleast_2d(all_points) - x, axis=1).min())
    if d < config.d0:
        return (1.0 / config.eps_pen) * (config.d0 - d) / config.d0
    return 0.0


def _penalty_batch(dists: np.ndarray, config: AcquisitionConfig) -> np.ndarray:
    p = (1.0 / config.eps_pen) * (config.d0 - dists) / config.d0
    return np.where(dists < config.d0, p, 0.0)


def acquisition(
    model: MfSurrogate,
    x: np.ndarray,
    all_points: np.ndarray,
    config: AcquisitionConfig = AcquisitionConfig(),
) -> float:
    """Penalized LCB: weighted mean minus weighted uncertainty plus the
    distance penalty."""
    pred = model.predict_mf(x)
    w_f, w_u = config.lcb_weights
    return w_f * pred.mean - w_u * pred.uncertainty + penalty(x, all_points, config)


def propose_point(
    model: MfSurrogate,
    all_points: np.ndarray,
    config: AcquisitionConfig,
    pso_config: pso.PsoConfig,
) -> np.ndarray:
    """Deterministic PSO minimizer of the acquisition over the unit cube."""
    tree = cKDTree(np.atleast_2d(all_points))
    w_f, w_u = config.lcb_weights

    def objective(pts: np.ndarray) -> np.ndarray:
        means, uncs = model.predict_mf_batch(pts)
        dists, _ = tree.query(pts)
        return w_f * means - w_u * uncs + _penalty_batch(dists, config)

    x_best, _ = pso.minimize(objective, pso_config)
    return x_best


def fidelity_selection_vector(component_uncertainties, beta) -> np.ndarray:
    """Benefit-cost ratios, one per level: the uncertainty contributed
    by each level's surrogate divided by that level's cost ratio."""
    u = np.asarray(component_uncertainties, dtype=float)
    b = np.asarray(beta, dtype=float)
    if u.shape != b.shape:
        raise ValueError("need one uncertainty per cost ratio")
    return u / b


def select_fidelity(model: MfSurrogate, x_star: np.ndarray, levels: FidelityLevels) -> int:
    """Level with the largest benefit-cost ratio at the proposed point;
    ties go to the cheaper level."""
    phi = fidelity_selection_vector(model.component_uncertainties(x_star), levels.beta)
    return levels.n_levels - int(np.argmax(phi[::-1]))


def should_stop(
    ledger: BudgetLedger,
    budget: float,
    stagnation_counter: int,
    config: CampaignConfig,
    evaluation_failed: bool = False,
) -> tuple[bool, str | None]:
    if evaluation_failed:
        return True, "evaluation-failure"
    if ledger.cc >= budget:
        return True, "budget"
    if stagnation_counter >= config.stagnation_patience:
        return True, "stagnation"
    return False, None


def run_campaign(
    stack,
    initial_points: np.ndarray,
    budget: float,
    srbf_config: SrbfConfig = SrbfConfig(),
    acq_config: AcquisitionConfig = AcquisitionConfig(),
    pso_config: pso.PsoConfig | None = None,
    campaign_config: CampaignConfig = CampaignConfig(),
    on_row=None,
) -> CampaignRecord:
    """Run one full active-learning campaign.

    Seeds every fidelity level at the initial design, then loops
    propose / select fidelity / observe / refit while the spent cost is
    below the budget (the last addition may overshoot by at most the
    cost of one full nested evaluation).  Afterwards the surrogate mean
    alone is minimized to report the predicted optimum.  ``on_row``
    receives each history row as soon as it exists, so partial runs
    remain inspectable.
    """
    levels = FidelityLevels(beta=tuple(stack.beta))
    n = levels.n_levels
    dim = stack.dim
    initial_points = np.atleast_2d(np.asarray(initial_points, dtype=float))
    if pso_config is None:
        pso_config = pso.PsoConfig(box=pso.unit_box(dim))

    ledger = BudgetLedger(beta=levels.beta, budget=budget)
    seed_cost = initial_points.shape[0] * ledger.addition_cost(1)
    if budget < seed_cost:
        raise ValueError(
            f"budget {budget} cannot cover the initial design (cost {seed_cost})"
        )

    record = CampaignRecord(
        problem=getattr(stack, "problem", "custom"),
        dim=dim,
        n_levels=n,
        seed=getattr(stack, "seed", 0),
        budget=budget,
        beta=levels.beta,
    )

    def emit(row: IterationRow):
        record.rows.append(row)
        if on_row is not None:
            on_row(row)

    # seed: every level observes every initial point
    values = [[] for _ in range(n)]
    for j, u in enumerate(initial_points):
        observed = {}
        for l in range(1, n + 1):
            try:
                val = stack.evaluate_normalized(l, u, ledger.counts[l - 1])
            except EvaluationError as exc:
                record.termination_reason = "evaluation-failure"
                logger.error("seed evaluation failed: %s", exc)
                raise
            values[l - 1].append(val)
            observed[l] = val
        ledger.add(1)
        emit(IterationRow(index=0, x=u.copy(), level=1, observed=observed,
                          cc_after=ledger.cc))

    training = tuple(
        TrainingSet(initial_points, np.array(vals), srbf_config.duplicate_tol)
        for vals in values
    )
    model = fit_hierarchy(training, levels, None, srbf_config)

    stagnation = 0
    iteration = 0
    reason = None
    last_proposal = None
    while True:
        stop, reason = should_stop(ledger, budget, stagnation, campaign_config)
        if stop:
            break
        iteration += 1
        x = propose_point(model, model.all_points(), acq_config, pso_config)
        last_proposal = x
        l_star = select_fidelity(model, x, levels)

        same_level_pts = model.training[l_star - 1].points
        d_same = float(np.linalg.norm(same_level_pts - x, axis=1).min())
        stagnation = stagnation + 1 if d_same < acq_config.d0 else 0

        d_union = float(np.linalg.norm(model.all_points() - x, axis=1).min())
        if d_union < campaign_config.duplicate_tol:
            logger.info(
                "iteration %d: proposal coincides with an existing point; skipped",
                iteration,
            )
            continue

        try:
            model, observed = add_observation(model, ledger, x, l_star, stack, srbf_config)
        except EvaluationError as exc:
            logger.error("iteration %d: %s", iteration, exc)
            reason = "evaluation-failure"
            break
        emit(IterationRow(index=iteration, x=x.copy(), level=l_star,
                          observed=observed, cc_after=ledger.cc, kstars=model.kstars))

    # predicted optimum: minimize the surrogate mean alone; this single
    # run decides the reported design, so use a larger swarm than the
    # per-iteration acquisition searches
    if campaign_config.final_from_last_proposal and last_proposal is not None:
        x_star = last_proposal
        f_star = float(model.predict_mf_batch(x_star[None, :])[0][0])
    else:
        final_pso = replace(
            pso_config,
            n_particles=max(8 * pso_config.swarm_size, 32),
            stall_patience=None
            if pso_config.stall_patience is None
            else max(50, pso_config.stall_patience),
        )
        x_star, f_star = pso.minimize(
            lambda pts: model.predict_mf_batch(pts)[0], final_pso
        )

    record.final_x_star = x_star
    record.final_surrogate_min = float(f_star)
    record.termination_reason = reason or "budget"
    record.counts = tuple(ledger.counts)
    record.cc = ledger.cc
    record.model = model
    return record
