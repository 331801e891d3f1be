"""Campaign loop tests: acquisition arithmetic, fidelity selection,
stopping rules, and whole-campaign behavior on stub objectives."""

import numpy as np
import pytest

from mfopt.active_learning import (
    AcquisitionConfig,
    CampaignConfig,
    acquisition,
    fidelity_selection_vector,
    penalty,
    propose_point,
    run_campaign,
    select_fidelity,
    should_stop,
)
from mfopt.benchmarks import EvaluationError, make_stack, initial_design
from mfopt.multifidelity import BudgetLedger, FidelityLevels
from mfopt.pso import PsoConfig, unit_box
from mfopt.srbf import Prediction


class StubModel:
    """Duck-typed surrogate with analytic mean/uncertainty fields."""

    def __init__(self, mean_fn, unc_fn, component_uncs=None, dim=1):
        self.mean_fn = mean_fn
        self.unc_fn = unc_fn
        self._component_uncs = component_uncs
        self.dim = dim

    def predict_mf_batch(self, x):
        x = np.atleast_2d(x)
        return self.mean_fn(x), self.unc_fn(x)

    def predict_mf(self, x):
        m, u = self.predict_mf_batch(np.asarray(x)[None, :])
        return Prediction(float(m[0]), float(u[0]))

    def component_uncertainties(self, x):
        return np.asarray(self._component_uncs, dtype=float)


# ---------------------------------------------------------------------------
# penalty and acquisition


def test_penalty_exact_values():
    cfg = AcquisitionConfig()
    pts = np.array([[0.0]])
    assert penalty(np.array([0.0]), pts, cfg) == 10.0
    assert penalty(np.array([5.0e-3]), pts, cfg) == 0.0
    assert penalty(np.array([2.5e-3]), pts, cfg) == 5.0
    assert penalty(np.array([0.9]), pts, cfg) == 0.0


def test_acquisition_is_lcb_plus_penalty():
    model = StubModel(
        mean_fn=lambda x: np.full(len(x), 2.0),
        unc_fn=lambda x: np.full(len(x), 0.5),
    )
    pts = np.array([[0.0]])
    cfg = AcquisitionConfig()
    far = acquisition(model, np.array([0.5]), pts, cfg)
    assert far == pytest.approx(1.5, abs=1e-15)
    on_top = acquisition(model, np.array([0.0]), pts, cfg)
    assert on_top == pytest.approx(11.5, abs=1e-15)
    zero_unc = StubModel(lambda x: np.full(len(x), 2.0), lambda x: np.zeros(len(x)))
    assert acquisition(zero_unc, np.array([0.5]), pts, cfg) == pytest.approx(2.0)


def test_acquisition_equals_lcb_outside_penalty_balls():
    rng = np.random.default_rng(0)
    model = StubModel(
        mean_fn=lambda x: np.sin(5 * x[:, 0]),
        unc_fn=lambda x: 0.1 + 0.2 * x[:, 0],
    )
    pts = rng.random((6, 1))
    cfg = AcquisitionConfig()
    for _ in range(50):
        x = rng.random(1)
        d = np.abs(pts[:, 0] - x[0]).min()
        if d >= cfg.d0:
            pred = model.predict_mf(x)
            assert acquisition(model, x, pts, cfg) == pytest.approx(
                pred.mean - pred.uncertainty, abs=1e-15
            )


# ---------------------------------------------------------------------------
# proposals


def test_propose_point_finds_quadratic_minimum():
    model = StubModel(
        mean_fn=lambda x: ((x - 0.62) ** 2).sum(axis=1),
        unc_fn=lambda x: np.zeros(len(x)),
        dim=2,
    )
    far_points = np.array([[0.05, 0.05]])
    x = propose_point(model, far_points, AcquisitionConfig(), PsoConfig(box=unit_box(2)))
    assert np.linalg.norm(x - 0.62) <= 1e-3


def test_propose_point_exploration_only():
    # flat mean, uncertainty peaked away from the single sample
    model = StubModel(
        mean_fn=lambda x: np.zeros(len(x)),
        unc_fn=lambda x: np.exp(-80.0 * (x[:, 0] - 0.8) ** 2),
    )
    x = propose_point(model, np.array([[0.1]]), AcquisitionConfig(), PsoConfig(box=unit_box(1)))
    assert abs(x[0] - 0.8) <= 1e-3


def test_propose_point_penalty_breaks_ties():
    # two equal dips; one sits on an existing sample and gets penalized
    def mean(x):
        u = x[:, 0]
        return -np.exp(-5000 * (u - 0.3) ** 2) - np.exp(-5000 * (u - 0.7) ** 2)

    model = StubModel(mean_fn=mean, unc_fn=lambda x: np.zeros(len(x)))
    x = propose_point(model, np.array([[0.3]]), AcquisitionConfig(),
                      PsoConfig(box=unit_box(1)))
    assert abs(x[0] - 0.7) <= 1e-3


# ---------------------------------------------------------------------------
# fidelity selection


def test_fidelity_selection_vector_worked_examples():
    phi = fidelity_selection_vector([0.1, 0.1, 0.1], [1.0, 0.2, 0.1])
    assert phi.tolist() == [0.1, 0.5, 1.0]
    model = StubModel(None, None, component_uncs=[0.1, 0.1, 0.1])
    assert select_fidelity(model, np.array([0.5]), FidelityLevels(beta=(1.0, 0.2, 0.1))) == 3

    phi2 = fidelity_selection_vector([0.5, 0.05, 0.01], [1.0, 0.2, 0.1])
    assert np.allclose(phi2, [0.5, 0.25, 0.1], rtol=1e-15)
    model2 = StubModel(None, None, component_uncs=[0.5, 0.05, 0.01])
    assert select_fidelity(model2, np.array([0.5]), FidelityLevels(beta=(1.0, 0.2, 0.1))) == 1


def test_fidelity_selection_single_level():
    model = StubModel(None, None, component_uncs=[0.42])
    assert select_fidelity(model, np.array([0.5]), FidelityLevels(beta=(1.0,))) == 1


def test_fidelity_selection_tie_goes_to_cheapest():
    model = StubModel(None, None, component_uncs=[0.2, 0.2, 0.1])
    # phi = (0.2, 1.0, 1.0): levels 2 and 3 tie, pick 3
    assert select_fidelity(model, np.array([0.5]), FidelityLevels(beta=(1.0, 0.2, 0.1))) == 3


def test_cost_scaling_invariance():
    # scaling all absolute costs leaves the ratios, hence the argmax
    lv1 = FidelityLevels.from_costs([100.0, 20.0, 10.0])
    lv2 = FidelityLevels.from_costs([700.0, 140.0, 70.0])
    assert lv1.beta == lv2.beta
    model = StubModel(None, None, component_uncs=[0.3, 0.11, 0.04])
    x = np.array([0.5])
    assert select_fidelity(model, x, lv1) == select_fidelity(model, x, lv2)


# ---------------------------------------------------------------------------
# stopping


def test_should_stop_cases():
    cfg = CampaignConfig()
    ledger = BudgetLedger(beta=(1.0,), budget=45.0, counts=[45])
    assert should_stop(ledger, 45.0, 0, cfg) == (True, "budget")
    ledger2 = BudgetLedger(beta=(1.0, 0.1), budget=45.0, counts=[40, 49])
    assert should_stop(ledger2, 45.0, 0, cfg) == (False, None)
    assert should_stop(ledger2, 45.0, cfg.stagnation_patience, cfg) == (True, "stagnation")
    assert should_stop(ledger2, 45.0, 0, cfg, evaluation_failed=True) == (
        True,
        "evaluation-failure",
    )


# ---------------------------------------------------------------------------
# whole campaigns


def test_campaign_with_budget_equal_to_seed_cost():
    stack = make_stack("P1", 1, 1, seed=0)
    init = initial_design(1)
    rec = run_campaign(stack, init, budget=3.0)
    assert [r.index for r in rec.rows] == [0, 0, 0]
    assert rec.cc == 3.0
    assert rec.termination_reason == "budget"
    assert rec.final_x_star is not None


def test_campaign_budget_too_small():
    stack = make_stack("P1", 1, 1, seed=0)
    with pytest.raises(ValueError):
        run_campaign(stack, initial_design(1), budget=2.0)


def test_campaign_single_fidelity_counts_budget_exactly():
    stack = make_stack("P1", 1, 1, seed=1)
    rec = run_campaign(stack, initial_design(1), budget=8.0)
    assert rec.counts == (8,)
    assert rec.cc == 8.0
    assert rec.termination_reason == "budget"
    # cost grows by exactly one per iteration and never repeats a point
    ccs = [r.cc_after for r in rec.rows]
    assert all(b > a for a, b in zip(ccs, ccs[1:]))


def test_campaign_monotone_cost_increments():
    stack = make_stack("P1", 1, 3, seed=2)
    rec = run_campaign(stack, initial_design(1), budget=6.0)
    beta = np.array(rec.beta)
    for prev, row in zip(rec.rows, rec.rows[1:]):
        if row.index == 0:
            continue
        expected = beta[row.level - 1:].sum()
        assert row.cc_after - prev.cc_after == pytest.approx(expected, abs=1e-12)


def test_campaign_reproducible():
    stack1 = make_stack("P1", 1, 2, seed=7)
    stack2 = make_stack("P1", 1, 2, seed=7)
    r1 = run_campaign(stack1, initial_design(1), budget=5.0)
    r2 = run_campaign(stack2, initial_design(1), budget=5.0)
    assert r1.cc == r2.cc and r1.counts == r2.counts
    assert np.array_equal(r1.final_x_star, r2.final_x_star)
    assert r1.final_surrogate_min == r2.final_surrogate_min
    for a, b in zip(r1.rows, r2.rows):
        assert np.array_equal(a.x, b.x) and a.level == b.level and a.observed == b.observed


def test_campaign_stagnation_on_constant_objective():
    # a constant noiseless objective gives the learner nothing to do:
    # proposals collapse onto sampled neighborhoods and the patience
    # rule fires before the budget is spent
    class FlatStack:
        problem = "flat"
        seed = 0
        beta = (1.0, 0.1)
        dim = 1

        n_levels = 2

        def evaluate_normalized(self, level, u, eval_index):
            return 1.0

    rec = run_campaign(
        FlatStack(),
        initial_design(1),
        budget=500.0,
        campaign_config=CampaignConfig(stagnation_patience=5),
    )
    assert rec.termination_reason == "stagnation"
    assert rec.cc < 500.0


def test_campaign_evaluation_failure_preserves_record():
    class FragileStack:
        problem = "fragile"
        seed = 0
        beta = (1.0,)
        dim = 1
        n_levels = 1

        def __init__(self):
            self.calls = 0

        def evaluate_normalized(self, level, u, eval_index):
            self.calls += 1
            if self.calls > 6:
                raise EvaluationError(level, "solver crashed")
            return float(np.sin(u[0]))

    rec = run_campaign(FragileStack(), initial_design(1), budget=50.0)
    assert rec.termination_reason == "evaluation-failure"
    assert len(rec.rows) >= 3
    assert rec.final_x_star is not None


def test_campaign_n1_proposals_avoid_existing_points():
    stack = make_stack("P1", 1, 1, seed=3)
    rec = run_campaign(stack, initial_design(1), budget=10.0)
    pts = np.array([row.x[0] for row in rec.rows])
    d = np.abs(pts[:, None] - pts[None, :])
    np.fill_diagonal(d, np.inf)
    assert d.min() > 1e-12


def test_campaign_final_from_last_proposal_switch():
    stack = make_stack("P1", 1, 1, seed=4)
    rec = run_campaign(
        stack,
        initial_design(1),
        budget=6.0,
        campaign_config=CampaignConfig(final_from_last_proposal=True),
    )
    last_adaptive = [r for r in rec.rows if r.index > 0][-1]
    assert np.array_equal(rec.final_x_star, last_adaptive.x)


def test_acquisition_config_validation():
    with pytest.raises(ValueError):
        AcquisitionConfig(d0=0.0)
    with pytest.raises(ValueError):
        AcquisitionConfig(eps_pen=-1.0)
    with pytest.raises(ValueError):
        AcquisitionConfig(lcb_weights=(-1.0, 1.0))
    with pytest.raises(ValueError):
        CampaignConfig(stagnation_patience=0)
