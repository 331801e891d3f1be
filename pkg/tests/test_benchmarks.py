"""Benchmark problem tests: known optima, noise statistics and
reproducibility, design and cost helpers."""

import math

import numpy as np
import pytest

from mfopt.benchmarks import (
    EvaluationError,
    FidelityStack,
    default_costs,
    initial_design,
    make_stack,
    rotation_matrix,
    scan_function_range,
)


def test_p1_known_optimum_value():
    stack = make_stack("P1", 1, 1, sigmas=[0.0])
    assert stack.evaluate(1, np.array([0.7572]), 0) == pytest.approx(-6.0207, abs=5e-4)


def test_p2_optimum_is_zero():
    stack = make_stack("P2", 2, 3, sigmas=[0.0, 0.0, 0.0])
    assert stack.evaluate(1, np.zeros(2), 0) == pytest.approx(0.0, abs=1e-12)
    # second level at the origin: product of cosines is 1
    assert stack.true_high_fidelity(np.zeros(2)) == pytest.approx(0.0, abs=1e-12)
    assert stack.functions[1](np.zeros((1, 2)))[0] == pytest.approx(0.0, abs=1e-12)


def test_p3_p4_optima_are_zero():
    p3 = make_stack("P3", 2, 1, sigmas=[0.0])
    assert p3.evaluate(1, np.ones(2), 0) == pytest.approx(0.0, abs=1e-12)
    p4 = make_stack("P4", 2, 1, sigmas=[0.0])
    assert p4.evaluate(1, np.full(2, 0.1), 0) == pytest.approx(0.0, abs=1e-12)


def test_p1_truth_at_origin():
    # independent evaluation of (6x-2)^2 sin(12x-4) at x = 0
    stack = make_stack("P1", 1, 1)
    expected = (6 * 0.0 - 2) ** 2 * math.sin(12 * 0.0 - 4)
    assert stack.true_high_fidelity(np.array([0.0])) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(3.02720998, abs=1e-8)


def test_p4_resolution_error_vanishes_at_full_resolution():
    # the coarseness parameter 10000 gives amplitude exactly zero, so
    # the second table function equals the first (noiselessly)
    stack = make_stack("P4", 2, 3, sigmas=[0.0, 0.0, 0.0])
    rng = np.random.default_rng(0)
    x = stack.to_physical(rng.random((5, 2)))
    assert np.allclose(stack.functions[1](x), stack.functions[0](x), atol=1e-12)


def test_function_range_p1_against_grid_scan():
    stack = make_stack("P1", 1, 1)
    xs = np.linspace(0.0, 1.0, 1001)[:, None]
    vals = (6 * xs[:, 0] - 2) ** 2 * np.sin(12 * xs[:, 0] - 4)
    assert stack.function_range_r1() == pytest.approx(vals.max() - vals.min(), rel=1e-12)


def test_function_range_constant_stub():
    stack = FidelityStack(
        functions=[lambda x: np.full(len(np.atleast_2d(x)), 3.0)],
        bounds=[[0.0, 1.0]],
        sigmas=[0.0],
        beta=[1.0],
    )
    assert stack.function_range_r1() == 0.0


def test_p3_range_divided_by_500():
    p3 = make_stack("P3", 2, 1)
    twin = FidelityStack(
        functions=p3.functions,
        bounds=p3.bounds,
        sigmas=p3.sigmas,
        beta=p3.beta,
    )  # same responses, divisor 1
    assert p3.function_range_r1() == pytest.approx(twin.function_range_r1() / 500.0, rel=1e-12)


def test_default_sigma_scaling():
    stack = make_stack("P1", 1, 3)
    r1 = stack.function_range_r1()
    assert stack.sigmas == pytest.approx((0.025 * r1, 0.05 * r1, 0.10 * r1), rel=1e-12)
    two = make_stack("P1", 1, 2)
    assert two.sigmas == pytest.approx((0.025 * r1, 0.10 * r1), rel=1e-12)
    assert np.all(np.diff(stack.sigmas) > 0)  # higher fidelity, less noise


def test_two_level_stack_uses_lowest_table_function():
    # levels for N=2 are the highest and lowest table functions
    three = make_stack("P1", 1, 3, sigmas=[0.0, 0.0, 0.0])
    two = make_stack("P1", 1, 2, sigmas=[0.0, 0.0])
    x = np.array([0.37])
    assert two.evaluate(2, x, 0) == pytest.approx(three.evaluate(3, x, 0), rel=1e-12)


def test_initial_design_layout():
    assert np.allclose(initial_design(1), [[0.5], [0.0], [1.0]])
    assert np.allclose(
        initial_design(2),
        [[0.5, 0.5], [0.0, 0.5], [1.0, 0.5], [0.5, 0.0], [0.5, 1.0]],
    )
    assert initial_design(10).shape == (21, 10)


def test_rotation_matrix_properties():
    r2 = rotation_matrix(2, 0.2)
    c, s = np.cos(0.2), np.sin(0.2)
    assert np.allclose(r2, [[c, -s], [s, c]], atol=1e-15)
    for d in (2, 3, 7):
        r = rotation_matrix(d, 0.2)
        assert np.abs(r.T @ r - np.eye(d)).max() <= 1e-12
    assert np.allclose(rotation_matrix(3, 0.0), np.eye(3))
    assert np.allclose(rotation_matrix(1), np.eye(1))


def test_default_costs_table():
    assert default_costs(3) == (1.0, 0.2, 0.1)
    assert default_costs(2) == (1.0, 0.1)
    assert default_costs(1) == (1.0,)
    with pytest.raises(ValueError):
        default_costs(4)


def test_make_stack_validation():
    with pytest.raises(ValueError):
        make_stack("P9", 1, 1)
    with pytest.raises(ValueError):
        make_stack("P1", 2, 1)
    with pytest.raises(ValueError):
        make_stack("P1", 1, 4)
    with pytest.raises(ValueError):
        make_stack("P4", 2, 4)  # needs explicit sigmas for four levels
    four = make_stack("P4", 2, 4, sigmas=[0.1, 0.2, 0.3, 0.4], beta=[1, 0.3, 0.2, 0.1])
    assert four.n_levels == 4


def test_p4_noiseless_high_fidelity_switch():
    stack = make_stack("P4", 2, 3, p4_noiseless_hf=True)
    assert stack.sigmas[0] == 0.0 and stack.sigmas[1] > 0.0


def test_out_of_domain_rejected():
    stack = make_stack("P2", 2, 1)
    with pytest.raises(ValueError):
        stack.evaluate(1, np.array([9.0, 0.0]), 0)
    with pytest.raises(ValueError):
        stack.true_high_fidelity(np.array([0.0, -7.0]))
    with pytest.raises(ValueError):
        stack.evaluate(2, np.zeros(2), 0)  # level out of range


def test_noise_reproducible_and_independent():
    stack = make_stack("P1", 1, 3, seed=11)
    x = np.array([0.3])
    a = stack.evaluate(2, x, 5)
    b = stack.evaluate(2, x, 5)
    assert a == b
    assert stack.evaluate(2, x, 6) != a
    assert stack.evaluate(3, x, 5) != a
    other_seed = make_stack("P1", 1, 3, seed=12)
    assert other_seed.evaluate(2, x, 5) != a


def test_noise_lag1_autocorrelation_small():
    stack = make_stack("P1", 1, 1, seed=4)
    draws = np.array([stack.noise_draw(1, i) for i in range(10_000)])
    a, b = draws[:-1], draws[1:]
    rho = np.corrcoef(a, b)[0, 1]
    assert abs(rho) < 0.05


@pytest.mark.parametrize("level", [1, 2, 3])
def test_noise_moments(level):
    # 10^4 draws: mean within 3 sigma / 100 of the truth, standard
    # deviation within 5% of the configured level
    stack = make_stack("P1", 1, 3, seed=1)
    x = np.array([0.45])
    truth = stack.true_high_fidelity(x) if level == 1 else float(
        stack.functions[level - 1](x[None, :])[0]
    )
    vals = np.array([stack.evaluate(level, x, i) for i in range(10_000)])
    sigma = stack.sigmas[level - 1]
    assert abs(vals.mean() - truth) <= 3.0 * sigma / 100.0
    assert abs(vals.std(ddof=1) - sigma) <= 0.05 * sigma


def test_grid_argmin_matches_reference_2d():
    # dense-grid argmin of the noiseless high fidelity lands on the
    # listed optimum for the two-dimensional problems
    for problem, x_check in (("P2", np.zeros(2)), ("P3", np.ones(2)), ("P4", np.full(2, 0.1))):
        stack = make_stack(problem, 2, 1)
        axis = np.linspace(0.0, 1.0, 401)
        g1, g2 = np.meshgrid(axis, axis, indexing="ij")
        pts = stack.to_physical(np.column_stack([g1.ravel(), g2.ravel()]))
        vals = stack.functions[0](pts)
        best = pts[np.argmin(vals)]
        span = stack.bounds[:, 1] - stack.bounds[:, 0]
        assert np.all(np.abs(best - x_check) <= span / 400 + 1e-12), problem


def test_normalization_round_trip():
    stack = make_stack("P2", 2, 1)
    u = np.array([0.25, 0.75])
    assert np.allclose(stack.to_normalized(stack.to_physical(u)), u, atol=1e-14)


def test_reference_optimum_normalized():
    stack = make_stack("P3", 2, 1)
    x_norm, f_check = stack.reference_optimum_normalized()
    assert np.allclose(x_norm, [0.75, 0.75])
    assert f_check == pytest.approx(0.0, abs=1e-12)
