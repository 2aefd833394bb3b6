import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from priorlasso.constraints import evaluate, is_feasible, parse_constraints
from priorlasso.data import Dataset
from priorlasso.errors import InfeasibleConstraints
from priorlasso.estimator import FitSpec, fit_constrained, fit_penalized, sparsify
from priorlasso.oracle import GridSpec, brute_force_fit, polish, refined_grid_fit, soft_threshold

from conftest import make_data

RAW = FitSpec(intercept=False, standardize=False)


def identity_data():
    return Dataset([3.0, 1.0], np.eye(2))


def test_orthonormal_budget_example():
    fit = fit_constrained(identity_data(), None, RAW.with_s(2.0))
    np.testing.assert_allclose(fit.beta, [2.0, 0.0], atol=1e-12)
    assert fit.zero_set == (1,)
    ref, _ = brute_force_fit(np.eye(2), [3.0, 1.0], None, 2.0, GridSpec((0, 0), (3, 3), 1e-3))
    np.testing.assert_allclose(fit.beta, ref, atol=1e-3)


def test_orthonormal_budget_with_upper_bound():
    cs = parse_constraints("lin: 1 0 <= 1.5", 2)
    fit = fit_constrained(identity_data(), cs, RAW.with_s(2.0))
    np.testing.assert_allclose(fit.beta, [1.5, 0.5], atol=1e-12)
    grid, _ = refined_grid_fit(np.eye(2), [3.0, 1.0], cs, 2.0, (0, 0), (3, 3))
    pol, _ = polish(np.eye(2), [3.0, 1.0], cs, 2.0, grid)
    np.testing.assert_allclose(fit.beta, pol, atol=1e-6)
    assert fit.active_constraints == (0,)


def test_slack_budget_is_ols():
    for seed in range(5):
        data = make_data(seed)
        fit = fit_constrained(data, None, FitSpec(s=1e9))
        X1 = np.hstack([np.ones((data.n, 1)), data.X])
        ols = np.linalg.lstsq(X1, data.y, rcond=None)[0]
        np.testing.assert_allclose(fit.beta, ols[1:], atol=1e-8)
        assert fit.intercept == pytest.approx(ols[0], abs=1e-8)


def test_penalized_without_penalty_is_ols():
    data = make_data(1)
    fit = fit_penalized(data, None, 0.0)
    ols = fit_constrained(data, None, FitSpec())
    np.testing.assert_allclose(fit.beta, ols.beta, atol=1e-8)


def test_penalized_orthonormal_example():
    fit = fit_penalized(identity_data(), None, 2.0, spec=RAW)
    np.testing.assert_allclose(fit.beta, soft_threshold([3.0, 1.0], 2.0), atol=1e-12)
    np.testing.assert_allclose(fit.beta, [2.0, 0.0], atol=1e-12)


def test_penalized_reproduces_budget_fit_at_its_multiplier():
    for seed in range(10):
        data = make_data(seed, p=5)
        cs = parse_constraints("lin: 1 0 0 0 0 >= 0\nlin: 0 1 -1 0 0 <= 0.5", 5)
        spec = FitSpec(standardize=False)
        ref = fit_constrained(data, cs, spec)
        fit = fit_constrained(data, cs, spec.with_s(0.5 * ref.l1_norm))
        lam = fit.solver_info["budget_multiplier"]
        assert lam > 0
        pen = fit_penalized(data, cs, lam, spec=spec)
        np.testing.assert_allclose(pen.beta, fit.beta, atol=1e-6)


def test_soft_constraints_via_lambda2():
    # a large multiplier on b1 <= 0 pushes b1 down; zero multiplier ignores the row
    data = Dataset([3.0, 1.0], np.eye(2))
    cs = parse_constraints("lin: 1 0 <= 0", 2)
    free = fit_penalized(data, cs, 0.0, [0.0], spec=RAW)
    np.testing.assert_allclose(free.beta, [3.0, 1.0], atol=1e-10)
    pushed = fit_penalized(data, cs, 0.0, [2.0], spec=RAW)
    np.testing.assert_allclose(pushed.beta, [2.0, 1.0], atol=1e-10)
    with pytest.raises(ValueError):
        fit_penalized(data, cs, 0.0, [1.0, 2.0], spec=RAW)


def test_weighted_budget():
    spec = FitSpec(s=2.0, weights=[2.0, 1.0], intercept=False, standardize=False)
    fit = fit_constrained(identity_data(), None, spec)
    assert fit.l1_norm == pytest.approx(2.0)
    # (3-b1)^2 + (1-b2)^2 with 2|b1| + |b2| <= 2: multiplier 2 gives b = (1, 0)
    np.testing.assert_allclose(fit.beta, [1.0, 0.0], atol=1e-10)
    ref, _ = brute_force_fit(np.eye(2), [3.0, 1.0], None, 2.0, GridSpec((0, 0), (2, 2), 1e-3), [2.0, 1.0])
    np.testing.assert_allclose(fit.beta, ref, atol=1e-3)


@pytest.mark.parametrize("beta, tol, out, zeros", [
    ([1e-9, 2.0], 1e-6, [0.0, 2.0], (0,)),
    ([0.0, 0.0], 0.3, [0.0, 0.0], (0, 1)),
    ([1e-300, -1.0, 0.0], 0.0, [1e-300, -1.0, 0.0], (2,)),
])
def test_sparsify(beta, tol, out, zeros):
    b, z = sparsify(np.array(beta), tol)
    np.testing.assert_array_equal(b, out)
    assert tuple(z) == zeros


def test_infeasible_region_detected():
    cs = parse_constraints("lin: 1 0 >= 1", 2)
    with pytest.raises(InfeasibleConstraints):
        fit_constrained(identity_data(), cs, RAW.with_s(0.5))
    cs = parse_constraints("lin: 1 0 >= 1\nlin: 1 0 <= 0", 2)
    with pytest.raises(InfeasibleConstraints):
        fit_constrained(identity_data(), cs, RAW)


def test_standardize_round_trip():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((30, 4)) * np.array([1.0, 10.0, 0.1, 3.0])
        data = Dataset(X @ rng.normal(0, 1, 4) + rng.standard_normal(30), X)
        s = float(rng.uniform(0.1, 2.0))
        a = fit_constrained(data, None, FitSpec(s=s, standardize=True))
        b = fit_constrained(data, None, FitSpec(s=s, standardize=False))
        np.testing.assert_allclose(a.beta, b.beta, atol=1e-8)


def test_budget_monotonicity():
    data = make_data(4, p=5)
    cs = parse_constraints("lin: 1 0 0 0 0 >= 0\nlin: 0 0 1 0 0 <= 0", 5)
    rss = [fit_constrained(data, cs, FitSpec(s=s)).objective for s in np.linspace(0, 6, 25)]
    assert all(b <= a + 1e-9 for a, b in zip(rss, rss[1:]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.0, 5.0))
def test_result_invariants(seed, s):
    data = make_data(seed, n=25, p=4)
    cs = parse_constraints("lin: 1 1 0 0 <= 1\nlin: 0 0 1 0 >= 0\nlin: 0 1 0 -1 = 0", 4)
    fit = fit_constrained(data, cs, FitSpec(s=s))
    assert fit.l1_norm <= s + 1e-9 * max(1.0, s)
    assert is_feasible(cs, fit.beta, 1e-9)
    assert all(fit.beta[j] == 0.0 for j in fit.zero_set)


def test_intercept_addressed_by_constraint_file():
    data = make_data(2, p=2)
    cs = parse_constraints("lin: 1 0 0 <= 0", 3)
    fit = fit_constrained(data, cs, FitSpec())
    assert fit.intercept <= 1e-9
    np.testing.assert_allclose(fit.constraint_point, np.concatenate([[fit.intercept], fit.beta]))
    # the intercept stays outside the budget
    tight = fit_constrained(data, cs, FitSpec(s=0.0))
    np.testing.assert_array_equal(tight.beta, [0.0, 0.0])
    assert tight.intercept == pytest.approx(min(0.0, float(np.mean(data.y))), abs=1e-9)


def test_negdet_fit_matches_grid_oracle():
    rng = np.random.default_rng(9)
    for _ in range(3):
        X = rng.standard_normal((20, 3))
        y = X @ np.array([-1.0, -0.5, 0.9]) + 0.2 * rng.standard_normal(20)
        cs = parse_constraints("nl: negdet 1 2 3", 3)
        spec = FitSpec(s=2.0, intercept=False, standardize=False, mc_draws=2000)
        fit = fit_constrained(Dataset(y, X), cs, spec)
        assert is_feasible(cs, fit.beta, 1e-9)
        _, val = brute_force_fit(X, y, cs, 2.0, GridSpec((-2, -2, -1.5), (0, 0, 1.5), 0.02))
        assert fit.objective <= val + 1e-9
        assert np.max(evaluate(cs, fit.beta)) <= 1e-9


def test_concavity_example_region():
    rng = np.random.default_rng(3)
    x2, x3 = rng.uniform(0.5, 3.0, (2, 80))
    X = np.column_stack([x2, x3, x2 ** 2, x3 ** 2, 2 * x2 * x3])
    y = 1 + X @ [2.0, 1.5, -1.0, -0.5, 0.9] + 0.3 * rng.standard_normal(80)
    cs = parse_constraints("nl: negdet 4 5 6", 6)
    with pytest.warns(UserWarning):
        fit = fit_constrained(Dataset(y, X), cs, FitSpec())
    b = fit.constraint_point
    assert b[3] <= 1e-12 and b[4] <= 1e-12
    assert b[3] * b[4] - b[5] ** 2 >= -1e-9
    assert fit.solver_info["linearization_rounds"] >= 1
