from dataclasses import replace

import numpy as np
import pytest

from priorlasso.constraints import parse_constraints
from priorlasso.data import Dataset
from priorlasso.estimator import FitResult, FitSpec, fit_constrained
from priorlasso.inference import (BootstrapMode, bootstrap_se, degrees_of_freedom, replicate_rows,
                                  summarize)
from priorlasso.oracle import ols_standard_errors

from conftest import make_data


def fixed_fit(beta):
    beta = np.asarray(beta, dtype=float)
    zeros = tuple(int(j) for j in np.flatnonzero(beta == 0))
    return FitResult(beta, 0.0, float(np.abs(beta).sum()), 0.0, (), zeros)


def test_df_counts_nonzeros():
    assert degrees_of_freedom(fixed_fit([2.0, 0.0, 1.5, 0.0])) == 2


def test_df_subtracts_binding_rows():
    cs = parse_constraints("lin: 1 0 0 0 <= 2\nlin: 0 0 1 0 <= 5", 4)
    assert degrees_of_freedom(fixed_fit([2.0, 0.0, 1.5, 0.0]), cs) == 1


def test_df_floors_at_zero():
    cs = parse_constraints("\n".join(f"lin: {' '.join('1' if i == j else '0' for i in range(3))} >= 0"
                                     for j in range(3)), 3)
    assert degrees_of_freedom(fixed_fit([0.0, 0.0, 0.0]), cs) == 0


def test_df_equalities_always_active():
    cs = parse_constraints("lin: 1 1 0 = 3", 3)
    assert degrees_of_freedom(fixed_fit([2.0, 1.0, 4.0]), cs) == 2


def test_df_monotone_in_sparsity_tol():
    fit = fixed_fit([1e-7, 1e-4, 0.2, -3.0])
    dfs = [degrees_of_freedom(fit, sparsity_tol=t) for t in (1e-9, 1e-6, 1e-3, 1.0, 10.0)]
    assert all(b <= a for a, b in zip(dfs, dfs[1:]))


def test_degenerate_single_row_has_zero_se():
    data = Dataset([1.0], [[2.0]])
    rep = bootstrap_se(data, None, B=2, seed=0, spec=FitSpec(intercept=False))
    np.testing.assert_array_equal(rep.se, [0.0])


def test_bootstrap_deterministic():
    data = make_data(0, n=40, p=3)
    a = bootstrap_se(data, None, B=20, seed=5, spec=FitSpec(s=2.0))
    b = bootstrap_se(data, None, B=20, seed=5, spec=FitSpec(s=2.0))
    assert a.se.tobytes() == b.se.tobytes()
    assert a.selection_freq.tobytes() == b.selection_freq.tobytes()
    assert np.all(a.se >= 0) and np.all((a.selection_freq >= 0) & (a.selection_freq <= 1))


def test_replicates_are_seeded_by_index():
    data = make_data(1, n=25, p=2)
    fits = []
    for b in range(6):
        fits.append(fit_constrained(data.subset(replicate_rows(data.n, 3, b)), None, FitSpec()).beta)
    rep = bootstrap_se(data, None, B=6, seed=3)
    np.testing.assert_array_equal(rep.se, np.vstack(fits).std(axis=0, ddof=1))
    # permuting replicate order leaves the moments unchanged
    perm = summarize([fits[i] for i in (5, 3, 1, 0, 2, 4)], 6, "fixed", 3, 0)
    np.testing.assert_allclose(perm.se, rep.se, rtol=1e-14)


def test_bootstrap_close_to_ols_se():
    rng = np.random.default_rng(77)
    X = rng.standard_normal((200, 3))
    data = Dataset(X @ [1.0, -0.5, 0.25] + rng.standard_normal(200), X)
    rep = bootstrap_se(data, None, B=200, seed=1)
    ref = ols_standard_errors(X, data.y)
    assert np.max(np.abs(rep.se / ref - 1)) < 0.2
    assert rep.reliable and rep.failures == 0
    assert rep.sigma_hat == pytest.approx(1.0, rel=0.15)


def test_retune_mode_records_budgets():
    data = make_data(2, n=30, p=2)
    rep = bootstrap_se(data, None, B=4, mode="retune", seed=0, tune=lambda d: 1.0 + d.y[0] * 0)
    assert rep.mode is BootstrapMode.RETUNE
    assert rep.selected_s == (1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        bootstrap_se(data, None, B=4, mode="retune")
    with pytest.raises(ValueError):
        bootstrap_se(data, None, B=1)


def test_failures_make_report_unreliable():
    data = make_data(3, n=20, p=2)
    cs = parse_constraints("lin: 1 0 >= 1", 2)
    rep = bootstrap_se(data, cs, B=4, seed=0, spec=FitSpec(s=0.5))
    assert rep.failures == 4 and not rep.reliable
    assert all("replicate" in m for m in rep.failure_messages)


def test_logistic_bootstrap():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((150, 2))
    y = (rng.uniform(size=150) < 1 / (1 + np.exp(-X @ [1.0, -1.0]))).astype(float)
    rep = bootstrap_se(Dataset(y, X), None, B=10, seed=0, family="logistic")
    assert rep.failures == 0 and np.all(rep.se > 0)
    assert np.isnan(rep.sigma_hat)
