import math

import numpy as np
import pytest

from priorlasso.constraints import evaluate_many, is_feasible, parse_constraints
from priorlasso.errors import DataError
from priorlasso.initializer import McConfig, log_density, mc_initial_point


def all_draws(cfg):
    return np.vstack([Z for _, Z, _ in cfg.draws()])


def test_log_density_at_mean():
    S = np.array([[2.0, 0.3], [0.3, 1.0]])
    cfg = McConfig([1.0, -1.0], S, m=5)
    assert log_density([1.0, -1.0], cfg) == pytest.approx(-0.5 * math.log(np.linalg.det(S)))


def test_log_density_standard_normal():
    cfg = McConfig([0.0, 0.0], np.eye(2), m=1)
    assert log_density([1.0, 1.0], cfg) == pytest.approx(-1.0)


def test_log_density_matches_dense_formula():
    rng = np.random.default_rng(0)
    for _ in range(20):
        M = rng.standard_normal((4, 4))
        S = M @ M.T + 0.5 * np.eye(4)
        mu = rng.standard_normal(4)
        b = rng.standard_normal(4)
        cfg = McConfig(mu, S, m=1)
        ref = -0.5 * (b - mu) @ np.linalg.inv(S) @ (b - mu) - 0.5 * np.linalg.slogdet(S)[1]
        assert log_density(b, cfg) == pytest.approx(ref, abs=1e-12)


def test_unconstrained_picks_nearest_draw():
    S = np.array([[1.0, 0.5], [0.5, 2.0]])
    cfg = McConfig([0.5, 0.5], S, m=500, seed=3)
    Z = all_draws(cfg)
    d = Z - cfg.mu
    q = np.einsum("ij,jk,ik->i", d, np.linalg.inv(S), d)
    np.testing.assert_array_equal(mc_initial_point(cfg, math.inf), Z[np.argmin(q)])


def test_single_infeasible_draw():
    cfg = McConfig([5.0], [[1e-6]], m=1)
    assert mc_initial_point(cfg, 1.0) is None


def test_seed_42_rescan():
    cfg = McConfig([1.0, 1.0], np.eye(2), m=10_000, seed=42)
    cs = parse_constraints("lin: 1 0 <= 0", 2)
    point = mc_initial_point(cfg, 10.0, cs)
    assert point[0] <= 0
    Z = all_draws(cfg)
    ok = (np.abs(Z).sum(axis=1) <= 10.0) & np.all(evaluate_many(cs, Z) <= 0, axis=1)
    best = max(log_density(z, cfg) for z in Z[ok])
    assert log_density(point, cfg) >= best - 1e-12


def test_deterministic_and_chunk_independent():
    cfg = McConfig([0.2, -0.1, 0.4], np.eye(3), m=70_000, seed=9)
    cs = parse_constraints("nl: negdet 1 2 3", 3)
    a = mc_initial_point(cfg, 3.0, cs)
    b = mc_initial_point(cfg, 3.0, cs)
    assert a.tobytes() == b.tobytes()
    assert is_feasible(cs, a, 1e-9)
    assert np.abs(a).sum() <= 3.0 + 1e-9
    # one big standard-normal block gives the same stream as the chunked generator
    N = np.random.default_rng(9).standard_normal((70_000, 3))
    np.testing.assert_allclose(all_draws(cfg), cfg.mu + N @ cfg._chol.T, rtol=0, atol=0)


def test_from_design_and_singular_jitter():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((30, 3))
    y = X @ [1.0, 2.0, 3.0]
    cfg = McConfig.from_design(X, y, m=10)
    np.testing.assert_allclose(cfg.mu, [1.0, 2.0, 3.0], atol=1e-10)
    Xs = np.hstack([X, X[:, :1]])  # rank deficient
    cfg = McConfig.from_design(Xs, y, m=10)
    assert cfg.p == 4


def test_bad_config_rejected():
    with pytest.raises(DataError):
        McConfig([0.0, 0.0], np.eye(3))
    with pytest.raises(DataError):
        McConfig([0.0], [[1.0]], m=0)
    with pytest.raises(ValueError):
        mc_initial_point(McConfig([0.0], [[1.0]], m=1), -1.0)
