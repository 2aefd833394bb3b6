"""Regenerate the JSON test fixtures from the brute-force references in :mod:`oracle`."""

from __future__ import annotations

import os

import numpy as np

from .constraints import parse_constraints
from .oracle import newton_logistic, polish, project_l1, refined_grid_fit
from .report import dumps

FIXTURE_SEED = 20240601


def _record(inputs, output, resolution):
    return {"input": inputs, "oracle_output": output, "resolution": resolution, "seed": FIXTURE_SEED}


def _grid_cases(rng, count=6):
    cases = []
    for k in range(count):
        p = 2 if k % 2 == 0 else 3
        n = 12
        X = rng.standard_normal((n, p))
        beta = rng.uniform(-1.5, 1.5, p)
        y = X @ beta + 0.3 * rng.standard_normal(n)
        lines = ["lin: " + " ".join("1" if j == 0 else "0" for j in range(p)) + " >= 0"]
        if p == 3:
            lines.append("lin: 1 -1 0 <= 0.5")
        text = "\n".join(lines) + "\n"
        cs = parse_constraints(text, p)
        s = float(0.6 * np.abs(beta).sum())
        lo, hi = (-3.0,) * p, (3.0,) * p
        b, _ = refined_grid_fit(X, y, cs, s, lo, hi, resolution=1e-3, intercept=True)
        b, val = polish(X, y, cs, s, b, intercept=True)
        cases.append(_record({"X": X, "y": y, "constraints": text, "s": s, "intercept": True},
                             {"beta": b, "objective": val}, 1e-3))
    return cases


def _projection_cases(rng, count=10):
    cases = []
    for _ in range(count):
        p = int(rng.integers(2, 8))
        z = rng.normal(0.0, 2.0, p)
        s = float(rng.uniform(0.2, 0.9) * np.abs(z).sum())
        cases.append(_record({"z": z, "s": s}, {"beta": project_l1(z, s)}, 0.0))
    return cases


def _logistic_cases(rng, count=4):
    # a small non-separable set first
    x = np.array([-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0])
    y = np.array([0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0])
    X8 = np.column_stack([np.ones(8), x])
    cases = [_record({"X": x[:, None], "y": y}, {"beta_with_intercept": newton_logistic(X8, y)}, 0.0)]
    for _ in range(count):
        n, p = 200, 3
        X = np.hstack([np.ones((n, 1)), rng.standard_normal((n, p))])
        eta = X @ np.array([-0.3, 1.0, -0.5, 0.25])
        y = (rng.uniform(size=n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
        cases.append(_record({"X": X[:, 1:], "y": y}, {"beta_with_intercept": newton_logistic(X, y)}, 0.0))
    return cases


def write_fixtures(directory) -> dict:
    """Write ``brute_force.json``, ``l1_projection.json`` and ``logistic_newton.json``."""
    os.makedirs(directory, exist_ok=True)
    rng = np.random.default_rng(FIXTURE_SEED)
    payloads = {
        "brute_force.json": _grid_cases(rng),
        "l1_projection.json": _projection_cases(rng),
        "logistic_newton.json": _logistic_cases(rng),
    }
    paths = {}
    for name, cases in payloads.items():
        path = os.path.join(directory, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dumps(cases))
        paths[name] = path
    return paths
