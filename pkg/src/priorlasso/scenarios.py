"""Synthetic instances for the shipped demo configurations.

Each scenario returns a :class:`Scenario` holding a dataset, the constraint
file text and the generating coefficients; :func:`write_scenario` puts them
on disk as ``data.csv``, ``constraints.txt`` and ``truth.json``.

demand
    Log-log energy demand with quarterly dummies; the three elasticities are
    constrained nonnegative.
concavity
    Quadratic response surface in two inputs; the Hessian must be negative
    semidefinite (``b4 <= 0``, ``b5 <= 0``, ``b4 b5 - b6^2 >= 0`` with the
    intercept as coordinate 1).
synergy
    Two-factor logistic model on a 2 x 5 layout; the interaction effects are
    constrained nonnegative.
theorem2
    Gaussian design with sign constraints that the truth satisfies.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, write_csv
from .report import dumps

SCENARIOS = ("demand", "concavity", "synergy", "theorem2")


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    data: Dataset
    constraints: str
    truth: dict = field(default_factory=dict)
    family: str = "gaussian"


def _sign_rows(p, indices, sign=">="):
    lines = []
    for j in indices:
        row = ["0"] * p
        row[j] = "1"
        lines.append("lin: " + " ".join(row) + f" {sign} 0")
    return lines


def demand(seed, n=120):
    rng = np.random.default_rng(seed)
    # prices and income follow random walks around a trend
    log_pe = 0.5 + np.cumsum(rng.normal(0.0, 0.05, n))
    log_pg = 0.2 + np.cumsum(rng.normal(0.0, 0.05, n))
    log_i = 2.0 + 0.01 * np.arange(n) + rng.normal(0.0, 0.05, n)
    quarter = np.arange(n) % 4
    D = np.stack([(quarter == q).astype(float) for q in (1, 2, 3)], axis=1)
    X = np.column_stack([log_pe, log_pg, log_i, D])
    beta = np.array([0.0, 0.4, 0.9, 0.15, -0.1, 0.05])
    alpha, sd = 1.0, 0.1
    y = alpha + X @ beta + rng.normal(0.0, sd, n)
    names = ("log_pe", "log_pg", "log_i", "d1", "d2", "d3")
    cons = ["# elasticities of demand are nonnegative"] + _sign_rows(6, (0, 1, 2))
    truth = {"beta": beta, "intercept": alpha, "noise_sd": sd}
    return Scenario("demand", Dataset(y, X, names, response_name="log_q"), "\n".join(cons) + "\n", truth)


def concavity(seed, n=150):
    rng = np.random.default_rng(seed)
    x2 = rng.uniform(0.5, 3.0, n)
    x3 = rng.uniform(0.5, 3.0, n)
    X = np.column_stack([x2, x3, x2 ** 2, x3 ** 2, 2.0 * x2 * x3])
    coef = np.array([1.0, 2.0, 1.5, -1.0, -0.5, 0.3])
    sd = 0.5
    y = coef[0] + X @ coef[1:] + rng.normal(0.0, sd, n)
    names = ("x2", "x3", "x2sq", "x3sq", "x2x3_2")
    cons = [
        "# coordinate 1 is the intercept; the response surface must be concave",
        "lin: 0 0 0 1 0 0 <= 0",
        "lin: 0 0 0 0 1 0 <= 0",
        "nl: negdet 4 5 6",
    ]
    truth = {"beta": coef[1:], "intercept": coef[0], "noise_sd": sd}
    return Scenario("concavity", Dataset(y, X, names), "\n".join(cons) + "\n", truth)


def synergy(seed, per_cell=40):
    rng = np.random.default_rng(seed)
    mu = -1.0
    alpha2 = 0.5
    tau = np.array([0.0, 0.3, -0.2, 0.6, 0.1])
    eta = np.array([0.0, 0.0, 0.4, 0.8, 1.2])
    rows, ys = [], []
    for i in range(2):
        for j in range(5):
            x = np.zeros(9)
            if i == 1:
                x[0] = 1.0
            if j > 0:
                x[j] = 1.0
                if i == 1:
                    x[4 + j] = 1.0
            lin = mu + (alpha2 if i == 1 else 0.0) + tau[j] + (eta[j] if i == 1 else 0.0)
            p = 1.0 / (1.0 + np.exp(-lin))
            ys.append((rng.uniform(size=per_cell) < p).astype(float))
            rows.append(np.repeat(x[None, :], per_cell, axis=0))
    X = np.vstack(rows)
    y = np.concatenate(ys)
    names = ("a2", "t2", "t3", "t4", "t5", "e22", "e23", "e24", "e25")
    cons = ["# interaction effects are nonnegative"] + _sign_rows(9, (5, 6, 7, 8))
    beta = np.concatenate([[alpha2], tau[1:], eta[1:]])
    truth = {"beta": beta, "intercept": mu}
    return Scenario("synergy", Dataset(y, X, names), "\n".join(cons) + "\n", truth, family="logistic")


def theorem2(seed, n=50, p=6):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[: min(3, p)] = [2.0, 1.5, 1.0][: min(3, p)]
    sd = 1.0
    y = X @ beta + rng.normal(0.0, sd, n)
    cons = ["# the generating coefficients are nonnegative"] + _sign_rows(p, range(p))
    truth = {"beta": beta, "intercept": 0.0, "noise_sd": sd}
    return Scenario("theorem2", Dataset(y, X), "\n".join(cons) + "\n", truth)


def generate(name, seed, n=None) -> Scenario:
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    fn = {"demand": demand, "concavity": concavity, "synergy": synergy, "theorem2": theorem2}[name]
    return fn(seed) if n is None else fn(seed, n)


def write_scenario(sc: Scenario, directory, seed) -> dict:
    """Write the three scenario files; returns their paths."""
    os.makedirs(directory, exist_ok=True)
    paths = {k: os.path.join(directory, f) for k, f in
             (("data", "data.csv"), ("constraints", "constraints.txt"), ("truth", "truth.json"))}
    write_csv(sc.data, paths["data"])
    with open(paths["constraints"], "w", encoding="utf-8") as fh:
        fh.write(sc.constraints)
    truth = dict(sc.truth)
    truth.update({"scenario": sc.name, "seed": seed, "n": sc.data.n, "family": sc.family,
                  "response": sc.data.response_name, "column_names": list(sc.data.column_names)})
    with open(paths["truth"], "w", encoding="utf-8") as fh:
        fh.write(dumps(truth))
    return paths
