"""Shared generators for randomized tests.

Densities are always normalized to mean 1 so they satisfy the pricing
convention; payoff generators produce increasing step claims in [0, cap].
"""

from __future__ import annotations

import numpy as np

from riskclaim import (
    Constant,
    EmpiricalDiscrete,
    PiecewiseLinearQuantile,
    StepVector,
    TwoStep,
    Uniform,
    WeightFunction,
    avar_weight,
    two_level_weight,
)


def random_uniform_density(rng: np.random.Generator) -> Uniform:
    width = rng.uniform(0.2, 1.9)
    return Uniform(1.0 - width / 2.0, 1.0 + width / 2.0)


def random_plq_density(rng: np.random.Generator, n_knots: int = 5) -> PiecewiseLinearQuantile:
    levels = np.sort(rng.uniform(0.05, 0.95, size=n_knots - 2))
    levels = np.concatenate([[0.0], levels, [1.0]])
    values = np.cumsum(rng.uniform(0.05, 1.0, size=n_knots))
    values = values - values[0] + rng.uniform(0.0, 0.3)
    mean = float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(levels)))
    values = values / mean
    return PiecewiseLinearQuantile(tuple(levels.tolist()), tuple(values.tolist()))


def random_continuous_density(rng: np.random.Generator):
    return random_uniform_density(rng) if rng.random() < 0.5 else random_plq_density(rng)


def random_discrete_density(rng: np.random.Generator, n: int) -> EmpiricalDiscrete:
    values = np.sort(rng.uniform(0.05, 3.0, size=n))
    values = values + np.arange(n) * 1e-6  # enforce strict ascent
    probs = rng.dirichlet(np.ones(n))
    probs = np.maximum(probs, 1e-4)
    probs = probs / probs.sum()
    values = values / float(np.dot(probs, values))
    return EmpiricalDiscrete(tuple(values.tolist()), tuple(probs.tolist()))


def random_weight(rng: np.random.Generator) -> WeightFunction:
    kind = rng.integers(0, 3)
    if kind == 0:
        return avar_weight(float(rng.uniform(0.1, 1.0)))
    if kind == 1:
        return two_level_weight(float(rng.uniform(0.2, 0.8)), float(rng.uniform(0.0, 0.9)))
    m = int(rng.integers(2, 6))
    thresholds = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 0.95, size=m - 1))])
    raw = np.cumsum(rng.uniform(0.05, 1.0, size=m))
    edges = np.concatenate([thresholds, [1.0]])
    total = float(np.dot(raw, np.diff(edges)))
    return WeightFunction(tuple(thresholds.tolist()), tuple((raw / total).tolist()))


def random_step_payoff(rng: np.random.Generator, cap: float = 1.0):
    kind = rng.integers(0, 3)
    if kind == 0:
        return Constant(float(rng.uniform(0.0, cap)))
    if kind == 1:
        beta = float(rng.uniform(0.0, cap))
        a = float(rng.uniform(0.0, 1.5))
        b = a + float(rng.uniform(0.0, 1.5))
        return TwoStep(beta, a, b, cap)
    m = int(rng.integers(2, 6))
    points = np.cumsum(rng.uniform(0.05, 0.8, size=m))
    levels = np.sort(rng.uniform(0.0, cap, size=m))
    return StepVector(tuple(points.tolist()), tuple(levels.tolist()), cap)
