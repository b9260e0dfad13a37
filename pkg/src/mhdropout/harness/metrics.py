"""Evaluation metrics and oracles."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import stats
from scipy.optimize import brentq, linear_sum_assignment

from ..errors import DegenerateSampleError
from .datasets import inverse_sine_forward


def sdd(predicted: Sequence, targets: Sequence) -> float:
    """Standard deviation distance averaged over trials.

    ``predicted[k]`` and ``targets[k]`` are sets of vectors for trial ``k``;
    sd is the elementwise population standard deviation of each set.
    """
    if len(predicted) == 0 or len(predicted) != len(targets):
        raise DegenerateSampleError("need the same nonzero number of predicted and target sets")
    total = 0.0
    for P, Y in zip(predicted, targets):
        P, Y = np.asarray(P, dtype=np.float64), np.asarray(Y, dtype=np.float64)
        if len(P) == 0 or len(Y) == 0:
            raise DegenerateSampleError("empty set in sdd")
        total += float(np.linalg.norm(P.std(axis=0) - Y.std(axis=0)))
    return total / len(predicted)


def mean_ci(values, level: float = 0.95) -> tuple[float, float, float]:
    """Mean and two-sided t-interval; a single value gives a zero-width interval."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise DegenerateSampleError("confidence interval of no values")
    m = float(v.mean())
    if v.size == 1:
        return m, m, m
    half = float(stats.t.ppf(0.5 + level / 2, v.size - 1) * v.std(ddof=1) / np.sqrt(v.size))
    return m, m - half, m + half


def inverse_sine_branches(x: float, grid: int = 4001) -> np.ndarray:
    """All ``y`` in (0, 1) with ``y + 0.3 sin(2 pi y) = x``, by bracketing and root finding."""

    def f(t):
        return inverse_sine_forward(t) - x

    g = np.linspace(1e-9, 1 - 1e-9, grid)
    v = f(g)
    roots = [brentq(f, a, b, xtol=1e-13) for a, b, va, vb in zip(g[:-1], g[1:], v[:-1], v[1:]) if va * vb < 0]
    roots += [t for t, vt in zip(g, v) if vt == 0.0]
    return np.array(sorted(roots))


def match_components(learned: np.ndarray, truth: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Min-cost assignment on Euclidean mean distance; returns ``(learned_idx, truth_idx)``."""
    cost = np.linalg.norm(np.asarray(learned)[:, None, :] - np.asarray(truth)[None, :, :], axis=2)
    return linear_sum_assignment(cost)
