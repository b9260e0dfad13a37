"""Independent reference computations used by the tests.

Nothing here imports the autodiff engine: these are plain-Python or plain
numpy re-derivations that the library results are checked against.
"""

from __future__ import annotations

import math

import numpy as np


def central_difference(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Gradient of scalar ``f`` at ``x`` by central differences."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def relative_error(a, b, floor: float = 1e-7) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def matmul_loops(W, x):
    return [sum(W[i][j] * x[j] for j in range(len(x))) for i in range(len(W))]


def act(kind, v):
    if kind == "sigmoid":
        return 1.0 / (1.0 + math.exp(-v))
    if kind == "tanh":
        return math.tanh(v)
    if kind == "relu":
        return max(v, 0.0)
    return v


def masked_forward_loops(weights, biases, activations, x, gates):
    """Layer-by-layer forward with explicit loops; ``gates[i]`` multiplies hidden layer i."""
    h = list(map(float, x))
    for i, (W, b, kind) in enumerate(zip(weights, biases, activations)):
        pre = [v + bb for v, bb in zip(matmul_loops(W.tolist(), h), b.tolist())]
        h = [act(kind, v) for v in pre]
        if i < len(weights) - 1 and gates is not None:
            h = [v * g for v, g in zip(h, gates[i])]
    return np.array(h)


def index_to_gates(index: int, n_units: int):
    return [(index >> u) & 1 for u in range(n_units)]


def nearest_loops(E, y):
    best, best_d = 0, None
    for k, e in enumerate(E):
        d = sum((a - b) ** 2 for a, b in zip(e, y))
        if best_d is None or d < best_d:
            best, best_d = k, d
    return best


def population_var(rows):
    rows = [list(map(float, r)) for r in rows]
    n = len(rows)
    mean = [sum(c) / n for c in zip(*rows)]
    return [sum((r[j] - mean[j]) ** 2 for r in rows) / n for j in range(len(mean))]
