"""Winner-take-all objectives.

Every loss here picks the hypothesis closest to the target in squared L2
distance (ties to the lowest index) and builds the taped loss from that
hypothesis alone, so non-winning hypotheses receive exactly zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import Tensor, as_tensor, index, log, mul, squared_l2
from .dropout import MHDropoutNetwork, all_bits, enumerate_masks, hypotheses, sample_masks
from .errors import DimensionError, ValidationError

DEFAULT_LAMBDA = 0.1


@dataclass(frozen=True)
class WinnerSelection:
    winner_index: int
    distances: tuple[float, ...]


def _distances(hyps: Sequence[Tensor], target: Tensor) -> np.ndarray:
    if len(hyps) == 0:
        raise ValidationError("need at least one hypothesis")
    stacked = np.stack([h.data for h in hyps])
    if stacked.shape[1:] != target.shape:
        raise DimensionError(f"hypotheses {stacked.shape[1:]} vs target {target.shape}")
    diff = stacked - target.data
    return (diff * diff).reshape(len(hyps), -1).sum(axis=1)


def wta_loss(hyps: Sequence[Tensor], target) -> tuple[Tensor, WinnerSelection]:
    target = as_tensor(target)
    d = _distances(hyps, target)
    w = int(np.argmin(d))
    return squared_l2(hyps[w], target), WinnerSelection(w, tuple(float(v) for v in d))


def _check_coefficients(coefficients: Tensor, n: int) -> None:
    phi = coefficients.data
    if phi.shape != (n,):
        raise DimensionError(f"expected {n} coefficients, got shape {phi.shape}")
    if np.any(phi <= 0) or abs(phi.sum() - 1.0) > 1e-9:
        raise ValidationError("coefficients must be positive and sum to 1")


def mixture_wta_loss(hyps: Sequence[Tensor], coefficients: Tensor, target) -> tuple[Tensor, WinnerSelection]:
    """``-log(phi_w) * ||y - h_w||^2`` for the winning predictor ``w``."""
    target = as_tensor(target)
    d = _distances(hyps, target)
    _check_coefficients(coefficients, len(hyps))
    w = int(np.argmin(d))
    loss = mul(mul(log(index(coefficients, w)), -1.0), squared_l2(hyps[w], target))
    return loss, WinnerSelection(w, tuple(float(v) for v in d))


def swta_loss(
    net: MHDropoutNetwork,
    x,
    target,
    rng: np.random.Generator,
    masks=None,
) -> tuple[Tensor, WinnerSelection, list]:
    """Winner-take-all over ``net.subset_size`` sampled subnetworks.

    When the subset size covers every subnetwork the full enumeration is used
    instead of sampling, making the loss identical to vanilla WTA. Returns the
    loss, the selection and the masks that competed.
    """
    if masks is None:
        if net.subset_size >= net.n_subnetworks:
            masks = enumerate_masks(net)
        else:
            masks = sample_masks(net, net.subset_size, rng)
    loss, sel = wta_loss(hypotheses(net, x, masks), target)
    return loss, sel, masks


def mom_loss(grid: Sequence[Sequence[Tensor]], coefficients: Tensor, target, lam: float = DEFAULT_LAMBDA):
    """Combined mixture / stochastic WTA loss over an ``M x T`` hypothesis grid.

    Evaluates ``-lam * log(phi[m*]) + ||y - grid[m*][t*]||^2`` for the globally
    closest hypothesis ``(m*, t*)``. Returns ``(loss, (m*, t*))``.
    """
    if not lam > 0:
        raise ValidationError(f"lambda must be positive, got {lam}")
    target = as_tensor(target)
    if len(grid) == 0 or any(len(row) == 0 for row in grid):
        raise ValidationError("hypothesis grid is empty")
    _check_coefficients(coefficients, len(grid))
    flat = [h for row in grid for h in row]
    d = _distances(flat, target)
    widths = np.cumsum([0] + [len(row) for row in grid])
    k = int(np.argmin(d))
    m = int(np.searchsorted(widths, k, side="right") - 1)
    t = k - int(widths[m])
    loss = mul(log(index(coefficients, m)), -lam) + squared_l2(grid[m][t], target)
    return loss, (m, t)


# ---------------------------------------------------------------------------
# batched forms used by the training loops


def row_winners(hyps: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Argmin over axis 1 of ``(N, K, d)`` hypotheses against ``(N, d)`` targets."""
    diff = hyps - targets[:, None, :]
    return np.argmin((diff * diff).sum(axis=2), axis=1)


def wta_loss_rows(hyps: Tensor, targets, k: int) -> tuple[Tensor, np.ndarray]:
    """Summed WTA loss where rows ``n*k .. n*k+k-1`` of ``hyps`` compete for target ``n``."""
    targets = as_tensor(targets)
    n, d = targets.shape
    if hyps.shape != (n * k, d):
        raise DimensionError(f"hypotheses {hyps.shape} vs {n} targets x {k} candidates of width {d}")
    winners = row_winners(hyps.data.reshape(n, k, d), targets.data)
    chosen = index(hyps, np.arange(n) * k + winners)
    return squared_l2(chosen, targets), winners


def swta_loss_batch(net: MHDropoutNetwork, x, targets, rng: np.random.Generator, subset_size: int | None = None):
    """Stochastic WTA summed over a batch; each row of ``targets`` gets its own subnetworks.

    ``x`` is one input vector shared by all targets or an ``(N, d)`` matrix.
    Full-size subsets use the enumeration, as in :func:`swta_loss`.
    Returns ``(loss, winners, bits)`` with ``bits`` of shape ``(N, T, D)``.
    """
    targets = as_tensor(targets)
    n = targets.shape[0]
    t = net.subset_size if subset_size is None else int(subset_size)
    if t >= net.n_subnetworks:
        bits = np.broadcast_to(all_bits(net), (n, net.n_subnetworks, net.mask_units))
        t = net.n_subnetworks
    else:
        bits = net.sample_bits((n, t), rng)
    xd = as_tensor(x).data
    if xd.ndim == 1:
        rows = np.broadcast_to(xd, (n * t, xd.shape[0]))
    else:
        rows = np.repeat(xd, t, axis=0)
    out = net.forward_bits(Tensor(rows), bits.reshape(n * t, -1))
    loss, winners = wta_loss_rows(out, targets, t)
    return loss, winners, bits
