"""Mixture of multiple-output functions.

Each of the M components has an encoder whose latent is split into a mean
part ``e`` and a code ``e'``; an MH dropout network maps ``e'`` to offsets so
that every sampled subnetwork yields a hypothesis ``e + f(e')``. A
coefficient network weights the components. Training takes the single
closest hypothesis over all components and subnetworks; inference samples a
component, then a diagonal Gaussian centred on ``e`` whose variance is the
spread of the subnetwork offsets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import (
    Tensor,
    as_tensor,
    backward,
    concat,
    index,
    log,
    repeat_rows,
    sgd_step,
    softmax,
    squared_l2,
    total,
)
from .dropout import DropoutMask, MHDropoutNetwork, all_bits, enumerate_masks, forward_many, sample_masks
from .errors import DimensionError, ValidationError
from .losses import DEFAULT_LAMBDA, mom_loss
from .network import MLP


@dataclass
class MoMConfig:
    input_size: int
    output_size: int
    n_components: int = 3
    encoder_hidden: tuple[int, ...] = (6, 6, 6, 6, 6)
    encoder_activation: str = "tanh"
    offset_hidden: tuple[int, ...] = (6,)
    offset_activation: str = "tanh"
    coef_hidden: tuple[int, ...] = (6, 6, 6, 6, 6)
    coef_activation: str = "tanh"
    subset_size: int = 1
    p: float = 0.5
    lam: float = DEFAULT_LAMBDA
    init_scale: float = 1.0
    offset_init_scale: float = 1.0
    # "encoder": sample around e; "predictive": around e + mean offset.
    inference_mean: str = "encoder"
    # Masks per variance estimate at inference; None uses subset_size and
    # any count reaching 2**D uses every subnetwork.
    variance_samples: int | None = None

    def __post_init__(self):
        if self.n_components < 1:
            raise ValidationError("need at least one component")
        if not self.lam > 0:
            raise ValidationError(f"lambda must be positive, got {self.lam}")
        if self.inference_mean not in ("encoder", "predictive"):
            raise ValidationError(f"inference_mean must be 'encoder' or 'predictive', got {self.inference_mean!r}")
        self.encoder_hidden = tuple(self.encoder_hidden)
        self.offset_hidden = tuple(self.offset_hidden)
        self.coef_hidden = tuple(self.coef_hidden)


class MoMModel:
    def __init__(self, config: MoMConfig, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        c = config
        self.config = c
        k = c.output_size
        self.encoders = [
            MLP(
                [c.input_size, *c.encoder_hidden, 2 * k],
                [c.encoder_activation] * len(c.encoder_hidden) + ["linear"],
                rng,
                init_scale=c.init_scale,
            )
            for _ in range(c.n_components)
        ]
        self.offsets = [
            MHDropoutNetwork(
                [k, *c.offset_hidden, k],
                [c.offset_activation] * len(c.offset_hidden) + ["linear"],
                rng,
                subset_size=c.subset_size,
                p=c.p,
                init_scale=c.offset_init_scale,
            )
            for _ in range(c.n_components)
        ]
        self.coef = MLP(
            [c.input_size, *c.coef_hidden, c.n_components],
            [c.coef_activation] * len(c.coef_hidden) + ["linear"],
            rng,
            init_scale=c.init_scale,
        )

    @property
    def n_components(self) -> int:
        return self.config.n_components

    @property
    def subset_size(self) -> int:
        return self.config.subset_size

    @property
    def latent_size(self) -> int:
        return self.config.output_size

    def parameters(self):
        ps = []
        for enc, off in zip(self.encoders, self.offsets):
            ps += enc.parameters() + off.parameters()
        return ps + self.coef.parameters()

    def named_parameters(self) -> dict:
        named = {}
        for m, (enc, off) in enumerate(zip(self.encoders, self.offsets)):
            for i, p in enumerate(enc.parameters()):
                named[f"encoder{m}.{i}"] = p
            for i, p in enumerate(off.parameters()):
                named[f"offset{m}.{i}"] = p
        for i, p in enumerate(self.coef.parameters()):
            named[f"coef.{i}"] = p
        return named

    def coefficients(self, x) -> Tensor:
        return softmax(self.coef(x))

    def sample_bits(self, n: int, rng: np.random.Generator) -> list[np.ndarray]:
        """Gate bits ``(n, T, D)`` per component; full subsets use the enumeration."""
        out = []
        for net in self.offsets:
            if net.subset_size >= net.n_subnetworks:
                out.append(np.broadcast_to(all_bits(net), (n, net.n_subnetworks, net.mask_units)))
            else:
                out.append(net.sample_bits((n, net.subset_size), rng))
        return out


def encode_split(model: MoMModel, m: int, x) -> tuple[Tensor, Tensor]:
    """Encode with component ``m`` and split the latent into halves ``(e, e')``."""
    if not 0 <= m < model.n_components:
        raise ValidationError(f"component {m} out of range")
    z = model.encoders[m](x)
    k = z.shape[-1] // 2
    return z[..., :k], z[..., k:]


def _component_masks(net: MHDropoutNetwork, rng) -> list[DropoutMask]:
    if net.subset_size >= net.n_subnetworks:
        return enumerate_masks(net)
    return sample_masks(net, net.subset_size, rng)


def train_hypotheses(model: MoMModel, x, rng: np.random.Generator, masks=None) -> list[list[Tensor]]:
    """``M x T`` grid of taped hypotheses ``e + f^{m,t}(e')`` for one input vector.

    ``masks[m]`` replays given masks for component ``m`` instead of sampling.
    """
    x = as_tensor(x)
    if x.ndim != 1:
        raise DimensionError("train_hypotheses takes a single input vector")
    grid = []
    for m, net in enumerate(model.offsets):
        e, e_prime = encode_split(model, m, x)
        ms = masks[m] if masks is not None else _component_masks(net, rng)
        offs = forward_many(net, e_prime, ms)
        hyps = repeat_rows(e, len(ms)) + offs
        grid.append([hyps[t] for t in range(len(ms))])
    return grid


def batch_loss(model: MoMModel, X, Y, bits: Sequence[np.ndarray]) -> tuple[Tensor, np.ndarray, np.ndarray]:
    """Summed combined loss over a batch with given gate bits.

    ``X`` is ``(N, d_in)``, ``Y`` is ``(N, k)`` and ``bits[m]`` is
    ``(N, T, D)``. Returns the loss and the winning ``(m*, t*)`` per row.
    """
    X, Y = as_tensor(X), as_tensor(Y)
    n, k = Y.shape
    lam = model.config.lam
    blocks = []
    for m, net in enumerate(model.offsets):
        e, e_prime = encode_split(model, m, X)
        t = bits[m].shape[1]
        offs = net.forward_bits(repeat_rows(e_prime, t), bits[m].reshape(n * t, -1))
        blocks.append(repeat_rows(e, t) + offs)
    t = bits[0].shape[1]
    M = model.n_components
    hyps = concat(blocks, axis=0)  # row (m * n + i) * t + j
    cube = hyps.data.reshape(M, n, t, k)
    d = ((cube - Y.data[None, :, None, :]) ** 2).sum(axis=3)  # (M, n, t)
    flat = d.transpose(1, 0, 2).reshape(n, M * t)
    best = np.argmin(flat, axis=1)
    win_m, win_t = best // t, best % t
    rows = (win_m * n + np.arange(n)) * t + win_t
    phi = model.coefficients(X)
    log_phi = log(index(phi, (np.arange(n), win_m)))
    loss = total(log_phi) * (-lam) + squared_l2(index(hyps, rows), Y)
    return loss, win_m, win_t


def train_step(model: MoMModel, x, target, learning_rate: float, rng: np.random.Generator) -> float:
    """One SGD step on a sample (vectors) or a batch (matrices, loss averaged)."""
    x, target = as_tensor(x), as_tensor(target)
    if x.ndim == 1:
        grid = train_hypotheses(model, x, rng)
        loss, _ = mom_loss(grid, model.coefficients(x), target, model.config.lam)
    else:
        n = x.shape[0]
        loss, _, _ = batch_loss(model, x, target, model.sample_bits(n, rng))
        loss = loss * (1.0 / n)
    value = loss.item()
    backward(loss)
    sgd_step(model.parameters(), learning_rate)
    return value


@dataclass
class ComponentSummary:
    """Per-component Gaussian parameters at one input."""

    weights: np.ndarray  # (M,)
    means: np.ndarray  # (M, k) encoder means e
    offset_means: np.ndarray  # (M, k) mean subnetwork offset
    variances: np.ndarray  # (M, k)


def component_summary(model: MoMModel, x, rng: np.random.Generator | None = None, n_masks: int | None = None):
    """Weights, means and offset variances for one input.

    Uses every subnetwork when ``n_masks`` is None, else ``n_masks`` sampled masks.
    """
    x = as_tensor(x)
    phi = model.coefficients(x).data
    means, offs, vars_ = [], [], []
    for m, net in enumerate(model.offsets):
        e, e_prime = encode_split(model, m, x)
        if n_masks is None:
            bits = all_bits(net)
        else:
            bits = net.sample_bits((n_masks,), rng)
        out = net.forward_bits(Tensor(np.broadcast_to(e_prime.data, (len(bits), e_prime.shape[0]))), bits).data
        means.append(e.data)
        offs.append(out.mean(axis=0))
        vars_.append(out.var(axis=0))
    return ComponentSummary(phi, np.array(means), np.array(offs), np.array(vars_))


def infer(model: MoMModel, x, rng: np.random.Generator, samples: int) -> list[tuple[int, np.ndarray]]:
    """Draw ``samples`` predictions ``(m, y)`` for one input vector.

    Per draw: ``m ~ Multinomial(phi)``, fresh subnetwork masks give the
    variance of ``f^m(e')`` and ``y ~ N(e, diag(var))``.
    """
    if samples < 1:
        raise ValidationError(f"need at least one sample, got {samples}")
    draws = sample_with_variances(model, x, rng, samples)
    return [(int(m), y) for m, y in zip(draws.components, draws.values)]


@dataclass
class Draws:
    components: np.ndarray  # (S,)
    values: np.ndarray  # (S, k)
    centres: np.ndarray  # (S, k) Gaussian mean used per draw
    variances: np.ndarray  # (S, k) Gaussian variance used per draw


def sample_with_variances(model: MoMModel, x, rng: np.random.Generator, samples: int) -> Draws:
    x = as_tensor(x)
    if x.ndim != 1:
        raise DimensionError("infer takes a single input vector")
    c = model.config
    phi = model.coefficients(x).data
    comps = rng.choice(model.n_components, size=samples, p=phi / phi.sum())
    k = model.latent_size
    centres = np.empty((samples, k))
    variances = np.empty((samples, k))
    for m in range(model.n_components):
        sel = np.nonzero(comps == m)[0]
        if len(sel) == 0:
            continue
        net = model.offsets[m]
        e, e_prime = encode_split(model, m, x)
        t = c.variance_samples or net.subset_size
        if t >= net.n_subnetworks:
            t = net.n_subnetworks
            bits = np.broadcast_to(all_bits(net), (len(sel), t, net.mask_units))
        else:
            bits = net.sample_bits((len(sel), t), rng)
        rows = np.broadcast_to(e_prime.data, (len(sel) * t, k))
        out = net.forward_bits(Tensor(rows), bits.reshape(len(sel) * t, -1)).data.reshape(len(sel), t, k)
        variances[sel] = out.var(axis=1)
        centres[sel] = e.data + (out.mean(axis=1) if c.inference_mean == "predictive" else 0.0)
    noise = rng.standard_normal((samples, k))
    values = centres + np.sqrt(variances) * noise
    return Draws(comps, values, centres, variances)
