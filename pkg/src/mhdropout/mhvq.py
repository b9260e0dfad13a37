"""Toy-scale vector-quantised autoencoders: plain VQ and its MH extension.

The MH model adds a secondary encoder and codebook whose embedding feeds an
MH dropout network. Its subnetworks turn the primary embedding ``e*`` into
hypotheses ``e* + f^t(e'*)``; the one closest to the encoder output is handed
to the decoder through the straight-through estimator. At generation time a
token pair is drawn from an empirical joint table and the latent is sampled
from a diagonal Gaussian around ``e*`` with the spread of the subnetwork
offsets as variance.

Gradient routing in the MH training step:

* reconstruction reaches the primary encoder via straight-through only;
* each codebook loss trains its embedding and commits its encoder;
* the latent winner term ``||sg[y] - (sg[e*] + f(st(y', e'*)))||^2`` trains
  the MH network and, through straight-through, the secondary encoder.

So with the MH network frozen the primary branch trains exactly like plain VQ.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import (
    Parameter,
    Tensor,
    as_tensor,
    backward,
    index,
    mul,
    repeat_rows,
    sgd_step,
    squared_l2,
    stop_gradient,
    straight_through,
)
from .dropout import MHDropoutNetwork, all_bits
from .errors import DimensionError, ValidationError
from .losses import row_winners
from .network import MLP

DEFAULT_BETA = 0.25


class Codebook:
    """``K`` embeddings of width ``d``, stored as the rows of one parameter."""

    def __init__(self, n_codes: int, dim: int, rng: np.random.Generator | None = None, scale: float = 1.0):
        if n_codes < 1 or dim < 1:
            raise ValidationError(f"codebook needs K >= 1 and d >= 1, got K={n_codes}, d={dim}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.embeddings = Parameter(rng.normal(0.0, scale, (n_codes, dim)), name="codebook")

    @property
    def n_codes(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def nearest(self, y: np.ndarray) -> np.ndarray:
        """Indices of nearest embeddings for ``(d,)`` or ``(N, d)`` values; ties to lowest index."""
        E = self.embeddings.data
        y2 = np.atleast_2d(y)
        d = ((y2[:, None, :] - E[None, :, :]) ** 2).sum(axis=2)
        idx = np.argmin(d, axis=1)
        return idx if np.ndim(y) == 2 else idx[0]


def quantize(codebook: Codebook, y) -> tuple:
    """Nearest embedding to ``y`` in L2: ``(index, embedding)``.

    Works row-wise for a matrix, returning an index array. The embedding is
    taped so gradients reach the selected codebook rows.
    """
    y = as_tensor(y)
    if y.shape[-1] != codebook.dim:
        raise DimensionError(f"quantize: width {y.shape[-1]} vs codebook width {codebook.dim}")
    idx = codebook.nearest(y.data)
    return (int(idx) if y.ndim == 1 else idx), index(codebook.embeddings, idx)


def codebook_loss(y, y_hat, beta: float = DEFAULT_BETA) -> Tensor:
    """``||sg[y] - y_hat||^2 + beta * ||y - sg[y_hat]||^2``."""
    y, y_hat = as_tensor(y), as_tensor(y_hat)
    if y.shape != y_hat.shape:
        raise DimensionError(f"codebook_loss: {y.shape} vs {y_hat.shape}")
    return squared_l2(stop_gradient(y), y_hat) + mul(squared_l2(y, stop_gradient(y_hat)), beta)


@dataclass
class VQConfig:
    input_size: int
    latent_size: int = 2
    n_codes: int = 4
    encoder_hidden: tuple[int, ...] = (16,)
    decoder_hidden: tuple[int, ...] = (16,)
    activation: str = "tanh"
    beta: float = DEFAULT_BETA


@dataclass
class MHVQConfig(VQConfig):
    n_secondary_codes: int = 4
    secondary_hidden: tuple[int, ...] = (16,)
    offset_hidden: tuple[int, ...] = (6,)
    offset_activation: str = "tanh"
    subset_size: int = 8
    p: float = 0.5
    latent_weight: float = 1.0
    # "codebook": sample around e*; "predictive": around e* + mean offset.
    generation_mean: str = "codebook"
    variance_samples: int | None = None


def _mlp(sizes, act, rng):
    return MLP(sizes, [act] * (len(sizes) - 2) + ["linear"], rng)


class VQModel:
    """Encoder, codebook and decoder."""

    def __init__(self, config: VQConfig, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        c = config
        if c.beta <= 0:
            raise ValidationError(f"beta must be positive, got {c.beta}")
        self.config = c
        self.encoder = _mlp([c.input_size, *c.encoder_hidden, c.latent_size], c.activation, rng)
        self.codebook = Codebook(c.n_codes, c.latent_size, rng)
        self.decoder = _mlp([c.latent_size, *c.decoder_hidden, c.input_size], c.activation, rng)

    def primary_parameters(self) -> list[Parameter]:
        return self.encoder.parameters() + [self.codebook.embeddings] + self.decoder.parameters()

    def parameters(self) -> list[Parameter]:
        return self.primary_parameters()

    def named_parameters(self) -> dict:
        named = {f"encoder.{i}": p for i, p in enumerate(self.encoder.parameters())}
        named["codebook"] = self.codebook.embeddings
        named.update({f"decoder.{i}": p for i, p in enumerate(self.decoder.parameters())})
        return named

    @property
    def total_codes(self) -> int:
        return self.codebook.n_codes

    def tokens(self, X) -> np.ndarray:
        return self.codebook.nearest(self.encoder(as_tensor(X)).data)

    def reconstruct(self, X) -> np.ndarray:
        X = as_tensor(X)
        return self.decoder(Tensor(self.codebook.embeddings.data[self.tokens(X)])).data


class MHVQModel(VQModel):
    """VQ model plus secondary encoder, secondary codebook and MH offset network."""

    def __init__(self, config: MHVQConfig, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        # Primary parts first so they match a VQModel built from the same seed.
        super().__init__(config, rng)
        c = config
        if c.generation_mean not in ("codebook", "predictive"):
            raise ValidationError(f"generation_mean must be 'codebook' or 'predictive', got {c.generation_mean!r}")
        self.secondary_encoder = _mlp([c.input_size, *c.secondary_hidden, c.latent_size], c.activation, rng)
        self.secondary_codebook = Codebook(c.n_secondary_codes, c.latent_size, rng)
        self.offset = MHDropoutNetwork(
            [c.latent_size, *c.offset_hidden, c.latent_size],
            [c.offset_activation] * len(c.offset_hidden) + ["linear"],
            rng,
            subset_size=c.subset_size,
            p=c.p,
        )
        self.freeze_offset = False

    def parameters(self) -> list[Parameter]:
        ps = self.primary_parameters() + self.secondary_encoder.parameters() + [self.secondary_codebook.embeddings]
        if not self.freeze_offset:
            ps += self.offset.parameters()
        return ps

    def named_parameters(self) -> dict:
        named = super().named_parameters()
        named.update({f"secondary_encoder.{i}": p for i, p in enumerate(self.secondary_encoder.parameters())})
        named["secondary_codebook"] = self.secondary_codebook.embeddings
        named.update({f"offset.{i}": p for i, p in enumerate(self.offset.parameters())})
        return named

    @property
    def total_codes(self) -> int:
        return self.codebook.n_codes + self.secondary_codebook.n_codes

    def token_pairs(self, X) -> tuple[np.ndarray, np.ndarray]:
        X = as_tensor(X)
        z = self.codebook.nearest(self.encoder(X).data)
        z2 = self.secondary_codebook.nearest(self.secondary_encoder(X).data)
        return z, z2

    def reconstruct(self, X) -> np.ndarray:
        """Decode the hypothesis nearest the encoder output over every subnetwork."""
        X = _rows(X)
        n = X.shape[0]
        bits = all_bits(self.offset)
        t = len(bits)
        y = self.encoder(X).data
        e = self.codebook.embeddings.data[self.codebook.nearest(y)]
        e2 = self.secondary_codebook.embeddings.data[self.secondary_codebook.nearest(self.secondary_encoder(X).data)]
        offs = self.offset.forward_bits(Tensor(np.repeat(e2, t, axis=0)), np.tile(bits, (n, 1))).data
        hyps = (np.repeat(e, t, axis=0) + offs).reshape(n, t, -1)
        chosen = hyps[np.arange(n), row_winners(hyps, y)]
        return self.decoder(Tensor(chosen)).data

    def sample_bits(self, n: int, rng: np.random.Generator) -> np.ndarray:
        net = self.offset
        if net.subset_size >= net.n_subnetworks:
            return np.broadcast_to(all_bits(net), (n, net.n_subnetworks, net.mask_units))
        return net.sample_bits((n, net.subset_size), rng)


def _rows(x) -> Tensor:
    x = as_tensor(x)
    return Tensor(x.data[None, :]) if x.ndim == 1 else x


@dataclass
class StepLosses:
    reconstruction: float
    codebook: float
    secondary_codebook: float = 0.0
    latent: float = 0.0
    winners: np.ndarray | None = field(default=None, repr=False)


def vq_losses(model: VQModel, X):
    """Per-batch (summed) reconstruction and codebook losses of plain VQ."""
    X = _rows(X)
    y = model.encoder(X)
    _, e = quantize(model.codebook, y)
    x_hat = model.decoder(straight_through(y, e))
    return squared_l2(x_hat, X), codebook_loss(y, e, model.config.beta)


def vq_train_step(model: VQModel, x, learning_rate: float) -> StepLosses:
    """One SGD step of plain VQ on a vector or a batch (losses averaged over rows)."""
    X = _rows(x)
    n = X.shape[0]
    rec, cb = vq_losses(model, X)
    loss = (rec + cb) * (1.0 / n)
    backward(loss)
    sgd_step(model.primary_parameters(), learning_rate)
    return StepLosses(rec.item() / n, cb.item() / n)


def mhvq_losses(model: MHVQModel, X, bits: np.ndarray):
    """Summed losses of the MH step for given gate bits ``(N, T, D)``."""
    X = _rows(X)
    n, t = X.shape[0], bits.shape[1]
    c = model.config
    y = model.encoder(X)
    y2 = model.secondary_encoder(X)
    _, e = quantize(model.codebook, y)
    _, e2 = quantize(model.secondary_codebook, y2)
    offs = model.offset.forward_bits(repeat_rows(straight_through(y2, e2), t), bits.reshape(n * t, -1))
    hyps = repeat_rows(stop_gradient(e), t) + offs
    k = y.shape[1]
    winners = row_winners(hyps.data.reshape(n, t, k), y.data)
    chosen = index(hyps, np.arange(n) * t + winners)
    x_hat = model.decoder(straight_through(y, chosen))
    rec = squared_l2(x_hat, X)
    cb = codebook_loss(y, e, c.beta)
    cb2 = codebook_loss(y2, e2, c.beta)
    lat = squared_l2(stop_gradient(y), chosen)
    return rec, cb, cb2, lat, winners


def mhvq_train_step(model: MHVQModel, x, learning_rate: float, rng: np.random.Generator, bits=None) -> StepLosses:
    """One SGD step of MH-VQ on a vector or a batch (losses averaged over rows)."""
    X = _rows(x)
    n = X.shape[0]
    if bits is None:
        bits = model.sample_bits(n, rng)
    rec, cb, cb2, lat, winners = mhvq_losses(model, X, bits)
    loss = rec + cb + cb2
    if model.config.latent_weight > 0:
        loss = loss + mul(lat, model.config.latent_weight)
    backward(loss * (1.0 / n))
    sgd_step(model.parameters(), learning_rate)
    return StepLosses(rec.item() / n, cb.item() / n, cb2.item() / n, lat.item() / n, winners)


# ---------------------------------------------------------------------------
# categorical posterior and generation


@dataclass
class PosteriorTable:
    """Empirical joint distribution over (primary, secondary) token pairs."""

    probs: np.ndarray  # (K, K')

    def marginal_primary(self) -> np.ndarray:
        return self.probs.sum(axis=1)

    def sample(self, rng: np.random.Generator, count: int) -> tuple[np.ndarray, np.ndarray]:
        flat = rng.choice(self.probs.size, size=count, p=self.probs.ravel())
        return np.divmod(flat, self.probs.shape[1])


def fit_categorical_posterior(model: VQModel, X) -> PosteriorTable:
    X = _rows(X)
    if X.shape[0] == 0:
        raise ValidationError("cannot fit a posterior on an empty dataset")
    if isinstance(model, MHVQModel):
        z, z2 = model.token_pairs(X)
        shape = (model.codebook.n_codes, model.secondary_codebook.n_codes)
    else:
        z, z2 = model.tokens(X), np.zeros(X.shape[0], dtype=int)
        shape = (model.codebook.n_codes, 1)
    counts = np.zeros(shape)
    np.add.at(counts, (z, z2), 1.0)
    return PosteriorTable(counts / counts.sum())


@dataclass
class LatentDraws:
    primary: np.ndarray  # (S,)
    secondary: np.ndarray  # (S,)
    latents: np.ndarray  # (S, d)
    centres: np.ndarray  # (S, d)
    variances: np.ndarray  # (S, d)


def offset_outputs(model: MHVQModel, secondary_token: int, bits: np.ndarray) -> np.ndarray:
    """Subnetwork offsets ``f(e'_z')`` for gate bits ``(T, D)``."""
    e2 = model.secondary_codebook.embeddings.data[secondary_token]
    return model.offset.forward_bits(Tensor(np.broadcast_to(e2, (len(bits), e2.shape[0]))), bits).data


def sample_latents(model: VQModel, table: PosteriorTable, rng: np.random.Generator, count: int) -> LatentDraws:
    """Token pairs from ``table`` and latents ``N(e*, diag Var[f(e'*)])``.

    Plain VQ latents are the embeddings themselves (zero spread).
    """
    if count < 1:
        raise ValidationError(f"need at least one sample, got {count}")
    z, z2 = table.sample(rng, count)
    E = model.codebook.embeddings.data
    centres = E[z].copy()
    variances = np.zeros_like(centres)
    if isinstance(model, MHVQModel):
        c = model.config
        net = model.offset
        t = c.variance_samples or net.subset_size
        for tok in np.unique(z2):
            sel = np.nonzero(z2 == tok)[0]
            if t >= net.n_subnetworks:
                out = offset_outputs(model, tok, all_bits(net))
                variances[sel] = out.var(axis=0)
                if c.generation_mean == "predictive":
                    centres[sel] += out.mean(axis=0)
                continue
            bits = net.sample_bits((len(sel), t), rng)
            out = offset_outputs(model, tok, bits.reshape(len(sel) * t, -1)).reshape(len(sel), t, -1)
            variances[sel] = out.var(axis=1)
            if c.generation_mean == "predictive":
                centres[sel] += out.mean(axis=1)
    latents = centres + np.sqrt(variances) * rng.standard_normal(centres.shape)
    return LatentDraws(z, z2, latents, centres, variances)


def generate(model: VQModel, table: PosteriorTable, rng: np.random.Generator, count: int) -> list[Tensor]:
    """Decode ``count`` latents sampled via :func:`sample_latents`."""
    draws = sample_latents(model, table, rng, count)
    decoded = model.decoder(Tensor(draws.latents)).data
    return [Tensor(row) for row in decoded]
