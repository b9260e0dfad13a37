"""Bernoulli-mask machinery: a base network viewed as an ensemble of subnetworks.

A mask realisation is identified by an integer whose bits (least significant
first) gate the maskable hidden units, concatenated layer by layer. With four
maskable units, realisation 5 = 0b0101 keeps units 0 and 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autodiff import Tensor, as_tensor, repeat_rows
from .errors import CapacityError, DegenerateSampleError, DimensionError, ValidationError
from .network import MLP

MAX_ENUMERABLE_UNITS = 20


@dataclass(frozen=True)
class DropoutSpec:
    """Maskable-unit counts and keep probabilities, one entry per hidden layer.

    The first ``units[i]`` units of hidden layer ``i`` are gated; the rest are
    always on. A count of 0 leaves the layer unmasked.
    """

    units: tuple[int, ...]
    p: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(int(u) for u in self.units))
        object.__setattr__(self, "p", tuple(float(q) for q in self.p))
        if len(self.units) != len(self.p):
            raise ValidationError("units and p need one entry per hidden layer")
        for u, q in zip(self.units, self.p):
            if u < 0:
                raise ValidationError(f"negative maskable-unit count {u}")
            if u and not 0.0 < q < 1.0:
                raise ValidationError(f"keep probability must lie in (0, 1), got {q}")

    @classmethod
    def full(cls, hidden_sizes: Sequence[int], p: float = 0.5) -> "DropoutSpec":
        return cls(tuple(hidden_sizes), tuple(p for _ in hidden_sizes))

    @property
    def total_units(self) -> int:
        return sum(self.units)

    def unit_keep_probabilities(self) -> np.ndarray:
        return np.concatenate([np.full(u, q) for u, q in zip(self.units, self.p)]) if self.total_units else np.zeros(0)


@dataclass(frozen=True)
class DropoutMask:
    """One realisation of the gating variables.

    ``layers[i]`` is the full-width 0/1 gate for hidden layer ``i``.
    """

    layers: tuple[np.ndarray, ...] = field(compare=False)
    index: int

    @property
    def bits(self) -> np.ndarray:
        return _index_to_bits(self.index, sum(len(l) for l in self.layers))


def _index_to_bits(index: int, n: int) -> np.ndarray:
    return ((index >> np.arange(n)) & 1).astype(np.int64)


class MHDropoutNetwork(MLP):
    """A base network whose masked subnetworks act as an implicit ensemble.

    ``subset_size`` (T) is the number of subnetworks sampled per training
    example by the stochastic winner-take-all loss.
    """

    def __init__(
        self,
        sizes: Sequence[int],
        activations: Sequence[str],
        rng: np.random.Generator | None = None,
        dropout: DropoutSpec | None = None,
        subset_size: int = 1,
        p: float = 0.5,
        init_scale: float = 1.0,
        bias_scale: float = 0.0,
    ):
        super().__init__(sizes, activations, rng, init_scale=init_scale, bias_scale=bias_scale)
        spec = dropout if dropout is not None else DropoutSpec.full(self.hidden_sizes, p)
        if len(spec.units) != len(self.hidden_sizes):
            raise ValidationError(
                f"dropout spec covers {len(spec.units)} layers, network has {len(self.hidden_sizes)} hidden"
            )
        for u, h in zip(spec.units, self.hidden_sizes):
            if u > h:
                raise ValidationError(f"{u} maskable units exceed layer width {h}")
        self.dropout = spec
        self.subset_size = int(subset_size)
        if self.subset_size < 1:
            raise ValidationError(f"subset size must be >= 1, got {subset_size}")
        if self.mask_units <= 62 and self.subset_size > 2**self.mask_units:
            raise ValidationError(f"subset size {subset_size} exceeds 2^{self.mask_units} subnetworks")
        self._keep = spec.unit_keep_probabilities()

    @property
    def mask_units(self) -> int:
        return self.dropout.total_units

    @property
    def n_subnetworks(self) -> int:
        return 2**self.mask_units

    def bits_to_layers(self, bits: np.ndarray) -> list[np.ndarray]:
        """Expand ``(..., D)`` gate bits into full-width per-layer gates."""
        bits = np.asarray(bits, dtype=np.float64)
        lead = bits.shape[:-1]
        out, start = [], 0
        for u, h in zip(self.dropout.units, self.hidden_sizes):
            gate = np.ones(lead + (h,))
            gate[..., :u] = bits[..., start : start + u]
            out.append(gate)
            start += u
        return out

    def mask_from_bits(self, bits) -> DropoutMask:
        bits = np.asarray(bits, dtype=np.int64).reshape(-1)
        if bits.shape != (self.mask_units,):
            raise DimensionError(f"expected {self.mask_units} gate bits, got {bits.shape}")
        index = int(np.sum(bits << np.arange(self.mask_units))) if self.mask_units else 0
        return DropoutMask(tuple(self.bits_to_layers(bits)), index)

    def mask_from_index(self, index: int) -> DropoutMask:
        if not 0 <= index < self.n_subnetworks:
            raise ValidationError(f"realisation index {index} outside [0, {self.n_subnetworks})")
        return self.mask_from_bits(_index_to_bits(index, self.mask_units))

    def sample_bits(self, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
        """I.i.d. gate bits of shape ``shape + (D,)``; unit kept with its probability."""
        return (rng.random(shape + (self.mask_units,)) < self._keep).astype(np.int64)

    def forward_bits(self, x, bits: np.ndarray) -> Tensor:
        """Row-wise forward of matrix ``x`` (N, d) with per-row gate bits (N, D)."""
        return self.forward(x, masks=self.bits_to_layers(bits))

    def descriptor(self) -> dict:
        d = super().descriptor()
        d.update(mask_units=list(self.dropout.units), p=list(self.dropout.p), subset_size=self.subset_size)
        return d


def sample_masks(net: MHDropoutNetwork, count: int, rng: np.random.Generator) -> list[DropoutMask]:
    """Draw ``count`` masks i.i.d.; duplicates are allowed."""
    if count < 1:
        raise ValidationError(f"need at least one mask, got {count}")
    return [net.mask_from_bits(b) for b in net.sample_bits((count,), rng)]


def enumerate_masks(net: MHDropoutNetwork) -> list[DropoutMask]:
    """All ``2**D`` realisations, ordered by index."""
    if net.mask_units > MAX_ENUMERABLE_UNITS:
        raise CapacityError(f"refusing to enumerate 2^{net.mask_units} subnetworks (limit 2^{MAX_ENUMERABLE_UNITS})")
    return [net.mask_from_index(m) for m in range(net.n_subnetworks)]


def all_bits(net: MHDropoutNetwork) -> np.ndarray:
    """Gate bits of every realisation, shape ``(2**D, D)``, row m is index m."""
    if net.mask_units > MAX_ENUMERABLE_UNITS:
        raise CapacityError(f"refusing to enumerate 2^{net.mask_units} subnetworks (limit 2^{MAX_ENUMERABLE_UNITS})")
    return (np.arange(net.n_subnetworks)[:, None] >> np.arange(net.mask_units)) & 1


def forward_masked(net: MHDropoutNetwork, x, mask: DropoutMask) -> Tensor:
    for gate, h in zip(mask.layers, net.hidden_sizes):
        if gate.shape != (h,):
            raise DimensionError(f"mask layer shape {gate.shape} does not match hidden width {h}")
    return net.forward(x, masks=list(mask.layers))


def forward_many(net: MHDropoutNetwork, x, masks: Sequence[DropoutMask]) -> Tensor:
    """Outputs of every mask on one input vector, as a ``(T, out)`` tensor."""
    if not masks:
        raise ValidationError("need at least one mask")
    x = as_tensor(x)
    if x.ndim != 1:
        raise DimensionError(f"forward_many takes one input vector, got shape {x.shape}")
    gates = [np.stack([m.layers[i] for m in masks]) for i in range(len(net.hidden_sizes))]
    return net.forward(repeat_rows(x, len(masks)), masks=gates)


def hypotheses(net: MHDropoutNetwork, x, masks: Sequence[DropoutMask]) -> list[Tensor]:
    """One output per mask, order preserved; all share a single batched forward."""
    batch = forward_many(net, x, masks)
    return [batch[i] for i in range(len(masks))]


def _stack(outputs) -> np.ndarray:
    return np.stack([o.data if isinstance(o, Tensor) else np.asarray(o, dtype=np.float64) for o in outputs])


def predictive_mean(outputs) -> Tensor:
    if len(outputs) == 0:
        raise DegenerateSampleError("predictive mean of an empty set")
    return Tensor(_stack(outputs).mean(axis=0))


def predictive_variance(outputs) -> Tensor:
    """Elementwise population variance (divide by T) of subnetwork outputs."""
    if len(outputs) < 2:
        raise DegenerateSampleError(f"variance needs at least 2 outputs, got {len(outputs)}")
    return Tensor(_stack(outputs).var(axis=0))


def mc_dropout_inference(net: MHDropoutNetwork, x) -> Tensor:
    """Deterministic output with gates off and maskable units scaled by keep probability."""
    scales = []
    for u, q, h in zip(net.dropout.units, net.dropout.p, net.hidden_sizes):
        s = np.ones(h)
        s[:u] = q
        scales.append(s)
    return net.forward(x, scales=scales)
