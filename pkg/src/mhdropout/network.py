"""Small dense feed-forward networks built on the autodiff primitives."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .autodiff import ACTIVATIONS, Parameter, Tensor, activation, affine, as_tensor, mask_apply, mul
from .errors import DimensionError, ValidationError


class MLP:
    """Stack of ``affine -> activation`` layers.

    ``sizes`` lists layer widths including input and output, so
    ``MLP([2, 4, 2], ["relu", "sigmoid"])`` has one hidden layer of 4 units.
    Hidden-layer outputs can be gated by masks or scaled by constants in
    :meth:`forward`, which is how dropout subnetworks are realised.
    """

    def __init__(
        self,
        sizes: Sequence[int],
        activations: Sequence[str],
        rng: np.random.Generator | None = None,
        init_scale: float = 1.0,
        bias_scale: float = 0.0,
    ):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValidationError(f"need at least input and output widths, got {sizes}")
        if len(activations) != len(sizes) - 1:
            raise ValidationError(f"{len(sizes) - 1} layers but {len(activations)} activations")
        for kind in activations:
            if kind not in ACTIVATIONS:
                raise ValidationError(f"unknown activation {kind!r}")
        self.sizes = sizes
        self.activations = list(activations)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights: list[Parameter] = []
        self.biases: list[Parameter] = []
        for i, (d_in, d_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            # Glorot-uniform scaled by init_scale.
            limit = init_scale * np.sqrt(6.0 / (d_in + d_out))
            self.weights.append(Parameter(rng.uniform(-limit, limit, (d_out, d_in)), name=f"W{i}"))
            self.biases.append(Parameter(rng.uniform(-bias_scale, bias_scale, d_out), name=f"b{i}"))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def hidden_sizes(self) -> list[int]:
        return self.sizes[1:-1]

    @property
    def input_size(self) -> int:
        return self.sizes[0]

    @property
    def output_size(self) -> int:
        return self.sizes[-1]

    def parameters(self) -> list[Parameter]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def forward(self, x, masks=None, scales=None) -> Tensor:
        """Forward pass.

        ``masks[i]`` (0/1, shaped like hidden layer i's output) gates that
        layer's output; ``scales[i]`` multiplies it by constants instead.
        Either list may hold ``None`` for ungated layers.
        """
        h = as_tensor(x)
        if h.shape[-1] != self.input_size:
            raise DimensionError(f"network expects input width {self.input_size}, got shape {h.shape}")
        last = self.n_layers - 1
        for i, (W, b, kind) in enumerate(zip(self.weights, self.biases, self.activations)):
            h = activation(affine(h, W, b), kind)
            if i == last:
                break
            if masks is not None and masks[i] is not None:
                h = mask_apply(h, masks[i])
            if scales is not None and scales[i] is not None:
                h = mul(h, np.asarray(scales[i], dtype=np.float64))
        return h

    __call__ = forward

    def descriptor(self) -> dict:
        return {"sizes": list(self.sizes), "activations": list(self.activations)}

    def state(self) -> list[np.ndarray]:
        return [p.data.copy() for p in self.parameters()]

    def load_state(self, arrays: Sequence[np.ndarray]) -> None:
        params = self.parameters()
        if len(arrays) != len(params):
            raise DimensionError(f"expected {len(params)} arrays, got {len(arrays)}")
        for p, a in zip(params, arrays):
            a = np.asarray(a, dtype=np.float64)
            if a.shape != p.shape:
                raise DimensionError(f"parameter {p.name}: expected {p.shape}, got {a.shape}")
            p.data = a.copy()
            p.zero_grad()

    def copy(self) -> "MLP":
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.weights = [Parameter(w.data, name=w.name) for w in self.weights]
        clone.biases = [Parameter(b.data, name=b.name) for b in self.biases]
        return clone
