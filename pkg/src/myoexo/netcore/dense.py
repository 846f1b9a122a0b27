"""Fully connected networks with rectifier hidden layers and a linear output,
plus exact analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DimensionMismatch(ValueError):
    pass


class StaleCache(RuntimeError):
    pass


@dataclass
class ForwardCache:
    net_id: int
    version: int
    activations: list  # inputs to each layer: [x, h1, ..., h_{L-1}]


class DenseNet:
    """MLP: sizes[0] -> relu(sizes[1]) -> ... -> linear(sizes[-1]).

    `head` is metadata describing how consumers interpret the output
    ("linear" or "gauss" for a squashed-Gaussian mean/log-std pair).
    Parameters live in `params` as [W0, b0, W1, b1, ...] with W of shape
    (n_in, n_out); optimizers mutate them in place and must call
    `bump_version` so stale forward caches are rejected.
    """

    def __init__(self, sizes, head: str = "linear", rng=None,
                 dtype=np.float32):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if head not in ("linear", "gauss"):
            raise ValueError(f"unknown head {head!r}")
        self.sizes = [int(s) for s in sizes]
        self.head = head
        self.dtype = np.dtype(dtype)
        self.version = 0
        rng = rng or np.random.default_rng(0)
        self.params = []
        for n_in, n_out in zip(self.sizes[:-1], self.sizes[1:]):
            w = rng.normal(0.0, np.sqrt(2.0 / n_in), (n_in, n_out))
            self.params.append(w.astype(self.dtype))
            self.params.append(np.zeros(n_out, dtype=self.dtype))

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def bump_version(self):
        self.version += 1

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params)

    def forward(self, x: np.ndarray):
        """Evaluate on a batch (B, in) -> ((B, out), cache)."""
        x = np.asarray(x, dtype=self.dtype)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.shape[1] != self.sizes[0]:
            raise DimensionMismatch(
                f"expected input dim {self.sizes[0]}, got {x.shape[1]}")
        acts = [x]
        h = x
        for layer in range(self.n_layers):
            w, b = self.params[2 * layer], self.params[2 * layer + 1]
            h = h @ w + b
            if layer < self.n_layers - 1:
                h = np.maximum(h, 0.0)
                acts.append(h)
        cache = ForwardCache(id(self), self.version, acts)
        return (h[0] if squeeze else h), cache

    def backward(self, cache: ForwardCache, gout: np.ndarray):
        """Exact gradients for a scalar loss: returns (param grads, input grad).

        `gout` is dLoss/doutput with the same shape the forward returned.
        """
        if cache.net_id != id(self) or cache.version != self.version:
            raise StaleCache("forward cache does not match current parameters")
        g = np.asarray(gout, dtype=self.dtype)
        if g.ndim == 1:
            g = g[None, :]
        grads = [None] * len(self.params)
        for layer in range(self.n_layers - 1, -1, -1):
            a_in = cache.activations[layer]
            grads[2 * layer] = a_in.T @ g
            grads[2 * layer + 1] = g.sum(axis=0)
            g = g @ self.params[2 * layer].T
            if layer > 0:
                g = g * (cache.activations[layer] > 0)
        return grads, g
