"""Causal temporal convolutional network for single-channel history windows.

Residual blocks of left-padded dilated 1-D convolutions (output at index t
never sees inputs beyond t), a linear read-out per time step, and a tanh
squash to [-1, 1].  Backward passes are exact analytic gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class WindowLengthMismatch(ValueError):
    pass


@dataclass
class TcnBlockSpec:
    channels: int
    kernel: int
    dilation: int


def _causal_conv_forward(x, w, b, dilation):
    """x (B, C_in, T), w (C_out, C_in, K) -> (B, C_out, T), left zero-padded."""
    B, _, T = x.shape
    K = w.shape[2]
    pad = (K - 1) * dilation
    xp = np.pad(x, ((0, 0), (0, 0), (pad, 0)))
    out = np.zeros((B, w.shape[0], T), dtype=x.dtype)
    for k in range(K):
        out += np.einsum("oi,bit->bot", w[:, :, k],
                         xp[:, :, k * dilation:k * dilation + T])
    return out + b[None, :, None], xp


def _causal_conv_backward(gout, xp, w, dilation, T):
    K = w.shape[2]
    pad = (K - 1) * dilation
    gw = np.empty_like(w)
    gxp = np.zeros_like(xp)
    for k in range(K):
        sl = slice(k * dilation, k * dilation + T)
        gw[:, :, k] = np.einsum("bot,bit->oi", gout, xp[:, :, sl])
        gxp[:, :, sl] += np.einsum("oi,bot->bit", w[:, :, k], gout)
    gb = gout.sum(axis=(0, 2))
    return gw, gb, gxp[:, :, pad:]


class TcnNet:
    """Stack of single-conv residual blocks plus a tanh scalar read-out.

    Parameter layout per block: conv weight, conv bias, then (only when the
    block changes channel count) a 1x1 skip weight.  The final two entries
    are the read-out weight (C_last,) and bias (scalar).
    """

    def __init__(self, window: int = 95, blocks=None, in_channels: int = 1,
                 rng=None, dtype=np.float32):
        self.window = int(window)
        self.in_channels = int(in_channels)
        # defaults cover 91 of the 95 history samples causally
        self.blocks = [TcnBlockSpec(*b) if not isinstance(b, TcnBlockSpec) else b
                       for b in (blocks or [(16, 7, 1), (16, 7, 2),
                                            (16, 7, 4), (16, 7, 8)])]
        self.dtype = np.dtype(dtype)
        self.version = 0
        rng = rng or np.random.default_rng(0)

        self.params = []
        self._skip_param = []  # per block: index of skip weight or None
        c_in = self.in_channels
        for blk in self.blocks:
            fan_in = c_in * blk.kernel
            self.params.append(rng.normal(0, np.sqrt(2.0 / fan_in),
                                          (blk.channels, c_in, blk.kernel)).astype(self.dtype))
            self.params.append(np.zeros(blk.channels, dtype=self.dtype))
            if blk.channels != c_in:
                self.params.append(rng.normal(0, np.sqrt(1.0 / c_in),
                                              (blk.channels, c_in)).astype(self.dtype))
                self._skip_param.append(len(self.params) - 1)
            else:
                self._skip_param.append(None)
            c_in = blk.channels
        # zero-initialized read-out: predictions start at squash(0) = 0
        self.params.append(np.zeros(c_in, dtype=self.dtype))
        self.params.append(np.zeros(1, dtype=self.dtype))

    @property
    def receptive_field(self) -> int:
        return 1 + sum((b.kernel - 1) * b.dilation for b in self.blocks)

    def bump_version(self):
        self.version += 1

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params)

    def forward_sequence(self, x: np.ndarray):
        """x (B, C_in, T) -> (outputs (B, T) in [-1, 1], cache)."""
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 2:
            x = x[:, None, :]
        B, C, T = x.shape
        if C != self.in_channels:
            raise WindowLengthMismatch(f"expected {self.in_channels} channels")
        cache = {"inputs": [], "padded": [], "relu": [], "version": self.version,
                 "net_id": id(self), "T": T}
        h = x
        p = 0
        for bi, blk in enumerate(self.blocks):
            w, b = self.params[p], self.params[p + 1]
            p += 2
            conv, xp = _causal_conv_forward(h, w, b, blk.dilation)
            act = np.maximum(conv, 0.0)
            if self._skip_param[bi] is not None:
                ws = self.params[p]
                p += 1
                skip = np.einsum("oi,bit->bot", ws, h)
            else:
                skip = h
            cache["inputs"].append(h)
            cache["padded"].append(xp)
            cache["relu"].append(conv > 0)
            h = act + skip
        cache["features"] = h
        w_out, b_out = self.params[-2], self.params[-1]
        z = np.einsum("c,bct->bt", w_out, h) + b_out[0]
        y = np.tanh(z)
        cache["y"] = y
        return y, cache

    def forward_window(self, window: np.ndarray):
        """Single fixed-length history window -> scalar prediction in [-1, 1]."""
        window = np.asarray(window, dtype=self.dtype)
        if window.ndim == 1:
            window = window[None, None, :]
        elif window.ndim == 2:
            window = window[:, None, :]
        if window.shape[-1] != self.window:
            raise WindowLengthMismatch(
                f"expected window of {self.window} samples, got {window.shape[-1]}")
        y, _ = self.forward_sequence(window)
        out = y[:, -1]
        return float(out[0]) if out.shape[0] == 1 else out

    def backward_sequence(self, cache, g_y: np.ndarray):
        """Gradients of a scalar loss given dLoss/doutputs (B, T)."""
        from .dense import StaleCache

        if cache["net_id"] != id(self) or cache["version"] != self.version:
            raise StaleCache("forward cache does not match current parameters")
        T = cache["T"]
        y = cache["y"]
        gz = np.asarray(g_y, dtype=self.dtype) * (1.0 - y * y)
        grads = [None] * len(self.params)
        h = cache["features"]
        grads[-2] = np.einsum("bt,bct->c", gz, h)
        grads[-1] = np.array([gz.sum()], dtype=self.dtype)
        gh = np.einsum("c,bt->bct", self.params[-2], gz)

        p_idx = []
        p = 0
        for bi, blk in enumerate(self.blocks):
            entry = [p, p + 1, None]
            p += 2
            if self._skip_param[bi] is not None:
                entry[2] = p
                p += 1
            p_idx.append(entry)

        for bi in range(len(self.blocks) - 1, -1, -1):
            wi, bj, si = p_idx[bi]
            blk = self.blocks[bi]
            g_conv = gh * cache["relu"][bi]
            gw, gb, gx = _causal_conv_backward(
                g_conv, cache["padded"][bi], self.params[wi], blk.dilation, T)
            grads[wi], grads[bj] = gw, gb
            if si is not None:
                grads[si] = np.einsum("bot,bit->oi", gh, cache["inputs"][bi])
                gx = gx + np.einsum("oi,bot->bit", self.params[si], gh)
            else:
                gx = gx + gh
            gh = gx
        return grads, gh
