"""Muscle-synergy extraction and expansion.

A non-negative basis W (muscles x rank) is factorized out of recorded
activation matrices with multiplicative-update NMF and then used at control
time to expand low-dimensional synergy coefficients into per-muscle
excitations.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

_EPS = 1e-12


class NegativeInput(ValueError):
    pass


class RankTooLarge(ValueError):
    pass


class ZeroMatrix(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class InsufficientStrides(ValueError):
    pass


@dataclass
class ActivationMatrix:
    """Muscles x samples activation recording with stride bookkeeping."""

    values: np.ndarray               # (muscles, samples), entries in [0, 1]
    stride_bounds: list[int]         # sample indices of stride starts, ascending
    sample_rate_hz: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("activation matrix must be 2-D")
        if np.any(v < 0) or np.any(v > 1):
            raise ValueError("activations must lie in [0, 1]")
        self.values = v

    @property
    def n_strides(self) -> int:
        return max(0, len(self.stride_bounds) - 1)


@dataclass
class SynergyBasis:
    """Non-negative weight matrix with per-column max normalized to 1."""

    weights: np.ndarray          # (muscles, rank)
    vaf: float                   # reconstruction quality at fit time
    muscle_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0):
            raise NegativeInput("synergy weights must be non-negative")
        self.weights = w

    @property
    def rank(self) -> int:
        return self.weights.shape[1]

    @property
    def n_muscles(self) -> int:
        return self.weights.shape[0]


def _objective(V, W, H):
    R = V - W @ H
    return float(np.sum(R * R))


def nmf(V: np.ndarray, rank: int, max_iters: int = 2000, tol: float = 1e-6,
        rng: np.random.Generator | None = None, track_objective: bool = False):
    """Factor V ~= W @ H with W, H >= 0 by multiplicative updates.

    Minimizes the squared Frobenius residual; stops after `max_iters` or when
    the relative objective decrease falls below `tol`.  W columns are
    normalized to unit max on return (scale pushed into H).

    Returns (W, H) or (W, H, objectives) when `track_objective` is set.
    """
    V = np.asarray(V, dtype=float)
    if np.any(V < 0):
        raise NegativeInput("NMF input must be non-negative")
    if rank < 1 or rank > min(V.shape):
        raise RankTooLarge(f"rank {rank} invalid for shape {V.shape}")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)

    m, n = V.shape
    # uniform in (0, 1]: keep initial entries strictly positive
    W = 1.0 - rng.random((m, rank))
    H = 1.0 - rng.random((rank, n))

    objectives = [_objective(V, W, H)]
    for _ in range(max_iters):
        H *= (W.T @ V) / (W.T @ W @ H + _EPS)
        W *= (V @ H.T) / (W @ (H @ H.T) + _EPS)
        obj = _objective(V, W, H)
        objectives.append(obj)
        prev = objectives[-2]
        if prev > 0 and (prev - obj) / prev < tol:
            break

    col_max = W.max(axis=0)
    scale = np.where(col_max > 0, col_max, 1.0)
    W = W / scale
    H = H * scale[:, None]
    if track_objective:
        return W, H, np.asarray(objectives)
    return W, H


def nmf_best_of(V, rank, restarts: int = 10, max_iters: int = 2000,
                tol: float = 1e-6, seed: int = 0):
    """Run `restarts` independently seeded factorizations, keep the best."""
    best = None
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        W, H = nmf(V, rank, max_iters=max_iters, tol=tol, rng=rng)
        obj = _objective(V, W, H)
        if best is None or obj < best[0]:
            best = (obj, W, H)
    return best[1], best[2]


def vaf(V, W, H) -> float:
    """Variance accounted for: 1 - |V - WH|_F^2 / |V|_F^2."""
    V = np.asarray(V, dtype=float)
    total = float(np.sum(V * V))
    if total == 0.0:
        raise ZeroMatrix("VAF undefined for an all-zero matrix")
    return 1.0 - _objective(V, W, H) / total


def synergy_expand(coeffs: np.ndarray, basis: SynergyBasis) -> np.ndarray:
    """Expand rank-length coefficients into per-muscle excitations in [0, 1]."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[-1] != basis.rank:
        raise LengthMismatch(
            f"expected {basis.rank} coefficients, got {coeffs.shape[-1]}"
        )
    return np.clip(coeffs @ basis.weights.T, 0.0, 1.0)


def extract_basis_from_rollouts(logs: ActivationMatrix, rank: int,
                                min_strides: int = 5, restarts: int = 10,
                                max_iters: int = 2000, tol: float = 1e-6,
                                seed: int = 0,
                                muscle_names: list[str] | None = None) -> SynergyBasis:
    """Fit a normalized synergy basis to stride-segmented activation logs."""
    if logs.n_strides < min_strides:
        raise InsufficientStrides(
            f"need >= {min_strides} strides, got {logs.n_strides}"
        )
    V = logs.values[:, logs.stride_bounds[0]:logs.stride_bounds[-1]]
    W, H = nmf_best_of(V, rank, restarts=restarts, max_iters=max_iters,
                       tol=tol, seed=seed)
    return SynergyBasis(W, vaf=vaf(V, W, H),
                        muscle_names=list(muscle_names or []))


def save_basis_csv(path, basis: SynergyBasis) -> None:
    """Persist a basis as CSV: metadata comments, then one row per muscle."""
    with open(path, "w", newline="") as f:
        f.write(f"# rank={basis.rank}\n")
        f.write(f"# vaf={basis.vaf!r}\n")
        writer = csv.writer(f)
        writer.writerow(["muscle"] + [f"syn{j}" for j in range(basis.rank)])
        names = basis.muscle_names or [f"m{i}" for i in range(basis.n_muscles)]
        for name, row in zip(names, basis.weights):
            writer.writerow([name] + [repr(float(x)) for x in row])


def load_basis_csv(path) -> SynergyBasis:
    with open(path) as f:
        text = f.read()
    vaf_value = 0.0
    body = []
    for line in text.splitlines():
        if line.startswith("# vaf="):
            vaf_value = float(line.split("=", 1)[1])
        elif not line.startswith("#"):
            body.append(line)
    rows = list(csv.reader(io.StringIO("\n".join(body))))
    names = [r[0] for r in rows[1:] if r]
    weights = np.array([[float(x) for x in r[1:]] for r in rows[1:] if r])
    return SynergyBasis(weights, vaf=vaf_value, muscle_names=names)
