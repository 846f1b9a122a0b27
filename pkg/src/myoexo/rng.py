"""Named, reproducible random substreams derived from a single run seed.

Every source of randomness in a run (each environment, the trainer, the
distillation sampler) pulls its own generator via ``substream``; adding a
consumer never perturbs the draws of existing ones.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """Return a Generator for stream `name` under `seed`.

    The stream identity is (seed, name); the same pair always yields an
    identical sequence, independent of creation order.
    """
    entropy = [int(seed) & 0xFFFFFFFF] + list(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def env_stream(seed: int, index: int) -> np.random.Generator:
    return substream(seed, f"env/{index}")
