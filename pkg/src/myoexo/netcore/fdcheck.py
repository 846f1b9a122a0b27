"""Central finite-difference verification of analytic gradients.

Used by the test suite and by the artifact-verification command: any wrong
backward pass shows up as a large relative error against the numerical
gradient.
"""

from __future__ import annotations

import numpy as np


def gradient_max_rel_error(loss_and_grads, params, h: float = 1e-5) -> float:
    """Compare analytic gradients with central differences, coordinatewise.

    `loss_and_grads()` evaluates the scalar loss at the current parameter
    values and returns (loss, [grad per param]).  Parameters are perturbed in
    place and restored.  Returns
    max|g_analytic - g_fd| / max(max|g_analytic|, max|g_fd|, 1e-8).
    """
    _, grads = loss_and_grads()
    worst_abs = 0.0
    scale = 1e-8
    for p, g in zip(params, grads):
        g = np.asarray(g, dtype=float)
        flat = p.reshape(-1)
        g_flat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lo_hi, _ = loss_and_grads()
            flat[i] = orig - h
            lo_lo, _ = loss_and_grads()
            flat[i] = orig
            fd = (lo_hi - lo_lo) / (2.0 * h)
            worst_abs = max(worst_abs, abs(fd - g_flat[i]))
            scale = max(scale, abs(fd), abs(g_flat[i]))
    return worst_abs / scale
