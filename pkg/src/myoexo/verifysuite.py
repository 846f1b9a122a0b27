"""Fast invariant suite re-run by the artifact verification command:
filter analytics, clipping rules, mass scaling, and gradient checks.
Each check returns None on success or a failure description."""

from __future__ import annotations

import numpy as np

from .exo import alpha_from, lpf_step, rate_limit, scale_torque


def check_filter_analytics():
    alpha = alpha_from(0.005, 0.1)
    u = 0.0
    for _ in range(10):
        u = lpf_step(u, 1.0, alpha)
    if abs(u - (1.0 - 0.95 ** 10)) > 1e-12:
        return f"unit-step response off: {u!r}"
    for _ in range(390):
        u = lpf_step(u, 1.0, alpha)
    if abs(u - 1.0) > 1e-6:
        return f"DC gain off after 400 steps: {u!r}"
    return None


def check_rate_limit():
    rng = np.random.default_rng(0)
    prev = 0.0
    for _ in range(1000):
        raw = float(rng.uniform(-3, 3))
        out = float(rate_limit(raw, prev, 0.5))
        if abs(out - prev) > 0.5 + 1e-12 or abs(out - raw) > abs(prev - raw):
            return f"clip rule violated at raw={raw}, prev={prev}"
        prev = out
    return None


def check_mass_scaling():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        u = float(rng.uniform(-12, 12))
        m = float(rng.uniform(40, 120))
        if abs(scale_torque(u, m) - u * m / 74.5) > 1e-12:
            return f"scaling off at u={u}, m={m}"
    if scale_torque(1.0, 74.5) != 1.0:
        return "identity at reference mass violated"
    return None


def check_gradients():
    from .netcore import DenseNet, TcnNet
    from .netcore import gaussian_head_backward, gaussian_head_sample
    from .netcore.fdcheck import gradient_max_rel_error

    rng = np.random.default_rng(2)
    net = DenseNet([5, 8, 6], rng=rng, dtype=np.float64)
    x = rng.normal(size=(2, 5))
    eps = rng.normal(size=(2, 3))
    wa = rng.normal(size=(2, 3))
    wl = rng.normal(size=2)

    def actor_loss():
        out, cache = net.forward(x)
        a, logp, hcache = gaussian_head_sample(out, eps)
        loss = float(np.sum(a * wa) + np.sum(logp * wl))
        grads, _ = net.backward(cache, gaussian_head_backward(hcache, wa, wl))
        return loss, grads

    err = gradient_max_rel_error(actor_loss, net.params)
    if err > 1e-4:
        return f"dense/actor gradient error {err:.2e}"

    tcn = TcnNet(window=10, blocks=[(3, 3, 1), (3, 3, 2)], rng=rng,
                 dtype=np.float64)
    tcn.params[-2][...] = rng.normal(0, 0.5, tcn.params[-2].shape)
    tcn.bump_version()
    xt = rng.normal(size=(1, 1, 10))
    wt = rng.normal(size=(1, 10))

    def tcn_loss():
        y, cache = tcn.forward_sequence(xt)
        loss = float(np.sum(y * wt))
        grads, _ = tcn.backward_sequence(cache, wt)
        return loss, grads

    err = gradient_max_rel_error(tcn_loss, tcn.params)
    if err > 1e-4:
        return f"tcn gradient error {err:.2e}"
    return None


FAST_CHECKS = (
    ("filter_analytics", check_filter_analytics),
    ("rate_limit", check_rate_limit),
    ("mass_scaling", check_mass_scaling),
    ("gradients", check_gradients),
)


def run_fast_checks():
    """Returns a list of (name, failure-or-None)."""
    return [(name, fn()) for name, fn in FAST_CHECKS]
