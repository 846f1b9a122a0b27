"""Squashed-Gaussian output head: tanh-bounded reparameterized sampling with
the exact log-density correction, and its analytic backward pass.

The head consumes a (B, 2A) network output interpreted as [mean, raw log
std].  The log std is smoothly confined to [LOG_STD_MIN, LOG_STD_MAX] with a
tanh squash so gradients never die at the bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_STD_MIN = -8.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass
class HeadCache:
    eps: np.ndarray
    action: np.ndarray
    sigma: np.ndarray
    sig_jac: np.ndarray  # d log_std / d raw


def _squash_log_std(raw):
    t = np.tanh(raw)
    mid = 0.5 * (LOG_STD_MAX + LOG_STD_MIN)
    half = 0.5 * (LOG_STD_MAX - LOG_STD_MIN)
    return mid + half * t, half * (1.0 - t * t)


def gaussian_head_sample(out, eps):
    """Sample a = tanh(mu + sigma*eps) and its log-probability.

    `out` is the (B, 2A) net output, `eps` standard-normal noise (B, A).
    Returns (action (B, A), logp (B,), cache for the backward pass).
    """
    out = np.atleast_2d(out)
    a_dim = out.shape[1] // 2
    mu, raw = out[:, :a_dim], out[:, a_dim:]
    log_std, sig_jac = _squash_log_std(raw)
    sigma = np.exp(log_std)
    u = mu + sigma * eps
    action = np.tanh(u)
    # log N(u; mu, sigma) - sum_i log(1 - tanh(u_i)^2), in the numerically
    # stable softplus form of the squash correction
    gauss = -0.5 * eps * eps - log_std - _HALF_LOG_2PI
    corr = 2.0 * (np.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))
    logp = (gauss - corr).sum(axis=1)
    return action, logp, HeadCache(eps, action, sigma, sig_jac)


def gaussian_head_deterministic(out):
    """Mode of the squashed distribution: tanh(mean)."""
    out = np.atleast_2d(out)
    a_dim = out.shape[1] // 2
    return np.tanh(out[:, :a_dim])


def gaussian_head_backward(cache: HeadCache, g_action, g_logp):
    """Map gradients w.r.t. (action, logp) back to the (B, 2A) net output.

    Uses d logp / d u = 2*a, d logp / d log_std = 2*a*sigma*eps - 1,
    d action / d u = 1 - a^2.
    """
    a = cache.action
    one_m_a2 = 1.0 - a * a
    g_logp = np.asarray(g_logp)[:, None]
    g_u = g_action * one_m_a2 + g_logp * (2.0 * a)
    g_mu = g_u
    g_log_std = g_u * (cache.sigma * cache.eps) + g_logp * (-1.0)
    g_raw = g_log_std * cache.sig_jac
    return np.concatenate([g_mu, g_raw], axis=1)
