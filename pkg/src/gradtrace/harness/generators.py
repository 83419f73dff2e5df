"""Synthetic gradient-trace generators."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from ..errors import ConfigError, DivergenceError, PreconditionError
from ..trace import GradientTrace

OPTIMIZERS = ("sgd_momentum", "adamw_like")


def planted_increments(d: int, T: int, r: int, rho: float, seed: int):
    """Return ``(signal, noise, g0)`` with ``signal`` of exact rank ``r`` and
    ``|noise|_F^2 / |signal + noise|_F^2 == rho`` up to rounding.

    The signal's ``r`` singular values are all 1, so every planted direction
    carries a ``1/r`` share of the signal energy.
    """
    if not 1 <= r <= min(d, T):
        raise PreconditionError(f"rank r={r} must satisfy 1 <= r <= min(d, T) = {min(d, T)}")
    if not 0.0 <= rho < 1.0:
        raise PreconditionError(f"noise fraction must lie in [0, 1), got {rho}")
    rng = np.random.default_rng(seed)
    left, _ = np.linalg.qr(rng.standard_normal((d, r)))
    right, _ = np.linalg.qr(rng.standard_normal((T, r)))
    signal = left @ right.T
    raw_noise = rng.standard_normal((d, T))
    g0 = rng.standard_normal(d)
    if rho == 0.0:
        return signal, np.zeros((d, T)), g0
    # solve c**2 |N|^2 (1 - rho) - 2 rho <S, N> c - rho |S|^2 = 0 for c > 0
    nn = math.fsum((raw_noise * raw_noise).ravel())
    sn = math.fsum((signal * raw_noise).ravel())
    ss = math.fsum((signal * signal).ravel())
    a, b, c = nn * (1.0 - rho), -2.0 * rho * sn, -rho * ss
    scale = (-b + math.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)
    return signal, scale * raw_noise, g0


def generate_planted_trace(d: int, T: int, r: int, rho: float, seed: int = 0) -> GradientTrace:
    """Trace with ``T`` increments ``H = S + N``: ``S`` rank ``r``, noise fraction ``rho``.

    ``g_t = g_0 + h_1 + ... + h_t``, so the trace has ``T + 1`` steps.
    """
    signal, noise, g0 = planted_increments(d, T, r, rho, seed)
    h = signal + noise
    values = np.empty((d, T + 1))
    values[:, 0] = g0
    values[:, 1:] = g0[:, None] + np.cumsum(h, axis=1)
    meta = {"generator": "planted", "r": r, "rho": rho, "seed": seed, "params": d}
    return GradientTrace(values, meta)


@dataclass(frozen=True)
class LogRegConfig:
    """Hyperparameters of the logistic-regression trace generator.

    ``l2`` enters the loss, ``weight_decay`` is AdamW's decoupled decay.
    """

    lr: float
    l2: float = 1e-3
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    label_noise: float = 0.5


# Learning rates sit past the stable range of the initial curvature
# (edge-of-stability regime), so logged gradients oscillate step to step.
DEFAULT_CONFIGS = {
    "sgd_momentum": LogRegConfig(lr=8.0, momentum=0.9),
    "adamw_like": LogRegConfig(lr=1.0, weight_decay=0.01),
}


def _logreg_data(n, d, seed, noise):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    w_true = rng.standard_normal(d) * (3.0 / math.sqrt(d))
    logits = x @ w_true + noise * rng.standard_normal(n)
    y = (logits > 0).astype(np.float64)
    w0 = 0.1 * rng.standard_normal(d)
    return x, y, w0


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def generate_logreg_trace(
    n_samples: int,
    d: int,
    optimizer: str,
    steps: int,
    seed: int = 0,
    **overrides,
) -> GradientTrace:
    """Full-batch gradients of l2-regularised logistic regression during training.

    ``g_t`` is the gradient of ``mean log(1 + exp(-y' x.w)) + l2/2 |w|^2`` at
    the iterate before update ``t``. Keyword overrides replace fields of the
    optimizer's default :class:`LogRegConfig`.

    Updates::

        sgd_momentum:  v = mu v + g;  w -= lr v
        adamw_like:    m = b1 m + (1 - b1) g;  s = b2 s + (1 - b2) g**2
                       w -= lr (m_hat / (sqrt(s_hat) + eps) + wd w)
    """
    if optimizer not in OPTIMIZERS:
        raise ConfigError(f"unknown optimizer {optimizer!r}; expected one of {OPTIMIZERS}")
    if steps < 1:
        raise PreconditionError("steps must be >= 1 (a trace needs at least one gradient)")
    if n_samples < 1 or d < 1:
        raise PreconditionError("n_samples and d must be positive")
    cfg = replace(DEFAULT_CONFIGS[optimizer], **overrides)
    x, y, w = _logreg_data(n_samples, d, seed, cfg.label_noise)
    out = np.empty((d, steps))
    vel = np.zeros(d)
    m1 = np.zeros(d)
    m2 = np.zeros(d)
    for t in range(steps):
        p = _sigmoid(x @ w)
        g = x.T @ (p - y) / n_samples + cfg.l2 * w
        if not np.all(np.isfinite(g)):
            raise DivergenceError(t, f"logistic regression diverged at step {t}")
        out[:, t] = g
        if optimizer == "sgd_momentum":
            vel = cfg.momentum * vel + g
            w = w - cfg.lr * vel
        else:
            m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * g
            m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * g * g
            m_hat = m1 / (1.0 - cfg.beta1 ** (t + 1))
            s_hat = m2 / (1.0 - cfg.beta2 ** (t + 1))
            w = w - cfg.lr * (m_hat / (np.sqrt(s_hat) + cfg.eps) + cfg.weight_decay * w)
    meta = {
        "generator": "logreg",
        "optimizer": optimizer,
        "n_samples": n_samples,
        "steps": steps,
        "seed": seed,
        "params": d,
        **{f"hp_{k}": v for k, v in asdict(cfg).items()},
    }
    return GradientTrace(out, meta)
