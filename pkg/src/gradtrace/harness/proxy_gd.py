"""Gradient descent driven by history-based proxy directions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError, PreconditionError
from ..predictors import OnlinePredictor
from .problems import SmoothObjective

BOUND_SLACK = 1e-9
LEMMA_SLACK = 1e-9

# Test fixture: use the current gradient itself as the proxy. Not history-based.
EXACT_GRADIENT = "exact-gradient"


@dataclass(frozen=True, eq=False)
class ProxyGdRun:
    iterates: np.ndarray      # (T + 1, d), theta_0..theta_T
    gradients: np.ndarray     # (T, d), g_t = grad F(theta_t) for t < T
    proxies: np.ndarray       # (T, d), m_t
    values: np.ndarray        # (T + 1,), F(theta_t)
    residual_sq: np.ndarray   # (T,), |g_t - m_t|^2
    grad_sq: np.ndarray       # (T,), |g_t|^2
    eta: float
    lower_bound: float
    avg_sq_grad: float
    min_sq_grad: float
    proxy_path: float
    bound: float

    @property
    def horizon(self) -> int:
        return len(self.grad_sq)

    @property
    def satisfied(self) -> bool:
        return self.avg_sq_grad <= self.bound + BOUND_SLACK * (1.0 + abs(self.bound))


def run_proxy_gd(
    objective: SmoothObjective,
    predictor,
    eta: float,
    T: int,
    theta0,
) -> ProxyGdRun:
    """Iterate ``theta_{t+1} = theta_t - eta * m_t`` for ``T`` steps.

    ``predictor`` is a :class:`PredictorConfig` fed the true gradients online,
    or :data:`EXACT_GRADIENT` for plain gradient descent.
    """
    if not eta > 0.0:
        raise PreconditionError(f"eta must be positive, got {eta}")
    if eta > 1.0 / objective.smoothness:
        raise PreconditionError(f"eta={eta} exceeds 1/L={1.0 / objective.smoothness}")
    if T < 1:
        raise PreconditionError(f"T must be >= 1, got {T}")
    theta = np.array(theta0, dtype=np.float64)
    d = objective.dim
    if theta.shape != (d,):
        raise PreconditionError(f"theta0 must have shape ({d},), got {theta.shape}")
    exact = isinstance(predictor, str) and predictor == EXACT_GRADIENT
    state = None if exact else OnlinePredictor(predictor, d)

    iterates = np.empty((T + 1, d))
    grads = np.empty((T, d))
    proxies = np.empty((T, d))
    values = np.empty(T + 1)
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T):
            f, g = objective.value_and_grad(theta)
            m = g if exact else state.predict()
            iterates[t] = theta
            values[t] = f
            grads[t] = g
            proxies[t] = m
            theta = theta - eta * m
            if not (math.isfinite(f) and np.isfinite(theta).all()):
                raise DivergenceError(t, f"proxy gradient descent diverged at step {t}")
            if state is not None:
                state.observe(g)
        iterates[T] = theta
        values[T] = objective.value(theta)
    if not math.isfinite(values[T]):
        raise DivergenceError(T)

    delta = grads - proxies
    residual_sq = np.einsum("ij,ij->i", delta, delta)
    grad_sq = np.einsum("ij,ij->i", grads, grads)
    proxy_path = math.fsum(residual_sq)
    avg = math.fsum(grad_sq) / T
    bound = 2.0 * (values[0] - objective.lower_bound) / (eta * T) + proxy_path / T
    return ProxyGdRun(
        iterates=iterates,
        gradients=grads,
        proxies=proxies,
        values=values,
        residual_sq=residual_sq,
        grad_sq=grad_sq,
        eta=float(eta),
        lower_bound=objective.lower_bound,
        avg_sq_grad=avg,
        min_sq_grad=float(grad_sq.min()),
        proxy_path=proxy_path,
        bound=bound,
    )


@dataclass(frozen=True, eq=False)
class LemmaC1Report:
    """One-step descent check ``F_{t+1} <= F_t - eta/2 |g_t|^2 + eta/2 |delta_t|^2``.

    ``margins[t]`` is RHS minus LHS; a step violates when the margin is below
    ``-LEMMA_SLACK`` times the magnitude of the terms involved.
    """

    margins: np.ndarray
    violations: list

    @property
    def violation_count(self) -> int:
        return len(self.violations)


def lemma_c1_check(run: ProxyGdRun) -> LemmaC1Report:
    f_now, f_next = run.values[:-1], run.values[1:]
    half = 0.5 * run.eta
    rhs = f_now - half * run.grad_sq + half * run.residual_sq
    margins = rhs - f_next
    scale = np.maximum.reduce([
        np.abs(f_now), np.abs(f_next), half * run.grad_sq, half * run.residual_sq,
        np.full_like(f_now, np.finfo(float).tiny),
    ])
    bad = np.flatnonzero(margins < -LEMMA_SLACK * scale)
    return LemmaC1Report(margins, [int(t) for t in bad])


def proxy_gd_report(objective: SmoothObjective, predictor, run: ProxyGdRun) -> dict:
    return {
        "objective": {
            "family": objective.family,
            "dim": objective.dim,
            "c": objective.c,
            "smoothness": objective.smoothness,
            "lower_bound": objective.lower_bound,
        },
        "predictor": predictor if isinstance(predictor, str) else predictor.spec(),
        "eta": run.eta,
        "T": run.horizon,
        "avg_sq_grad": run.avg_sq_grad,
        "min_sq_grad": run.min_sq_grad,
        "proxy_path": run.proxy_path,
        "bound": run.bound,
        "satisfied": run.satisfied,
        "lemma_c1_violations": lemma_c1_check(run).violation_count,
    }
