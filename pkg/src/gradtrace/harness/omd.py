"""Optimistic mirror descent on online linear problems (Euclidean mirror map)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DivergenceError, PreconditionError, UndefinedMetricError
from ..predictors import OnlinePredictor, PredictorConfig
from .problems import OnlineLinearProblem

VARIANTS = ("as_written", "two_step")
FEASIBILITY_TOL = 1e-9
REGRET_SLACK = 1e-6


def _project_ball(x, radius):
    n = np.linalg.norm(x)
    return x if n <= radius else x * (radius / n)


def diameter(radius: float) -> float:
    """``D`` with ``D**2 = sup_{u,v in ball} |u - v|**2 / 2 = 2 radius**2``."""
    return math.sqrt(2.0) * radius


def tune_eta(proxy_path: float, D_phi: float) -> float:
    """Step size ``D_phi / sqrt(proxy_path)``.

    ``proxy_path`` is the residual energy over the played rounds. Raises
    :class:`UndefinedMetricError` when it is not positive (perfect prediction),
    in which case callers fall back to a configured step size.
    """
    if not proxy_path > 0.0:
        raise UndefinedMetricError("tuned_eta", "step-size tuning is degenerate: zero prediction error")
    if not D_phi > 0.0:
        raise PreconditionError(f"D_phi must be positive, got {D_phi}")
    return D_phi / math.sqrt(proxy_path)


@dataclass(frozen=True, eq=False)
class OmdRun:
    iterates: np.ndarray
    predictions: np.ndarray
    residual_sq: np.ndarray
    eta: float
    D_phi: float
    measured_regret: float
    bound_untuned: float
    bound_tuned: float
    variant: str
    max_grad_norm: float
    scale: float

    @property
    def proxy_path(self) -> float:
        return math.fsum(self.residual_sq)

    @property
    def satisfied(self) -> bool:
        return self.measured_regret <= self.bound_untuned + REGRET_SLACK * self.scale


def loss_residual_energy(problem: OnlineLinearProblem, predictor: PredictorConfig) -> float:
    """Prediction error over all rounds; losses do not depend on the iterates."""
    state = OnlinePredictor(predictor, problem.dim)
    total = []
    for u in problem.losses:
        d = u - state.predict()
        total.append(float(d @ d))
        state.observe(u)
    return math.fsum(total)


def run_omd(
    problem: OnlineLinearProblem,
    predictor: PredictorConfig,
    eta: float,
    variant: str = "two_step",
) -> OmdRun:
    """Play ``problem`` with predictions from ``predictor``.

    ``as_written`` keeps one sequence, ``theta_{t+1} = Proj(theta_t - eta m_t)``.
    ``two_step`` keeps a secondary point ``y`` updated with observed
    gradients, ``y_{t+1} = Proj(y_t - eta g_t)``, and plays the optimistic point
    ``theta_t = Proj(y_t - eta m_t)``. Both start at the ball centre.
    """
    if variant not in VARIANTS:
        raise ConfigError(f"unknown OMD variant {variant!r}; expected one of {VARIANTS}")
    if not eta > 0.0 or not math.isfinite(eta):
        raise PreconditionError(f"eta must be positive and finite, got {eta}")
    T, d = problem.losses.shape
    rho = problem.radius
    state = OnlinePredictor(predictor, d)
    iterates = np.empty((T, d))
    preds = np.empty((T, d))
    res_sq = np.empty(T)
    played = []
    anchor = np.zeros(d)
    for t, g in enumerate(problem.losses):
        m = state.predict()
        if variant == "two_step":
            theta = _project_ball(anchor - eta * m, rho)
        else:
            theta = anchor
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(t)
        if np.linalg.norm(theta) > rho + FEASIBILITY_TOL:
            raise AssertionError(f"iterate left the feasible ball at round {t}")
        iterates[t] = theta
        preds[t] = m
        delta = g - m
        res_sq[t] = float(delta @ delta)
        played.append(float(g @ theta))
        if variant == "two_step":
            anchor = _project_ball(anchor - eta * g, rho)
        else:
            anchor = _project_ball(theta - eta * m, rho)
        state.observe(g)
    regret = math.fsum(played) - problem.comparator_value()
    D = diameter(rho)
    path = math.fsum(res_sq)
    return OmdRun(
        iterates=iterates,
        predictions=preds,
        residual_sq=res_sq,
        eta=float(eta),
        D_phi=D,
        measured_regret=regret,
        bound_untuned=D * D / eta + 0.5 * eta * path,
        bound_tuned=math.sqrt(2.0) * D * math.sqrt(path),
        variant=variant,
        max_grad_norm=float(np.max(np.linalg.norm(problem.losses, axis=1))),
        scale=rho * math.fsum(np.linalg.norm(problem.losses, axis=1)),
    )


def omd_report(problem: OnlineLinearProblem, predictor: PredictorConfig, run: OmdRun) -> dict:
    return {
        "problem": {
            "kind": problem.kind,
            "dim": problem.dim,
            "horizon": problem.horizon,
            "radius": problem.radius,
            "seed": problem.seed,
        },
        "predictor": predictor.spec(),
        "eta": run.eta,
        "variant": run.variant,
        "regret": run.measured_regret,
        "bound_untuned": run.bound_untuned,
        "bound_tuned": run.bound_tuned,
        "satisfied": run.satisfied,
    }
