"""History-based gradient predictors.

Every family produces ``m_t`` from ``g_0..g_{t-1}`` only, starting at
``m_0 = 0``:

* ``zero``      m_t = 0
* ``one_step``  m_t = g_{t-1}
* ``ema``       m_t = beta * m_{t-1} + (1 - beta) * g_{t-1}   (no bias correction)
* ``trend``     m_1 = g_0, m_t = g_{t-1} + gamma * (g_{t-1} - g_{t-2})
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, PreconditionError
from .trace import GradientTrace, column_sq_norms

FAMILIES = ("zero", "one_step", "ema", "trend")


@dataclass(frozen=True)
class PredictorConfig:
    family: str
    beta: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown predictor family {self.family!r}")
        if self.family == "ema":
            if self.beta is None or not 0.0 < self.beta < 1.0:
                raise ConfigError(f"ema requires 0 < beta < 1, got {self.beta!r}")
        elif self.beta is not None:
            raise ConfigError(f"beta is only valid for ema, not {self.family}")
        if self.family == "trend":
            gamma = 1.0 if self.gamma is None else float(self.gamma)
            if not math.isfinite(gamma):
                raise ConfigError(f"trend gamma must be finite, got {self.gamma!r}")
            object.__setattr__(self, "gamma", gamma)
        elif self.gamma is not None:
            raise ConfigError(f"gamma is only valid for trend, not {self.family}")

    @classmethod
    def parse(cls, text: str) -> PredictorConfig:
        """Parse ``zero``, ``one-step``, ``ema:0.9`` or ``trend:1.0``."""
        name, _, arg = text.strip().partition(":")
        name = name.strip().lower().replace("-", "_")
        if name == "onestep":
            name = "one_step"
        try:
            value = float(arg) if arg else None
        except ValueError:
            raise ConfigError(f"bad predictor parameter in {text!r}") from None
        if name == "ema":
            return cls("ema", beta=value)
        if name == "trend":
            return cls("trend", gamma=value)
        if arg:
            raise ConfigError(f"predictor {name!r} takes no parameter")
        return cls(name)

    @property
    def label(self) -> str:
        """Column label used in report tables (``one-step``, ``ema-0.9``, ``trend``)."""
        if self.family == "ema":
            return f"ema-{self.beta:g}"
        if self.family == "trend":
            return "trend" if self.gamma == 1.0 else f"trend-{self.gamma:g}"
        return self.family.replace("_", "-")

    def spec(self) -> str:
        if self.family == "ema":
            return f"ema:{self.beta!r}"
        if self.family == "trend":
            return f"trend:{self.gamma!r}"
        return self.family.replace("_", "-")


class OnlinePredictor:
    """Prefix-only predictor state.

    Call :meth:`predict` for ``m_t`` and then :meth:`observe` with ``g_t``.
    Used by the optimisation harness, where gradients only exist once the
    iterate they depend on has been produced.
    """

    def __init__(self, config: PredictorConfig, dim: int):
        self.config = config
        self.dim = dim
        self.t = 0
        self._m = np.zeros(dim)
        self._prev = None
        self._prev2 = None

    def predict(self) -> np.ndarray:
        return self._m.copy()

    def observe(self, g) -> None:
        g = np.asarray(g, dtype=np.float64)
        if g.shape != (self.dim,):
            raise DimensionError(f"expected gradient of shape ({self.dim},), got {g.shape}")
        cfg = self.config
        self._prev2, self._prev = self._prev, g.copy()
        if cfg.family == "one_step":
            self._m = self._prev.copy()
        elif cfg.family == "ema":
            self._m = cfg.beta * self._m + (1.0 - cfg.beta) * self._prev
        elif cfg.family == "trend":
            if self._prev2 is None:
                self._m = self._prev.copy()
            else:
                self._m = self._prev + cfg.gamma * (self._prev - self._prev2)
        self.t += 1


@dataclass(frozen=True, eq=False)
class PredictionSeries:
    values: np.ndarray
    config: PredictorConfig

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def steps(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class ResidualSeries:
    values: np.ndarray
    per_step_sq_norms: np.ndarray

    @property
    def steps(self) -> int:
        return self.values.shape[1]


def run_predictor(trace: GradientTrace, config: PredictorConfig) -> PredictionSeries:
    """Predictions ``m_0..m_T`` for every step of ``trace``."""
    if trace.steps < 1:
        raise PreconditionError("trace must hold at least one step")
    out = np.empty_like(trace.values)
    state = OnlinePredictor(config, trace.dim)
    for t in range(trace.steps):
        out[:, t] = state.predict()
        state.observe(trace.values[:, t])
    out.setflags(write=False)
    return PredictionSeries(out, config)


def residuals(trace: GradientTrace, predictions: PredictionSeries) -> ResidualSeries:
    if predictions.values.shape != trace.values.shape:
        raise DimensionError(
            f"prediction shape {predictions.values.shape} != trace shape {trace.values.shape}"
        )
    delta = trace.values - predictions.values
    delta.setflags(write=False)
    return ResidualSeries(delta, column_sq_norms(delta))
