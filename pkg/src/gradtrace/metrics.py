"""Path-length, predictability index and the predictor-magnitude bound."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, PreconditionError, UndefinedMetricError
from .predictors import (
    PredictionSeries,
    PredictorConfig,
    ResidualSeries,
    residuals,
    run_predictor,
)
from .trace import GradientTrace, TraceDiagnostics, column_sq_norms, validate_trace


def path_length(res: ResidualSeries) -> float:
    """Sum of squared residual norms, accumulated with ``math.fsum``."""
    return math.fsum(res.per_step_sq_norms)


def predictability_index(res: ResidualSeries, diag: TraceDiagnostics) -> float:
    if not diag.total_energy > 0.0:
        raise UndefinedMetricError("kappa", "kappa is undefined: total gradient energy is zero")
    return path_length(res) / diag.total_energy


def magnitude_ratio_diagnostic(trace: GradientTrace, pred: PredictionSeries):
    """Return ``(alpha, alpha_bound, zero_grad_conflicts)``.

    ``alpha`` is the largest ``|m_t| / |g_t|`` over steps with ``g_t != 0`` and
    ``alpha_bound = (1 + alpha)**2`` caps kappa. Steps where ``g_t == 0`` but
    ``m_t != 0`` break that cap and are returned as conflicts. ``alpha`` and
    the bound are ``None`` when every gradient is zero.
    """
    if pred.values.shape != trace.values.shape:
        raise DimensionError(
            f"prediction shape {pred.values.shape} != trace shape {trace.values.shape}"
        )
    g_norm = np.sqrt(column_sq_norms(trace.values))
    m_norm = np.sqrt(column_sq_norms(pred.values))
    nonzero = g_norm > 0.0
    conflicts = [int(t) for t in np.flatnonzero(~nonzero & (m_norm > 0.0))]
    if not nonzero.any():
        return None, None, conflicts
    alpha = float(np.max(m_norm[nonzero] / g_norm[nonzero]))
    return alpha, (1.0 + alpha) ** 2, conflicts


@dataclass(frozen=True)
class WindowedKappaSeries:
    """Per-window kappa; windows are half-open step ranges ``[start, end)``.

    ``kappa`` is ``None`` for a window with zero gradient energy.
    """

    window: int
    stride: int
    entries: list


def _window_starts(steps, W, stride):
    if W < 1 or stride < 1:
        raise PreconditionError(f"window and stride must be positive (W={W}, stride={stride})")
    if W > steps:
        raise PreconditionError(f"window {W} is longer than the trace ({steps} steps)")
    # trailing partial windows are dropped
    return range(0, steps - W + 1, stride)


def windowed_kappa_from(res: ResidualSeries, energy_per_step, W: int, stride: int):
    entries = []
    for start in _window_starts(res.steps, W, stride):
        end = start + W
        energy = math.fsum(energy_per_step[start:end])
        if energy > 0.0:
            kappa = math.fsum(res.per_step_sq_norms[start:end]) / energy
        else:
            kappa = None
        entries.append((start, end, kappa))
    return WindowedKappaSeries(W, stride, entries)


def windowed_kappa(trace: GradientTrace, config: PredictorConfig, W: int, stride: int = 1):
    """Kappa over sliding windows of ``W`` steps.

    The predictor runs once over the whole trace, so its history carries
    across window boundaries; each window only aggregates its own steps.
    """
    res = residuals(trace, run_predictor(trace, config))
    return windowed_kappa_from(res, column_sq_norms(trace.values), W, stride)


@dataclass(frozen=True)
class PredictabilityReport:
    predictor: PredictorConfig
    path_length: float
    energy: float
    kappa: float | None
    alpha: float | None
    alpha_bound: float | None
    zero_grad_conflicts: list = field(default_factory=list)
    windows: WindowedKappaSeries | None = None

    @property
    def bound_applicable(self) -> bool:
        """Whether the ``(1 + alpha)**2`` cap on kappa is guaranteed to hold."""
        return self.alpha is not None and not self.zero_grad_conflicts


def predictability_report(
    trace: GradientTrace,
    config: PredictorConfig,
    window: int | None = None,
    stride: int | None = None,
    diag: TraceDiagnostics | None = None,
) -> PredictabilityReport:
    """All predictability metrics of one predictor on one trace.

    Raises :class:`UndefinedMetricError` when the trace has zero energy.
    """
    diag = diag or validate_trace(trace)
    pred = run_predictor(trace, config)
    res = residuals(trace, pred)
    kappa = predictability_index(res, diag)
    alpha, bound, conflicts = magnitude_ratio_diagnostic(trace, pred)
    windows = None
    if window is not None:
        windows = windowed_kappa_from(
            res, column_sq_norms(trace.values), window, stride or window
        )
    return PredictabilityReport(
        predictor=config,
        path_length=path_length(res),
        energy=diag.total_energy,
        kappa=kappa,
        alpha=alpha,
        alpha_bound=bound,
        zero_grad_conflicts=conflicts,
        windows=windows,
    )
