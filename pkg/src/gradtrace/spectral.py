"""Increment matrices, their singular spectra and predictable ranks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import PreconditionError, SpectrumError, UndefinedMetricError
from .trace import GradientTrace

# Golub-Kahan bidiagonalisation + implicit QR; deterministic for fixed input.
LAPACK_DRIVER = "gesvd"
DEFAULT_EPSILONS = (0.10, 0.05, 0.01)


@dataclass(frozen=True, eq=False)
class IncrementMatrix:
    """Column ``t - 1`` holds ``h_t = g_t - g_{t-1}``."""

    columns: np.ndarray

    @property
    def dim(self) -> int:
        return self.columns.shape[0]

    @property
    def count(self) -> int:
        return self.columns.shape[1]


@dataclass(frozen=True, eq=False)
class Spectrum:
    singular_values: np.ndarray
    total_energy: float
    cumulative_fractions: np.ndarray
    frobenius_sq: float

    def __len__(self):
        return len(self.singular_values)


@dataclass(frozen=True)
class RankProfile:
    epsilons: list
    ranks: list


def increment_matrix(trace: GradientTrace) -> IncrementMatrix:
    if trace.steps < 2:
        raise PreconditionError(f"increments need at least 2 steps, trace has {trace.steps}")
    cols = trace.values[:, 1:] - trace.values[:, :-1]
    cols.setflags(write=False)
    return IncrementMatrix(cols)


def _as_array(H):
    return H.columns if isinstance(H, IncrementMatrix) else np.asarray(H, dtype=np.float64)


def _svd(a, compute_uv):
    try:
        return scipy.linalg.svd(
            a, full_matrices=False, compute_uv=compute_uv,
            lapack_driver=LAPACK_DRIVER, check_finite=True,
        )
    except np.linalg.LinAlgError as exc:
        raise SpectrumError(
            f"SVD ({LAPACK_DRIVER}) of a {a.shape[0]}x{a.shape[1]} matrix did not converge: {exc}"
        ) from exc


def spectrum_from_values(singular_values, frobenius_sq=None) -> Spectrum:
    s = np.asarray(singular_values, dtype=np.float64)
    sq = s * s
    total = math.fsum(sq)
    if total > 0.0:
        cum = np.cumsum(sq) / total
    else:
        cum = np.zeros_like(sq)
    s.setflags(write=False)
    cum.setflags(write=False)
    return Spectrum(s, total, cum, total if frobenius_sq is None else frobenius_sq)


def singular_spectrum(H) -> Spectrum:
    """Thin singular value set (``min(d, T)`` values), nonincreasing."""
    a = _as_array(H)
    if a.size == 0:
        raise PreconditionError("increment matrix is empty")
    s = _svd(a, compute_uv=False)
    return spectrum_from_values(s, math.fsum((a * a).ravel()))


def _check_epsilon(epsilon):
    if not 0.0 < epsilon < 1.0:
        raise PreconditionError(f"epsilon must lie in (0, 1), got {epsilon}")


def predictable_rank(spec: Spectrum, epsilon: float) -> int:
    """Smallest ``r`` whose top-``r`` energy fraction is at least ``1 - epsilon``.

    The comparison is exact on the computed cumulative fractions; a tie
    resolves to the smaller rank.
    """
    _check_epsilon(epsilon)
    if not spec.total_energy > 0.0:
        raise UndefinedMetricError("predictable_rank", "predictable rank is undefined: zero increment energy")
    hits = np.flatnonzero(spec.cumulative_fractions >= 1.0 - epsilon)
    return int(hits[0]) + 1 if len(hits) else len(spec)


def rank_profile(spec: Spectrum, epsilons=DEFAULT_EPSILONS) -> RankProfile:
    eps = [float(e) for e in epsilons]
    return RankProfile(eps, [predictable_rank(spec, e) for e in eps])


def tail_energy(spec: Spectrum, r: int) -> float:
    """``sum_{i > r} sigma_i**2``."""
    if not 0 <= r <= len(spec):
        raise PreconditionError(f"r={r} outside [0, {len(spec)}]")
    s = spec.singular_values[r:]
    return math.fsum(s * s)


def best_rank_r_residual(H, r: int) -> float:
    """Squared Frobenius error of the truncated-SVD reconstruction of rank ``r``.

    The residual is formed explicitly from ``H - U_r S_r V_r^T`` rather than
    from the discarded singular values.
    """
    a = _as_array(H)
    if not 1 <= r <= min(a.shape):
        raise PreconditionError(f"r={r} outside [1, {min(a.shape)}]")
    u, s, vt = _svd(a, compute_uv=True)
    approx = (u[:, :r] * s[:r]) @ vt[:r]
    diff = a - approx
    return math.fsum((diff * diff).ravel())


def windowed_rank(trace: GradientTrace, W: int, stride: int, epsilon: float):
    """``(start, end, rank)`` per window ``[start, end)``; increments stay inside a window.

    ``rank`` is ``None`` when the window's increments are all zero.
    """
    _check_epsilon(epsilon)
    if W < 2:
        raise PreconditionError(f"window must be >= 2 for increments, got {W}")
    if W > trace.steps:
        raise PreconditionError(f"window {W} is longer than the trace ({trace.steps} steps)")
    if stride < 1:
        raise PreconditionError(f"stride must be positive, got {stride}")
    out = []
    for start in range(0, trace.steps - W + 1, stride):
        block = trace.values[:, start:start + W]
        spec = singular_spectrum(block[:, 1:] - block[:, :-1])
        rank = predictable_rank(spec, epsilon) if spec.total_energy > 0.0 else None
        out.append((start, start + W, rank))
    return out
