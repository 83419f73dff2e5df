"""Problem instances for the optimisation testbeds."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NumericalFailure, PreconditionError

LOSS_KINDS = ("constant", "drifting", "adversarial-rotation")
OBJECTIVE_FAMILIES = ("quadratic", "quad_plus_cos")


@dataclass(frozen=True, eq=False)
class OnlineLinearProblem:
    """Linear losses ``f_t(theta) = <u_t, theta>`` on the ball ``|theta| <= radius``.

    Row ``t`` of ``losses`` is the loss vector of round ``t + 1``.
    """

    losses: np.ndarray
    radius: float
    kind: str = "custom"
    seed: int | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        u = np.array(self.losses, dtype=np.float64)
        if u.ndim != 2 or u.shape[0] < 1:
            raise PreconditionError(f"losses must be a (T, d) array with T >= 1, got {u.shape}")
        if not np.all(np.isfinite(u)):
            raise PreconditionError("loss vectors must be finite")
        if not self.radius > 0:
            raise PreconditionError(f"radius must be positive, got {self.radius}")
        u.setflags(write=False)
        object.__setattr__(self, "losses", u)

    @property
    def dim(self) -> int:
        return self.losses.shape[1]

    @property
    def horizon(self) -> int:
        return self.losses.shape[0]

    def comparator_value(self) -> float:
        """``min_{|x| <= radius} <sum_t u_t, x> = -radius * |sum_t u_t|``."""
        return -self.radius * float(np.linalg.norm(self.losses.sum(axis=0)))


def _random_orthogonal(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _rotate(coords, angles):
    # rotate coordinate pairs (0,1), (2,3), ... by the given per-row angles
    out = coords.copy()
    n = coords.shape[1] // 2 * 2
    c, s = np.cos(angles)[:, None], np.sin(angles)[:, None]
    x, y = coords[:, 0:n:2], coords[:, 1:n:2]
    out[:, 0:n:2] = c * x - s * y
    out[:, 1:n:2] = s * x + c * y
    return out


def make_online_problem(
    dim: int,
    horizon: int,
    kind: str = "drifting",
    seed: int = 0,
    radius: float = 1.0,
    omega: float = 0.01,
) -> OnlineLinearProblem:
    """Seeded loss sequence.

    ``constant`` repeats one vector, ``drifting`` rotates it slowly
    (``u_t = R(omega * t) u`` in a random orthonormal frame), and
    ``adversarial-rotation`` jumps to an independent random angle every round.
    """
    if kind not in LOSS_KINDS:
        raise ConfigError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")
    if dim < 1 or horizon < 1:
        raise PreconditionError("dim and horizon must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(dim)
    if kind == "constant":
        losses = np.tile(u, (horizon, 1))
    else:
        frame = _random_orthogonal(rng, dim)
        t = np.arange(1, horizon + 1, dtype=np.float64)
        if kind == "drifting":
            angles = omega * t
        else:
            angles = rng.uniform(0.0, 2.0 * np.pi, size=horizon)
        coords = np.tile(frame.T @ u, (horizon, 1))
        losses = _rotate(coords, angles) @ frame.T
    return OnlineLinearProblem(losses, radius, kind, seed, {"omega": omega} if kind == "drifting" else {})


def power_iteration(a: np.ndarray, tol: float = 1e-10, max_iter: int = 100_000, seed: int = 0):
    """Largest eigenvalue of a symmetric PSD matrix.

    Stops when the Rayleigh quotient changes by less than ``tol`` relative;
    raises :class:`NumericalFailure` after ``max_iter`` iterations.
    """
    v = np.random.default_rng(seed).standard_normal(a.shape[0])
    v /= np.linalg.norm(v)
    lam = float(v @ a @ v)
    for it in range(1, max_iter + 1):
        w = a @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        new = float(v @ a @ v)
        if abs(new - lam) <= tol * max(abs(new), 1e-300):
            return new
        lam = new
    raise NumericalFailure(f"power iteration did not converge in {max_iter} iterations (last {lam})")


@dataclass(frozen=True, eq=False)
class SmoothObjective:
    """``F(x) = x^T A x / 2 + c * sum_i cos(x_i)``; ``c = 0`` gives the quadratic.

    ``smoothness`` is ``lambda_max(A) + c`` and ``lower_bound`` is ``-c * d``
    (``0`` for the quadratic), a valid if loose floor.
    """

    family: str
    A: np.ndarray
    c: float
    smoothness: float
    lower_bound: float
    eigenvalues: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def value(self, x) -> float:
        return self.value_and_grad(x)[0]

    def grad(self, x) -> np.ndarray:
        return self.value_and_grad(x)[1]

    def value_and_grad(self, x):
        ax = self.A @ x
        f = 0.5 * float(x @ ax)
        if self.c:
            f += self.c * float(np.cos(x).sum())
            return f, ax - self.c * np.sin(x)
        return f, ax


def make_objective(
    family: str,
    dim: int,
    seed: int = 0,
    c: float = 1.0,
    lam_max: float = 4.0,
    lam_min: float = 0.0,
) -> SmoothObjective:
    """``A = Q diag(lam) Q^T`` with known spectrum.

    The spectrum has one eigenvalue at ``lam_max`` and the rest drawn from
    ``[lam_min, 0.8 * lam_max]``, so power iteration converges quickly.
    """
    if family not in OBJECTIVE_FAMILIES:
        raise ConfigError(f"unknown objective family {family!r}; expected one of {OBJECTIVE_FAMILIES}")
    if c < 0:
        raise ConfigError(f"c must be nonnegative, got {c}")
    rng = np.random.default_rng(seed)
    lam = np.concatenate([[lam_max], rng.uniform(lam_min, 0.8 * lam_max, size=dim - 1)])
    q = _random_orthogonal(rng, dim)
    a = (q * lam) @ q.T
    a = 0.5 * (a + a.T)
    lmax = power_iteration(a, seed=seed)
    if family == "quadratic":
        return SmoothObjective(family, a, 0.0, lmax, 0.0, np.sort(lam)[::-1])
    return SmoothObjective(family, a, float(c), lmax + c, -c * dim, np.sort(lam)[::-1])
