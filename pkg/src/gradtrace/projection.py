"""Seeded Gaussian sketches ``R`` with entries ``N(0, 1/k)``.

Sampler (generator id 1): Philox4x64-10 keyed by ``(seed, 0)``, evaluated at
counters 1, 2, 3, ... (the stream ``numpy.random.Philox(key=seed)`` emits).
Consecutive raw 64-bit words ``(a, b)`` become uniforms
``u = ((w >> 11) + 0.5) * 2**-53`` in the open interval (0, 1), and the
Box-Muller pair ``sqrt(-2 ln u_a) * (cos 2 pi u_b, sin 2 pi u_b)`` fills the
matrix in row-major order. Entries are scaled by ``1 / sqrt(k)``.

Projection files (``GPRJ``) store the matrix itself, so a saved sketch is
reused exactly even where libm differences could perturb regeneration.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, PreconditionError, TraceCorruptionError, TraceFormatError
from .trace import GradientTrace, column_sq_norms

DEFAULT_K = 256
GENERATOR_ID = 1
GENERATOR_NAME = "philox4x64-10/box-muller/v1"
MAGIC = b"GPRJ"
VERSION = 1
HEADER = struct.Struct("<4sIIB3xQQQ")
_PAIR_CHUNK = 1 << 21
_U53 = 2.0 ** -53


def _uniforms(raw: np.ndarray) -> np.ndarray:
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _U53


def standard_normals(seed: int, n: int) -> np.ndarray:
    """First ``n`` standard normals of the pinned stream for ``seed``."""
    if not 0 <= seed < 2 ** 64:
        raise PreconditionError(f"seed must be an unsigned 64-bit integer, got {seed}")
    bitgen = np.random.Philox(key=int(seed))
    out = np.empty(n + (n & 1), dtype=np.float64)
    pairs = len(out) // 2
    done = 0
    while done < pairs:
        m = min(_PAIR_CHUNK, pairs - done)
        raw = bitgen.random_raw(2 * m)
        radius = np.sqrt(-2.0 * np.log(_uniforms(raw[0::2])))
        angle = (2.0 * np.pi) * _uniforms(raw[1::2])
        out[2 * done:2 * (done + m):2] = radius * np.cos(angle)
        out[2 * done + 1:2 * (done + m):2] = radius * np.sin(angle)
        done += m
    return out[:n]


@dataclass(frozen=True, eq=False)
class ProjectionSpec:
    k: int
    d: int
    seed: int
    matrix: np.ndarray
    generator_id: int = GENERATOR_ID

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.shape != (self.k, self.d):
            raise DimensionError(f"projection matrix has shape {m.shape}, expected ({self.k}, {self.d})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def make_projection(d: int, k: int = DEFAULT_K, seed: int = 0) -> ProjectionSpec:
    if k < 1 or d < 1:
        raise PreconditionError(f"k and d must be >= 1 (k={k}, d={d})")
    z = standard_normals(seed, k * d).reshape(k, d)
    z *= 1.0 / np.sqrt(k)
    return ProjectionSpec(k, d, seed, z)


def apply_projection(proj: ProjectionSpec, trace: GradientTrace) -> GradientTrace:
    if trace.dim != proj.d:
        raise DimensionError(f"trace dim {trace.dim} does not match projection d {proj.d}")
    meta = {
        **trace.meta,
        "projection_seed": str(proj.seed),
        "projection_k": str(proj.k),
        "projection_generator": str(proj.generator_id),
        "source_dim": str(proj.d),
    }
    return GradientTrace(proj.matrix @ trace.values, meta)


def save_projection(proj: ProjectionSpec, path) -> None:
    header = HEADER.pack(MAGIC, VERSION, proj.generator_id, 1, proj.k, proj.d, proj.seed)
    Path(path).write_bytes(header + np.ascontiguousarray(proj.matrix, dtype="<f8").tobytes())


def load_projection(path) -> ProjectionSpec:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < HEADER.size:
        raise TraceFormatError(f"{path}: file shorter than the {HEADER.size}-byte header")
    magic, version, gen, dtype, k, d, seed = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise TraceFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise TraceFormatError(f"{path}: unsupported version {version}")
    if dtype != 1:
        raise TraceFormatError(f"{path}: unsupported dtype code {dtype}")
    if len(raw) - HEADER.size != 8 * k * d:
        raise TraceCorruptionError(f"{path}: payload does not hold a {k}x{d} float64 matrix")
    matrix = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).reshape(k, d)
    return ProjectionSpec(int(k), int(d), int(seed), matrix, int(gen))


@dataclass(frozen=True, eq=False)
class DistortionStats:
    """Squared-norm ratios ``|Rx|^2 / |x|^2`` over nonzero input columns."""

    pair_count: int
    max_relative_norm_error: float
    fraction_within: dict = field(default_factory=dict)
    ratios: np.ndarray | None = None


def distortion_check(proj: ProjectionSpec, vectors, tolerances=(0.05, 0.1, 0.2, 0.5)) -> DistortionStats:
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != proj.d:
        raise DimensionError(f"vectors have dimension {x.shape[0]}, projection expects {proj.d}")
    src = column_sq_norms(x)
    keep = src > 0.0
    if not keep.any():
        raise PreconditionError("distortion check needs at least one nonzero vector")
    x = x[:, keep]
    ratios = column_sq_norms(proj.matrix @ x) / src[keep]
    err = np.abs(ratios - 1.0)
    fractions = {float(tol): float(np.mean(err <= tol)) for tol in sorted(tolerances)}
    return DistortionStats(len(ratios), float(err.max()), fractions, ratios)
