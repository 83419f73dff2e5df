"""Gradient trace data model and the on-disk trace formats.

Binary layout (little-endian)::

    offset  size  field
    0       4     magic b"GTRC"
    4       4     version (u32) = 1
    8       1     dtype (u8): 0 = float32, 1 = float64
    9       3     reserved, zero
    12      8     dim (u64)
    20      8     count (u64), number of logged vectors
    28      ...   payload, ``count`` vectors of ``dim`` values, step-major

The CSV variant holds one step per row and no header. Free-form metadata is
kept in a JSON sidecar ``<path>.meta.json`` next to either format.
"""
from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    PreconditionError,
    TraceCorruptionError,
    TraceFormatError,
    TraceValidationError,
)

MAGIC = b"GTRC"
VERSION = 1
HEADER = struct.Struct("<4sIB3xQQ")
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def column_sq_norms(values: np.ndarray) -> np.ndarray:
    """Squared Euclidean norm of every column, in a fixed summation order."""
    return np.einsum("ij,ij->j", values, values)


@dataclass(frozen=True, eq=False)
class GradientTrace:
    """Ordered gradients ``g_0..g_T``; column ``t`` of ``values`` is ``g_t``.

    ``values`` is stored as a read-only float64 array of shape ``(dim, steps)``.
    """

    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise PreconditionError(f"trace values must be 2-D, got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise PreconditionError(f"trace needs dim >= 1 and steps >= 1, got {values.shape}")
        bad = np.argwhere(~np.isfinite(values))
        if len(bad):
            row, step = (int(i) for i in bad[0])
            raise TraceValidationError(row, step, float(values[row, step]))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "meta", {str(k): str(v) for k, v in dict(self.meta).items()})

    @classmethod
    def from_steps(cls, rows, meta=None) -> GradientTrace:
        """Build a trace from a step-major sequence (row ``t`` is ``g_t``)."""
        arr = np.asarray(rows, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        return cls(arr.T, meta or {})

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def steps(self) -> int:
        return self.values.shape[1]

    def step(self, t: int) -> np.ndarray:
        return self.values[:, t]

    def with_meta(self, **extra) -> GradientTrace:
        return GradientTrace(self.values, {**self.meta, **extra})


@dataclass(frozen=True)
class TraceDiagnostics:
    zero_gradient_steps: list
    total_energy: float
    min_norm: float
    max_norm: float


def validate_trace(trace: GradientTrace) -> TraceDiagnostics:
    sq = column_sq_norms(trace.values)
    norms = np.sqrt(sq)
    return TraceDiagnostics(
        zero_gradient_steps=[int(t) for t in np.flatnonzero(sq == 0.0)],
        total_energy=math.fsum(sq),
        min_norm=float(norms.min()),
        max_norm=float(norms.max()),
    )


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _infer_format(path: Path, fmt):
    if fmt is not None:
        if fmt not in ("binary", "csv"):
            raise TraceFormatError(f"unknown trace format {fmt!r}")
        return fmt
    return "csv" if path.suffix.lower() == ".csv" else "binary"


def save_trace(trace: GradientTrace, path, format=None) -> None:
    """Write ``trace`` to ``path``; binary round-trips bit-exactly, CSV to 17 digits."""
    path = Path(path)
    fmt = _infer_format(path, format)
    if fmt == "binary":
        header = HEADER.pack(MAGIC, VERSION, 1, trace.dim, trace.steps)
        payload = np.ascontiguousarray(trace.values.T, dtype="<f8").tobytes()
        path.write_bytes(header + payload)
    else:
        with open(path, "w", newline="") as fh:
            for t in range(trace.steps):
                fh.write(",".join(format_float(x) for x in trace.values[:, t]))
                fh.write("\n")
    meta_file = _meta_path(path)
    if trace.meta:
        meta_file.write_text(json.dumps(trace.meta, sort_keys=True, indent=2) + "\n")
    elif meta_file.exists():
        meta_file.unlink()


def format_float(x) -> str:
    return format(float(x), ".17g")


def _read_binary(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < HEADER.size:
        raise TraceFormatError(f"{path}: file shorter than the {HEADER.size}-byte header")
    magic, version, dtype_code, dim, count = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise TraceFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise TraceFormatError(f"{path}: unsupported version {version}")
    if dtype_code not in _DTYPES:
        raise TraceFormatError(f"{path}: unknown dtype code {dtype_code}")
    if raw[9:12] != b"\x00\x00\x00":
        raise TraceFormatError(f"{path}: reserved header bytes are not zero")
    dtype = _DTYPES[dtype_code]
    expected = dim * count * dtype.itemsize
    if len(raw) - HEADER.size != expected:
        raise TraceCorruptionError(
            f"{path}: header says dim={dim}, count={count} ({expected} payload bytes), "
            f"found {len(raw) - HEADER.size}"
        )
    if dim < 1 or count < 1:
        raise TraceCorruptionError(f"{path}: dim and count must be >= 1 (dim={dim}, count={count})")
    flat = np.frombuffer(raw, dtype=dtype, offset=HEADER.size)
    return flat.reshape(count, dim).astype(np.float64).T


def _read_csv(path: Path, dim) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh)):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise TraceFormatError(f"{path}:{lineno + 1}: {exc}") from None
    if not rows:
        raise TraceCorruptionError(f"{path}: no steps")
    width = dim if dim is not None else len(rows[0])
    for t, row in enumerate(rows):
        if len(row) != width:
            raise TraceCorruptionError(f"{path}: step {t} has {len(row)} values, expected {width}")
    return np.array(rows, dtype=np.float64).T


def load_trace(path, format=None, dim=None) -> GradientTrace:
    """Read a trace written by :func:`save_trace` (or by any conforming writer).

    ``format`` is ``"binary"`` or ``"csv"``; when omitted it is inferred from the
    file suffix. ``dim``, if given, must match the stored dimension.
    """
    path = Path(path)
    fmt = _infer_format(path, format)
    values = _read_binary(path) if fmt == "binary" else _read_csv(path, dim)
    if dim is not None and values.shape[0] != dim:
        raise TraceCorruptionError(f"{path}: expected dim {dim}, found {values.shape[0]}")
    meta = {}
    meta_file = _meta_path(path)
    if meta_file.exists():
        meta = json.loads(meta_file.read_text())
    return GradientTrace(values, meta)
