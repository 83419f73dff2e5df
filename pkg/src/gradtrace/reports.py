"""Deterministic JSON and CSV serialisation of analysis results.

Floats are written with 17 significant digits; non-finite floats and
undefined metrics become JSON ``null`` / empty CSV cells.
"""
from __future__ import annotations

import json
import math

import numpy as np

from .metrics import PredictabilityReport
from .spectral import RankProfile, Spectrum
from .trace import format_float

KAPPA_COLUMNS = ("one-step", "ema-0.9", "ema-0.99", "trend")


def _fmt_number(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format_float(x)


def dumps(obj, indent=2, _level=0) -> str:
    """JSON text with floats at 17 significant digits, in insertion order."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_, int, float, np.integer, np.floating)):
        return _fmt_number(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(obj, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps(obj) + "\n")


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return _fmt_number(x).replace("null", "")


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def report_dict(run: str, report: PredictabilityReport) -> dict:
    windows = []
    if report.windows is not None:
        windows = [{"start": s, "end": e, "kappa": k} for s, e, k in report.windows.entries]
    return {
        "run": run,
        "predictor": report.predictor.spec(),
        "path_length": report.path_length,
        "energy": report.energy,
        "kappa": report.kappa,
        "alpha": report.alpha,
        "alpha_bound": report.alpha_bound,
        "bound_applicable": report.bound_applicable,
        "conflicts": list(report.zero_grad_conflicts),
        "windows": windows,
    }


def kappa_table(rows, columns=KAPPA_COLUMNS) -> str:
    """One row per run; ``rows`` is a list of ``(run, {label: kappa})``."""
    return csv_text(["run", *columns], [[run, *(vals.get(c) for c in columns)] for run, vals in rows])


def rank_table(rows) -> str:
    """``rows`` is a list of ``(run, RankProfile | None, params)``; columns follow the epsilons."""
    eps = None
    for _, prof, _ in rows:
        if prof is not None:
            eps = prof.epsilons
            break
    eps = eps or [0.10, 0.05, 0.01]
    header = ["run", *(f"r*({e:.2f})" for e in eps), "params"]
    body = []
    for run, prof, params in rows:
        ranks = prof.ranks if prof is not None else [None] * len(eps)
        body.append([run, *ranks, params])
    return csv_text(header, body)


def spectrum_table(spec: Spectrum) -> str:
    s = spec.singular_values
    rows = [[i + 1, s[i], s[i] * s[i], spec.cumulative_fractions[i]] for i in range(len(s))]
    return csv_text(["index", "sigma", "sigma_sq", "cumulative_fraction"], rows)


def rank_dict(prof: RankProfile | None) -> dict | None:
    if prof is None:
        return None
    return {f"{e:.2f}": r for e, r in zip(prof.epsilons, prof.ranks)}
