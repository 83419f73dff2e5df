"""Command-line interface.

Exit codes: 0 success, 2 input or configuration error, 3 undefined metric
(zero energy), 4 numerical failure (SVD non-convergence, divergence).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import reports
from .errors import GradTraceError, InputError, NumericalFailure, UndefinedMetricError
from .harness import (
    EXACT_GRADIENT,
    generate_logreg_trace,
    generate_planted_trace,
    loss_residual_energy,
    make_objective,
    make_online_problem,
    omd_report,
    proxy_gd_report,
    run_omd,
    run_proxy_gd,
    tune_eta,
)
from .harness.omd import diameter
from .metrics import predictability_report
from .predictors import PredictorConfig
from .projection import (
    DEFAULT_K,
    apply_projection,
    load_projection,
    make_projection,
    save_projection,
)
from .spectral import (
    DEFAULT_EPSILONS,
    increment_matrix,
    rank_profile,
    singular_spectrum,
    windowed_rank,
)
from .trace import load_trace, save_trace, validate_trace

EXIT_OK, EXIT_INPUT, EXIT_UNDEFINED, EXIT_NUMERICAL = 0, 2, 3, 4
DEFAULT_PREDICTORS = "one-step,ema:0.9,ema:0.99,trend:1.0"


def _predictors(text):
    items = [p for p in text.split(",") if p.strip()]
    if not items:
        raise InputError("predictor list is empty")
    return [PredictorConfig.parse(p) for p in items]


def _epsilons(text):
    try:
        eps = [float(e) for e in text.split(",") if e.strip()]
    except ValueError:
        raise InputError(f"bad epsilon list {text!r}") from None
    if not eps or any(not 0.0 < e < 1.0 for e in eps):
        raise InputError(f"epsilons must lie in (0, 1), got {text!r}")
    return eps


def _emit(obj, path):
    if path:
        reports.write_json(obj, path)
    else:
        sys.stdout.write(reports.dumps(obj) + "\n")


def _write_text(text, path):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _load(args):
    trace = load_trace(args.trace, args.format)
    if getattr(args, "proj", None):
        trace = apply_projection(load_projection(args.proj), trace)
    return trace


def _rank_csv_path(args):
    if args.out_rank_csv:
        return args.out_rank_csv
    p = Path(args.out_csv)
    return str(p.with_name(p.stem + "_rank" + p.suffix))


def cmd_analyze(args) -> int:
    trace = _load(args)
    preds = _predictors(args.predictors)
    eps = _epsilons(args.epsilons)
    run = args.run or Path(args.trace).stem
    diag = validate_trace(trace)
    if args.window is not None and args.window > trace.steps:
        raise InputError(f"window {args.window} is longer than the trace ({trace.steps} steps)")
    undefined = []

    entries = []
    kappas = {}
    for cfg in preds:
        if diag.total_energy > 0.0:
            rep = predictability_report(trace, cfg, args.window, args.stride, diag)
            entries.append(reports.report_dict(run, rep))
            kappas[cfg.label] = rep.kappa
        else:
            undefined.append(f"kappa[{cfg.label}]")
            entries.append({"run": run, "predictor": cfg.spec(), "kappa": None})

    profile = None
    windowed = []
    if trace.steps >= 2:
        spec = singular_spectrum(increment_matrix(trace))
        if spec.total_energy > 0.0:
            profile = rank_profile(spec, eps)
        else:
            undefined.append("predictable_rank")
        if args.window is not None and args.window >= 2:
            for e in eps:
                rows = windowed_rank(trace, args.window, args.stride or args.window, e)
                windowed.append({
                    "epsilon": e,
                    "windows": [{"start": s, "end": t, "rank": r} for s, t, r in rows],
                })
    else:
        undefined.append("predictable_rank")

    params = trace.meta.get("params", trace.meta.get("source_dim", str(trace.dim)))
    out = {
        "run": run,
        "trace": {
            "dim": trace.dim,
            "steps": trace.steps,
            "total_energy": diag.total_energy,
            "zero_gradient_steps": diag.zero_gradient_steps,
            "meta": dict(sorted(trace.meta.items())),
        },
        "reports": entries,
        "ranks": reports.rank_dict(profile),
        "windowed_ranks": windowed,
        "undefined": undefined,
    }
    _emit(out, args.out_json)
    if args.out_csv:
        columns = [c.label for c in preds]
        _write_text(reports.kappa_table([(run, kappas)], columns), args.out_csv)
        _write_text(reports.rank_table([(run, profile, params)]), _rank_csv_path(args))
    if undefined:
        print(f"error: undefined metric(s): {', '.join(undefined)}", file=sys.stderr)
        return EXIT_UNDEFINED
    return EXIT_OK


def cmd_spectrum(args) -> int:
    trace = _load(args)
    spec = singular_spectrum(increment_matrix(trace))
    if not spec.total_energy > 0.0:
        raise UndefinedMetricError("spectrum", "spectrum is undefined: zero increment energy")
    text = reports.spectrum_table(spec)
    if args.out_csv:
        _write_text(text, args.out_csv)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_project(args) -> int:
    trace = load_trace(args.trace, args.format)
    if args.sweep_seeds:
        eps = _epsilons(args.epsilons)
        rows = []
        for seed in range(args.seed, args.seed + args.sweep_seeds):
            projected = apply_projection(make_projection(trace.dim, args.k, seed), trace)
            spec = singular_spectrum(increment_matrix(projected))
            prof = rank_profile(spec, eps) if spec.total_energy > 0.0 else None
            rows.append({"seed": seed, "ranks": reports.rank_dict(prof)})
        _emit({"k": args.k, "source_dim": trace.dim, "sweep": rows}, args.out_json)
        return EXIT_OK
    if args.proj:
        proj = load_projection(args.proj)
    else:
        proj = make_projection(trace.dim, args.k, args.seed)
    if args.proj_out:
        save_projection(proj, args.proj_out)
    projected = apply_projection(proj, trace)
    if args.trace_out:
        save_trace(projected, args.trace_out)
    return EXIT_OK


def _eta_for_omd(args, problem, cfg):
    if args.eta != "tuned":
        try:
            return float(args.eta)
        except ValueError:
            raise InputError(f"--eta must be a number or 'tuned', got {args.eta!r}") from None
    D = diameter(problem.radius)
    try:
        return tune_eta(loss_residual_energy(problem, cfg), D)
    except UndefinedMetricError:
        return args.fallback_eta


def cmd_simulate_omd(args) -> int:
    preds = _predictors(args.predictors)
    variant = args.variant.replace("-", "_")
    runs = []
    for seed in range(args.seed, args.seed + args.seeds):
        problem = make_online_problem(args.dim, args.horizon, args.kind, seed, args.radius, args.omega)
        for cfg in preds:
            run = run_omd(problem, cfg, _eta_for_omd(args, problem, cfg), variant)
            runs.append(omd_report(problem, cfg, run))
    _emit({
        "runs": runs,
        "satisfied_count": sum(r["satisfied"] for r in runs),
        "total": len(runs),
    }, args.out_json)
    return EXIT_OK


def cmd_simulate_proxy_gd(args) -> int:
    runs = []
    specs = [p for p in args.predictors.split(",") if p.strip()]
    if not specs:
        raise InputError("predictor list is empty")
    for seed in range(args.seed, args.seed + args.seeds):
        obj = make_objective(args.objective, args.dim, seed, c=args.c)
        eta = args.eta if args.eta is not None else 1.0 / obj.smoothness
        theta0 = np.random.default_rng(seed).standard_normal(args.dim)
        for text in specs:
            cfg = EXACT_GRADIENT if text.strip() == EXACT_GRADIENT else PredictorConfig.parse(text)
            run = run_proxy_gd(obj, cfg, eta, args.T, theta0)
            rep = proxy_gd_report(obj, cfg, run)
            rep["seed"] = seed
            runs.append(rep)
    _emit({
        "runs": runs,
        "satisfied_count": sum(r["satisfied"] for r in runs),
        "lemma_c1_violations": sum(r["lemma_c1_violations"] for r in runs),
        "total": len(runs),
    }, args.out_json)
    return EXIT_OK


def cmd_generate_planted(args) -> int:
    trace = generate_planted_trace(args.d, args.T, args.r, args.rho, args.seed)
    save_trace(trace, args.out, args.format)
    return EXIT_OK


def cmd_generate_logreg(args) -> int:
    trace = generate_logreg_trace(args.n_samples, args.d, args.optimizer.replace("-", "_"), args.steps, args.seed)
    save_trace(trace, args.out, args.format)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradtrace",
        description="Predictability and predictable-rank analysis of gradient traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def trace_args(p):
        p.add_argument("--trace", required=True, help="trace file (GTRC binary or CSV)")
        p.add_argument("--format", choices=("binary", "csv"), help="default: from file suffix")

    p = sub.add_parser("analyze", help="kappa per predictor and predictable ranks")
    trace_args(p)
    p.add_argument("--predictors", default=DEFAULT_PREDICTORS)
    p.add_argument("--window", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--epsilons", default=",".join(f"{e:.2f}" for e in DEFAULT_EPSILONS))
    p.add_argument("--proj", help="projection file applied before analysis")
    p.add_argument("--run", help="run name in reports (default: trace file stem)")
    p.add_argument("--out-json")
    p.add_argument("--out-csv", help="kappa table; the rank table goes next to it")
    p.add_argument("--out-rank-csv")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("spectrum", help="singular spectrum of the increment matrix")
    trace_args(p)
    p.add_argument("--proj")
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("project", help="random projection of a trace")
    trace_args(p)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--proj", help="reuse this projection file instead of sampling")
    p.add_argument("--proj-out")
    p.add_argument("--trace-out")
    p.add_argument("--sweep-seeds", type=int, default=0,
                   help="report predictable ranks for this many consecutive seeds")
    p.add_argument("--epsilons", default=",".join(f"{e:.2f}" for e in DEFAULT_EPSILONS))
    p.add_argument("--out-json")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("simulate", help="bound certification runs")
    sim = p.add_subparsers(dest="testbed", required=True)

    q = sim.add_parser("omd", help="optimistic mirror descent on online linear losses")
    q.add_argument("--dim", type=int, default=10)
    q.add_argument("--horizon", type=int, default=500)
    q.add_argument("--kind", default="drifting", choices=("constant", "drifting", "adversarial-rotation"))
    q.add_argument("--radius", type=float, default=1.0)
    q.add_argument("--omega", type=float, default=0.01)
    q.add_argument("--predictors", default="one-step")
    q.add_argument("--eta", default="tuned", help="step size or 'tuned'")
    q.add_argument("--fallback-eta", type=float, default=1.0)
    q.add_argument("--variant", default="two-step", choices=("as-written", "two-step"))
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--seeds", type=int, default=1)
    q.add_argument("--out-json")
    q.set_defaults(func=cmd_simulate_omd)

    q = sim.add_parser("proxy-gd", help="gradient descent with proxy directions")
    q.add_argument("--objective", default="quad_plus_cos", choices=("quadratic", "quad_plus_cos"))
    q.add_argument("--dim", type=int, default=20)
    q.add_argument("--T", type=int, default=2000)
    q.add_argument("--c", type=float, default=1.0)
    q.add_argument("--predictors", default="ema:0.9",
                   help=f"comma-separated predictors; '{EXACT_GRADIENT}' uses the true gradient")
    q.add_argument("--eta", type=float, help="default 1/L")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--seeds", type=int, default=1)
    q.add_argument("--out-json")
    q.set_defaults(func=cmd_simulate_proxy_gd)

    p = sub.add_parser("generate", help="synthetic traces")
    gen = p.add_subparsers(dest="generator", required=True)

    q = gen.add_parser("planted", help="planted-rank increments plus noise")
    q.add_argument("--d", type=int, default=64)
    q.add_argument("--T", type=int, default=300)
    q.add_argument("--r", type=int, default=5)
    q.add_argument("--rho", type=float, default=0.005)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.add_argument("--format", choices=("binary", "csv"))
    q.set_defaults(func=cmd_generate_planted)

    q = gen.add_parser("logreg", help="logistic-regression training gradients")
    q.add_argument("--n-samples", type=int, default=512)
    q.add_argument("--d", type=int, default=32)
    q.add_argument("--optimizer", default="sgd_momentum",
                   choices=("sgd_momentum", "adamw_like", "sgd-momentum", "adamw-like"))
    q.add_argument("--steps", type=int, default=300)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.add_argument("--format", choices=("binary", "csv"))
    q.set_defaults(func=cmd_generate_logreg)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UndefinedMetricError as exc:
        print(f"error: undefined metric {exc.metric}: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED
    except NumericalFailure as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GradTraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
