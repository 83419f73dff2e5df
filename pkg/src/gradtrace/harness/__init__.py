"""Optimisation testbeds and trace generators."""
from .generators import (
    DEFAULT_CONFIGS,
    LogRegConfig,
    generate_logreg_trace,
    generate_planted_trace,
    planted_increments,
)
from .omd import OmdRun, diameter, loss_residual_energy, omd_report, run_omd, tune_eta
from .problems import (
    OnlineLinearProblem,
    SmoothObjective,
    make_objective,
    make_online_problem,
    power_iteration,
)
from .proxy_gd import EXACT_GRADIENT, ProxyGdRun, lemma_c1_check, proxy_gd_report, run_proxy_gd
from .sweep import run_seeds
