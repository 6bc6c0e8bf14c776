"""Fixed effects estimation, bias corrections and the split-panel jackknife."""

from twofe.estimation.ape import compute_ape
from twofe.estimation.correction import (
    analytical_correct,
    ape_correction,
    estimate_B,
    estimate_D,
    estimate_W,
)
from twofe.estimation.jackknife import (
    JackknifeOptions,
    SplitAxis,
    homogeneity_test,
    split_panel_jackknife,
    spj_ape,
    spj_beta,
    wald_statistic,
)
from twofe.estimation.projection import TwoWayProjection, project, psi_hat, xi_hat
from twofe.estimation.solver import FitOptions, fit, fit_effects, newton_step
from twofe.estimation.structured import StructuredHessian, solve_structured

__all__ = [
    "FitOptions",
    "JackknifeOptions",
    "SplitAxis",
    "StructuredHessian",
    "TwoWayProjection",
    "analytical_correct",
    "ape_correction",
    "compute_ape",
    "estimate_B",
    "estimate_D",
    "estimate_W",
    "fit",
    "fit_effects",
    "homogeneity_test",
    "newton_step",
    "project",
    "psi_hat",
    "solve_structured",
    "split_panel_jackknife",
    "spj_ape",
    "spj_beta",
    "wald_statistic",
    "xi_hat",
]
