"""twofe: two-way fixed effects estimation of nonlinear panel models.

Fits single-index panel models (probit, logit, Poisson, Gaussian) with individual
and time effects by maximum likelihood, and removes the incidental parameter bias
of the common parameters and of average partial effects.

Main components:
- Data: long-format CSV panels, subpanels and diagnostics
- Families: likelihoods, their index derivatives and partial effects
- Estimation: structured Newton solver, two-way projections, analytical
  corrections, split-panel jackknife and a homogeneity test
- Simulation: Monte Carlo designs, the Neyman-Scott oracle and a study runner
"""

from twofe.config import Settings, settings
from twofe.data import load_csv, validate, write_csv
from twofe.estimation import (
    FitOptions,
    JackknifeOptions,
    analytical_correct,
    ape_correction,
    compute_ape,
    fit,
    homogeneity_test,
    spj_ape,
    spj_beta,
)
from twofe.families import PartialEffectSpec, get_family
from twofe.models import PanelDataset

__all__ = [
    "FitOptions",
    "JackknifeOptions",
    "PanelDataset",
    "PartialEffectSpec",
    "Settings",
    "analytical_correct",
    "ape_correction",
    "compute_ape",
    "fit",
    "get_family",
    "homogeneity_test",
    "load_csv",
    "settings",
    "spj_ape",
    "spj_beta",
    "validate",
    "write_csv",
]
