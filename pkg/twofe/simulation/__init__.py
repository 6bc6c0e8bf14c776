"""Monte Carlo designs, the Neyman-Scott oracle and the study runner."""

from twofe.simulation.dgp import DgpKind, DgpSpec, SimulatedPanel, generate
from twofe.simulation.oracle import (
    TABLE_CELLS,
    OracleRow,
    neyman_scott_estimates,
    neyman_scott_oracle,
    two_way_ssr,
)
from twofe.simulation.runner import (
    EstimatorKind,
    EstimatorSpec,
    StudyOptions,
    StudyRunner,
    default_estimators,
    run_study,
)
from twofe.simulation.summary import BiasTermSummary, SimulationReport, SummaryRow, summarize

__all__ = [
    "TABLE_CELLS",
    "BiasTermSummary",
    "DgpKind",
    "DgpSpec",
    "EstimatorKind",
    "EstimatorSpec",
    "OracleRow",
    "SimulatedPanel",
    "SimulationReport",
    "StudyOptions",
    "StudyRunner",
    "SummaryRow",
    "default_estimators",
    "generate",
    "neyman_scott_estimates",
    "neyman_scott_oracle",
    "run_study",
    "summarize",
    "two_way_ssr",
]
