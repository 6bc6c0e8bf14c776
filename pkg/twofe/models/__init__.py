"""Domain types shared across the package."""

from twofe.models.panel import CsvSchema, PanelDataset, PanelDiagnostics, SubpanelSpec
from twofe.models.results import (
    ApeCorrectionResult,
    ApeValue,
    CorrectionResult,
    FitResult,
    HomogeneityResult,
    JackknifeResult,
    Normalization,
    ParameterState,
    VarianceMode,
)

__all__ = [
    "ApeCorrectionResult",
    "ApeValue",
    "CorrectionResult",
    "CsvSchema",
    "FitResult",
    "HomogeneityResult",
    "JackknifeResult",
    "Normalization",
    "PanelDataset",
    "PanelDiagnostics",
    "ParameterState",
    "SubpanelSpec",
    "VarianceMode",
]
