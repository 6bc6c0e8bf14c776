"""Panel ingestion, subpanels and diagnostics."""

from twofe.data.csv_io import load_csv, write_csv
from twofe.data.subpanel import drop_degenerate, split_halves, subpanel, time_halves, unit_halves
from twofe.data.validate import validate

__all__ = [
    "drop_degenerate",
    "load_csv",
    "split_halves",
    "subpanel",
    "time_halves",
    "unit_halves",
    "validate",
    "write_csv",
]
