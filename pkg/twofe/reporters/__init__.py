"""Reporters for estimates, studies and oracle tables."""

from twofe.reporters.console import ConsoleReporter
from twofe.reporters.json_reporter import JSONReporter

__all__ = [
    "ConsoleReporter",
    "JSONReporter",
]
