"""
Reports package: CSV and JSON writers for every experiment family.
"""

from .writers import (
    BaseReportWriter,
    BoundsReportWriter,
    CoalitionReportWriter,
    OracleReportWriter,
    PlanReportWriter,
    SweepReportWriter,
    hop_phase,
)

__all__ = [
    'BaseReportWriter',
    'PlanReportWriter',
    'SweepReportWriter',
    'BoundsReportWriter',
    'OracleReportWriter',
    'CoalitionReportWriter',
    'hop_phase',
]
