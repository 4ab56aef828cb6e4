"""
Experiments package: configuration loading and the runner behind each CLI subcommand.
"""

from .config import ExperimentConfig
from .experiment_runner import ExperimentRunner, exit_code_for

__all__ = ['ExperimentConfig', 'ExperimentRunner', 'exit_code_for']
