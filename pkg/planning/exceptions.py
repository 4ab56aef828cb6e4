"""Exception hierarchy for the planning, coalition and experiment layers.

Every error carries the component and operation it came from, a machine-readable
code, a severity and a category, plus free-form context. The CLI uses the
category to pick its exit code.
"""

from typing import Dict, Any, Optional
from enum import Enum
import json


class ErrorSeverity(Enum):
    """Severity levels for errors."""
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class ErrorCategory(Enum):
    """Categories of errors for classification and exit-code mapping."""
    VALIDATION = "validation"
    CONFIGURATION = "configuration"
    INFEASIBLE = "infeasible"
    RESOURCE_LIMIT = "resource_limit"
    CONVERGENCE = "convergence"
    INTERNAL = "internal"


class PlanningError(Exception):
    """Base exception for all planner errors with rich context.

    Provides:
    - Error categorization and severity
    - Component and operation context
    - Structured error data for reports
    """

    def __init__(self,
                 message: str,
                 error_code: str,
                 component: str,
                 operation: str,
                 severity: ErrorSeverity = ErrorSeverity.MEDIUM,
                 category: ErrorCategory = ErrorCategory.INTERNAL,
                 context: Dict[str, Any] = None,
                 recoverable: bool = False,
                 cause: Optional[Exception] = None):
        """Initialize planning error with context.

        Args:
            message: Human-readable error message
            error_code: Machine-readable error code
            component: Module where the error occurred
            operation: Operation being performed when the error occurred
            severity: Error severity level
            category: Error category for classification
            context: Additional context data (offending element, sizes, ...)
            recoverable: Whether a caller can reasonably retry with other inputs
            cause: Original exception that caused this error
        """
        self.message = message
        self.error_code = error_code
        self.component = component
        self.operation = operation
        self.severity = severity
        self.category = category
        self.context = context or {}
        self.recoverable = recoverable
        self.cause = cause

        super().__init__(self._format_message())

    def _format_message(self) -> str:
        """Format error message with context."""
        parts = [
            f"[{self.component}:{self.operation}]",
            f"[{self.error_code}]",
            f"[{self.severity.value.upper()}]",
            self.message
        ]

        if self.recoverable:
            parts.append("(recoverable)")

        return " ".join(parts)

    def to_dict(self) -> Dict[str, Any]:
        """Convert error to dictionary for logging and reports."""
        return {
            "error_type": self.__class__.__name__,
            "message": self.message,
            "error_code": self.error_code,
            "component": self.component,
            "operation": self.operation,
            "severity": self.severity.value,
            "category": self.category.value,
            "context": self.context,
            "recoverable": self.recoverable,
            "cause": str(self.cause) if self.cause else None
        }

    def to_json(self) -> str:
        """Convert error to JSON string."""
        return json.dumps(self.to_dict(), indent=2, default=str)


# Network model errors
class TopologyValidationError(PlanningError):
    """Topology or request document violates a structural invariant."""

    def __init__(self, message: str, element: Any = None, **kwargs):
        context = kwargs.get('context', {})
        if element is not None:
            context['element'] = element

        kwargs['context'] = context
        kwargs.setdefault('error_code', 'TOPOLOGY_INVALID')
        kwargs.setdefault('component', 'network_model')
        kwargs.setdefault('operation', 'load_topology')
        kwargs.setdefault('category', ErrorCategory.VALIDATION)
        kwargs.setdefault('severity', ErrorSeverity.HIGH)
        super().__init__(message, **kwargs)


class UnreachableRequestError(PlanningError):
    """No loop-free path joins a request's source and destination."""

    def __init__(self, message: str, source: str = None, destination: str = None,
                 request_id: str = None, **kwargs):
        context = kwargs.get('context', {})
        if source is not None:
            context['source'] = source
        if destination is not None:
            context['destination'] = destination
        if request_id is not None:
            context['request_id'] = request_id

        kwargs['context'] = context
        kwargs.setdefault('error_code', 'REQUEST_UNREACHABLE')
        kwargs.setdefault('component', 'network_model')
        kwargs.setdefault('operation', 'k_candidate_paths')
        kwargs.setdefault('category', ErrorCategory.INFEASIBLE)
        kwargs.setdefault('severity', ErrorSeverity.HIGH)
        super().__init__(message, **kwargs)


class ParameterError(PlanningError):
    """A numeric parameter is outside its admissible range."""

    def __init__(self, message: str, parameter: str = None, value: Any = None, **kwargs):
        context = kwargs.get('context', {})
        if parameter:
            context['parameter'] = parameter
        if value is not None:
            context['value'] = value

        kwargs['context'] = context
        kwargs.setdefault('error_code', 'PARAMETER_INVALID')
        kwargs.setdefault('component', 'cost_model')
        kwargs.setdefault('operation', 'validate')
        kwargs.setdefault('category', ErrorCategory.VALIDATION)
        kwargs.setdefault('severity', ErrorSeverity.LOW)
        super().__init__(message, **kwargs)


# Size guards
class ResourceLimitError(PlanningError):
    """Base class for combinatorial size guards."""

    def __init__(self, message: str, size: Any = None, limit: Any = None, **kwargs):
        context = kwargs.get('context', {})
        if size is not None:
            context['size'] = size
        if limit is not None:
            context['limit'] = limit

        kwargs['context'] = context
        kwargs.setdefault('error_code', 'RESOURCE_LIMIT_EXCEEDED')
        kwargs.setdefault('category', ErrorCategory.RESOURCE_LIMIT)
        kwargs.setdefault('severity', ErrorSeverity.HIGH)
        super().__init__(message, **kwargs)


class ScenarioCapExceededError(ResourceLimitError):
    """Joint scenario space is larger than the configured enumeration cap."""

    def __init__(self, message: str, **kwargs):
        kwargs.setdefault('error_code', 'SCENARIO_CAP_EXCEEDED')
        kwargs.setdefault('component', 'demand_scenarios')
        kwargs.setdefault('operation', 'enumerate_joint')
        super().__init__(message, **kwargs)


class OracleLimitError(ResourceLimitError):
    """Instance is too large for exhaustive verification."""

    def __init__(self, message: str, **kwargs):
        kwargs.setdefault('error_code', 'ORACLE_INSTANCE_TOO_LARGE')
        kwargs.setdefault('component', 'oracle')
        kwargs.setdefault('operation', 'brute_force_oracle')
        super().__init__(message, **kwargs)


class CombinatorialLimitError(ResourceLimitError):
    """Coalition block is too large for exact Shapley weights."""

    def __init__(self, message: str, **kwargs):
        kwargs.setdefault('error_code', 'SHAPLEY_BLOCK_TOO_LARGE')
        kwargs.setdefault('component', 'coalition_economics')
        kwargs.setdefault('operation', 'shapley_shares')
        super().__init__(message, **kwargs)


class StateSpaceLimitError(ResourceLimitError):
    """Strategy-profile space is larger than the transition-matrix cap."""

    def __init__(self, message: str, **kwargs):
        kwargs.setdefault('error_code', 'STATE_SPACE_TOO_LARGE')
        kwargs.setdefault('component', 'coalition_dynamics')
        kwargs.setdefault('operation', 'transition_matrix')
        super().__init__(message, **kwargs)


# Coalition errors
class UnknownProviderError(PlanningError):
    """A coalition names a provider that is not configured."""

    def __init__(self, message: str, provider_id: str = None, **kwargs):
        context = kwargs.get('context', {})
        if provider_id is not None:
            context['provider_id'] = provider_id

        kwargs['context'] = context
        kwargs.setdefault('error_code', 'UNKNOWN_PROVIDER')
        kwargs.setdefault('component', 'coalition_economics')
        kwargs.setdefault('operation', 'pool_capacities')
        kwargs.setdefault('category', ErrorCategory.VALIDATION)
        super().__init__(message, **kwargs)


class StationaryConvergenceError(PlanningError):
    """Stationary solve did not reach the residual target."""

    def __init__(self, message: str, iterations: int = None, residual: float = None, **kwargs):
        context = kwargs.get('context', {})
        if iterations is not None:
            context['iterations'] = iterations
        if residual is not None:
            context['residual'] = residual

        kwargs['context'] = context
        kwargs.setdefault('error_code', 'STATIONARY_NOT_CONVERGED')
        kwargs.setdefault('component', 'coalition_dynamics')
        kwargs.setdefault('operation', 'stationary_distribution')
        kwargs.setdefault('category', ErrorCategory.CONVERGENCE)
        super().__init__(message, **kwargs)


# Configuration errors
class ConfigurationError(PlanningError):
    """Experiment configuration is missing, unreadable or malformed."""

    def __init__(self, message: str, config_key: str = None, path: str = None, **kwargs):
        context = kwargs.get('context', {})
        if config_key:
            context['config_key'] = config_key
        if path:
            context['path'] = path

        kwargs['context'] = context
        kwargs.setdefault('error_code', 'CONFIGURATION_ERROR')
        kwargs.setdefault('component', 'experiments')
        kwargs.setdefault('operation', 'load_config')
        kwargs.setdefault('category', ErrorCategory.CONFIGURATION)
        kwargs.setdefault('severity', ErrorSeverity.HIGH)
        super().__init__(message, **kwargs)
