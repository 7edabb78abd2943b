"""
Pacote de utilitários do toolkit.
"""

from .errors import (
    ConfigurationError,
    NumericalError,
    ToolkitError,
    describe_error,
    exit_code_for,
    handle_command_error
)
from .quadrature import integrate_curve, integrate_rect

__all__ = [
    'ConfigurationError',
    'NumericalError',
    'ToolkitError',
    'describe_error',
    'exit_code_for',
    'handle_command_error',
    'integrate_curve',
    'integrate_rect'
]
