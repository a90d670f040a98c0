"""Exceptions raised by lagmech

Configuration problems derive from ValueError, run time mathematical problems
from ArithmeticError (through MathError) so the command line can tell them apart.
"""

__all__ = [
    "ConfigError",
    "ExprSyntaxError",
    "MathError",
    "UnboundVariableError",
    "DomainError",
    "DegenerateMetricError",
    "IndefiniteMetricError",
    "DependentConstraintsError",
    "IsotropicTimeFormError",
    "ZeroTimeFormError",
    "InadmissibleStateError",
    "SingularJacobianError",
    "IntegrationError",
]


class ConfigError(ValueError):
    """The system definition could not be turned into valid module inputs"""

    def __init__(self, message, line=None):
        """Create config error

        Args:
            message (str): What was wrong
            line (int, optional): Line in the config file, when known. Defaults to None.
        """
        if line is not None:
            message = "line %s: %s" % (line, message)
        super().__init__(message)
        self.line = line


class ExprSyntaxError(ValueError):
    """An expression could not be parsed"""

    def __init__(self, message, source="", position=None):
        """Create syntax error

        Args:
            message (str): What was wrong
            source (str, optional): The text being parsed. Defaults to "".
            position (int, optional): Character offset of the problem. Defaults to None.
        """
        if position is not None:
            message = "{msg} at position {pos} in '{src}'\n    {pad}^".format(
                msg=message, pos=position, src=source, pad=" " * (position + 1)
            )
        super().__init__(message)
        self.source = source
        self.position = position


class MathError(ArithmeticError):
    """Base for mathematical failures found while evaluating a system"""


class UnboundVariableError(MathError):
    """An expression referenced a variable with no value"""


class DomainError(MathError):
    """A function was evaluated outside its domain (log of a non-positive number, x/0...)"""


class DegenerateMetricError(MathError):
    """The metric is singular at an evaluated point"""


class IndefiniteMetricError(MathError):
    """An operation that needs a positive definite metric got an indefinite one"""


class DependentConstraintsError(MathError):
    """The Gram matrix of the constraint forms is singular or ill-conditioned"""


class IsotropicTimeFormError(MathError):
    """grad tau is a null vector of the metric"""


class ZeroTimeFormError(MathError):
    """The time form vanishes, or a zero velocity was given to a time class check"""


class InadmissibleStateError(MathError):
    """The state does not satisfy the constraints an operation requires"""


class SingularJacobianError(MathError):
    """A chart map has a singular Jacobian at an evaluated point"""


class IntegrationError(MathError):
    """Integration stopped because the field stopped being finite"""

    def __init__(self, message, last_state=None, time=None):
        """Create integration error

        Args:
            message (str): What happened
            last_state (TangentState, optional): The last state that was finite. Defaults to None.
            time (float, optional): Time of last_state. Defaults to None.
        """
        super().__init__(message)
        self.last_state = last_state
        self.time = time
