"""Exception types shared across the package.

Each error family carries a distinct ``exit_code`` used by the command-line
front end.
"""


class LatticeError(Exception):
    """Base class for all package errors."""

    exit_code = 1
    stage = None

    def with_stage(self, stage):
        self.stage = stage
        return self

    def __str__(self):
        msg = super().__str__()
        return f"[{self.stage}] {msg}" if self.stage else msg


class InvalidSpec(LatticeError, ValueError):
    exit_code = 2


class NonPositiveLength(InvalidSpec):
    """A nested side length from the spacing recursion is not positive."""

    exit_code = 3


class EmptyModel(LatticeError, ValueError):
    exit_code = 4


class NoSolid(LatticeError, ValueError):
    exit_code = 5


class NotConverged(LatticeError, RuntimeError):
    exit_code = 6

    def __init__(self, residual, iterations=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"solver stopped at relative residual {residual:.3e}"
                         f" after {iterations} iterations")

    def __reduce__(self):
        return type(self), (self.residual, self.iterations), self.__dict__


class DegenerateInput(LatticeError, ValueError):
    exit_code = 7


class SingularFit(LatticeError, ValueError):
    exit_code = 8


class NonPositiveData(LatticeError, ValueError):
    exit_code = 8


class Unbracketed(LatticeError, ValueError):
    exit_code = 9


class MinFeatureWarning(UserWarning):
    """Struts are thinner than the grid can resolve reliably."""
