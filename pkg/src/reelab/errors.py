"""Exception types shared across the package."""


class SupportViolationError(ValueError):
    """An operator carries weight outside the support of a reference operator."""


class OracleConvergenceError(RuntimeError):
    """A linear-minimization oracle failed to converge within its iteration cap."""


class SamplingCapError(RuntimeError):
    """Rejection sampling exceeded its retry cap."""


class DegenerateOperationError(RuntimeError):
    """A quantum operation annihilated its input (trace below threshold)."""


class NumericalConsistencyError(ArithmeticError):
    """Two redundant evaluation routes disagreed beyond tolerance."""


class FreeConeViolationError(RuntimeError):
    """A declared operation failed the free-cone preservation check."""
