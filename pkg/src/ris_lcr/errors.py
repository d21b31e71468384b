"""Exception types shared across the package.

Two failure families are distinguished deliberately:

* ``DomainError`` -- the caller handed us arguments outside the contract
  (negative variances, repeated eigenvalues where distinct ones are required,
  correlation entries above one, ...).  These are programming errors at the
  call site and carry no partial result.
* ``NumericError`` -- the arguments were admissible but the evaluation could
  not be completed to the advertised accuracy (series hit its iteration cap,
  quadrature failed to converge, a sum cancelled catastrophically).  The
  message carries the diagnostics needed to understand what happened.
"""


class DomainError(ValueError):
    """Arguments outside the documented domain of an operation."""


class NumericError(ArithmeticError):
    """Evaluation failed to reach the advertised accuracy."""
