"""Level-crossing-rate analysis of RIS-aided uplink channels.

Subpackages
-----------
special     scalar special functions (Bessel, elliptic, hypergeometric)
channel     geometry, path gains, spatial correlation, steering vectors
analytic    closed-form level-crossing rates and their quadrature oracle
montecarlo  spatio-temporally correlated fading simulator
experiments multi-variant simulation orchestration and curve builders
validation  acceptance-check battery shared by the CLI and the test suite
cli         command-line front end reproducing the reference experiments
"""

from .errors import DomainError, NumericError

__version__ = "0.1.0"

__all__ = ["DomainError", "NumericError", "__version__"]
