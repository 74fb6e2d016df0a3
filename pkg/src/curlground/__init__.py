"""Ground states of curl-curl equations with a Sobolev critical term.

Divergence-free fields U = (u(r, x3)/r)(-x2, x1, 0) reduce

    curl curl U + V(x) U = |U|^(p-2) U + |U|^4 U

to the scalar problem -Delta u + u/r^2 + V u = |u|^(p-2) u + |u|^4 u on the
half plane {r > 0}, discretized here on a truncated Dirichlet box.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConditionVViolated,
    ConfigError,
    CurlGroundError,
    HypothesisViolation,
    InvalidArgument,
    NoFiberMax,
    NumericFailure,
    RegimeError,
    ResolutionError,
)
from .grid import AxiGrid, Field, build_grid, grid_with_spacing  # noqa: E402
from .operator import Potential, assemble  # noqa: E402
from .spectral import split  # noqa: E402
