"""Exception hierarchy for the laboratory.

Every failure mode named in a module contract gets its own class so callers
(and the CLI exit-code logic) can discriminate without string matching.
"""


class MabuchiLabError(Exception):
    """Base class for all computation errors raised by this package."""


class NotDelzant(MabuchiLabError):
    """A vertex of the polytope violates the unimodularity condition."""


class Unbounded(MabuchiLabError):
    """The facet list does not bound a compact polytope."""


class GridMismatch(MabuchiLabError):
    """A grid function does not match the quadrature grid it is used on."""


class PolytopeMismatch(MabuchiLabError):
    """Two potentials live on different polytopes."""


class NotAdmissible(MabuchiLabError):
    """The Hessian of a symplectic potential fails positive-definiteness.

    Carries the worst node and the smallest eigenvalue found there.
    """

    def __init__(self, message, node=None, min_eigenvalue=None):
        super().__init__(message)
        self.node = node
        self.min_eigenvalue = min_eigenvalue


class TruncationTooSmall(MabuchiLabError):
    """The log-coordinate box does not cover the gradient image needed."""


class NewtonDivergence(MabuchiLabError):
    """Damped Newton line search failed repeatedly."""


class NonConvexIterate(MabuchiLabError):
    """A Newton iterate lost discrete convexity and could not be rescued."""


class SingularGram(MabuchiLabError):
    """The Gram matrix of the bilinear form is numerically singular."""


class NonMonotoneTrace(MabuchiLabError):
    """A trace that must be nondecreasing went down beyond tolerance.

    Signals a discretization failure, not a mathematical one.
    """


class ConfigError(MabuchiLabError):
    """Invalid run configuration; carries the full list of field errors."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
