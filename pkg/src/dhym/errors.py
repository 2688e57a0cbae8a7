"""Exception hierarchy shared by all modules.

Every error carries an ``exit_code`` so the command line driver can map
failures onto its documented exit statuses:

* 2 -- invalid configuration / input,
* 3 -- topological obstruction (the problem is refused, not failed),
* 4 -- the solver did not converge,
* 5 -- an internal invariant was violated.
"""


class DhymError(Exception):
    """Base class for all package errors."""

    exit_code = 5


class InvalidConfig(DhymError):
    exit_code = 2


class DimensionMismatch(DhymError):
    exit_code = 2


class NonPositiveMetric(DhymError):
    """The metric matrix (or matrix field) is not positive definite."""

    exit_code = 2


class DegeneratePhase(DhymError):
    """The defining integral of the phase angle vanishes."""

    exit_code = 3


class DegenerateDenominator(DhymError):
    exit_code = 3


class PhasePreconditionViolated(DhymError):
    """The sign conditions on the phase required by a bound verifier fail."""

    exit_code = 2


class NotConvex(DhymError):
    """A potential left the admissibility cone 1 + phi'' > 0."""

    exit_code = 4


class NotMonotone(DhymError):
    exit_code = 2


class SmallRadiusObstruction(DhymError):
    """Small-radius problems with coupling need det(F0) > 0."""

    exit_code = 3


class ContinuationStalled(DhymError):
    """The continuation step was bisected below its floor."""

    exit_code = 4


class ConvexityLost(DhymError):
    """Damping could not keep the iterate inside the admissibility cone."""

    exit_code = 4


class SingularLinearization(DhymError):
    exit_code = 5


class NonPeriodicCurvature(DhymError):
    """The prescribed bundle curvature has a nonzero mean and cannot be
    integrated to a periodic potential."""

    exit_code = 5


class DegenerateTopPower(DhymError):
    """The top self-intersection of the curvature class vanishes, so the
    small-radius expansion is undefined."""

    exit_code = 3


class SingularElliptic(DhymError):
    exit_code = 5
