"""Exception hierarchy.

Every error carries a short ``check`` label naming the geometric property
that failed, so command-line front ends can report it in one line.
"""


class DikinError(Exception):
    check = "dikin"


class DimensionMismatch(DikinError, ValueError):
    check = "dimension"


class RankDeficient(DikinError, ValueError):
    check = "full column rank of A"


class NotInterior(DikinError, ValueError):
    check = "strict interior (Ax - b > 0)"


class UnboundedDirection(DikinError):
    check = "bounded chord"


class NoInteriorPoint(DikinError):
    check = "nonempty interior"


class NoConvergence(DikinError):
    check = "iteration converged"


class FactorizationFailure(DikinError):
    check = "positive definite local metric"


class StepOutOfDomain(DikinError):
    check = "finite-difference stencil inside P"


class UnknownReference(DikinError):
    check = "exact reference marginals"
