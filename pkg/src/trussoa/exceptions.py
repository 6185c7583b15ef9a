"""Exception hierarchy shared by all trussoa modules."""


class TrussOAError(Exception):
    """Base class for every error raised by trussoa."""


class DegenerateBarError(TrussOAError, ValueError):
    """A bar joins two coincident nodes."""


class UnderRestrainedError(TrussOAError):
    """The reduced stiffness matrix is singular or not positive definite."""


class DomainError(TrussOAError, ValueError):
    """An input lies outside the domain of a function (e.g. non-positive EA)."""


class EvaluationError(TrussOAError):
    """A structural response evaluated to a non-finite value."""


class QualificationError(TrussOAError):
    """Active constraint gradients are linearly dependent."""


class InconsistentKKTError(TrussOAError):
    """The stationarity system has no nonnegative solution within tolerance."""


class DuplicateCutError(TrussOAError):
    """An outer-approximation cut was added twice at the same point."""


class MilpError(TrussOAError):
    """The LP/MILP solver failed numerically."""


class NoSolutionError(TrussOAError):
    """No feasible design was found."""


class SizeGuardError(TrussOAError):
    """An exhaustive procedure would exceed its configured size limit."""


class CaseFormatError(TrussOAError, ValueError):
    """A case file is malformed; the message names the offending field."""
