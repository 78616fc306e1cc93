"""Exception hierarchy."""


class SBCError(Exception):
    """Base class for all package errors."""


class BlockStructureError(SBCError):
    """Off-diagonal blocks of (W + W^-1)/2 are not negligible."""


class SingularMatrixError(SBCError):
    pass


class IntegrationError(SBCError):
    """Base class for integrator failures."""


class StepUnderflow(IntegrationError):
    """Required step fell below ``h_min`` (typically near total collapse)."""


class MaxStepsExceeded(IntegrationError):
    pass


class NoEventFound(IntegrationError):
    pass


class TotalCollapse(SBCError, ZeroDivisionError):
    """Field evaluated at Q1 = Q2 = 0, where the regularization breaks down."""


class CollisionSingularity(SBCError, ZeroDivisionError):
    """Physical momenta requested at a binary collision (Q_i = 0)."""


class NewtonDiverged(SBCError):
    pass


class BracketInvalid(SBCError, ValueError):
    pass


class DegenerateTangent(SBCError):
    pass


class ResidualExceeded(SBCError):
    """A verification residual is above its bound.

    The offending report is kept on ``self.report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
