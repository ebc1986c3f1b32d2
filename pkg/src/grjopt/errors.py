"""Exception taxonomy shared across the package."""


class GrjoptError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(GrjoptError):
    pass


class NonFiniteEvaluation(GrjoptError):
    pass


class SingularMatrix(GrjoptError):
    pass


class NonPositiveSlackBound(GrjoptError):
    pass


class OutOfBox(GrjoptError):
    pass


class NoFeasiblePointFound(GrjoptError):
    pass


class RankDeficientJacobian(GrjoptError):
    pass


class NoNondegenerateBasis(GrjoptError):
    pass


class SingularBasis(GrjoptError):
    pass


class NewtonDiverged(GrjoptError):
    pass


class ZeroDirection(GrjoptError):
    pass


class LineSearchFailed(GrjoptError):
    pass


class EmptyUnion(GrjoptError):
    pass


class DegenerateReference(GrjoptError):
    pass


class OracleInfeasible(GrjoptError):
    pass
