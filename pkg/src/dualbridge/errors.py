"""Exception types raised across the package."""


class DualBridgeError(Exception):
    """Base class for all package errors."""


class NotStrictlyConvex(DualBridgeError, ValueError):
    """A conjugate was requested for a function without positive strong convexity."""


class InnerSolverDiverged(DualBridgeError, RuntimeError):
    """The inner maximization behind a conjugate did not reach its tolerance."""


class SingularHessian(DualBridgeError, ArithmeticError):
    pass


class EigensolverFailure(DualBridgeError, RuntimeError):
    pass


class PrimalRecoveryInconsistent(DualBridgeError, ValueError):
    """Recovered primal points violate the coupling or agreement constraint."""


class SingularSystem(DualBridgeError, ArithmeticError):
    pass


class MaxIterations(DualBridgeError, RuntimeError):
    pass


class ConfigRejected(DualBridgeError, ValueError):
    """A run was configured in a way that violates one of its preconditions."""
