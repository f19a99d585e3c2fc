"""
Duality bridge between distributed resource allocation and consensus optimization.

Resource allocation problems are solved through their Lagrange dual (a
consensus problem) with a totally asynchronous iteration over random
switching networks; consensus problems are solved through their Fenchel dual
(a resource allocation problem) with a center-free iteration.
"""

from .algorithm import (
    IterationState,
    RunResult,
    StepSchedule,
    Trace,
    async_dual_step,
    center_free_step,
    initial_state,
    mean_drift,
    run_reverse_direction,
    run_theorem1,
    step_alpha,
)
from .convex import (
    BlackBoxFunction,
    ConjugacyReport,
    ConjugateFunction,
    ConvexFunction,
    LogSumExpFunction,
    QuadraticFunction,
    conjugate_gradient,
    conjugate_hessian,
    conjugate_value,
    function_from_dict,
    verify_conjugate_duality_properties,
)
from .duality import (
    ConsensusProblem,
    DualProblem,
    ResourceAllocationProblem,
    as_resource_allocation,
    fenchel_dual,
    lagrange_dual,
    recover_primal,
)
from .errors import (
    ConfigRejected,
    DualBridgeError,
    EigensolverFailure,
    InnerSolverDiverged,
    MaxIterations,
    NotStrictlyConvex,
    PrimalRecoveryInconsistent,
    SingularHessian,
    SingularSystem,
)
from .network import (
    GraphUniverse,
    NetworkProcess,
    WeightedGraphMatrix,
    certify_a3,
    gossip_matrix,
    lift_matrix,
    load_universe,
    metropolis_weights,
    sample_sequence,
    validate_a1,
    validate_a2,
)
from .oracle import OracleSolution, solve_consensus, solve_ra_general, solve_ra_quadratic

__version__ = "0.1.0"
