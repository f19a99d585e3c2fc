"""
Moving between resource allocation and consensus optimization through duality.

Forward: the Lagrange dual of

    min sum_i f_i(x_i)  s.t.  sum_i x_i = sum_i R_i

is the consensus problem min sum_i G_i(y_i) s.t. y_1 = ... = y_m with
G_i(y) = f_i*(y) - y^T R_i and grad G_i(y) = argmax_x (y^T x - f_i(x)) - R_i.

Reverse: the Fenchel dual of min sum_i h_i(x_i) s.t. x_1 = ... = x_m is the
resource allocation problem min sum_i h_i*(y_i) s.t. sum_i y_i = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .convex import ConjugateFunction, ConvexFunction, QuadraticFunction
from .errors import PrimalRecoveryInconsistent

RA_TO_CONSENSUS = "ra_to_consensus"
CONSENSUS_TO_RA = "consensus_to_ra"


def _check_costs(costs) -> int:
    costs = list(costs)
    if not costs:
        raise ValueError("at least one agent is required")
    dims = {f.dim for f in costs}
    if len(dims) != 1:
        raise ValueError(f"all costs must share one dimension, got {sorted(dims)}")
    return dims.pop()


@dataclass
class ResourceAllocationProblem:
    """min sum_i f_i(x_i) subject to sum_i x_i = sum_i R_i."""

    costs: list
    resources: np.ndarray

    def __post_init__(self):
        self.costs = list(self.costs)
        n = _check_costs(self.costs)
        R = np.asarray(self.resources, dtype=float)
        if R.ndim == 1 and n == 1:
            R = R.reshape(-1, 1)
        if R.shape != (len(self.costs), n):
            raise ValueError(f"resources must have shape ({len(self.costs)}, {n}), got {R.shape}")
        self.resources = R

    @property
    def m(self) -> int:
        return len(self.costs)

    @property
    def n(self) -> int:
        return self.costs[0].dim

    def objective(self, X) -> float:
        X = np.asarray(X, dtype=float).reshape(self.m, self.n)
        return float(sum(f.value(x) for f, x in zip(self.costs, X)))


@dataclass
class ConsensusProblem:
    """min sum_i h_i(x_i) subject to x_1 = ... = x_m."""

    costs: list

    def __post_init__(self):
        self.costs = list(self.costs)
        _check_costs(self.costs)

    @property
    def m(self) -> int:
        return len(self.costs)

    @property
    def n(self) -> int:
        return self.costs[0].dim

    def objective(self, s) -> float:
        return float(sum(h.value(s) for h in self.costs))


@dataclass
class DualProblem:
    """
    Per-agent dual costs G_i(y) = f_i*(y) - y^T R_i.

    For the reverse direction the resources are zero and the conjugates are
    h_i*.  ``mu`` and ``K`` are the strong convexity modulus and gradient
    Lipschitz constant shared by all G_i, derived from the primal constants:
    a (1/K)-strongly convex f_i gives a K-Lipschitz grad G_i, and a
    (1/mu)-Lipschitz grad f_i gives a mu-strongly convex G_i.
    """

    direction: str
    conjugates: list
    resources: np.ndarray
    source: object
    mu: float
    K: float
    _quad: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        if all(isinstance(c.base, QuadraticFunction) for c in self.conjugates):
            a = np.stack([c.base.a for c in self.conjugates])
            Qinv = np.stack([c.base.Q_inv for c in self.conjugates])
            self._quad = (a, Qinv)

    @property
    def m(self) -> int:
        return len(self.conjugates)

    @property
    def n(self) -> int:
        return self.conjugates[0].dim

    @property
    def beta_interval(self) -> tuple[float, float]:
        """Admissible step sizes beta lie in the open interval (0, 2 mu / K^2)."""
        return 0.0, 2.0 * self.mu / self.K ** 2

    @property
    def default_beta(self) -> float:
        return self.mu / self.K ** 2

    def value(self, i: int, y) -> float:
        y = np.asarray(y, dtype=float).reshape(self.n)
        return self.conjugates[i].value(y) - float(y @ self.resources[i])

    def gradient(self, i: int, y) -> np.ndarray:
        return self.conjugates[i].gradient(y) - self.resources[i]

    def total_value(self, Y) -> float:
        Y = np.asarray(Y, dtype=float).reshape(self.m, self.n)
        return float(sum(self.value(i, Y[i]) for i in range(self.m)))

    def primal_points(self, Y, X0=None) -> tuple[np.ndarray, float, float]:
        """
        Conjugate gradients x_i = argmax_x (y_i^T x - f_i(x)) for every agent.

        Returns ``(X, mean inner iterations, max inner residual)``; ``X0``
        warm-starts the numerical inner solves.
        """
        if self._quad is not None:
            a, Qinv = self._quad
            if self.n == 1:
                return a + Qinv[:, :, 0] * Y, 0.0, 0.0
            return a + np.einsum("ijk,ik->ij", Qinv, Y), 0.0, 0.0
        X = np.empty_like(Y)
        iters = 0
        res = 0.0
        for i, c in enumerate(self.conjugates):
            X[i], k = c.maximizer(Y[i], None if X0 is None else X0[i])
            iters += k
            res = max(res, float(np.linalg.norm(c.base.gradient(X[i]) - Y[i])))
        return X, iters / self.m, res

    def constants(self) -> dict:
        """The primal-to-dual constant bookkeeping, for reports."""
        rho = [c.base.strong_convexity for c in self.conjugates]
        L = [c.base.lipschitz for c in self.conjugates]
        lo, hi = self.beta_interval
        return {"rho": rho, "L": L, "mu": self.mu, "K": self.K,
                "beta_interval": [lo, hi], "default_beta": self.default_beta}


def _dual_constants(costs) -> tuple[float, float]:
    K = max(1.0 / f.strong_convexity for f in costs)
    if any(f.lipschitz is None for f in costs):
        mu = 0.0
    else:
        mu = min(1.0 / f.lipschitz for f in costs)
    return mu, K


def lagrange_dual(ra: ResourceAllocationProblem, inner_tol: float = 1e-10,
                  inner_max_iter: int = 200) -> DualProblem:
    """
    Consensus-form dual of a resource allocation problem.

    Raises
    ------
    NotStrictlyConvex
        If some f_i has no positive strong convexity modulus.
    """
    conj = [ConjugateFunction(f, inner_tol, inner_max_iter) for f in ra.costs]
    mu, K = _dual_constants(ra.costs)
    return DualProblem(RA_TO_CONSENSUS, conj, ra.resources.copy(), ra, mu, K)


def fenchel_dual(cp: ConsensusProblem, inner_tol: float = 1e-10,
                 inner_max_iter: int = 200) -> DualProblem:
    """
    Resource-allocation-form dual of a consensus problem: costs h_i*, zero resources.

    Raises
    ------
    NotStrictlyConvex
        If some h_i has no positive strong convexity modulus.
    """
    conj = [ConjugateFunction(h, inner_tol, inner_max_iter) for h in cp.costs]
    mu, K = _dual_constants(cp.costs)
    return DualProblem(CONSENSUS_TO_RA, conj, np.zeros((cp.m, cp.n)), cp, mu, K)


def as_resource_allocation(dp: DualProblem) -> ResourceAllocationProblem:
    """View a reverse-direction dual as a plain resource allocation instance."""
    if dp.direction != CONSENSUS_TO_RA:
        raise ValueError("only the Fenchel dual of a consensus problem is a resource allocation problem")
    return ResourceAllocationProblem([_explicit(c) for c in dp.conjugates], dp.resources.copy())


def _explicit(c: ConjugateFunction) -> ConvexFunction:
    """The conjugate of a quadratic written out as a quadratic; other conjugates pass through."""
    f = c.base
    if not isinstance(f, QuadraticFunction):
        return c
    # f*(y) = 1/2 (y + Q a)^T Q^-1 (y + Q a) - 1/2 a^T Q a - offset
    Qa = f.Q @ f.a
    return QuadraticFunction(f.Q_inv, -Qa, -0.5 * float(f.a @ Qa) - f.offset)


def recover_primal(dp: DualProblem, y_star, tol: Optional[float] = None) -> np.ndarray:
    """
    Primal solution from a dual solution.

    Forward direction: ``y_star`` is the consensus multiplier (an n-vector, or
    one row per agent); returns the (m, n) allocation x_i = grad f_i*(y).
    The allocation must satisfy sum x_i = sum R_i to ``tol`` (default
    1e-6 * m * ||R||).

    Reverse direction: ``y_star`` holds one row per agent with sum 0; every
    agent's grad h_i*(y_i) must agree to ``tol`` (default 1e-6 scaled by
    the point's size) and their average is returned as the consensus point.

    Raises
    ------
    PrimalRecoveryInconsistent
        If the coupling or agreement residual exceeds the tolerance.
    """
    m, n = dp.m, dp.n
    Y = np.asarray(y_star, dtype=float)
    if dp.direction == RA_TO_CONSENSUS:
        if Y.size == n:
            Y = np.broadcast_to(Y.reshape(1, n), (m, n))
        Y = Y.reshape(m, n)
        X, _, _ = dp.primal_points(np.ascontiguousarray(Y))
        R = dp.resources
        residual = float(np.linalg.norm(X.sum(axis=0) - R.sum(axis=0)))
        if tol is None:
            tol = 1e-6 * m * max(1.0, float(np.linalg.norm(R)))
        if residual > tol:
            raise PrimalRecoveryInconsistent(
                f"recovered allocation misses the resource total by {residual:.3e} (tol {tol:.1e})")
        return X
    Y = Y.reshape(m, n)
    X, _, _ = dp.primal_points(Y)
    spread = float(max(np.linalg.norm(X[i] - X[j]) for i in range(m) for j in range(m)))
    total = float(np.linalg.norm(Y.sum(axis=0)))
    if tol is None:
        tol = 1e-6 * max(1.0, float(np.abs(X).max()))
    if spread > tol or total > tol:
        raise PrimalRecoveryInconsistent(
            f"agents disagree by {spread:.3e} and duals sum to {total:.3e} (tol {tol:.1e})")
    return X.mean(axis=0)
