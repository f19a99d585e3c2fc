"""
Centralized reference solvers.

These deliberately avoid the conjugate machinery used by the distributed
path: quadratics go through a single linear solve of the KKT system, general
instances through projected gradient on the primal problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convex import QuadraticFunction
from .duality import ConsensusProblem, ResourceAllocationProblem
from .errors import MaxIterations, SingularSystem

MAX_GENERAL_VARIABLES = 20


@dataclass
class OracleSolution:
    """
    ``primal`` is the (m, n) allocation for resource allocation or the
    consensus point s* for consensus problems; ``dual`` is the multiplier
    y* (RA) or the per-agent Fenchel duals y_i* = grad h_i(s*) (consensus).
    """

    primal: np.ndarray
    dual: np.ndarray
    objective: float


def _all_quadratic(costs) -> bool:
    return all(isinstance(f, QuadraticFunction) for f in costs)


def solve_ra_quadratic(ra: ResourceAllocationProblem) -> OracleSolution:
    """
    Closed-form KKT solution for quadratic costs.

    y* = (sum_i Q_i^-1)^-1 (sum_i R_i - sum_i a_i),  x_i* = a_i + Q_i^-1 y*.
    """
    if not _all_quadratic(ra.costs):
        raise TypeError("solve_ra_quadratic needs quadratic costs")
    S = sum(f.Q_inv for f in ra.costs)
    rhs = ra.resources.sum(axis=0) - sum(f.a for f in ra.costs)
    if np.linalg.cond(S) > 1e12:
        raise SingularSystem("sum of inverse Hessians is numerically singular")
    try:
        y = np.linalg.solve(S, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    X = np.stack([f.a + f.Q_inv @ y for f in ra.costs])
    return OracleSolution(X, y, ra.objective(X))


def _armijo_descent(value, grad, project, x, tol, max_iter, what):
    """Projected gradient with Barzilai-Borwein trial steps and Armijo backtracking."""
    g = project(grad(x))
    fx = value(x)
    step = 1.0
    x_prev = g_prev = None
    for _ in range(max_iter):
        gnorm = np.linalg.norm(g)
        if gnorm < tol:
            return x, g
        if x_prev is not None:
            s, dg = x - x_prev, g - g_prev
            sy = float(np.vdot(s, dg))
            step = float(np.vdot(s, s)) / sy if sy > 0 else 1.0
        while True:
            x_new = x - step * g
            f_new = value(x_new)
            slack = 1e-15 * max(1.0, abs(fx))
            if f_new <= fx - 1e-4 * step * gnorm ** 2 + slack or step < 1e-16:
                break
            step *= 0.5
        x_prev, g_prev = x, g
        x, fx = x_new, f_new
        g = project(grad(x))
    if np.linalg.norm(g) < tol:
        return x, g
    raise MaxIterations(f"{what}: projected gradient residual {np.linalg.norm(g):.3e} "
                        f"after {max_iter} iterations")


def solve_ra_general(ra: ResourceAllocationProblem, tol: float = 1e-10,
                     max_iter: int = 100_000) -> OracleSolution:
    """
    Projected gradient on {sum_i x_i = sum_i R_i} for small instances.

    Starts from the equal split of the total resource; projection removes the
    agent-mean of the stacked gradient.  The multiplier is the common value of
    grad f_i(x_i*) at the solution.

    Raises
    ------
    ValueError
        If the instance has more than 20 scalar variables.
    MaxIterations
        If the projected-gradient residual does not fall below ``tol``.
    """
    m, n = ra.m, ra.n
    if m * n > MAX_GENERAL_VARIABLES:
        raise ValueError(f"solve_ra_general handles at most {MAX_GENERAL_VARIABLES} "
                         f"variables, got m*n = {m * n}")

    def value(X):
        return sum(f.value(x) for f, x in zip(ra.costs, X))

    def grad(X):
        return np.stack([f.gradient(x) for f, x in zip(ra.costs, X)])

    def project(D):
        return D - D.mean(axis=0)

    X0 = np.tile(ra.resources.sum(axis=0) / m, (m, 1))
    X, _ = _armijo_descent(value, grad, project, X0, tol, max_iter, "resource allocation oracle")
    y = grad(X).mean(axis=0)
    return OracleSolution(X, y, float(value(X)))


def solve_consensus(cp: ConsensusProblem, tol: float = 1e-10, method: str = "auto",
                    max_iter: int = 100_000) -> OracleSolution:
    """
    Minimizer s* of sum_i h_i(s).

    ``method`` is ``"closed_form"`` (quadratics: s* = (sum Q_i)^-1 sum Q_i a_i),
    ``"gradient"`` (gradient descent with Armijo backtracking), or ``"auto"``.
    """
    if method == "auto":
        method = "closed_form" if _all_quadratic(cp.costs) else "gradient"
    if method == "closed_form":
        if not _all_quadratic(cp.costs):
            raise TypeError("closed form needs quadratic costs")
        Qs = sum(h.Q for h in cp.costs)
        try:
            s = np.linalg.solve(Qs, sum(h.Q @ h.a for h in cp.costs))
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc
    elif method == "gradient":
        s, _ = _armijo_descent(cp.objective,
                               lambda v: sum(h.gradient(v) for h in cp.costs),
                               lambda d: d, np.zeros(cp.n), tol, max_iter, "consensus oracle")
    else:
        raise ValueError(f"unknown method {method!r}")
    duals = np.stack([h.gradient(s) for h in cp.costs])
    return OracleSolution(s, duals, cp.objective(s))
