"""
Convex costs and their Fenchel conjugates.

Every conjugate here is evaluated through its maximizer

    x*(y) = argmax_x (y^T x - f(x)),

which is also the conjugate gradient.  Quadratics use the closed form,
everything else solves the inner problem numerically (damped Newton when a
Hessian oracle is available, gradient ascent with Armijo backtracking
otherwise).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InnerSolverDiverged, NotStrictlyConvex, SingularHessian

_EPS = np.finfo(float).eps


def _as_vector(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (dim,):
        raise ValueError(f"expected a vector of length {dim}, got shape {x.shape}")
    return x


class ConvexFunction:
    """
    Scalar convex cost on R^n.

    Parameters
    ----------
    dim : int
        Dimension of the decision variable.
    strong_convexity : float
        Strong convexity modulus rho; 0 means unknown or none.
    lipschitz : float, optional
        Lipschitz constant L of the gradient, if known.
    """

    kind = "abstract"

    def __init__(self, dim: int, strong_convexity: float = 0.0,
                 lipschitz: Optional[float] = None):
        if int(dim) < 1:
            raise ValueError("dim must be a positive integer")
        if strong_convexity < 0:
            raise ValueError("strong_convexity must be nonnegative")
        if lipschitz is not None and lipschitz <= 0:
            raise ValueError("lipschitz must be positive when given")
        self.dim = int(dim)
        self.strong_convexity = float(strong_convexity)
        self.lipschitz = None if lipschitz is None else float(lipschitz)

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, x) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no Hessian oracle")

    @property
    def has_hessian(self) -> bool:
        return False

    def __call__(self, x) -> float:
        return self.value(x)


class QuadraticFunction(ConvexFunction):
    """
    f(x) = 1/2 (x - a)^T Q (x - a) + offset with Q symmetric positive definite.

    rho and L are the extreme eigenvalues of Q.
    """

    kind = "quadratic"

    def __init__(self, Q, a=None, offset: float = 0.0):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError(f"Q must be square, got shape {Q.shape}")
        n = Q.shape[0]
        if not np.allclose(Q, Q.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(Q).max())):
            raise ValueError("Q must be symmetric")
        Q = 0.5 * (Q + Q.T)
        eig = np.linalg.eigvalsh(Q)
        if eig[0] <= 0:
            raise NotStrictlyConvex(
                f"quadratic needs a positive definite Q (smallest eigenvalue {eig[0]:.3g})")
        super().__init__(n, strong_convexity=eig[0], lipschitz=eig[-1])
        self.Q = Q
        self.a = np.zeros(n) if a is None else _as_vector(a, n)
        self.offset = float(offset)
        self.Q_inv = np.linalg.inv(Q)
        self.Q.setflags(write=False)
        self.a.setflags(write=False)
        self.Q_inv.setflags(write=False)

    def value(self, x) -> float:
        d = _as_vector(x, self.dim) - self.a
        return 0.5 * float(d @ self.Q @ d) + self.offset

    def gradient(self, x) -> np.ndarray:
        return self.Q @ (_as_vector(x, self.dim) - self.a)

    def hessian(self, x) -> np.ndarray:
        return self.Q.copy()

    @property
    def has_hessian(self) -> bool:
        return True

    def __repr__(self):
        return f"QuadraticFunction(Q={self.Q.tolist()}, a={self.a.tolist()})"


class LogSumExpFunction(ConvexFunction):
    """
    f(x) = log sum_k exp(b_k^T x + c_k) + rho/2 ||x||^2.

    The log-sum-exp Hessian is bounded by ||B||^2 / 2, so L = rho + ||B||_2^2 / 2.
    """

    kind = "log_sum_exp"

    def __init__(self, B, c=None, rho: float = 1.0):
        B = np.atleast_2d(np.asarray(B, dtype=float))
        k, n = B.shape
        c = np.zeros(k) if c is None else _as_vector(c, k)
        L = rho + 0.5 * np.linalg.norm(B, 2) ** 2
        super().__init__(n, strong_convexity=rho, lipschitz=L if L > 0 else None)
        self.B, self.c, self.rho = B, c, float(rho)

    def _softmax(self, x):
        z = self.B @ x + self.c
        zmax = z.max()
        w = np.exp(z - zmax)
        s = w.sum()
        return zmax + np.log(s), w / s

    def value(self, x) -> float:
        x = _as_vector(x, self.dim)
        lse, _ = self._softmax(x)
        return float(lse + 0.5 * self.rho * x @ x)

    def gradient(self, x) -> np.ndarray:
        x = _as_vector(x, self.dim)
        _, p = self._softmax(x)
        return self.B.T @ p + self.rho * x

    def hessian(self, x) -> np.ndarray:
        x = _as_vector(x, self.dim)
        _, p = self._softmax(x)
        return self.B.T @ (np.diag(p) - np.outer(p, p)) @ self.B + self.rho * np.eye(self.dim)

    @property
    def has_hessian(self) -> bool:
        return True


class BlackBoxFunction(ConvexFunction):
    """Convex cost given only through value/gradient (and optionally Hessian) callables."""

    kind = "black_box"

    def __init__(self, dim: int, value: Callable, gradient: Callable,
                 hessian: Optional[Callable] = None, strong_convexity: float = 0.0,
                 lipschitz: Optional[float] = None):
        super().__init__(dim, strong_convexity, lipschitz)
        self._value, self._gradient, self._hessian = value, gradient, hessian

    def value(self, x) -> float:
        return float(self._value(_as_vector(x, self.dim)))

    def gradient(self, x) -> np.ndarray:
        return np.asarray(self._gradient(_as_vector(x, self.dim)), dtype=float).reshape(self.dim)

    def hessian(self, x) -> np.ndarray:
        if self._hessian is None:
            return super().hessian(x)
        H = np.asarray(self._hessian(_as_vector(x, self.dim)), dtype=float)
        return H.reshape(self.dim, self.dim)

    @property
    def has_hessian(self) -> bool:
        return self._hessian is not None


class ConjugateFunction(ConvexFunction):
    """
    Fenchel conjugate f*(y) = sup_x (y^T x - f(x)) of a strongly convex cost.

    The conjugate is itself a convex function: if f is rho-strongly convex its
    gradient is (1/rho)-Lipschitz, and if grad f is L-Lipschitz it is
    (1/L)-strongly convex.

    Parameters
    ----------
    base : ConvexFunction
        The function f.  Must have ``strong_convexity > 0``.
    tol : float
        Stopping tolerance on ||grad f(x) - y|| for numerical inner solves.
    max_iter : int
        Iteration cap for numerical inner solves.
    """

    kind = "conjugate"

    def __init__(self, base: ConvexFunction, tol: float = 1e-10, max_iter: int = 200):
        if base.strong_convexity <= 0:
            raise NotStrictlyConvex(
                f"{type(base).__name__} has no positive strong convexity modulus; "
                "its conjugate gradient is not single-valued")
        lip = 1.0 / base.strong_convexity
        mu = 0.0 if base.lipschitz is None else 1.0 / base.lipschitz
        super().__init__(base.dim, strong_convexity=mu, lipschitz=lip)
        self.base = base
        self.tol = float(tol)
        self.max_iter = int(max_iter)

    # inner maximization

    def maximizer(self, y, x0=None) -> tuple[np.ndarray, int]:
        """
        Solve argmax_x (y^T x - f(x)).

        Returns the maximizer and the number of inner iterations spent (0 for
        closed forms).  ``x0`` warm-starts numerical solves.
        """
        y = _as_vector(y, self.dim)
        base = self.base
        if isinstance(base, QuadraticFunction):
            return base.a + base.Q_inv @ y, 0
        x = np.zeros(self.dim) if x0 is None else _as_vector(x0, self.dim).copy()
        if base.has_hessian:
            return self._newton(y, x)
        return self._gradient_ascent(y, x)

    def _newton(self, y, x):
        f = self.base
        g = f.gradient(x) - y
        gnorm = np.linalg.norm(g)
        for it in range(self.max_iter):
            if gnorm <= self.tol:
                return x, it
            try:
                d = -np.linalg.solve(f.hessian(x), g)
            except np.linalg.LinAlgError as exc:
                raise InnerSolverDiverged(f"Newton system singular at iteration {it}") from exc
            # damped on the residual norm ||grad f(x) - y||; avoids comparing
            # objective values that are equal to machine precision near the optimum
            t = 1.0
            while True:
                x_new = x + t * d
                g_new = f.gradient(x_new) - y
                gnew_norm = np.linalg.norm(g_new)
                if gnew_norm <= (1.0 - 1e-4 * t) * gnorm or t < 1e-12:
                    break
                t *= 0.5
            x, g, gnorm = x_new, g_new, gnew_norm
        if gnorm <= self.tol:
            return x, self.max_iter
        raise InnerSolverDiverged(
            f"Newton inner solve stopped at residual {gnorm:.3e} after {self.max_iter} iterations")

    def _gradient_ascent(self, y, x):
        f = self.base
        step0 = 1.0 / f.lipschitz if f.lipschitz else 1.0
        phi = f.value(x) - y @ x
        g = f.gradient(x) - y
        gnorm = np.linalg.norm(g)
        for it in range(self.max_iter):
            if gnorm <= self.tol:
                return x, it
            t = step0
            while True:
                x_new = x - t * g
                phi_new = f.value(x_new) - y @ x_new
                # slack absorbs roundoff once the decrease drops below eps * |phi|
                slack = 8 * _EPS * max(1.0, abs(phi))
                if phi_new <= phi - 1e-4 * t * gnorm ** 2 + slack or t < 1e-14:
                    break
                t *= 0.5
            x, phi = x_new, phi_new
            g = f.gradient(x) - y
            gnorm = np.linalg.norm(g)
        if gnorm <= self.tol:
            return x, self.max_iter
        raise InnerSolverDiverged(
            f"gradient inner solve stopped at residual {gnorm:.3e} after {self.max_iter} iterations")

    # conjugate calculus

    def value(self, y, x0=None) -> float:
        y = _as_vector(y, self.dim)
        base = self.base
        if isinstance(base, QuadraticFunction):
            v = y + base.Q @ base.a
            return 0.5 * float(v @ base.Q_inv @ v) - 0.5 * float(base.a @ base.Q @ base.a) - base.offset
        x, _ = self.maximizer(y, x0)
        return float(y @ x) - base.value(x)

    def gradient(self, y, x0=None) -> np.ndarray:
        return self.maximizer(y, x0)[0]

    def hessian(self, y, x0=None) -> np.ndarray:
        base = self.base
        if isinstance(base, QuadraticFunction):
            return base.Q_inv.copy()
        if not base.has_hessian:
            raise NotImplementedError("conjugate Hessian needs a Hessian oracle on the base function")
        x, _ = self.maximizer(y, x0)
        H = base.hessian(x)
        if np.linalg.cond(H) > 1.0 / (1e3 * _EPS):
            raise SingularHessian(f"Hessian at the maximizer is numerically singular (cond={np.linalg.cond(H):.3e})")
        try:
            return np.linalg.inv(H)
        except np.linalg.LinAlgError as exc:
            raise SingularHessian(str(exc)) from exc

    @property
    def has_hessian(self) -> bool:
        return isinstance(self.base, QuadraticFunction) or self.base.has_hessian


def conjugate_value(c: ConjugateFunction, y) -> float:
    return c.value(y)


def conjugate_gradient(c: ConjugateFunction, y) -> np.ndarray:
    return c.gradient(y)


def conjugate_hessian(c: ConjugateFunction, y) -> np.ndarray:
    return c.hessian(y)


@dataclass
class ConjugacyReport:
    """Empirical check of the conjugate's Lipschitz / strong convexity / Fenchel-Young properties."""

    samples: int
    lipschitz_estimate: float
    lipschitz_bound: float
    strong_convexity_estimate: float
    strong_convexity_bound: Optional[float]
    fenchel_young_min_gap: float
    fenchel_young_equality_gap: float
    inverse_gradient_residual: float
    skipped: int = 0
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "lipschitz_estimate": self.lipschitz_estimate,
            "lipschitz_bound": self.lipschitz_bound,
            "strong_convexity_estimate": self.strong_convexity_estimate,
            "strong_convexity_bound": self.strong_convexity_bound,
            "fenchel_young_min_gap": self.fenchel_young_min_gap,
            "fenchel_young_equality_gap": self.fenchel_young_equality_gap,
            "inverse_gradient_residual": self.inverse_gradient_residual,
            "skipped": self.skipped,
            "passed": self.passed,
            "violations": list(self.violations),
        }


def verify_conjugate_duality_properties(f: ConvexFunction, sample_count: int = 100, seed=0,
                                        tol: float = 1e-6, equality_tol: float = 1e-8,
                                        scale: float = 3.0) -> ConjugacyReport:
    """
    Sample the conjugate of ``f`` and check its first-order properties.

    Checks, over ``sample_count`` random pairs:

    * Lip(grad f*) <= 1/rho + tol,
    * strong convexity of f* >= 1/L - tol (skipped when L is unknown),
    * Fenchel-Young f(x) + f*(y) >= x^T y - tol, with equality (to
      ``equality_tol``) at y = grad f(x),
    * grad f(grad f*(y)) = y.

    Points where the inner solver fails are skipped and counted.

    Raises
    ------
    NotStrictlyConvex
        If ``f`` has no positive strong convexity modulus.
    """
    conj = ConjugateFunction(f)
    rng = np.random.default_rng(seed)
    n = f.dim
    lip_est, sc_est = 0.0, np.inf
    fy_min, fy_eq, inv_res = np.inf, 0.0, 0.0
    skipped = 0
    for _ in range(sample_count):
        y1, y2 = scale * rng.standard_normal(n), scale * rng.standard_normal(n)
        x = scale * rng.standard_normal(n)
        try:
            g1, g2 = conj.gradient(y1), conj.gradient(y2)
            fy_min = min(fy_min, f.value(x) + conj.value(y1) - x @ y1)
            y_eq = f.gradient(x)
            fy_eq = max(fy_eq, abs(f.value(x) + conj.value(y_eq) - x @ y_eq))
        except InnerSolverDiverged:
            skipped += 1
            continue
        dy = y1 - y2
        dy2 = dy @ dy
        if dy2 > 0:
            dg = g1 - g2
            lip_est = max(lip_est, np.linalg.norm(dg) / np.sqrt(dy2))
            sc_est = min(sc_est, (dy @ dg) / dy2)
        inv_res = max(inv_res, np.linalg.norm(f.gradient(g1) - y1), np.linalg.norm(f.gradient(g2) - y2))

    lip_bound = 1.0 / f.strong_convexity
    sc_bound = None if f.lipschitz is None else 1.0 / f.lipschitz
    violations = []
    if lip_est > lip_bound + tol:
        violations.append(f"Lipschitz estimate {lip_est:.9g} exceeds 1/rho = {lip_bound:.9g}")
    if sc_bound is not None and sc_est < sc_bound - tol:
        violations.append(f"strong convexity estimate {sc_est:.9g} below 1/L = {sc_bound:.9g}")
    if fy_min < -tol:
        violations.append(f"Fenchel-Young inequality violated by {-fy_min:.3e}")
    if fy_eq >= equality_tol:
        violations.append(f"Fenchel-Young equality gap {fy_eq:.3e} at y = grad f(x)")
    if inv_res > max(tol, 10 * conj.tol):
        violations.append(f"grad f(grad f*(y)) deviates from y by {inv_res:.3e}")
    if skipped == sample_count:
        violations.append("inner solver failed on every sample")
    return ConjugacyReport(
        samples=sample_count - skipped,
        lipschitz_estimate=float(lip_est),
        lipschitz_bound=lip_bound,
        strong_convexity_estimate=float(sc_est),
        strong_convexity_bound=sc_bound,
        fenchel_young_min_gap=float(fy_min),
        fenchel_young_equality_gap=float(fy_eq),
        inverse_gradient_residual=float(inv_res),
        skipped=skipped,
        violations=violations,
    )


def function_from_dict(spec: dict) -> ConvexFunction:
    """
    Build a cost from its JSON form.

    ``{"kind": "quadratic", "Q": [[...]], "a": [...]}`` (Q row-major; a scalar
    Q is accepted for n = 1) or ``{"kind": "log_sum_exp", "B": [[...]],
    "c": [...], "rho": r}``.  Black-box costs can only be built in code.
    """
    kind = spec.get("kind")
    if kind == "quadratic":
        Q = np.asarray(spec["Q"], dtype=float)
        if Q.ndim == 0:
            Q = Q.reshape(1, 1)
        elif Q.ndim == 1:
            Q = np.diag(Q)
        a = spec.get("a")
        if a is not None:
            a = np.atleast_1d(np.asarray(a, dtype=float))
        return QuadraticFunction(Q, a, spec.get("offset", 0.0))
    if kind == "log_sum_exp":
        return LogSumExpFunction(spec["B"], spec.get("c"), spec.get("rho", 1.0))
    raise ValueError(f"unknown function kind {kind!r}; expected 'quadratic' or 'log_sum_exp'")
