"""
Iterative schemes over switching networks.

``run_theorem1`` solves a resource allocation problem through its consensus
dual with the totally asynchronous first-order iteration

    y_i(t+1) = a(t) (y_i(t) - beta z_i(t))
               + (1 - a(t)) ((1 - eta) y_i(t) + eta sum_j W_ij(t) y_j(t)),
    z_i(t)   = x_i(t) - R_i,
    x_i(t)   = argmin_q (f_i(q) - y_i(t)^T q).

``run_reverse_direction`` solves a consensus problem through its Fenchel
dual with the center-free resource allocation iteration

    y_i(t+1) = y_i(t) - step sum_j W_ij(t) (grad h_i*(y_i) - grad h_j*(y_j)),

which keeps sum_i y_i = 0 at every step on symmetric weights.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .duality import (
    ConsensusProblem,
    DualProblem,
    ResourceAllocationProblem,
    fenchel_dual,
    lagrange_dual,
)
from .errors import ConfigRejected, NotStrictlyConvex
from .network import NetworkProcess, WeightedGraphMatrix, certify_a3, validate_a1, validate_a2

log = logging.getLogger(__name__)

INNER_RESIDUAL_WARN = 1e-6
_CHUNK = 4096


# -- step sizes ---------------------------------------------------------------

@dataclass(frozen=True)
class StepSchedule:
    """
    Diminishing relaxation a(t) in [0, 1] with a(t) -> 0 and sum a(t) = inf.

    kinds
    -----
    ``power_decay``
        a(t) = 1 / (1 + t)^zeta, zeta in (0, 1].
    ``constant_then_decay``
        a(t) = alpha0 for t < hold, then alpha0 ((1 + hold) / (1 + t))^zeta.
    ``table``
        a(t) = table[t] for t < len(table), then 1 / (1 + t)^zeta.
    """

    kind: str = "power_decay"
    zeta: float = 1.0
    alpha0: float = 1.0
    hold: int = 0
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in ("power_decay", "constant_then_decay", "table"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not 0.0 < self.zeta <= 1.0:
            raise ValueError("zeta must lie in (0, 1] so that a(t) -> 0 and sum a(t) diverges")
        if not 0.0 < self.alpha0 <= 1.0:
            raise ValueError("alpha0 must lie in (0, 1]")
        if self.hold < 0:
            raise ValueError("hold must be nonnegative")
        if any(not 0.0 <= v <= 1.0 for v in self.table):
            raise ValueError("table values must lie in [0, 1]")
        object.__setattr__(self, "table", tuple(float(v) for v in self.table))

    @classmethod
    def power_decay(cls, zeta: float = 1.0) -> "StepSchedule":
        return cls("power_decay", zeta)

    def alphas(self, horizon: int) -> np.ndarray:
        t = np.arange(int(horizon), dtype=float)
        if self.kind == "power_decay":
            return (1.0 + t) ** -self.zeta
        if self.kind == "constant_then_decay":
            return np.where(t < self.hold, self.alpha0,
                            self.alpha0 * ((1.0 + self.hold) / (1.0 + t)) ** self.zeta)
        out = (1.0 + t) ** -self.zeta
        k = min(len(self.table), len(out))
        out[:k] = self.table[:k]
        return out

    def alpha(self, t: int) -> float:
        if t < 0:
            raise ValueError("t must be nonnegative")
        return float(self.alphas(t + 1)[t])

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "zeta": self.zeta}
        if self.kind == "constant_then_decay":
            d.update(alpha0=self.alpha0, hold=self.hold)
        if self.kind == "table":
            d["table"] = list(self.table)
        return d


def step_alpha(schedule: StepSchedule, t: int) -> float:
    return schedule.alpha(t)


# -- state and results ----------------------------------------------------------

@dataclass
class IterationState:
    """
    Per-agent iterates at time t, each an (m, n) array.

    For the forward iteration ``x`` holds x_i(t) = grad f_i*(y_i(t)) and ``z``
    the dual gradients x_i(t) - R_i.  For the reverse iteration ``x`` holds
    grad h_i*(y_i(t)), ``z`` their deviation from the agent mean, and
    ``beta`` the constant step (``eta`` unused).
    """

    t: int
    y: np.ndarray
    x: np.ndarray
    z: np.ndarray
    beta: float
    eta: float
    inner_iters: float = 0.0


@dataclass
class Trace:
    """
    Per-step records.  Row t describes the step from t to t + 1: the graph and
    relaxation used, and the residuals of the resulting iterate.
    """

    t: np.ndarray
    graph_index: np.ndarray
    graph_labels: list
    alpha: np.ndarray
    consensus_residual: np.ndarray
    constraint_residual: np.ndarray
    dual_error: np.ndarray
    squared_error: np.ndarray
    mean_inner_iters: np.ndarray

    def __len__(self):
        return len(self.t)

    @property
    def labels(self) -> list[str]:
        return [self.graph_labels[k] for k in self.graph_index]


@dataclass
class RunResult:
    trace: Trace
    final_state: IterationState
    converged: bool
    converged_at: Optional[int]
    recovered: np.ndarray
    mean_history: np.ndarray
    gradient_mean_history: np.ndarray
    inner_residual_max: float = 0.0
    warnings: list = field(default_factory=list)
    y_history: Optional[np.ndarray] = None


def _first_window(ok: np.ndarray, window: int) -> Optional[int]:
    if len(ok) < window:
        return None
    csum = np.concatenate([[0], np.cumsum(ok, dtype=np.int64)])
    full = np.flatnonzero(csum[window:] - csum[:-window] == window)
    return int(full[0]) if len(full) else None


def _as_stack(y, m: int, n: int) -> np.ndarray:
    Y = np.array(y, dtype=float)
    if Y.size == n and m > 1 and Y.shape != (m, n):
        Y = np.tile(Y.reshape(1, n), (m, 1))
    return Y.reshape(m, n)


# -- forward iteration ------------------------------------------------------------

def _mix(Y, Z, W, alpha, beta, eta):
    return alpha * (Y - beta * Z) + (1.0 - alpha) * ((1.0 - eta) * Y + eta * (W @ Y))


def initial_state(dp: DualProblem, y0, beta: float, eta: float) -> IterationState:
    Y = _as_stack(y0, dp.m, dp.n)
    X, iters, _ = dp.primal_points(Y)
    return IterationState(0, Y, X, X - dp.resources, float(beta), float(eta), iters)


def async_dual_step(state: IterationState, dp: DualProblem, w: WeightedGraphMatrix,
                    alpha_t: float) -> IterationState:
    """
    One synchronous realization of the asynchronous update.

    Every agent reads generation t and writes generation t + 1; asynchrony is
    carried entirely by ``w`` (the identity means nobody communicates).
    """
    if not 0.0 <= alpha_t <= 1.0:
        raise ConfigRejected(f"alpha_t = {alpha_t} is outside [0, 1]")
    rep = validate_a1(w)
    if not rep.ok:
        raise ConfigRejected(f"graph {w.label!r} is not doubly stochastic: {rep.describe()}")
    Y = _mix(state.y, state.z, w.weights, alpha_t, state.beta, state.eta)
    X, iters, _ = dp.primal_points(Y, state.x)
    return IterationState(state.t + 1, Y, X, X - dp.resources, state.beta, state.eta, iters)


def _check_network(process: NetworkProcess, m: int, symmetric: bool = False) -> dict:
    if process.universe.m != m:
        raise ConfigRejected(f"network has {process.universe.m} agents, problem has {m}")
    a1 = [validate_a1(g) for g in process.universe]
    bad = [(g.label, r.describe()) for g, r in zip(process.universe, a1) if not r.ok]
    if bad:
        raise ConfigRejected(f"A1 violated (not doubly stochastic): {bad}")
    if symmetric:
        asym = [g.label for g in process.universe if not g.is_symmetric()]
        if asym:
            raise ConfigRejected(f"the center-free iteration needs symmetric weights; {asym} are not")
    a2 = validate_a2(process.universe)
    if not a2.ok:
        raise ConfigRejected(f"A2 violated: union of graphs is not strongly connected "
                             f"(Re lambda_2 = {a2.lambda2.real:.3e})")
    a3 = certify_a3(process)
    if not a3.certified:
        raise ConfigRejected(f"A3 not certified: {a3.reason}")
    if a3.support_a2 is not None and not a3.support_a2.ok:
        raise ConfigRejected("A3 support is not jointly connected: " + "; ".join(a3.warnings))
    return {"a1": a1, "a2": a2, "a3": a3}


def _resolve_oracle(oracle, n: int) -> Optional[np.ndarray]:
    if oracle is None:
        return None
    return np.asarray(getattr(oracle, "dual", oracle), dtype=float).reshape(n)


def run_theorem1(ra: Union[ResourceAllocationProblem, DualProblem], process: NetworkProcess,
                 schedule: StepSchedule, beta: Union[float, str] = "auto", eta: float = 0.5,
                 horizon: int = 10_000, y0=None, oracle=None, convergence_tol: float = 1e-2,
                 window: int = 100, inner_tol: float = 1e-10, keep_history: bool = False) -> RunResult:
    """
    Solve a resource allocation problem by running the asynchronous dual iteration.

    Parameters
    ----------
    ra : ResourceAllocationProblem or DualProblem
        The instance (or its precomputed consensus dual).
    process : NetworkProcess
        Switching model for W(t); its seed fixes the graph sequence.
    schedule : StepSchedule
        Relaxation a(t).
    beta : float or "auto"
        Gradient step; must lie in (0, 2 mu / K^2).  "auto" is mu / K^2.
    eta : float
        Mixing weight in (0, 1).
    horizon : int
        Number of steps.
    y0 : array_like, optional
        Initial duals, one row per agent (or one vector for all).  Zeros by default.
    oracle : OracleSolution or array_like, optional
        Reference multiplier y*; enables the dual error columns of the trace.
    convergence_tol, window : float, int
        Converged once the consensus and constraint residuals both stay below
        ``convergence_tol`` for ``window`` consecutive steps.
    keep_history : bool
        Keep every iterate y(t) in ``RunResult.y_history`` (memory m*n*horizon).

    Raises
    ------
    ConfigRejected
        If any precondition (strict convexity, beta, eta, A1-A3) fails.
    """
    if isinstance(ra, DualProblem):
        dp = ra
    else:
        try:
            dp = lagrange_dual(ra, inner_tol=inner_tol)
        except NotStrictlyConvex as exc:
            raise ConfigRejected(f"lagrange dual unavailable: {exc}") from exc
    if dp.mu <= 0:
        raise ConfigRejected("every cost needs a Lipschitz gradient so that the dual is strongly convex")
    lo, hi = dp.beta_interval
    beta = dp.default_beta if beta == "auto" else float(beta)
    if not lo < beta < hi:
        raise ConfigRejected(f"beta = {beta} is outside the admissible interval ({lo}, {hi})")
    if not 0.0 < eta < 1.0:
        raise ConfigRejected(f"eta = {eta} is outside (0, 1)")
    if horizon < 0:
        raise ConfigRejected("horizon must be nonnegative")
    _check_network(process, dp.m)

    m, n = dp.m, dp.n
    y_star = _resolve_oracle(oracle, n)
    state = initial_state(dp, np.zeros((m, n)) if y0 is None else y0, beta, eta)
    idx = process.sample_indices(horizon)
    alphas = schedule.alphas(horizon)
    Ws = process.universe.stacked()
    R = dp.resources
    R_total = R.sum(axis=0)

    cons = np.empty(horizon)
    constr = np.empty(horizon)
    derr = np.full(horizon, np.nan)
    sqerr = np.full(horizon, np.nan)
    inner = np.empty(horizon)
    ybar = np.empty((horizon + 1, n))
    xbar = np.empty((horizon + 1, n))
    ybar[0], xbar[0] = state.y.mean(axis=0), state.x.mean(axis=0)
    history = np.empty((horizon, m, n)) if keep_history else None
    buf_y = np.empty((min(_CHUNK, max(horizon, 1)), m, n))
    buf_xs = np.empty((buf_y.shape[0], n))
    inner_res = 0.0

    Y, X = state.y, state.x
    Z = X - R
    start = 0
    while start < horizon:
        stop = min(start + _CHUNK, horizon)
        for k, t in enumerate(range(start, stop)):
            Y = _mix(Y, Z, Ws[idx[t]], alphas[t], beta, eta)
            X, inner[t], res = dp.primal_points(Y, X)
            Z = X - R
            buf_y[k] = Y
            buf_xs[k] = X.sum(axis=0)
            if res > inner_res:
                inner_res = res
        # residuals of the whole chunk at once
        Yc = buf_y[: stop - start]
        mean = Yc.mean(axis=1)
        ybar[start + 1: stop + 1] = mean
        xbar[start + 1: stop + 1] = buf_xs[: stop - start] / m
        cons[start:stop] = np.linalg.norm(Yc - mean[:, None, :], axis=2).max(axis=1)
        constr[start:stop] = np.linalg.norm(buf_xs[: stop - start] - R_total, axis=1)
        if y_star is not None:
            derr[start:stop] = np.linalg.norm(mean - y_star, axis=1)
            sqerr[start:stop] = ((Yc - y_star) ** 2).sum(axis=(1, 2))
        if history is not None:
            history[start:stop] = Yc
        start = stop

    final = IterationState(horizon, Y, X, Z, beta, eta, float(inner[-1]) if horizon else state.inner_iters)
    converged_at = _first_window((cons < convergence_tol) & (constr < convergence_tol), window)
    warnings = []
    if inner_res > INNER_RESIDUAL_WARN:
        msg = f"inner solves reached residual {inner_res:.3e} (> {INNER_RESIDUAL_WARN:g})"
        log.warning(msg)
        warnings.append(msg)
    trace = Trace(np.arange(horizon), idx, process.universe.labels, alphas, cons, constr,
                  derr, sqerr, inner)
    return RunResult(trace, final, converged_at is not None, converged_at, X.copy(), ybar,
                     xbar - R.mean(axis=0), inner_res, warnings, history)


def mean_drift(result: RunResult) -> np.ndarray:
    """
    Per-step deviation of the agent average from its gradient-only update.

    With doubly stochastic W the mixing leaves the average untouched, so
    ybar(t+1) - (ybar(t) - a(t) beta zbar(t)) should vanish to rounding.
    """
    beta = result.final_state.beta
    a = result.trace.alpha[:, None]
    ybar, zbar = result.mean_history, result.gradient_mean_history
    return np.linalg.norm(ybar[1:] - (ybar[:-1] - a * beta * zbar[:-1]), axis=1)


# -- reverse direction -------------------------------------------------------------

def center_free_step(state: IterationState, dp: DualProblem, w: WeightedGraphMatrix) -> IterationState:
    """
    One step of the center-free iteration with constant step ``state.beta``.

    ``state.x`` must hold grad h_i*(y_i).  Symmetric ``w`` keeps sum_i y_i fixed.
    """
    rep = validate_a1(w)
    if not rep.ok:
        raise ConfigRejected(f"graph {w.label!r} is not doubly stochastic: {rep.describe()}")
    if not w.is_symmetric():
        raise ConfigRejected(f"the center-free iteration needs symmetric weights; {w.label!r} is not")
    G = state.x
    # sum_j W_ij (g_i - g_j) = g_i - (W g)_i for row-stochastic W
    Y = state.y - state.beta * (G - w.weights @ G)
    X, iters, _ = dp.primal_points(Y, G)
    return IterationState(state.t + 1, Y, X, X - X.mean(axis=0), state.beta, 0.0, iters)


def run_reverse_direction(cp: Union[ConsensusProblem, DualProblem], process: NetworkProcess,
                          step: Union[float, str] = "auto", horizon: int = 1000, y0=None,
                          oracle=None, convergence_tol: float = 1e-2, window: int = 100,
                          inner_tol: float = 1e-10, conservation_tol: float = 1e-12) -> RunResult:
    """
    Solve a consensus problem through its Fenchel dual with a center-free iteration.

    Parameters
    ----------
    cp : ConsensusProblem or DualProblem
        The instance (or its precomputed Fenchel dual).
    process : NetworkProcess
        Switching model; every graph must have symmetric weights.
    step : float or "auto"
        Constant step; "auto" is 0.5 / Lip(stacked conjugate gradient) = 0.5 min_i rho_i.
    y0 : array_like, optional
        Initial duals with sum_i y0_i = 0; zeros by default.
    oracle : OracleSolution or array_like, optional
        Reference consensus point s*; enables the dual error column.

    The trace's consensus residual is the disagreement max_ij ||grad h_i*(y_i)
    - grad h_j*(y_j)|| and its constraint residual is ||sum_i y_i||.

    Raises
    ------
    ConfigRejected
        On asymmetric graphs, y0 not summing to zero, or failed A1-A3 checks.
    """
    if isinstance(cp, DualProblem):
        dp = cp
    else:
        try:
            dp = fenchel_dual(cp, inner_tol=inner_tol)
        except NotStrictlyConvex as exc:
            raise ConfigRejected(f"fenchel dual unavailable: {exc}") from exc
    m, n = dp.m, dp.n
    if step == "auto":
        step = 0.5 * min(c.base.strong_convexity for c in dp.conjugates)
    step = float(step)
    if step <= 0:
        raise ConfigRejected("step must be positive")
    Y = np.zeros((m, n)) if y0 is None else _as_stack(y0, m, n)
    if np.linalg.norm(Y.sum(axis=0)) > conservation_tol:
        raise ConfigRejected(f"initial duals must sum to zero, got {Y.sum(axis=0).tolist()}")
    _check_network(process, m, symmetric=True)

    s_star = None
    if oracle is not None:
        s_star = np.asarray(getattr(oracle, "primal", oracle), dtype=float).reshape(n)
    idx = process.sample_indices(horizon)
    Ws = process.universe.stacked()
    G, it0, _ = dp.primal_points(Y)

    cons = np.empty(horizon)
    constr = np.empty(horizon)
    derr = np.full(horizon, np.nan)
    inner = np.empty(horizon)
    ybar = np.empty((horizon + 1, n))
    gbar = np.empty((horizon + 1, n))
    ybar[0], gbar[0] = Y.mean(axis=0), G.mean(axis=0)
    inner_res = 0.0
    iu = np.triu_indices(m, 1)
    for t in range(horizon):
        W = Ws[idx[t]]
        # sum_j W_ij (g_i - g_j) = g_i - (W g)_i for row-stochastic W
        Y = Y - step * (G - W @ G)
        G, inner[t], res = dp.primal_points(Y, G)
        inner_res = max(inner_res, res)
        ybar[t + 1], gbar[t + 1] = Y.mean(axis=0), G.mean(axis=0)
        diff = G[:, None, :] - G[None, :, :]
        cons[t] = np.sqrt((diff[iu] ** 2).sum(axis=1).max()) if m > 1 else 0.0
        constr[t] = np.linalg.norm(Y.sum(axis=0))
        if s_star is not None:
            derr[t] = np.linalg.norm(gbar[t + 1] - s_star)

    final = IterationState(horizon, Y, G, G - G.mean(axis=0), step, 0.0,
                           float(inner[-1]) if horizon else it0)
    converged_at = _first_window((cons < convergence_tol) & (constr < convergence_tol), window)
    warnings = []
    if inner_res > INNER_RESIDUAL_WARN:
        warnings.append(f"inner solves reached residual {inner_res:.3e}")
    sqerr = np.full(horizon, np.nan)
    trace = Trace(np.arange(horizon), idx, process.universe.labels, np.full(horizon, np.nan),
                  cons, constr, derr, sqerr, inner)
    return RunResult(trace, final, converged_at is not None, converged_at, G.mean(axis=0),
                     ybar, gbar, inner_res, warnings)
