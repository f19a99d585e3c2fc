"""
Communication graphs, weighted graph matrices, and switching processes.

A run over a switching network sees one realization W(t) per step, drawn
from a finite universe of doubly stochastic matrices.  The identity is a
legal realization and stands for "nobody communicates this step", which is
how asynchrony is modelled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import EigensolverFailure

A1_TOL = 1e-12
A2_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class WeightedGraphMatrix:
    """
    One realization of the communication topology.

    Entry (i, j) is the weight agent i puts on agent j's value; the diagonal
    holds self-weights.  Off-diagonal nonzeros are the edges j -> i.
    """

    weights: np.ndarray
    label: str = ""

    def __post_init__(self):
        W = np.array(self.weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] < 1:
            raise ValueError(f"weights must be a nonempty square matrix, got shape {W.shape}")
        if np.any(~np.isfinite(W)):
            raise ValueError("weights must be finite")
        if W.min() < -A1_TOL or W.max() > 1 + A1_TOL:
            raise ValueError("weights must lie in [0, 1]")
        W.setflags(write=False)
        object.__setattr__(self, "weights", W)

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    def in_neighbors(self, i: int) -> list[int]:
        return [j for j in range(self.m) if j != i and self.weights[i, j] > 0]

    def out_neighbors(self, i: int) -> list[int]:
        return [j for j in range(self.m) if j != i and self.weights[j, i] > 0]

    def is_symmetric(self, tol: float = A1_TOL) -> bool:
        return bool(np.allclose(self.weights, self.weights.T, rtol=0.0, atol=tol))

    def __repr__(self):
        return f"WeightedGraphMatrix(label={self.label!r}, m={self.m})"


@dataclass(frozen=True)
class GraphUniverse:
    """The finite set of graph realizations a process can draw from."""

    graphs: tuple

    def __post_init__(self):
        graphs = tuple(self.graphs)
        if not graphs:
            raise ValueError("a graph universe needs at least one graph")
        sizes = {g.m for g in graphs}
        if len(sizes) != 1:
            raise ValueError(f"all graphs must share the same agent count, got {sorted(sizes)}")
        object.__setattr__(self, "graphs", graphs)

    @property
    def m(self) -> int:
        return self.graphs[0].m

    @property
    def labels(self) -> list[str]:
        return [g.label for g in self.graphs]

    def __len__(self):
        return len(self.graphs)

    def __getitem__(self, k) -> WeightedGraphMatrix:
        return self.graphs[k]

    def __iter__(self):
        return iter(self.graphs)

    def stacked(self) -> np.ndarray:
        """All weight matrices as one (N, m, m) array."""
        return np.stack([g.weights for g in self.graphs])

    def subset(self, indices: Sequence[int]) -> "GraphUniverse":
        return GraphUniverse(tuple(self.graphs[k] for k in indices))

    def to_dict(self) -> dict:
        return {"m": self.m,
                "graphs": [{"label": g.label, "weights": g.weights.tolist()} for g in self.graphs]}


# -- constructions ----------------------------------------------------------

def metropolis_weights(adjacency, label: str = "") -> WeightedGraphMatrix:
    """
    Metropolis-Hastings weights of an undirected graph.

    W_ij = 1 / (1 + max(d_i, d_j)) on edges and W_ii = 1 - sum_{j != i} W_ij,
    which is symmetric and therefore doubly stochastic.
    """
    A = np.asarray(adjacency)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("adjacency must be square")
    if not np.array_equal(A, A.T):
        raise ValueError("adjacency must be symmetric (undirected graph)")
    if np.any(np.diag(A) != 0):
        raise ValueError("adjacency must have a zero diagonal (no self-loops)")
    if not np.all((A == 0) | (A == 1)):
        raise ValueError("adjacency entries must be 0 or 1")
    A = A.astype(bool)
    deg = A.sum(axis=1)
    W = np.where(A, 1.0 / (1.0 + np.maximum.outer(deg, deg)), 0.0)
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    return WeightedGraphMatrix(W, label)


def gossip_matrix(m: int, pairs, label: Optional[str] = None) -> WeightedGraphMatrix:
    """
    Randomized-gossip realization: each activated pair (i, j) averages.

    W_ii = W_jj = W_ij = W_ji = 1/2 for every activated pair, identity
    elsewhere.  Pairs must be disjoint.
    """
    pairs = [tuple(int(v) for v in p) for p in pairs]
    if len(pairs) and np.asarray(pairs).ndim == 1:
        pairs = [tuple(pairs)]
    seen = set()
    W = np.eye(m)
    for i, j in pairs:
        if i == j or not (0 <= i < m and 0 <= j < m):
            raise ValueError(f"invalid gossip pair ({i}, {j}) for m={m}")
        if i in seen or j in seen:
            raise ValueError("gossip pairs activated together must be disjoint")
        seen.update((i, j))
        W[i, i] = W[j, j] = W[i, j] = W[j, i] = 0.5
    if label is None:
        label = "+".join(f"{i}-{j}" for i, j in pairs) or "idle"
    return WeightedGraphMatrix(W, label)


def lift_matrix(w: Union[WeightedGraphMatrix, np.ndarray], n: int) -> np.ndarray:
    """Kronecker lift W (x) I_n acting on stacked (m*n)-vectors."""
    if n < 1:
        raise ValueError("n must be >= 1")
    W = w.weights if isinstance(w, WeightedGraphMatrix) else np.asarray(w, dtype=float)
    return np.kron(W, np.eye(n))


# -- Assumption checks -------------------------------------------------------

@dataclass
class A1Report:
    ok: bool
    row_sums: np.ndarray
    column_sums: np.ndarray
    bad_rows: list
    bad_columns: list
    negative_entries: list

    def to_dict(self) -> dict:
        return {"ok": self.ok, "row_sums": self.row_sums.tolist(),
                "column_sums": self.column_sums.tolist(), "bad_rows": self.bad_rows,
                "bad_columns": self.bad_columns,
                "negative_entries": [list(e) for e in self.negative_entries]}

    def describe(self) -> str:
        if self.ok:
            return "doubly stochastic"
        parts = [f"row {i} sums to {self.row_sums[i]:.12g}" for i in self.bad_rows]
        parts += [f"column {j} sums to {self.column_sums[j]:.12g}" for j in self.bad_columns]
        parts += [f"negative entry at {e}" for e in self.negative_entries]
        return "; ".join(parts)


def validate_a1(w: Union[WeightedGraphMatrix, np.ndarray], tol: float = A1_TOL) -> A1Report:
    """Double stochasticity: nonnegative entries, all row and column sums equal to one."""
    W = w.weights if isinstance(w, WeightedGraphMatrix) else np.asarray(w, dtype=float)
    rows, cols = W.sum(axis=1), W.sum(axis=0)
    bad_rows = [int(i) for i in np.flatnonzero(np.abs(rows - 1.0) > tol)]
    bad_cols = [int(j) for j in np.flatnonzero(np.abs(cols - 1.0) > tol)]
    neg = [(int(i), int(j)) for i, j in zip(*np.nonzero(W < 0))]
    return A1Report(not (bad_rows or bad_cols or neg), rows, cols, bad_rows, bad_cols, neg)


@dataclass
class A2Report:
    ok: bool
    lambda1: complex
    lambda2: complex
    eigenvalues: np.ndarray

    def to_dict(self) -> dict:
        return {"ok": self.ok,
                "lambda1": [float(self.lambda1.real), float(self.lambda1.imag)],
                "lambda2": [float(self.lambda2.real), float(self.lambda2.imag)],
                "eigenvalues_real": np.real(self.eigenvalues).tolist()}


def validate_a2(universe: Union[GraphUniverse, Sequence[WeightedGraphMatrix]],
                tol: float = A2_TOL) -> A2Report:
    """
    Joint strong connectivity of the union of all graphs.

    Forms S = sum_k (I - W_k), sorts its eigenvalues by real part, and
    requires Re(lambda_2) > tol.  A general (non-symmetric) eigensolver is
    used since directed graphs give non-symmetric W.
    """
    graphs = list(universe)
    m = graphs[0].m
    S = sum(np.eye(m) - g.weights for g in graphs)
    try:
        eig = np.linalg.eigvals(S)
    except np.linalg.LinAlgError as exc:
        raise EigensolverFailure(str(exc)) from exc
    eig = eig[np.argsort(eig.real, kind="stable")]
    lam1 = complex(eig[0])
    lam2 = complex(eig[1]) if m > 1 else complex(np.inf)
    return A2Report(bool(lam2.real > tol), lam1, lam2, eig)


# -- switching processes ------------------------------------------------------

@dataclass(frozen=True)
class IIDModel:
    probabilities: tuple

    kind = "iid"


@dataclass(frozen=True)
class MarkovModel:
    transition: tuple
    initial: tuple

    kind = "markov"


@dataclass(frozen=True)
class CycleModel:
    """Deterministic periodic schedule; ``order`` indexes into the universe."""

    order: tuple

    kind = "b_connected_cycle"


@dataclass(frozen=True)
class GossipModel:
    """
    One pair activates per step with the given probability; with the
    remaining probability (if any) nobody communicates.
    """

    pairs: tuple
    probabilities: tuple

    kind = "gossip"

    @property
    def idle_probability(self) -> float:
        return max(0.0, 1.0 - float(np.sum(self.probabilities)))


@dataclass
class NetworkProcess:
    """
    Generator of graph-realization sequences over a fixed universe.

    Build with the ``iid``, ``markov``, ``cycle`` or ``gossip`` class
    methods.  Sampling is a pure function of the seed.
    """

    universe: GraphUniverse
    model: object
    seed: int = 0

    def __post_init__(self):
        N = len(self.universe)
        model = self.model
        if isinstance(model, IIDModel):
            p = np.asarray(model.probabilities, dtype=float)
            if p.shape != (N,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
                raise ValueError("iid probabilities must be a stochastic vector over the universe")
        elif isinstance(model, MarkovModel):
            P = np.asarray(model.transition, dtype=float)
            pi0 = np.asarray(model.initial, dtype=float)
            if P.shape != (N, N) or np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-9):
                raise ValueError("markov transition must be a row-stochastic matrix over the universe")
            if pi0.shape != (N,) or np.any(pi0 < 0) or abs(pi0.sum() - 1.0) > 1e-9:
                raise ValueError("markov initial distribution must be a stochastic vector")
        elif isinstance(model, CycleModel):
            if not model.order or any(not 0 <= k < N for k in model.order):
                raise ValueError("cycle order must index into the universe")
        elif isinstance(model, GossipModel):
            p = np.asarray(model.probabilities, dtype=float)
            if len(model.pairs) != len(p) or np.any(p < 0) or p.sum() > 1.0 + 1e-9:
                raise ValueError("gossip needs one probability per pair, summing to at most 1")
        else:
            raise TypeError(f"unknown process model {model!r}")
        self.seed = int(self.seed)
        if self.seed < 0:
            raise ValueError("seed must be an unsigned integer")

    @classmethod
    def iid(cls, universe, probabilities=None, seed=0):
        if probabilities is None:
            probabilities = np.full(len(universe), 1.0 / len(universe))
        return cls(universe, IIDModel(tuple(float(p) for p in probabilities)), seed)

    @classmethod
    def markov(cls, universe, transition, initial=None, seed=0):
        """Markov switching; ``initial`` defaults to the stationary distribution of ``transition``."""
        P = np.asarray(transition, dtype=float)
        if initial is None:
            initial = stationary_distribution(P)
        return cls(universe, MarkovModel(tuple(map(tuple, P.tolist())),
                                         tuple(float(v) for v in initial)), seed)

    @classmethod
    def cycle(cls, universe, order=None, seed=0):
        order = tuple(range(len(universe))) if order is None else tuple(int(k) for k in order)
        return cls(universe, CycleModel(order), seed)

    @classmethod
    def gossip(cls, m: int, pairs, probabilities=None, seed=0):
        """Universe of single-pair gossip matrices, plus the identity if the pair probabilities leave slack."""
        pairs = tuple(tuple(int(v) for v in p) for p in pairs)
        if probabilities is None:
            probabilities = np.full(len(pairs), 1.0 / len(pairs))
        model = GossipModel(pairs, tuple(float(p) for p in probabilities))
        graphs = [gossip_matrix(m, [p]) for p in pairs]
        if model.idle_probability > 1e-12:
            graphs.append(WeightedGraphMatrix(np.eye(m), "idle"))
        return cls(GraphUniverse(tuple(graphs)), model, seed)

    @property
    def kind(self) -> str:
        return self.model.kind

    def stationary(self) -> np.ndarray:
        """Long-run frequency of each universe member."""
        model, N = self.model, len(self.universe)
        if isinstance(model, IIDModel):
            return np.asarray(model.probabilities, dtype=float)
        if isinstance(model, MarkovModel):
            return stationary_distribution(np.asarray(model.transition))
        if isinstance(model, CycleModel):
            return np.bincount(model.order, minlength=N) / len(model.order)
        return self._gossip_probabilities()

    def _gossip_probabilities(self) -> np.ndarray:
        p = list(self.model.probabilities)
        if len(self.universe) > len(p):
            p.append(self.model.idle_probability)
        p = np.asarray(p, dtype=float)
        return p / p.sum()

    def sample_indices(self, horizon: int, seed: Optional[int] = None) -> np.ndarray:
        """Universe indices of omega(0), ..., omega(horizon - 1); deterministic given the seed."""
        horizon = int(horizon)
        if horizon < 0:
            raise ValueError("horizon must be nonnegative")
        N = len(self.universe)
        rng = np.random.default_rng(self.seed if seed is None else seed)
        model = self.model
        if isinstance(model, CycleModel):
            order = np.asarray(model.order, dtype=np.int64)
            return order[np.arange(horizon) % len(order)]
        if isinstance(model, (IIDModel, GossipModel)):
            p = self.stationary()
            return rng.choice(N, size=horizon, p=p).astype(np.int64)
        P = np.asarray(model.transition, dtype=float)
        cum = np.cumsum(P, axis=1)
        cum[:, -1] = 1.0
        u = rng.random(horizon)
        out = np.empty(horizon, dtype=np.int64)
        if horizon == 0:
            return out
        init = np.cumsum(model.initial)
        init[-1] = 1.0
        state = int(np.searchsorted(init, u[0], side="right"))
        out[0] = state
        for t in range(1, horizon):
            state = int(np.searchsorted(cum[state], u[t], side="right"))
            out[t] = state
        return out

    def sample_sequence(self, horizon: int, seed: Optional[int] = None) -> list[str]:
        """Labels of the realized graphs for t = 0 .. horizon - 1."""
        labels = self.universe.labels
        return [labels[k] for k in self.sample_indices(horizon, seed)]


def sample_sequence(p: NetworkProcess, horizon: int) -> list[str]:
    return p.sample_sequence(horizon)


def stationary_distribution(P) -> np.ndarray:
    """Left Perron vector of a row-stochastic matrix (solves pi P = pi, sum pi = 1)."""
    P = np.asarray(P, dtype=float)
    N = P.shape[0]
    A = np.vstack([P.T - np.eye(N), np.ones((1, N))])
    b = np.zeros(N + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _is_irreducible(P) -> bool:
    N = P.shape[0]
    reach = (np.asarray(P) > 0) | np.eye(N, dtype=bool)
    for _ in range(int(np.ceil(np.log2(max(N, 2)))) + 1):
        reach = (reach.astype(np.int64) @ reach.astype(np.int64)) > 0
    return bool(reach.all())


@dataclass
class A3Certificate:
    """
    Outcome of certifying the recurrence assumption by distribution family.

    ``support`` lists the universe members that recur infinitely often;
    ``support_a2`` re-checks joint connectivity on that support when it is a
    strict subset of the universe.
    """

    certified: bool
    family: str
    reason: str
    support: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    support_a2: Optional[A2Report] = None

    def to_dict(self) -> dict:
        return {"certified": self.certified, "family": self.family, "reason": self.reason,
                "support": self.support, "warnings": list(self.warnings),
                "support_a2": None if self.support_a2 is None else self.support_a2.to_dict()}


def certify_a3(p: NetworkProcess, stationary_tol: float = 1e-9) -> A3Certificate:
    """
    Certify that the recurring graphs pin down the fixed-value set.

    No fixed-value-point computation is attempted; certification goes by the
    process family: independent draws with positive probabilities, stationary
    irreducible Markov chains, periodic (B-connected) cycles, and gossip with
    every pair active with positive probability.
    """
    model, N = p.model, len(p.universe)
    labels = p.universe.labels

    def with_support(family, reason, support):
        cert = A3Certificate(True, family, reason, [int(k) for k in support])
        if len(support) < N:
            dropped = [labels[k] for k in range(N) if k not in set(support)]
            cert.warnings.append(
                f"effective union excludes {dropped}: those graphs never occur")
            cert.support_a2 = validate_a2(p.universe.subset(support))
            if not cert.support_a2.ok:
                cert.warnings.append("union of the recurring graphs is not strongly connected")
        return cert

    if isinstance(model, IIDModel):
        probs = np.asarray(model.probabilities)
        support = list(np.flatnonzero(probs > 0))
        return with_support("iid", "independent draws; every positive-probability graph recurs "
                            "infinitely often almost surely", support)
    if isinstance(model, MarkovModel):
        P = np.asarray(model.transition, dtype=float)
        if not _is_irreducible(P):
            return A3Certificate(False, "markov", "transition matrix is not irreducible; "
                                 "the stationary distribution is not unique")
        pi = stationary_distribution(P)
        pi0 = np.asarray(model.initial, dtype=float)
        gap = float(np.max(np.abs(pi - pi0)))
        if gap > stationary_tol:
            return A3Certificate(False, "markov",
                                 f"initial distribution {pi0.tolist()} is not the stationary "
                                 f"distribution {pi.tolist()} (max deviation {gap:.3e})")
        return with_support("markov", "stationary irreducible Markov chain (ergodic)",
                            list(np.flatnonzero(pi > 0)))
    if isinstance(model, CycleModel):
        return with_support("b_connected_cycle",
                            f"periodic schedule with period {len(model.order)}",
                            sorted(set(model.order)))
    if isinstance(model, GossipModel):
        probs = np.asarray(model.probabilities)
        if np.any(probs <= 0):
            bad = [model.pairs[k] for k in np.flatnonzero(probs <= 0)]
            return A3Certificate(False, "gossip", f"pairs {bad} never activate")
        return A3Certificate(True, "gossip", "every pair activates with positive probability",
                             list(range(N)))
    return A3Certificate(False, getattr(model, "kind", "unknown"), "unsupported process family")


# -- JSON ---------------------------------------------------------------------

def universe_from_dict(data: dict) -> GraphUniverse:
    """
    Parse ``{"m": int, "graphs": [{"label": str, "weights": [[...]]}]}``.

    A graph may give ``"adjacency"`` (symmetric 0/1) instead of weights; it is
    expanded with Metropolis weights.
    """
    m = int(data["m"])
    graphs = []
    for k, g in enumerate(data["graphs"]):
        label = str(g.get("label", k))
        if "weights" in g:
            w = WeightedGraphMatrix(np.asarray(g["weights"], dtype=float), label)
        elif "adjacency" in g:
            w = metropolis_weights(np.asarray(g["adjacency"]), label)
        else:
            raise ValueError(f"graph {label!r} needs 'weights' or 'adjacency'")
        if w.m != m:
            raise ValueError(f"graph {label!r} has {w.m} agents, universe declares m={m}")
        graphs.append(w)
    return GraphUniverse(tuple(graphs))


def load_universe(path) -> GraphUniverse:
    return universe_from_dict(json.loads(Path(path).read_text()))


def process_from_dict(universe: Optional[GraphUniverse], model: dict, seed: int = 0) -> NetworkProcess:
    """
    Build a process from ``{"kind": "iid" | "markov" | "cycle" | "gossip", ...}``.

    Gossip processes build their own universe from ``m`` and ``pairs``.
    """
    kind = model.get("kind")
    if kind == "iid":
        return NetworkProcess.iid(universe, model.get("probabilities"), seed)
    if kind == "markov":
        return NetworkProcess.markov(universe, model["transition"], model.get("initial"), seed)
    if kind in ("cycle", "b_connected_cycle"):
        return NetworkProcess.cycle(universe, model.get("order"), seed)
    if kind == "gossip":
        m = model.get("m", universe.m if universe is not None else None)
        if m is None:
            raise ValueError("gossip model needs 'm'")
        return NetworkProcess.gossip(int(m), model["pairs"], model.get("probabilities"), seed)
    raise ValueError(f"unknown process kind {kind!r}")
