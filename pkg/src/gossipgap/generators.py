"""Stationary matrix-process generators.

Every process emits a stationary sequence ``A_1, A_2, ...`` of nonnegative
``p x p`` matrices, deterministically reproducible from ``(kind, parameters,
seed, stream)``.  Randomness comes from a PCG64 generator keyed by
``SeedSequence((seed, *stream))``; estimators derive independent replicate
streams by spawning with distinct stream tuples, so replicates never share
draws and results do not depend on scheduling.

Node indices are 0-based.  A directed edge ``(i, j)`` means node ``i`` may
send to node ``j``; the corresponding one-transaction update matrix is the
identity with column ``i`` replaced by ``(1 - alpha) e_i + alpha e_j``.
When the transaction's packet is lost the ``e_j`` part is dropped but the
sender's column is still scaled, so the matrix is no longer
column-stochastic.

Packet loss on edge ``f`` is decided by comparing one uniform draw per step
against the loss probability ``r_f``.  Two processes built with the same
seed and stream therefore see coupled loss indicators: if ``r <= r'``
entrywise, every loss under ``r`` is also a loss under ``r'``, which makes
the emitted matrices entrywise comparable step by step.

Markov-modulated schedules must use an irreducible index chain; the chain
is started from its stationary distribution so the emitted sequence is
strictly stationary.  Whether a user-supplied chain also satisfies the
moment/mixing conditions required by the asymptotic theory is the user's
responsibility.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import NonNegMatrix, as_array

__all__ = [
    "Digraph",
    "PushSumConfig",
    "MatrixProcess",
    "PushSumProcess",
    "IIDFamilyProcess",
    "MarkovFamilyProcess",
    "ConstantProcess",
    "push_sum_matrix",
    "is_strongly_connected",
    "column_sums",
    "is_column_stochastic",
    "ring",
    "ring_with_chords",
    "complete_digraph",
]

_PROB_TOL = 1e-12


@dataclass(frozen=True)
class Digraph:
    """Directed graph on ``p`` nodes without self-loops or duplicate edges."""

    p: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("node count must be positive")
        object.__setattr__(self, "edges", tuple((int(i), int(j)) for i, j in self.edges))
        seen = set()
        for i, j in self.edges:
            if not (0 <= i < self.p and 0 <= j < self.p):
                raise ValueError(f"edge ({i},{j}) out of range for p={self.p}")
            if i == j:
                raise ValueError(f"self-loop ({i},{i}) not allowed")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i},{j})")
            seen.add((i, j))


def ring(p: int) -> Digraph:
    """Directed cycle 0 -> 1 -> ... -> p-1 -> 0."""
    return Digraph(p, tuple((i, (i + 1) % p) for i in range(p)))


def ring_with_chords(p: int, chords=((0, 2), (1, 3))) -> Digraph:
    """Directed ring plus extra chord edges."""
    edges = list((i, (i + 1) % p) for i in range(p))
    for c in chords:
        c = (int(c[0]), int(c[1]))
        if c not in edges:
            edges.append(c)
    return Digraph(p, tuple(edges))


def complete_digraph(p: int) -> Digraph:
    return Digraph(p, tuple((i, j) for i in range(p) for j in range(p) if i != j))


def is_strongly_connected(g: Digraph) -> bool:
    """Two-pass reachability: every node reaches and is reached by node 0."""
    if g.p == 1:
        return True
    fwd = [[] for _ in range(g.p)]
    bwd = [[] for _ in range(g.p)]
    for i, j in g.edges:
        fwd[i].append(j)
        bwd[j].append(i)

    def reach(adj):
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == g.p

    return reach(fwd) and reach(bwd)


def push_sum_matrix(p: int, edge: tuple[int, int], alpha: float,
                    loss: bool = False) -> NonNegMatrix:
    """One-transaction update matrix for a send along ``edge = (i, j)``.

    Identity with column ``i`` replaced: ``A[i,i] = 1-alpha`` and
    ``A[j,i] = alpha`` (or 0 when the packet is lost).  Row-allowable
    always; column-stochastic iff the packet is delivered.
    """
    i, j = int(edge[0]), int(edge[1])
    if not (0 <= i < p and 0 <= j < p):
        raise ValueError(f"edge ({i},{j}) out of range for p={p}")
    if i == j:
        raise ValueError("sender and receiver must differ")
    if not 0.0 < alpha < 1.0:
        raise ValueError("share must lie strictly inside (0, 1)")
    a = np.eye(p)
    a[i, i] = 1.0 - alpha
    a[j, i] = 0.0 if loss else alpha
    return NonNegMatrix.trusted(a, row_allowable=True, allowable=True,
                                strictly_positive=(p == 1))


def column_sums(A) -> np.ndarray:
    """Per-column sums, used to classify (column-)stochasticity."""
    return as_array(A).sum(axis=0)


def is_column_stochastic(A, tol: float = _PROB_TOL) -> bool:
    return bool(np.all(np.abs(column_sums(A) - 1.0) <= tol))


@dataclass(frozen=True)
class PushSumConfig:
    """Parameters of the randomized one-edge-per-tick gossip protocol."""

    graph: Digraph
    edge_prob: tuple[float, ...]
    share: tuple[float, ...]
    loss_prob: tuple[float, ...]

    def __post_init__(self):
        ne = len(self.graph.edges)
        object.__setattr__(self, "edge_prob", tuple(float(q) for q in self.edge_prob))
        object.__setattr__(self, "share", tuple(float(s) for s in self.share))
        object.__setattr__(self, "loss_prob", tuple(float(r) for r in self.loss_prob))
        if len(self.edge_prob) != ne or len(self.share) != ne or len(self.loss_prob) != ne:
            raise ValueError("edge_prob, share and loss_prob must have one entry per edge")
        if any(q < 0 for q in self.edge_prob) or abs(sum(self.edge_prob) - 1.0) > _PROB_TOL:
            raise ValueError("edge probabilities must be nonnegative and sum to 1")
        if any(not 0.0 < s < 1.0 for s in self.share):
            raise ValueError("shares must lie strictly inside (0, 1)")
        if any(not 0.0 <= r < 1.0 for r in self.loss_prob):
            raise ValueError("loss probabilities must lie in [0, 1)")

    @classmethod
    def uniform(cls, graph: Digraph, share: float = 0.5,
                loss_prob=0.0) -> "PushSumConfig":
        """Uniform edge selection; scalar or per-edge share/loss."""
        ne = len(graph.edges)
        if ne == 0:
            raise ValueError("graph has no edges")
        share_t = tuple(share) if np.ndim(share) else (float(share),) * ne
        loss_t = tuple(loss_prob) if np.ndim(loss_prob) else (float(loss_prob),) * ne
        return cls(graph, (1.0 / ne,) * ne, share_t, loss_t)


class MatrixProcess:
    """Seeded generator of a stationary sequence of nonnegative matrices.

    Subclasses implement ``_next_array`` (one emission) and may override
    ``dense_block`` with a vectorized version; both must consume the
    underlying random stream identically.  ``spawn`` derives an independent
    but reproducible stream for replicate work.
    """

    kind = "abstract"

    def __init__(self, p: int, seed: int, stream: tuple[int, ...] = (0,)):
        self.p = int(p)
        self.seed = int(seed)
        self.stream = tuple(int(s) for s in stream)
        self._history: deque | None = None
        self.reset()

    # -- stream management -------------------------------------------------

    def reset(self) -> None:
        """Restart the emission sequence from step 1."""
        key = (self.seed,) + self.stream
        self._rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(key)))
        self.steps_emitted = 0
        if self._history is not None:
            self._history.clear()

    def spawn(self, stream) -> "MatrixProcess":
        """Same configuration, independent stream ``(seed, *stream)``."""
        stream = (int(stream),) if np.ndim(stream) == 0 else tuple(int(s) for s in stream)
        return self._clone(stream)

    def _clone(self, stream: tuple[int, ...]) -> "MatrixProcess":
        raise NotImplementedError

    # -- emission ----------------------------------------------------------

    def _next_array(self) -> np.ndarray:
        raise NotImplementedError

    def next_matrix(self) -> NonNegMatrix:
        """Emit ``A_n`` and advance the internal cursor."""
        a = self._next_array()
        self.steps_emitted += 1
        m = self._wrap(a)
        if self._history is not None:
            self._history.append(m.a > 0)
        return m

    def _wrap(self, a: np.ndarray) -> NonNegMatrix:
        return NonNegMatrix.trusted(a)

    def dense_block(self, m: int) -> np.ndarray:
        """Next ``m`` emissions stacked as an ``(m, p, p)`` array.

        Equivalent to ``m`` calls of ``next_matrix`` (same stream
        consumption); subclasses override this with vectorized sampling.
        History recording is supported only through ``next_matrix``.
        """
        if self._history is not None:
            raise RuntimeError("dense_block does not record history")
        return np.stack([self.next_matrix().a for _ in range(int(m))])

    # -- pattern history for backward-index sampling ------------------------

    def enable_history(self, cap: int = 100_000) -> None:
        """Record the boolean pattern of each emission in a ring buffer."""
        self._history = deque(maxlen=int(cap))

    def pattern_history(self) -> deque:
        if self._history is None:
            raise RuntimeError("history not enabled; call enable_history first")
        return self._history


class PushSumProcess(MatrixProcess):
    """I.i.d. one-edge-per-tick gossip emissions with packet loss.

    Each step consumes exactly two uniforms: the first selects the edge by
    the categorical law ``edge_prob``, the second decides packet loss.
    """

    kind = "push_sum"

    def __init__(self, config: PushSumConfig, seed: int, stream: tuple[int, ...] = (0,)):
        self.config = config
        self._ei = np.array([e[0] for e in config.graph.edges], dtype=np.intp)
        self._ej = np.array([e[1] for e in config.graph.edges], dtype=np.intp)
        self._alpha = np.array(config.share, dtype=float)
        self._loss_p = np.array(config.loss_prob, dtype=float)
        self._cum_q = np.cumsum(np.array(config.edge_prob, dtype=float))
        super().__init__(config.graph.p, seed, stream)

    def _clone(self, stream):
        return PushSumProcess(self.config, self.seed, stream)

    def next_event(self) -> tuple[int, bool]:
        """Sample ``(edge_index, lost)`` for one step (advances the stream)."""
        u = self._rng.random(2)
        e = int(min(np.searchsorted(self._cum_q, u[0], side="right"),
                    len(self._cum_q) - 1))
        return e, bool(u[1] < self._loss_p[e])

    def block_events(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        u = self._rng.random((int(m), 2))
        e = np.minimum(np.searchsorted(self._cum_q, u[:, 0], side="right"),
                       len(self._cum_q) - 1)
        return e, u[:, 1] < self._loss_p[e]

    def _next_array(self) -> np.ndarray:
        e, lost = self.next_event()
        a = np.eye(self.p)
        i, j = self._ei[e], self._ej[e]
        a[i, i] = 1.0 - self._alpha[e]
        a[j, i] = 0.0 if lost else self._alpha[e]
        return a

    def _wrap(self, a):
        return NonNegMatrix.trusted(a, row_allowable=True, allowable=True,
                                    strictly_positive=(self.p == 1))

    def dense_block(self, m: int) -> np.ndarray:
        if self._history is not None:
            raise RuntimeError("dense_block does not record history")
        m = int(m)
        e, lost = self.block_events(m)
        blk = np.broadcast_to(np.eye(self.p), (m, self.p, self.p)).copy()
        s = np.arange(m)
        i, j = self._ei[e], self._ej[e]
        blk[s, i, i] = 1.0 - self._alpha[e]
        blk[s, j, i] = np.where(lost, 0.0, self._alpha[e])
        self.steps_emitted += m
        return blk


class _FamilyProcess(MatrixProcess):
    """Common storage for finite-family processes (shared matrix stack)."""

    def __init__(self, matrices, p: int, seed: int, stream):
        stack = np.stack([as_array(m) for m in matrices])
        if stack.ndim != 3 or stack.shape[1] != stack.shape[2]:
            raise ValueError("family members must be square matrices of equal size")
        if np.any(stack < 0) or not np.all(np.isfinite(stack)):
            raise ValueError("family members must be finite and nonnegative")
        self._stack = stack
        self.last_index: int | None = None
        super().__init__(p, seed, stream)

    def reset(self):
        super().reset()
        self.last_index = None

    @property
    def family_size(self) -> int:
        return self._stack.shape[0]


class IIDFamilyProcess(_FamilyProcess):
    """I.i.d. draws from a finite matrix family with explicit probabilities."""

    kind = "iid_family"

    def __init__(self, matrices, probs, seed: int, stream: tuple[int, ...] = (0,)):
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 1 or len(probs) != len(matrices):
            raise ValueError("one probability per family member required")
        if np.any(probs < 0) or abs(float(probs.sum()) - 1.0) > _PROB_TOL:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        self.probs = probs
        self._cum = np.cumsum(probs)
        super().__init__(matrices, as_array(matrices[0]).shape[0], seed, stream)

    def _clone(self, stream):
        return IIDFamilyProcess(list(self._stack), self.probs, self.seed, stream)

    def _indices(self, m: int) -> np.ndarray:
        u = self._rng.random(int(m))
        return np.minimum(np.searchsorted(self._cum, u, side="right"),
                          self.family_size - 1)

    def _next_array(self) -> np.ndarray:
        idx = int(self._indices(1)[0])
        self.last_index = idx
        return self._stack[idx].copy()

    def dense_block(self, m: int) -> np.ndarray:
        if self._history is not None:
            raise RuntimeError("dense_block does not record history")
        idx = self._indices(m)
        self.last_index = int(idx[-1]) if len(idx) else self.last_index
        self.steps_emitted += int(m)
        return self._stack[idx]


class MarkovFamilyProcess(_FamilyProcess):
    """Finite family modulated by an irreducible Markov index chain.

    The chain starts from its stationary distribution, so the emitted matrix
    sequence is strictly stationary.  One uniform is consumed per step (the
    first selects the initial state, later ones drive transitions).
    """

    kind = "markov_family"

    def __init__(self, matrices, transition, seed: int,
                 stream: tuple[int, ...] = (0,), initial_dist=None):
        P = np.asarray(transition, dtype=float)
        f = len(matrices)
        if P.shape != (f, f):
            raise ValueError("transition matrix must be square with one row per member")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > _PROB_TOL):
            raise ValueError("transition matrix must be row-stochastic")
        pattern = Digraph(f, tuple((i, j) for i in range(f) for j in range(f)
                                   if i != j and P[i, j] > 0))
        if f > 1 and not is_strongly_connected(pattern):
            raise ValueError("index chain must be irreducible")
        self.transition = P
        self._cum_rows = np.cumsum(P, axis=1)
        if initial_dist is None:
            initial_dist = self._stationary(P)
        self.initial_dist = np.asarray(initial_dist, dtype=float)
        if abs(float(self.initial_dist.sum()) - 1.0) > 1e-9 or np.any(self.initial_dist < -1e-15):
            raise ValueError("initial distribution must be a probability vector")
        self._cum_init = np.cumsum(np.clip(self.initial_dist, 0.0, None))
        super().__init__(matrices, as_array(matrices[0]).shape[0], seed, stream)

    @staticmethod
    def _stationary(P: np.ndarray) -> np.ndarray:
        f = P.shape[0]
        a = np.vstack([P.T - np.eye(f), np.ones(f)])
        b = np.zeros(f + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(a, b, rcond=None)
        return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()

    def _clone(self, stream):
        return MarkovFamilyProcess(list(self._stack), self.transition, self.seed,
                                   stream, self.initial_dist)

    def reset(self):
        super().reset()
        self._state: int | None = None

    def _advance_state(self, u: float) -> int:
        if self._state is None:
            cum = self._cum_init
        else:
            cum = self._cum_rows[self._state]
        s = int(min(np.searchsorted(cum, u, side="right"), self.family_size - 1))
        self._state = s
        return s

    def _next_array(self) -> np.ndarray:
        s = self._advance_state(float(self._rng.random()))
        self.last_index = s
        return self._stack[s].copy()

    def dense_block(self, m: int) -> np.ndarray:
        if self._history is not None:
            raise RuntimeError("dense_block does not record history")
        u = self._rng.random(int(m))
        idx = np.empty(int(m), dtype=np.intp)
        for t in range(int(m)):
            idx[t] = self._advance_state(float(u[t]))
        if len(idx):
            self.last_index = int(idx[-1])
        self.steps_emitted += int(m)
        return self._stack[idx]


class ConstantProcess(MatrixProcess):
    """Deterministic stream repeating one fixed matrix (consumes no draws)."""

    kind = "constant"

    def __init__(self, matrix, seed: int = 0, stream: tuple[int, ...] = (0,)):
        a = as_array(matrix)
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ValueError("matrix must be finite and nonnegative")
        self.matrix = a.copy()
        super().__init__(a.shape[0], seed, stream)

    def _clone(self, stream):
        return ConstantProcess(self.matrix, self.seed, stream)

    def _next_array(self) -> np.ndarray:
        return self.matrix.copy()

    def dense_block(self, m: int) -> np.ndarray:
        if self._history is not None:
            raise RuntimeError("dense_block does not record history")
        self.steps_emitted += int(m)
        return np.broadcast_to(self.matrix, (int(m), self.p, self.p))
