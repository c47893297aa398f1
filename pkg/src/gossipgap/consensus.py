"""Ratio-consensus trajectory simulation.

Iterates ``x_n = A_n x_{n-1}``, ``w_n = A_n w_{n-1}`` for a pair of initial
vectors (values ``x``, nonnegative weights ``w``) and tracks the per-node
ratios ``x_n^i / w_n^i``.  Both vectors are stored as mantissas with one
shared log-scale shift, applied jointly each step, so the ratios are exact
while arbitrarily long products stay representable.

Recorded diagnostics per checkpoint: the min/max ratio envelope (over nodes
with positive weight), the total-variation distance of the simplex
normalizations of ``x_n`` and ``w_n`` (only meaningful for ``x >= 0``), the
Hilbert distance of ``x_n`` and ``w_n`` (only when both are strictly
positive) and the running envelope midpoint.

The consensus limit of a run is ``(1^T x_0) / (1^T w_0)`` exactly when
every emitted matrix is column-stochastic; otherwise the limit is random
and is estimated by the midpoint of the final envelope, whose width shrinks
like the tracked error itself, so the induced error does not distort
fitted decay rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import LogScaled, NonNegMatrix, as_array, tv_distance
from .generators import MatrixProcess, is_column_stochastic

__all__ = [
    "ConsensusState",
    "Trajectory",
    "step",
    "run",
    "envelope_series",
    "tv_series",
    "weighted_ratio",
    "fit_rate",
    "rate_window",
    "make_checkpoints",
]

ENVELOPE_SLACK = 1e-12


@dataclass
class ConsensusState:
    """Current values/weights in shared log-scaled form.

    True vectors are ``exp(log_scale) * x`` and ``exp(log_scale) * w``; the
    per-node ratios are plain quotients of the mantissas.
    """

    n: int
    x: np.ndarray
    w: np.ndarray
    log_scale: float

    @classmethod
    def from_initial(cls, x0, w0) -> "ConsensusState":
        x0 = np.asarray(x0, dtype=float).copy()
        w0 = np.asarray(w0, dtype=float).copy()
        if x0.shape != w0.shape or x0.ndim != 1:
            raise ValueError("x0 and w0 must be vectors of equal length")
        if np.any(w0 < 0) or not np.any(w0 > 0):
            raise ValueError("weights must be nonnegative and not all zero")
        return cls(0, x0, w0, 0.0)

    @property
    def p(self) -> int:
        return len(self.x)

    def ratios(self) -> np.ndarray:
        """Per-node ``x/w``; nan at nodes whose weight is (still) zero."""
        out = np.full(self.p, np.nan)
        mask = self.w > 0
        out[mask] = self.x[mask] / self.w[mask]
        return out

    def envelope(self) -> tuple[float, float]:
        r = self.ratios()
        return float(np.nanmin(r)), float(np.nanmax(r))

    def total_value(self) -> LogScaled:
        return LogScaled.from_value(float(self.x.sum())).shifted(self.log_scale)

    def total_weight(self) -> LogScaled:
        return LogScaled.from_value(float(self.w.sum())).shifted(self.log_scale)


def step(state: ConsensusState, A) -> ConsensusState:
    """One update ``(x, w) -> (A x, A w)`` with joint rescaling."""
    if isinstance(A, NonNegMatrix):
        mat = A
    else:
        mat = NonNegMatrix(A)
    if mat.p != state.p:
        raise ValueError(f"dimension mismatch: matrix p={mat.p}, state p={state.p}")
    if not mat.row_allowable:
        raise ValueError("update matrix must be row-allowable")
    a = mat.a
    y = a @ state.x
    v = a @ state.w
    c = float(v.max())
    if not c > 0:
        raise ValueError("weight vector vanished; update matrix must keep w nonzero")
    return ConsensusState(state.n + 1, y / c, v / c, state.log_scale + math.log(c))


@dataclass
class Trajectory:
    """Checkpoint rows of one consensus run plus the limit estimate."""

    ns: np.ndarray
    env_min: np.ndarray
    env_max: np.ndarray
    tv: np.ndarray
    hilbert: np.ndarray
    mid: np.ndarray                  # running envelope midpoint
    limit: float
    column_stochastic: bool
    envelope_violations: int
    envelope_violation_max: float
    final_state: ConsensusState
    x0: np.ndarray
    w0: np.ndarray

    def max_ratio_error(self) -> np.ndarray:
        """``max_i |ratio_i - limit|`` per checkpoint (limit inside envelope)."""
        return np.maximum(self.env_max - self.limit, self.limit - self.env_min)

    def envelope_width(self) -> np.ndarray:
        return self.env_max - self.env_min

    TABLE_HEADER = ("n", "max_ratio_error", "tv", "envelope_min",
                    "envelope_max", "hilbert", "limit_estimate")

    def rows(self):
        err = self.max_ratio_error()
        for i in range(len(self.ns)):
            yield (int(self.ns[i]), err[i], self.tv[i], self.env_min[i],
                   self.env_max[i], self.hilbert[i], self.mid[i])


def make_checkpoints(n: int, kind: str = "geometric", ratio: float = 1.15,
                     count: int = 200) -> np.ndarray:
    """Checkpoint schedule up to and including ``n``."""
    n = int(n)
    if n < 1:
        raise ValueError("horizon must be >= 1")
    if kind == "geometric":
        ks = []
        v = 1.0
        while v < n:
            ks.append(int(math.ceil(v)))
            v *= ratio
        ks.append(n)
        return np.unique(np.array(ks, dtype=np.int64))
    if kind == "linear":
        return np.unique(np.linspace(1, n, min(count, n)).astype(np.int64))
    raise ValueError(f"unknown checkpoint schedule {kind!r}")


def run(proc: MatrixProcess, x0, w0, n: int, checkpoints=None) -> Trajectory:
    """Iterate the consensus recursion for ``n`` steps of ``proc``.

    Envelope monotonicity is monitored at every step (from the first step
    at which all weights are positive, where the monotone-envelope argument
    applies); violations beyond the floating slack are counted.
    """
    state = ConsensusState.from_initial(x0, w0)
    n = int(n)
    if checkpoints is None:
        cps = make_checkpoints(n)
    elif isinstance(checkpoints, str):
        cps = make_checkpoints(n, checkpoints)
    else:
        cps = np.unique(np.asarray(list(checkpoints), dtype=np.int64))
        if len(cps) == 0 or cps[0] < 1 or cps[-1] > n:
            raise ValueError("checkpoints must lie in [1, n]")
    cp_set = set(int(c) for c in cps)

    x_nonneg = bool(np.all(state.x >= 0) and np.any(state.x > 0))
    col_stoch = True
    prev_env = None
    violations = 0
    violation_max = 0.0
    rows_n, rows_mn, rows_mx, rows_tv, rows_h, rows_mid = [], [], [], [], [], []

    for t in range(1, n + 1):
        A = proc.next_matrix()
        if col_stoch and not is_column_stochastic(A):
            col_stoch = False
        state = step(state, A)
        mn, mx = state.envelope()
        all_pos = bool(np.all(state.w > 0))
        if prev_env is not None:
            scale = max(abs(prev_env[0]), abs(prev_env[1]))
            slack = ENVELOPE_SLACK * scale
            excess = max(prev_env[0] - mn, mx - prev_env[1])
            if excess > slack:
                violations += 1
                violation_max = max(violation_max, excess - slack)
        if all_pos:
            prev_env = (mn, mx)
        if t in cp_set:
            rows_n.append(t)
            rows_mn.append(mn)
            rows_mx.append(mx)
            rows_mid.append(0.5 * (mn + mx))
            if x_nonneg and state.x.sum() > 0:
                rows_tv.append(tv_distance(state.x / state.x.sum(),
                                           state.w / state.w.sum()))
            else:
                rows_tv.append(np.nan)
            if np.all(state.x > 0) and np.all(state.w > 0):
                d = np.log(state.x) - np.log(state.w)
                rows_h.append(float(d.max() - d.min()))
            else:
                rows_h.append(np.nan)

    if col_stoch:
        limit = float(np.asarray(x0, dtype=float).sum()
                      / np.asarray(w0, dtype=float).sum())
    else:
        limit = rows_mid[-1] if rows_mid else 0.5 * sum(state.envelope())
    return Trajectory(np.array(rows_n, dtype=np.int64), np.array(rows_mn),
                      np.array(rows_mx), np.array(rows_tv), np.array(rows_h),
                      np.array(rows_mid), limit, col_stoch, violations,
                      violation_max, state,
                      np.asarray(x0, dtype=float).copy(),
                      np.asarray(w0, dtype=float).copy())


def envelope_series(traj: Trajectory) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-checkpoint ``(n, min_ratio, max_ratio)``."""
    return traj.ns, traj.env_min, traj.env_max


def tv_series(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Per-checkpoint total-variation distance (nan where undefined)."""
    return traj.ns, traj.tv


def weighted_ratio(state: ConsensusState, q) -> float:
    """``(q^T x) / (q^T w)``; always inside the current ratio envelope."""
    q = np.asarray(q, dtype=float)
    if q.shape != state.x.shape:
        raise ValueError("dimension mismatch")
    if np.any(q < 0) or not np.any(q > 0):
        raise ValueError("probe vector must be nonnegative and nonzero")
    den = float(q @ state.w)
    if den <= 0:
        raise ValueError("probe vector has zero weight mass")
    return float(q @ state.x) / den


def fit_rate(ns, values, window: float = 0.5) -> float:
    """Least-squares slope of ``log value`` vs ``n`` on the trailing window.

    ``window`` is the trailing fraction of checkpoints used.  Nonpositive
    or non-finite values are dropped; at least 10 usable points must
    remain.
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.shape != values.shape:
        raise ValueError("series arrays must have equal length")
    if not 0 < window <= 1:
        raise ValueError("window must lie in (0, 1]")
    start = len(ns) - int(math.ceil(len(ns) * window))
    ns, values = ns[start:], values[start:]
    keep = np.isfinite(values) & (values > 0)
    ns, values = ns[keep], values[keep]
    if len(ns) < 10:
        raise ValueError(f"need at least 10 positive points in window, have {len(ns)}")
    return float(np.polyfit(ns, np.log(values), 1)[0])


def rate_window(ns, values, upper_rel: float = 1e-2,
                lower_rel: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Restrict a decaying series to its informative range.

    Keeps points whose value lies in ``[lower_rel, upper_rel]`` relative to
    the series maximum, cutting both the initial transient and the
    floating-point noise floor that a fully converged trajectory sits on.
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    ref = np.nanmax(values)
    if not np.isfinite(ref) or ref <= 0:
        raise ValueError("series has no positive values")
    keep = np.isfinite(values) & (values >= lower_rel * ref) & (values <= upper_rel * ref)
    return ns[keep], values[keep]
