"""Boolean pattern algebra and sequential-primitivity diagnostics.

A finite family of nonnegative matrices is *primitive* if some finite
product of its members (repetitions allowed) is strictly positive.  Only
the zero/nonzero pattern matters, so the decision runs over boolean
matrices: breadth-first search over the semigroup generated by the family
patterns, capped by a configurable state budget.

For a stationary matrix process the *forward index* ``psi`` at time ``t``
is the least ``k >= 1`` such that ``gamma(A_{t+k-1}) ... gamma(A_t)`` is
all-true, and the *backward index* ``rho`` at time ``t`` is the least
``k >= 1`` such that ``gamma(A_t) ... gamma(A_{t-k+1})`` is all-true.
For stationary two-sided processes the two indices share one distribution,
and for i.i.d. emissions with a primitive pattern family both tails decay
geometrically; ``ks_distance`` and ``survival_loglinear_fit`` quantify the
empirical versions of those two facts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_array
from .generators import MatrixProcess

__all__ = [
    "BoolPattern",
    "PrimitivityReport",
    "pattern_of",
    "bool_product",
    "replay_word",
    "is_family_primitive",
    "sample_forward_index",
    "sample_backward_index",
    "sample_forward_indices",
    "sample_backward_indices",
    "ks_distance",
    "ks_critical_distance",
    "survival_loglinear_fit",
]

DEFAULT_INDEX_CAP = 100_000


class BoolPattern:
    """Zero/nonzero pattern of a square nonnegative matrix."""

    __slots__ = ("bits",)

    def __init__(self, bits):
        b = np.asarray(bits, dtype=bool)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError(f"expected a square pattern, got shape {b.shape}")
        self.bits = b

    @property
    def p(self) -> int:
        return self.bits.shape[0]

    @property
    def all_true(self) -> bool:
        return bool(self.bits.all())

    @property
    def allowable(self) -> bool:
        return bool(self.bits.any(axis=1).all() and self.bits.any(axis=0).all())

    def key(self) -> bytes:
        return self.bits.tobytes()

    def __eq__(self, other):
        return isinstance(other, BoolPattern) and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.p, self.key()))

    def __repr__(self):
        return f"BoolPattern(p={self.p}, ones={int(self.bits.sum())})"


def pattern_of(A) -> BoolPattern:
    """``gamma(A)``: bit ``(i, j)`` is true iff ``A[i, j] > 0``."""
    return BoolPattern(as_array(A) > 0)


def _bool_matmul(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    return (P.astype(np.int64) @ Q.astype(np.int64)) > 0


def bool_product(P: BoolPattern, Q: BoolPattern) -> BoolPattern:
    """Boolean matrix product; equals ``gamma(AB)`` for nonnegative ``A, B``."""
    if P.p != Q.p:
        raise ValueError("dimension mismatch")
    return BoolPattern(_bool_matmul(P.bits, Q.bits))


def replay_word(patterns: list[BoolPattern], word) -> BoolPattern:
    """Left-to-right product ``patterns[word[0]] ... patterns[word[-1]]``."""
    if len(word) == 0:
        raise ValueError("empty word")
    out = patterns[word[0]]
    for idx in word[1:]:
        out = bool_product(out, patterns[idx])
    return out


@dataclass
class PrimitivityReport:
    family_primitive: bool
    witness_word: tuple[int, ...] | None
    states_explored: int
    capped: bool


def is_family_primitive(patterns: list[BoolPattern],
                        state_cap: int = 1_000_000) -> PrimitivityReport:
    """Decide primitivity of a finite pattern family by semigroup BFS.

    Explores the set of distinct boolean products reachable from the
    generators (extending words on the right), so the first hit of the
    all-true pattern yields a shortest witness word.  If ``state_cap``
    distinct states are reached without a decision the report is returned
    with ``capped=True`` and ``family_primitive=False`` (inconclusive).
    """
    if len(patterns) == 0:
        raise ValueError("empty family")
    p = patterns[0].p
    for g in patterns:
        if g.p != p:
            raise ValueError("family members must share one dimension")
        if not g.allowable:
            raise ValueError("family members must be allowable patterns")

    visited: dict[bytes, tuple[np.ndarray, tuple[int, ...]]] = {}
    queue: list[bytes] = []
    for gi, g in enumerate(patterns):
        k = g.key()
        if k not in visited:
            visited[k] = (g.bits, (gi,))
            queue.append(k)
        if g.all_true:
            return PrimitivityReport(True, visited[k][1], len(visited), False)

    head = 0
    while head < len(queue):
        bits, word = visited[queue[head]]
        head += 1
        for gi, g in enumerate(patterns):
            nb = _bool_matmul(bits, g.bits)
            k = nb.tobytes()
            if k in visited:
                continue
            nw = word + (gi,)
            if nb.all():
                return PrimitivityReport(True, nw, len(visited) + 1, False)
            visited[k] = (nb, nw)
            queue.append(k)
            if len(visited) >= state_cap:
                return PrimitivityReport(False, None, len(visited), True)
    return PrimitivityReport(False, None, len(visited), False)


def sample_forward_index(proc: MatrixProcess, start: int | None = None,
                         cap: int = DEFAULT_INDEX_CAP) -> int:
    """Forward index at time ``start``: steps until the running pattern
    ``gamma(A_{start+k-1}) ... gamma(A_start)`` becomes all-true.

    ``start`` defaults to the process's next emission time; earlier starts
    are not reachable because the stream only moves forward.
    """
    t_next = proc.steps_emitted + 1
    if start is None:
        start = t_next
    if start < t_next:
        raise ValueError(f"process already emitted step {start}; next is {t_next}")
    while proc.steps_emitted + 1 < start:
        proc.next_matrix()
    cur = proc.next_matrix().a > 0
    k = 1
    while not cur.all():
        if k >= cap:
            raise RuntimeError(f"pattern not positive within cap={cap} steps")
        cur = _bool_matmul(proc.next_matrix().a > 0, cur)
        k += 1
    return k


def sample_backward_index(proc: MatrixProcess, end: int,
                          cap: int = DEFAULT_INDEX_CAP) -> int:
    """Backward index at time ``end``: steps until
    ``gamma(A_end) ... gamma(A_{end-k+1})`` becomes all-true.

    Requires pattern history (``proc.enable_history``) covering the walk;
    the process is advanced to time ``end`` if it is not there yet.
    """
    hist = proc.pattern_history()
    if end < 1:
        raise ValueError("end time must be >= 1")
    if end < proc.steps_emitted:
        raise ValueError(f"process already past end={end}")
    while proc.steps_emitted < end:
        proc.next_matrix()
    cur = hist[-1]
    k = 1
    while not cur.all():
        if k >= cap:
            raise RuntimeError(f"pattern not positive within cap={cap} steps")
        if k >= len(hist) or end - k < 1:
            raise RuntimeError("pattern history exhausted before positivity")
        cur = _bool_matmul(cur, hist[-1 - k])
        k += 1
    return k


def sample_forward_indices(proc: MatrixProcess, count: int,
                           cap: int = DEFAULT_INDEX_CAP) -> np.ndarray:
    """Renewal sampling of forward indices: each sample starts where the
    previous window ended, so for i.i.d. processes the samples are i.i.d."""
    out = np.empty(int(count), dtype=np.int64)
    for s in range(int(count)):
        out[s] = sample_forward_index(proc, cap=cap)
    return out


def sample_backward_indices(proc: MatrixProcess, count: int,
                            cap: int = DEFAULT_INDEX_CAP,
                            spacing: int = 64) -> np.ndarray:
    """Sample backward indices from a process stream.

    For i.i.d. kinds the time-reversed sequence is again i.i.d. with the
    same marginal, so each sample is taken exactly (and independently) by
    multiplying fresh emissions on the right until positivity.  For
    Markov-modulated processes the true buffered walk-back is used at end
    points spaced ``spacing`` steps apart (samples are then only
    approximately independent).
    """
    count = int(count)
    out = np.empty(count, dtype=np.int64)
    if proc.kind in ("push_sum", "iid_family", "constant"):
        for s in range(count):
            cur = proc.next_matrix().a > 0
            k = 1
            while not cur.all():
                if k >= cap:
                    raise RuntimeError(f"pattern not positive within cap={cap} steps")
                cur = _bool_matmul(cur, proc.next_matrix().a > 0)
                k += 1
            out[s] = k
        return out
    if proc._history is None:
        proc.enable_history(cap)
    end = proc.steps_emitted
    for s in range(count):
        end += spacing
        out[s] = sample_backward_index(proc, end, cap=cap)
    return out


# -- statistics on sampled indices ------------------------------------------


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.abs(fa - fb).max())


def ks_critical_distance(n: int, m: int, alpha: float = 0.01) -> float:
    """Large-sample two-sample KS critical distance at level ``alpha``."""
    c = np.sqrt(-0.5 * np.log(alpha / 2.0))
    return float(c * np.sqrt((n + m) / (n * m)))


def survival_loglinear_fit(samples, min_count: int = 10):
    """Least-squares line through ``(x, log P(sample > x))`` on the tail.

    The fit range runs from the sample median up to the largest ``x`` still
    supported by at least ``min_count`` exceedances, which is where a
    geometric tail shows up as a straight line.  Returns
    ``(slope, intercept, corr)`` with ``corr`` the Pearson correlation of
    the fitted points (close to -1 for geometric tails).
    """
    s = np.sort(np.asarray(samples, dtype=np.int64))
    n = len(s)
    if n < 10:
        raise ValueError("need at least 10 samples")
    lo = int(np.median(s))
    hi = int(s[-min_count]) if n >= min_count else int(s[-1])
    xs = np.arange(lo, hi)
    if len(xs) < 3:
        raise ValueError("tail range too short for a line fit")
    surv = 1.0 - np.searchsorted(s, xs, side="right") / n
    keep = surv > 0
    xs, surv = xs[keep], surv[keep]
    y = np.log(surv)
    slope, intercept = np.polyfit(xs, y, 1)
    corr = float(np.corrcoef(xs, y)[0, 1])
    return float(slope), float(intercept), corr
