"""Primitives for nonnegative matrices and vectors.

Conventions used throughout the package:

* matrices and vectors are dense ``float64`` numpy arrays;
* a matrix is *row-allowable* if it has no zero row, *allowable* if it has
  neither a zero row nor a zero column;
* the Hilbert projective distance of strictly positive vectors is
  ``h(x, y) = log max_{k,l} (x_k/y_k) / (x_l/y_l)``;
* the Birkhoff contraction coefficient is ``tau(A) = tanh(phi(A)/4)`` where
  ``phi(A)`` is the largest Hilbert distance between two rows of ``A``;
* wedge magnitudes use the Gram-determinant convention
  ``|x ^ y| = sqrt(|x|^2 |y|^2 - <x,y>^2)``.

``phi`` is ``+inf`` as soon as the matrix has a zero entry in a column that
is not entirely zero: such a matrix maps some pairs of positive vectors to
pairs at unbounded projective distance, so it does not contract at all
(``tau = 1``).  All-zero columns are ignored because they never contribute
to the image of the positive cone; in particular a row-allowable matrix
whose nonzero columns are proportional still gets ``phi = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NonNegMatrix",
    "LogScaled",
    "PROB_TOL",
    "is_allowable",
    "is_row_allowable",
    "extreme_entries",
    "normalize_simplex",
    "tv_distance",
    "hilbert_distance",
    "birkhoff_phi",
    "birkhoff_tau",
    "log_birkhoff_tau",
    "wedge_magnitude",
    "log_abs_det",
]

# Absolute tolerance on probability-vector sums and on exact projective
# identities; contraction inequalities elsewhere use looser slack.
PROB_TOL = 1e-12


def as_array(A) -> np.ndarray:
    """Return the underlying float array of a matrix-like object."""
    if isinstance(A, NonNegMatrix):
        return A.a
    return np.asarray(A, dtype=float)


class NonNegMatrix:
    """Dense square matrix of nonnegative reals with cached structure flags.

    The flags (``row_allowable``, ``allowable``, ``strictly_positive``) are
    computed lazily from the entries and cached; instances are treated as
    immutable after construction.
    """

    __slots__ = ("a", "_row_allowable", "_allowable", "_strictly_positive")

    def __init__(self, entries, *, validate: bool = True):
        a = np.asarray(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if validate:
            if not np.all(np.isfinite(a)):
                raise ValueError("matrix entries must be finite")
            if np.any(a < 0):
                raise ValueError("matrix entries must be nonnegative")
        self.a = a
        self._row_allowable = None
        self._allowable = None
        self._strictly_positive = None

    @classmethod
    def trusted(cls, a: np.ndarray, *, row_allowable=None, allowable=None,
                strictly_positive=None) -> "NonNegMatrix":
        """Wrap an array known to be valid, optionally pre-seeding flags."""
        m = cls(a, validate=False)
        m._row_allowable = row_allowable
        m._allowable = allowable
        m._strictly_positive = strictly_positive
        return m

    @property
    def p(self) -> int:
        return self.a.shape[0]

    @property
    def row_allowable(self) -> bool:
        if self._row_allowable is None:
            self._row_allowable = bool((self.a > 0).any(axis=1).all())
        return self._row_allowable

    @property
    def allowable(self) -> bool:
        if self._allowable is None:
            pos = self.a > 0
            self._allowable = bool(pos.any(axis=1).all() and pos.any(axis=0).all())
        return self._allowable

    @property
    def strictly_positive(self) -> bool:
        if self._strictly_positive is None:
            self._strictly_positive = bool((self.a > 0).all())
        return self._strictly_positive

    def __repr__(self) -> str:
        return f"NonNegMatrix(p={self.p})"


@dataclass(frozen=True)
class LogScaled:
    """A real number stored as ``mantissa * exp(log_scale)``.

    For nonzero values the mantissa is normalized into ``[1, e)`` in absolute
    value, so arbitrarily long products stay representable.  Zero is stored
    as ``(0.0, 0.0)``.
    """

    mantissa: float
    log_scale: float

    @classmethod
    def from_value(cls, v: float) -> "LogScaled":
        v = float(v)
        if v == 0.0:
            return cls(0.0, 0.0)
        e = math.floor(math.log(abs(v)))
        m = v / math.exp(e)
        # guard against boundary rounding of floor(log|v|)
        while abs(m) >= math.e:
            m /= math.e
            e += 1
        while abs(m) < 1.0:
            m *= math.e
            e -= 1
        return cls(m, float(e))

    @property
    def value(self) -> float:
        return self.mantissa * math.exp(self.log_scale)

    @property
    def log_abs(self) -> float:
        if self.mantissa == 0.0:
            return -math.inf
        return math.log(abs(self.mantissa)) + self.log_scale

    def times(self, factor: float) -> "LogScaled":
        """Multiply by a plain float, renormalizing the mantissa."""
        if factor == 0.0 or self.mantissa == 0.0:
            return LogScaled(0.0, 0.0)
        scaled = LogScaled.from_value(self.mantissa * factor)
        return LogScaled(scaled.mantissa, scaled.log_scale + self.log_scale)

    def shifted(self, delta: float) -> "LogScaled":
        """Multiply by ``exp(delta)`` (a pure log-scale shift)."""
        if self.mantissa == 0.0:
            return LogScaled(0.0, 0.0)
        return LogScaled(self.mantissa, self.log_scale + float(delta))


def is_allowable(A) -> bool:
    """True iff every row and every column of ``A`` has a positive entry."""
    a = as_array(A)
    pos = a > 0
    return bool(pos.any(axis=1).all() and pos.any(axis=0).all())


def is_row_allowable(A) -> bool:
    """True iff every row of ``A`` has a positive entry."""
    return bool((as_array(A) > 0).any(axis=1).all())


def extreme_entries(A) -> tuple[float, float]:
    """Minimal positive entry and maximal entry of ``A``.

    Raises ``ValueError`` if the matrix has no positive entry.
    """
    a = as_array(A)
    pos = a[a > 0]
    if pos.size == 0:
        raise ValueError("no positive entry")
    return float(pos.min()), float(a.max())


def normalize_simplex(v) -> np.ndarray:
    """Scale a nonnegative vector to sum 1."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("simplex normalization requires a nonnegative vector")
    s = float(v.sum())
    if not s > 0:
        raise ValueError("degenerate normalization: vector sums to zero")
    return v / s


def tv_distance(xi, eta) -> float:
    """Total variation distance ``0.5 * sum_i |xi_i - eta_i]``.

    Both arguments must be probability vectors (sum 1 within ``PROB_TOL``).
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if xi.shape != eta.shape:
        raise ValueError("dimension mismatch")
    for name, v in (("first", xi), ("second", eta)):
        if abs(float(v.sum()) - 1.0) > PROB_TOL or np.any(v < 0):
            raise ValueError(f"{name} argument is not a probability vector")
    return 0.5 * float(np.abs(xi - eta).sum())


def hilbert_distance(x, y) -> float:
    """Hilbert projective distance between strictly positive vectors.

    ``h(x, y) = log max_{k,l} (x_k/y_k)/(x_l/y_l)``; zero iff ``y = c x``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("dimension mismatch")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("Hilbert metric requires strict positivity")
    d = np.log(x) - np.log(y)
    return float(d.max() - d.min())


def birkhoff_phi(A) -> float:
    """Projective diameter ``phi(A) = max_{i,j} h(A[i,:], A[j,:])``.

    Requires a row-allowable matrix.  All-zero columns are dropped before
    the scan (they do not affect the image of the positive cone); any
    remaining zero entry makes the diameter infinite.
    """
    a = as_array(A)
    pos = a > 0
    if not pos.any(axis=1).all():
        raise ValueError("projective diameter requires a row-allowable matrix")
    keep = pos.any(axis=0)
    a = a[:, keep]
    pos = pos[:, keep]
    if not pos.all():
        return math.inf
    L = np.log(a)
    # dmax[i, j] = max_k (log a_ik - log a_jk); phi = max_{i,j} dmax[i,j] + dmax[j,i]
    D = L[:, None, :] - L[None, :, :]
    dmax = D.max(axis=2)
    return float((dmax + dmax.T).max())


def birkhoff_tau(A) -> float:
    """Birkhoff contraction coefficient ``tanh(phi(A)/4)`` in ``[0, 1]``."""
    phi = birkhoff_phi(A)
    if math.isinf(phi):
        return 1.0
    return math.tanh(phi / 4.0)


def log_birkhoff_tau(A) -> float:
    """``log tau(A)``, computed stably even when ``tau`` rounds to 1.

    Uses ``log tanh(t) = log1p(-exp(-2t)) - log1p(exp(-2t))`` so that large
    but finite projective diameters still yield a strictly negative result.
    """
    phi = birkhoff_phi(A)
    if math.isinf(phi):
        return 0.0
    if phi == 0.0:
        return -math.inf
    q = math.exp(-phi / 2.0)
    return math.log1p(-q) - math.log1p(q)


def wedge_magnitude(x, y) -> float:
    """Gram-determinant magnitude ``sqrt(|x|^2 |y|^2 - <x,y>^2)`` of ``x ^ y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("dimension mismatch")
    gram = float(x @ x) * float(y @ y) - float(x @ y) ** 2
    return math.sqrt(max(gram, 0.0))


def log_abs_det(A) -> float:
    """Natural log of ``|det A|``; ``-inf`` for singular matrices."""
    sign, ld = np.linalg.slogdet(as_array(A))
    if sign == 0:
        return -math.inf
    return float(ld)
