"""Shared configuration, numeric containers, and the forward-mode differentiation
contract used by every other module.

All numerics are 64-bit floats.  Differentiation is forward-mode only: a
:class:`Dual` holds a value array and a tangent array of the same shape, and
every operation in this library accepts either plain arrays or Duals.  A full
Jacobian is assembled from one forward pass per input coordinate, which is
perfectly adequate at desk scale (n up to a few thousand) and avoids building
any tape.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "Mode",
    "Method",
    "SoftConfig",
    "Dual",
    "SoftBool",
    "SoftIndex",
    "SoftPerm",
    "ConfigError",
    "ConvergenceError",
    "DEFAULT_CONFIG",
    "dual_lift",
    "seed_direction",
    "jacobian",
    "fd_jacobian",
    "value_of",
    "tangent_of",
    "is_dual",
    "validate_method_mode",
    "supported_modes",
]


class ConfigError(ValueError):
    """Raised for invalid configuration (non-positive tau, bad method/mode, ...)."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver fails to reach its tolerance.

    Carries the final residual and iteration count for diagnostics.
    """

    def __init__(self, message: str, *, residual: float | None = None,
                 iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class Mode(enum.Enum):
    """Sigmoidal smoothness family.

    SMOOTH selects the exponential sigmoid / entropic regularization,
    C0 the piecewise-linear sigmoid / Euclidean regularization,
    C1 the Hermite-cubic sigmoid / p=3/2-norm regularization,
    C2 the Hermite-quintic sigmoid / p=4/3-norm regularization.
    """

    SMOOTH = "smooth"
    C0 = "c0"
    C1 = "c1"
    C2 = "c2"


class Method(enum.Enum):
    """Axiswise softening algorithm selector."""

    OT = "ot"
    SOFTSORT = "softsort"
    NEURALSORT = "neuralsort"
    FASTSOFTSORT = "fastsoftsort"
    SMOOTHSORT = "smoothsort"
    NETWORK = "network"


# Modes each method supports.  SMOOTHSORT is entropic-dual only.
_METHOD_MODES = {
    Method.OT: frozenset(Mode),
    Method.SOFTSORT: frozenset(Mode),
    Method.NEURALSORT: frozenset(Mode),
    Method.FASTSOFTSORT: frozenset(Mode),
    Method.SMOOTHSORT: frozenset({Mode.SMOOTH}),
    Method.NETWORK: frozenset(Mode),
}


def supported_modes(method: Method) -> frozenset:
    return _METHOD_MODES[method]


def validate_method_mode(method: Method, mode: Mode) -> None:
    """Reject unsupported (method, mode) pairs.

    The full support matrix is documented in the README.
    """
    if mode not in _METHOD_MODES[method]:
        raise ConfigError(
            f"method {method.value!r} does not support mode {mode.value!r}; "
            f"supported modes: {sorted(m.value for m in _METHOD_MODES[method])} "
            "(see the method/mode support matrix in the README)"
        )


@dataclass(frozen=True)
class SoftConfig:
    """Softness configuration threaded through every operation.

    Parameters
    ----------
    tau:
        Softening parameter, strictly positive.  tau -> 0+ recovers the hard
        operation; larger tau yields more informative gradients.
    mode:
        Sigmoidal/regularizer family, see :class:`Mode`.
    method:
        Axiswise algorithm.  ``None`` lets each operation pick its default
        (elementwise operations ignore it).
    standardize:
        Standardize-and-squash preprocessing for axiswise operations.
        Ignored by elementwise operations and forced off for SMOOTHSORT.
    gated_grad:
        True differentiates axiswise values through both the soft permutation
        and the input (product rule); False freezes the matrix so the Jacobian
        of a value operation equals the matrix itself.
    round_k:
        Number of neighbouring sigmoidals on each side used by soft rounding.
    atol, rtol:
        Absolute/relative tolerance of the soft ``isclose`` comparison.
    """

    tau: float = 0.1
    mode: Mode = Mode.SMOOTH
    method: Union[Method, None] = None
    standardize: bool = True
    gated_grad: bool = True
    round_k: int = 3
    atol: float = 1e-8
    rtol: float = 1e-5

    def __post_init__(self):
        if not np.isfinite(self.tau) or self.tau <= 0.0:
            raise ConfigError(f"tau must be strictly positive, got {self.tau}")
        if self.round_k < 1:
            raise ConfigError(f"round_k must be >= 1, got {self.round_k}")
        if self.atol < 0.0 or self.rtol < 0.0:
            raise ConfigError("atol and rtol must be nonnegative")


DEFAULT_CONFIG = SoftConfig()


# ---------------------------------------------------------------------------
# Forward-mode dual numbers
# ---------------------------------------------------------------------------


class Dual:
    """A (value, tangent) pair over float64 numpy arrays.

    Arithmetic obeys the chain rule; comparisons act on the value part only,
    so branching behaves exactly like the piecewise function being softened.
    Instances are treated as immutable by all public operations.
    """

    __slots__ = ("value", "tangent")

    # Keep numpy from broadcasting elementwise over us; binary ops with
    # ndarrays then fall through to our reflected operators.
    __array_ufunc__ = None

    def __init__(self, value, tangent=None):
        value = np.asarray(value, dtype=np.float64)
        if tangent is None:
            tangent = np.zeros_like(value)
        else:
            tangent = np.asarray(tangent, dtype=np.float64)
            if tangent.shape != value.shape:
                tangent = np.broadcast_to(tangent, value.shape).copy()
        self.value = value
        self.tangent = tangent

    # -- basic container protocol ------------------------------------------

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def size(self):
        return self.value.size

    @property
    def T(self):
        return Dual(self.value.T, self.tangent.T)

    def __len__(self):
        return len(self.value)

    def __getitem__(self, idx):
        return Dual(self.value[idx], self.tangent[idx])

    def __setitem__(self, idx, other):
        # Internal use only (functional builders); public API treats Duals as
        # immutable.
        other = as_dual(other)
        self.value[idx] = other.value
        self.tangent[idx] = other.tangent

    def copy(self):
        return Dual(self.value.copy(), self.tangent.copy())

    def reshape(self, *shape):
        return Dual(self.value.reshape(*shape), self.tangent.reshape(*shape))

    def ravel(self):
        return Dual(self.value.ravel(), self.tangent.ravel())

    def sum(self, axis=None, keepdims=False):
        return Dual(self.value.sum(axis=axis, keepdims=keepdims),
                    self.tangent.sum(axis=axis, keepdims=keepdims))

    def mean(self, axis=None, keepdims=False):
        return Dual(self.value.mean(axis=axis, keepdims=keepdims),
                    self.tangent.mean(axis=axis, keepdims=keepdims))

    def __repr__(self):
        return f"Dual(value={self.value!r}, tangent={self.tangent!r})"

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.tangent + other.tangent)
        return Dual(self.value + other, np.broadcast_to(
            self.tangent, np.broadcast_shapes(self.shape, np.shape(other))).copy())

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.value, -self.tangent)

    def __sub__(self, other):
        return self + (-as_dual(other))

    def __rsub__(self, other):
        return as_dual(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value * other.value,
                        self.tangent * other.value + self.value * other.tangent)
        other = np.asarray(other, dtype=np.float64)
        return Dual(self.value * other, self.tangent * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.value
            return Dual(self.value * inv,
                        (self.tangent - self.value * inv * other.tangent) * inv)
        other = np.asarray(other, dtype=np.float64)
        return Dual(self.value / other, self.tangent / other)

    def __rtruediv__(self, other):
        other = np.asarray(other, dtype=np.float64)
        inv = 1.0 / self.value
        return Dual(other * inv, -other * inv * inv * self.tangent)

    def __pow__(self, p):
        if isinstance(p, Dual):
            raise TypeError("Dual exponents are not supported; use exp/log")
        v = np.power(self.value, p)
        return Dual(v, p * np.power(self.value, p - 1.0) * self.tangent)

    def __matmul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value @ other.value,
                        self.tangent @ other.value + self.value @ other.tangent)
        other = np.asarray(other, dtype=np.float64)
        return Dual(self.value @ other, self.tangent @ other)

    def __rmatmul__(self, other):
        other = np.asarray(other, dtype=np.float64)
        return Dual(other @ self.value, other @ self.tangent)

    # -- comparisons: value part only ----------------------------------------

    def __lt__(self, other):
        return self.value < value_of(other)

    def __le__(self, other):
        return self.value <= value_of(other)

    def __gt__(self, other):
        return self.value > value_of(other)

    def __ge__(self, other):
        return self.value >= value_of(other)

    def __eq__(self, other):  # noqa: D105 - value comparison, like a float array
        return self.value == value_of(other)

    def __ne__(self, other):
        return self.value != value_of(other)

    __hash__ = None


ArrayOrDual = Union[np.ndarray, float, Dual]


def is_dual(x) -> bool:
    return isinstance(x, Dual)


def as_dual(x) -> Dual:
    return x if isinstance(x, Dual) else Dual(np.asarray(x, dtype=np.float64))


def value_of(x):
    """Value part of ``x`` as a float64 array (identity for plain arrays)."""
    if isinstance(x, Dual):
        return x.value
    return np.asarray(x, dtype=np.float64)


def tangent_of(x):
    if isinstance(x, Dual):
        return x.tangent
    return np.zeros_like(np.asarray(x, dtype=np.float64))


# -- Dual-aware math helpers --------------------------------------------------
#
# These dispatch on the input type so that every operation in the library can
# be written once and evaluated either on plain arrays or on Duals.


def exp(x):
    if isinstance(x, Dual):
        v = np.exp(x.value)
        return Dual(v, v * x.tangent)
    return np.exp(x)


def log(x):
    if isinstance(x, Dual):
        return Dual(np.log(x.value), x.tangent / x.value)
    return np.log(x)


def log1p(x):
    if isinstance(x, Dual):
        return Dual(np.log1p(x.value), x.tangent / (1.0 + x.value))
    return np.log1p(x)


def sqrt(x):
    if isinstance(x, Dual):
        v = np.sqrt(x.value)
        return Dual(v, 0.5 * x.tangent / v)
    return np.sqrt(x)


def cbrt(x):
    if isinstance(x, Dual):
        v = np.cbrt(x.value)
        # A structurally zero argument (zero value and zero tangent, as in
        # single-element Cardano pools) has derivative 0; a zero value with a
        # nonzero tangent is a tie boundary, where the chain rule is undefined
        # anyway and gradient checks exclude the point.
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(v == 0.0, 0.0, x.tangent / (3.0 * v * v))
        return Dual(v, t)
    return np.cbrt(x)


def sinh(x):
    if isinstance(x, Dual):
        return Dual(np.sinh(x.value), np.cosh(x.value) * x.tangent)
    return np.sinh(x)


def arcsinh(x):
    if isinstance(x, Dual):
        return Dual(np.arcsinh(x.value), x.tangent / np.sqrt(1.0 + x.value ** 2))
    return np.arcsinh(x)


def absolute(x):
    """Hard absolute value; derivative is sign(value)."""
    if isinstance(x, Dual):
        return Dual(np.abs(x.value), np.sign(x.value) * x.tangent)
    return np.abs(x)


def select(mask, a, b):
    """Hard elementwise branch on a boolean mask (tangents follow the branch)."""
    if isinstance(a, Dual) or isinstance(b, Dual):
        a = as_dual(a)
        b = as_dual(b)
        return Dual(np.where(mask, a.value, b.value),
                    np.where(mask, a.tangent, b.tangent))
    return np.where(mask, a, b)


def maximum(a, b):
    return select(value_of(a) >= value_of(b), a, b)


def minimum(a, b):
    return select(value_of(a) <= value_of(b), a, b)


def clip_value(x, lo, hi):
    """Clamp values to [lo, hi]; tangents are zeroed where the clamp is active."""
    if isinstance(x, Dual):
        v = np.clip(x.value, lo, hi)
        inside = (x.value > lo) & (x.value < hi)
        return Dual(v, np.where(inside, x.tangent, 0.0))
    return np.clip(x, lo, hi)


def concatenate(parts, axis=0):
    if any(isinstance(p, Dual) for p in parts):
        parts = [as_dual(p) for p in parts]
        return Dual(np.concatenate([p.value for p in parts], axis=axis),
                    np.concatenate([p.tangent for p in parts], axis=axis))
    return np.concatenate(parts, axis=axis)


def stack(parts, axis=0):
    if any(isinstance(p, Dual) for p in parts):
        parts = [as_dual(p) for p in parts]
        return Dual(np.stack([p.value for p in parts], axis=axis),
                    np.stack([p.tangent for p in parts], axis=axis))
    return np.stack(parts, axis=axis)


def cumsum(x, axis=None):
    if isinstance(x, Dual):
        return Dual(np.cumsum(x.value, axis=axis), np.cumsum(x.tangent, axis=axis))
    return np.cumsum(x, axis=axis)


def dot(a, b):
    if isinstance(a, Dual) or isinstance(b, Dual):
        a = as_dual(a)
        b = as_dual(b)
        return Dual(np.dot(a.value, b.value),
                    np.dot(a.tangent, b.value) + np.dot(a.value, b.tangent))
    return np.dot(a, b)


def sort_by_value(x):
    """Sort ascending by value; tangents are carried along the (frozen) permutation.

    Returns (sorted, perm) with sorted = x[perm].
    """
    perm = np.argsort(value_of(x), kind="stable")
    return x[perm] if isinstance(x, Dual) else np.asarray(x, float)[perm], perm


def logsumexp(x, axis=None, keepdims=False):
    """Stable log-sum-exp, Dual-aware (tangent is the softmax-weighted average)."""
    v = value_of(x)
    vmax = np.max(v, axis=axis, keepdims=True)
    vmax = np.where(np.isfinite(vmax), vmax, 0.0)
    sumexp = np.sum(np.exp(v - vmax), axis=axis, keepdims=True)
    out_v = vmax + np.log(sumexp)
    if isinstance(x, Dual):
        w = np.exp(v - out_v)
        out_t = np.sum(w * x.tangent, axis=axis, keepdims=True)
        if not keepdims:
            out_v = np.squeeze(out_v, axis=axis) if axis is not None else out_v.reshape(())
            out_t = np.squeeze(out_t, axis=axis) if axis is not None else out_t.reshape(())
        return Dual(out_v, out_t)
    if not keepdims:
        out_v = np.squeeze(out_v, axis=axis) if axis is not None else out_v.reshape(())
    return out_v


def logaddexp(a, b):
    if isinstance(a, Dual) or isinstance(b, Dual):
        a = as_dual(a)
        b = as_dual(b)
        m = np.maximum(a.value, b.value)
        m = np.where(np.isfinite(m), m, 0.0)
        ea = np.exp(a.value - m)
        eb = np.exp(b.value - m)
        s = ea + eb
        v = m + np.log(s)
        t = (ea * a.tangent + eb * b.tangent) / s
        return Dual(v, t)
    return np.logaddexp(a, b)


# ---------------------------------------------------------------------------
# Probability containers
# ---------------------------------------------------------------------------

_SB_SLACK = 1e-9


@dataclass(frozen=True)
class SoftBool:
    """A probability in [0, 1] that a hard comparison is True."""

    p: float

    def __post_init__(self):
        p = float(self.p)
        if not (-_SB_SLACK <= p <= 1.0 + _SB_SLACK):
            raise ValueError(f"SoftBool probability out of [0, 1]: {p}")
        object.__setattr__(self, "p", min(max(p, 0.0), 1.0))

    def __float__(self):
        return self.p


@dataclass(frozen=True)
class SoftIndex:
    """A probability vector on the unit simplex: a relaxed array index.

    ``probs`` may be a plain array or a Dual; validation reads the value part.
    """

    probs: ArrayOrDual

    def __post_init__(self):
        v = value_of(self.probs)
        if v.ndim != 1:
            raise ValueError(f"SoftIndex must be a vector, got shape {v.shape}")
        if np.any(v < -_SB_SLACK) or np.any(v > 1.0 + _SB_SLACK):
            raise ValueError("SoftIndex entries must lie in [0, 1]")
        if abs(float(v.sum()) - 1.0) > 1e-9:
            raise ValueError(f"SoftIndex entries must sum to 1, got {v.sum()!r}")

    def __len__(self):
        return len(value_of(self.probs))

    @property
    def values(self):
        return value_of(self.probs)

    def hard(self) -> int:
        """Most probable index."""
        return int(np.argmax(value_of(self.probs)))


@dataclass(frozen=True)
class SoftPerm:
    """A nonnegative matrix with stochastic rows (and optionally columns).

    Relaxes a permutation matrix / transport plan.  ``mat`` may be a Dual.
    """

    mat: ArrayOrDual
    row_stochastic: bool = True
    col_stochastic: bool = False

    def __post_init__(self):
        v = value_of(self.mat)
        if v.ndim != 2:
            raise ValueError(f"SoftPerm must be a matrix, got shape {v.shape}")
        if np.any(v < -1e-9):
            raise ValueError("SoftPerm entries must be nonnegative")
        if self.row_stochastic:
            err = np.max(np.abs(v.sum(axis=1) - 1.0))
            if err > 1e-6:
                raise ValueError(f"SoftPerm rows must sum to 1 (max error {err:.3e})")
        if self.col_stochastic:
            err = np.max(np.abs(v.sum(axis=0) - 1.0))
            if err > 1e-6:
                raise ValueError(f"SoftPerm columns must sum to 1 (max error {err:.3e})")

    @property
    def shape(self):
        return value_of(self.mat).shape

    @property
    def values(self):
        return value_of(self.mat)

    def apply(self, x):
        """Matrix-vector product with expectation semantics."""
        return self.mat @ x if isinstance(self.mat, Dual) or isinstance(x, Dual) \
            else self.values @ np.asarray(x, float)

    def row(self, i) -> SoftIndex:
        return SoftIndex(self.mat[i])


# ---------------------------------------------------------------------------
# Differentiation entry points
# ---------------------------------------------------------------------------


def dual_lift(x) -> Dual:
    """Lift a real vector to a Dual with zero tangents.

    Seeding one tangent coordinate to 1 (see :func:`seed_direction`) turns a
    forward pass into a directional-derivative probe.
    """
    return Dual(np.asarray(x, dtype=np.float64))


def seed_direction(x, j: int) -> Dual:
    """Lift ``x`` with the j-th basis vector as tangent."""
    x = np.asarray(x, dtype=np.float64)
    t = np.zeros_like(x)
    t.flat[j] = 1.0
    return Dual(x, t)


def jacobian(f: Callable, x) -> np.ndarray:
    """Forward-mode Jacobian of ``f`` at ``x``; column j is the pass seeded with e_j.

    ``f`` must be composed of operations generic over Dual and map a vector to
    a vector (scalars are treated as length-1).
    """
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for j in range(x.size):
        out = f(seed_direction(x, j))
        cols.append(np.atleast_1d(tangent_of(out)).ravel())
    if not cols:
        raise ValueError("jacobian needs at least one input coordinate")
    lengths = {c.size for c in cols}
    if len(lengths) != 1:
        raise ValueError("f returned inconsistent output sizes across seeds")
    return np.stack(cols, axis=1)


def fd_jacobian(f: Callable, x, h: float | None = None) -> np.ndarray:
    """Central finite-difference Jacobian with per-coordinate steps.

    The default step is 1e-5 * (1 + |x_j|), matching the accuracy the library's
    gradient checks are calibrated for.
    """
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for j in range(x.size):
        hj = h if h is not None else 1e-5 * (1.0 + abs(x.flat[j]))
        xp = x.copy()
        xm = x.copy()
        xp.flat[j] += hj
        xm.flat[j] -= hj
        fp = np.atleast_1d(value_of(f(xp))).ravel()
        fm = np.atleast_1d(value_of(f(xm))).ravel()
        cols.append((fp - fm) / (2.0 * hj))
    return np.stack(cols, axis=1)
