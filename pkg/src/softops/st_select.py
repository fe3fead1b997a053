"""Straight-through estimation, soft index selection, gradient-path switching
and gradient-safe math wrappers.

A straight-through pair keeps the hard function on the value path and the
soft surrogate's derivative on the tangent path.  Applying it to a whole
composite function (rather than each primitive) avoids hard zero factors
appearing multiplicatively in the gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import (ConfigError, Dual, SoftConfig, SoftIndex, SoftPerm,
                   is_dual, tangent_of, value_of)

__all__ = ["StFunction", "st", "take_along_axis", "take", "choose",
           "dynamic_index_in_dim", "dynamic_slice_in_dim", "dynamic_slice",
           "gated_grad_switch", "safe_math", "safe_sqrt", "safe_log",
           "safe_arcsin", "safe_arccos", "safe_div", "safe_norm"]


@dataclass(frozen=True)
class StFunction:
    """A (hard, soft) pair evaluated straight-through.

    Called on plain arrays it is exactly the hard function.  Called on Duals
    the value path is still the hard function while tangents come from the
    soft surrogate, so downstream arithmetic composes the soft derivative
    with a hard forward trajectory.
    """

    hard: Callable
    soft: Callable

    def __call__(self, *args, **kwargs):
        if not any(is_dual(a) for a in args):
            return self.hard(*args, **kwargs)
        hard_out = self.hard(*(value_of(a) for a in args), **kwargs)
        soft_out = self.soft(*args, **kwargs)
        if isinstance(hard_out, tuple) or isinstance(soft_out, tuple):
            raise TypeError("st supports single-output functions")
        return Dual(np.asarray(hard_out, dtype=float), tangent_of(soft_out))


def st(hard: Callable, soft: Callable) -> StFunction:
    """Build the straight-through combination of a hard map and its surrogate.

    Apply it to composite functions as a whole: wrapping each primitive
    separately reintroduces hard factors through the product rule and can
    zero out the very gradients the surrogate was meant to provide.
    """
    return StFunction(hard=hard, soft=soft)


# ---------------------------------------------------------------------------
# Soft index selection (expectation semantics)
# ---------------------------------------------------------------------------


def _weights_of(p):
    if isinstance(p, SoftPerm):
        return p.mat
    if isinstance(p, SoftIndex):
        return p.probs
    return p


def take_along_axis(x, p):
    """Expectation selection: each output is the soft-index-weighted average.

    ``p`` may be a SoftIndex / probability vector (scalar output) or a
    SoftPerm / row-stochastic matrix (one output per row).
    """
    w = _weights_of(p)
    wv = value_of(w)
    xv = value_of(x)
    if wv.shape[-1] != xv.shape[0]:
        raise ValueError(
            f"selection weights cover {wv.shape[-1]} entries but x has {xv.shape[0]}")
    return w @ x if (is_dual(w) or is_dual(x)) else wv @ xv


def take(x, p):
    """Soft single-element lookup: the expectation of x under p."""
    return take_along_axis(x, p)


def choose(p, choices: Sequence):
    """Soft selection among whole arrays: sum_j p_j * choices[j]."""
    w = _weights_of(p)
    wv = value_of(w)
    if wv.ndim != 1 or len(choices) != wv.size:
        raise ValueError("choose needs one probability per choice")
    out = None
    for j, arr in enumerate(choices):
        term = w[j] * arr
        out = term if out is None else out + term
    return out


def dynamic_index_in_dim(x, p, axis: int = 0, keepdims: bool = False):
    """Soft replacement for indexing a single position along an axis.

    For a matrix x and a SoftIndex over rows this is p @ x: the expected row.
    """
    w = _weights_of(p)
    if axis != 0:
        x = np.moveaxis(value_of(x), axis, 0) if not is_dual(x) else _dual_moveaxis(x, axis)
    out = w @ x if (is_dual(w) or is_dual(x)) else value_of(w) @ value_of(x)
    if keepdims:
        out = out.reshape((1,) + np.shape(value_of(out))) if not is_dual(out) \
            else out.reshape((1,) + out.shape)
    return out


def _dual_moveaxis(x, axis):
    return Dual(np.moveaxis(x.value, axis, 0), np.moveaxis(x.tangent, axis, 0))


def dynamic_slice_in_dim(x, p_start, length: int):
    """Soft contiguous slice: expectation over window start positions.

    ``p_start`` is a distribution over the n - length + 1 valid starts;
    output t is sum_s p_s * x[s + t].
    """
    w = _weights_of(p_start)
    xv = value_of(x)
    n = xv.shape[0]
    n_starts = n - length + 1
    if n_starts < 1:
        raise ValueError(f"window of length {length} does not fit in {n} entries")
    if value_of(w).shape[0] != n_starts:
        raise ValueError(
            f"need one probability per window start ({n_starts}), "
            f"got {value_of(w).shape[0]}")
    out = None
    for s in range(n_starts):
        term = w[s] * x[s:s + length]
        out = term if out is None else out + term
    return out


def dynamic_slice(x, p_starts: Sequence, sizes: Sequence[int]):
    """Soft multi-axis slice: independent start distributions per axis."""
    xv = value_of(x)
    if len(p_starts) != xv.ndim or len(sizes) != xv.ndim:
        raise ValueError("need one start distribution and size per axis")
    out = x
    for axis in range(xv.ndim):
        out = _slice_axis(out, p_starts[axis], sizes[axis], axis)
    return out


def _slice_axis(x, p, length, axis):
    moved = _dual_moveaxis(x, axis) if is_dual(x) else np.moveaxis(value_of(x), axis, 0)
    sliced = dynamic_slice_in_dim(moved, p, length)
    return _dual_moveaxis_back(sliced, axis) if is_dual(sliced) \
        else np.moveaxis(sliced, 0, axis)


def _dual_moveaxis_back(x, axis):
    return Dual(np.moveaxis(x.value, 0, axis), np.moveaxis(x.tangent, 0, axis))


# ---------------------------------------------------------------------------
# Gating vs integration gradients for axiswise values
# ---------------------------------------------------------------------------


def gated_grad_switch(arg_op: Callable, gated: bool) -> Callable:
    """Lift a soft-permutation producer to a value operator with a selectable
    gradient path.

    ``gated=True`` differentiates through both the matrix and the input
    (product rule).  ``gated=False`` freezes the matrix at its value, so the
    Jacobian of the returned map equals the matrix itself, the axiswise
    analogue of integration-style relu gradients.

    ``arg_op(x, cfg)`` must return a SoftPerm (or a bare matrix); methods
    without an arg form (the value-space projection methods) cannot be
    switched this way.
    """

    def op(x, cfg: SoftConfig = SoftConfig()):
        if gated:
            M = _weights_of(arg_op(x, cfg))
            return M @ x
        M = _weights_of(arg_op(value_of(x), cfg))
        M = value_of(M)
        return M @ x

    return op


# ---------------------------------------------------------------------------
# Gradient-safe math
# ---------------------------------------------------------------------------

_DEFAULT_GMAX = 1e6


def _clamp_mag(d, gmax):
    return np.clip(d, -gmax, gmax)


def safe_sqrt(x, gmax: float = _DEFAULT_GMAX):
    """Exact sqrt values; the derivative is clamped near zero instead of
    blowing up."""
    v = value_of(x)
    if np.any(v < 0):
        raise ValueError("safe_sqrt requires nonnegative inputs")
    out = np.sqrt(v)
    if not is_dual(x):
        return out
    with np.errstate(divide="ignore"):
        d = np.where(out > 0, 0.5 / np.where(out > 0, out, 1.0), np.inf)
    return Dual(out, _clamp_mag(d, gmax) * x.tangent)


def safe_log(x, gmax: float = _DEFAULT_GMAX):
    v = value_of(x)
    if np.any(v < 0):
        raise ValueError("safe_log requires nonnegative inputs")
    with np.errstate(divide="ignore"):
        out = np.log(v)
    if not is_dual(x):
        return out
    with np.errstate(divide="ignore"):
        d = np.where(v > 0, 1.0 / np.where(v > 0, v, 1.0), np.inf)
    return Dual(out, _clamp_mag(d, gmax) * x.tangent)


def safe_arcsin(x, gmax: float = _DEFAULT_GMAX):
    v = value_of(x)
    if np.any(np.abs(v) > 1):
        raise ValueError("safe_arcsin requires |x| <= 1")
    out = np.arcsin(v)
    if not is_dual(x):
        return out
    with np.errstate(divide="ignore"):
        denom = np.sqrt(np.maximum(1.0 - v * v, 0.0))
        d = np.where(denom > 0, 1.0 / np.where(denom > 0, denom, 1.0), np.inf)
    return Dual(out, _clamp_mag(d, gmax) * x.tangent)


def safe_arccos(x, gmax: float = _DEFAULT_GMAX):
    v = value_of(x)
    if np.any(np.abs(v) > 1):
        raise ValueError("safe_arccos requires |x| <= 1")
    out = np.arccos(v)
    if not is_dual(x):
        return out
    with np.errstate(divide="ignore"):
        denom = np.sqrt(np.maximum(1.0 - v * v, 0.0))
        d = np.where(denom > 0, -1.0 / np.where(denom > 0, denom, 1.0), -np.inf)
    return Dual(out, _clamp_mag(d, gmax) * x.tangent)


def safe_div(x, y, gmax: float = _DEFAULT_GMAX):
    """Exact x / y with both partial derivatives clamped near y = 0."""
    xv, yv = value_of(x), value_of(y)
    out = xv / yv
    if not (is_dual(x) or is_dual(y)):
        return out
    with np.errstate(divide="ignore", invalid="ignore"):
        dx = 1.0 / yv
        dy = -xv / (yv * yv)
    t = _clamp_mag(dx, gmax) * tangent_of(x) + _clamp_mag(dy, gmax) * tangent_of(y)
    return Dual(out, t)


def safe_norm(x, gmax: float = _DEFAULT_GMAX):
    """Euclidean norm with gradient 0 at the origin (symmetric clamp)."""
    v = value_of(x)
    nrm = float(np.linalg.norm(v))
    if not is_dual(x):
        return nrm
    if nrm == 0.0:
        return Dual(0.0, 0.0)
    grad = _clamp_mag(v / nrm, gmax)
    return Dual(nrm, float(grad @ x.tangent))


_SAFE = {"sqrt": safe_sqrt, "log": safe_log, "arcsin": safe_arcsin,
         "arccos": safe_arccos, "div": safe_div, "norm": safe_norm}


def safe_math(kind: str, *args, gmax: float = _DEFAULT_GMAX):
    """Dispatch to a gradient-safe wrapper by name."""
    try:
        fn = _SAFE[kind]
    except KeyError:
        raise ConfigError(
            f"unknown safe_math kind {kind!r}; choose from {sorted(_SAFE)}"
        ) from None
    return fn(*args, gmax=gmax)
