"""Optimal-transport axiswise operators: argsort, sort, rank, top-k, max/min,
quantile and median, plus the standardize-and-squash preprocessing shared by
all axiswise methods.

The construction transports a uniform measure on the (squashed) inputs to a
measure on a small set of sorted anchor points with squared-difference costs;
the scaled transposed plan acts as a soft permutation matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (ConfigError, Dual, Mode, SoftConfig, SoftPerm, SoftIndex,
                   clip_value, exp, is_dual, log, value_of)
from .solvers import DEFAULT_PARAMS, SolverParams, ot_plan

__all__ = ["SquashState", "OtSpec", "standardize_squash",
           "unsquash_destandardize", "ot_argsort", "ot_sort", "ot_rank",
           "ot_topk", "ot_max", "ot_min", "ot_quantile", "ot_median"]

# Default budget; tol is the row/column-sum tolerance of the scaled plan P.
_OT_PARAMS = SolverParams(max_iter=20000, tol=1e-6)

_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class SquashState:
    """Mean/std captured by standardize-and-squash, for inverting on outputs."""

    mu: object
    s: object
    applied: bool = True


_IDENTITY_STATE = SquashState(mu=0.0, s=1.0, applied=False)


def _sigmoid(u):
    if is_dual(u):
        v = _sigmoid(u.value)
        return Dual(v, v * (1.0 - v) * u.tangent)
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


def standardize_squash(x):
    """Map x through sigma((x - mean) / std) into (0, 1).

    Makes tau independent of the input scale and matches the anchor grid's
    range.  A degenerate (constant) input is guarded with a tiny std floor,
    yielding the constant vector 0.5.
    """
    xv = value_of(x)
    if xv.ndim != 1 or xv.size < 1:
        raise ValueError("standardize_squash expects a vector")
    mu = x.mean() if is_dual(x) else float(np.mean(xv))
    centered = x - mu
    var = (centered * centered).mean() if is_dual(x) \
        else float(np.mean(centered * centered))
    if float(value_of(var)) < _STD_FLOOR ** 2:
        s = _STD_FLOOR
    else:
        s = var ** 0.5 if is_dual(var) else float(np.sqrt(var))
    state = SquashState(mu=mu, s=s, applied=True)
    return _sigmoid(centered / s), state


def unsquash_destandardize(y_tilde, state: SquashState):
    """Inverse of :func:`standardize_squash`: logit, then de-standardize.

    Probabilities are clamped to [1e-12, 1 - 1e-12] first; solver round-off
    can touch the bounds.
    """
    if not state.applied:
        return y_tilde
    p = clip_value(y_tilde, 1e-12, 1.0 - 1e-12)
    logit = log(p) - log(1.0 - p) if is_dual(p) \
        else np.log(p) - np.log1p(-p)
    return logit * state.s + state.mu


def _maybe_squash(x, cfg: SoftConfig):
    if cfg.standardize:
        return standardize_squash(x)
    return x, _IDENTITY_STATE


@dataclass(frozen=True)
class OtSpec:
    """Marginals, anchors and plan scaling of one OT operator instance."""

    a: np.ndarray
    b: np.ndarray
    y: np.ndarray
    plan_scale: float

    def __post_init__(self):
        if abs(self.a.sum() - 1.0) > 1e-9 or abs(self.b.sum() - 1.0) > 1e-9:
            raise ValueError("marginals must sum to 1")
        if np.any(self.a < 0) or np.any(self.b < 0):
            raise ValueError("marginals must be nonnegative")
        d = np.diff(self.y)
        if not (np.all(d >= 0) or np.all(d <= 0)):
            raise ValueError("anchors must be monotone")
        if self.plan_scale <= 0:
            raise ValueError("plan_scale must be positive")


def _sort_spec(n: int) -> OtSpec:
    if n < 2:
        raise ValueError("OT sorting needs n >= 2")
    return OtSpec(a=np.full(n, 1.0 / n), b=np.full(n, 1.0 / n),
                  y=np.arange(n, dtype=float) / (n - 1), plan_scale=float(n))


def _topk_spec(n: int, k: int) -> OtSpec:
    if not 1 <= k < n:
        raise ConfigError(f"top-k needs 1 <= k < n, got k={k}, n={n}")
    b = np.concatenate([np.full(k, 1.0 / n), [(n - k) / n]])
    y = np.concatenate([np.arange(k, 0, -1, dtype=float) / k, [0.0]])
    return OtSpec(a=np.full(n, 1.0 / n), b=b, y=y, plan_scale=float(n))


def _quantile_spec(n: int, q: float) -> OtSpec:
    if not 0.0 <= q <= 1.0:
        raise ConfigError(f"quantile level must be in [0, 1], got {q}")
    if n < 4:
        raise ConfigError(
            "the four-anchor quantile construction needs n >= 4; "
            "use a sort-based quantile for smaller inputs")
    k = int(np.floor(q * (n - 1)))
    k = min(max(k, 0), n - 2)
    b = np.array([k / n, 1.0 / n, 1.0 / n, (n - k - 2) / n])
    y = np.array([0.0, 1.0, 2.0, 3.0]) / 3.0
    return OtSpec(a=np.full(n, 1.0 / n), b=b, y=y, plan_scale=float(n))


def _plan(x_tilde, spec: OtSpec, cfg: SoftConfig,
          params: SolverParams | None):
    """Scaled transposed transport plan P between x_tilde and the anchors.

    Anchors with zero marginal mass receive no transport; the corresponding
    rows of P are exactly zero and the solver only sees the active anchors.
    ``params.tol`` bounds the row/column sums of the scaled plan P, so the
    underlying transport solve runs at tol / plan_scale.
    """
    params = params or _OT_PARAMS
    diff = x_tilde.reshape(-1, 1) - spec.y.reshape(1, -1) if is_dual(x_tilde) \
        else value_of(x_tilde)[:, None] - spec.y[None, :]
    C = diff * diff
    keep = spec.b > 0.0
    Ck = C[:, keep] if keep.sum() < keep.size else C
    gamma_params = SolverParams(max_iter=params.max_iter,
                                tol=params.tol / spec.plan_scale,
                                memory=params.memory)
    G = ot_plan(Ck, spec.a, spec.b[keep], cfg.tau, cfg.mode, gamma_params)
    P_active = spec.plan_scale * (G.T if is_dual(G) else G.T)
    if keep.all():
        return P_active
    n = spec.a.size
    m = spec.b.size
    if is_dual(P_active):
        P = Dual(np.zeros((m, n)))
    else:
        P = np.zeros((m, n))
    P[np.where(keep)[0], :] = P_active
    return P


def ot_argsort(x, cfg: SoftConfig = SoftConfig(),
               params: SolverParams | None = None) -> SoftPerm:
    """Doubly stochastic soft ascending-sort permutation (n x n).

    Row i is the distribution over input elements landing at sorted position
    i; as tau -> 0 with distinct inputs it recovers the hard permutation.
    """
    xt, _ = _maybe_squash(x, cfg)
    spec = _sort_spec(value_of(x).size)
    P = _plan(xt, spec, cfg, params)
    return SoftPerm(P, row_stochastic=True, col_stochastic=True)


def ot_sort(x, cfg: SoftConfig = SoftConfig(),
            params: SolverParams | None = None):
    """Soft ascending sort values: the plan applied to the squashed input,
    then un-squashed back to the input scale."""
    xt, state = _maybe_squash(x, cfg)
    spec = _sort_spec(value_of(x).size)
    P = _plan(xt, spec, cfg, params)
    return unsquash_destandardize(P @ xt, state)


def ot_rank(x, cfg: SoftConfig = SoftConfig(),
            params: SolverParams | None = None):
    """Soft ranks; rank 1 goes to the largest element as tau -> 0.

    Ranks are label units already, so no un-squashing is applied.
    """
    xt, _ = _maybe_squash(x, cfg)
    n = value_of(x).size
    spec = _sort_spec(n)
    P = _plan(xt, spec, cfg, params)
    labels = np.arange(n, 0, -1, dtype=float)
    return P.T @ labels if is_dual(P) else P.T @ labels


def ot_topk(x, k: int, cfg: SoftConfig = SoftConfig(),
            params: SolverParams | None = None):
    """Soft top-k: values (descending) and the k x n soft index matrix.

    The bottom n-k elements share a single dummy anchor, so the plan is
    (k+1) x n; only the first k rows are returned.
    """
    xt, state = _maybe_squash(x, cfg)
    n = value_of(x).size
    spec = _topk_spec(n, k)
    P = _plan(xt, spec, cfg, params)
    topk_rows = P[:k]
    values = unsquash_destandardize(topk_rows @ xt, state)
    return values, SoftPerm(topk_rows, row_stochastic=True)


def _row_to_index(row) -> SoftIndex:
    # Plan rows sum to 1 within the solver tolerance; renormalize the
    # residual away so the index meets its tighter simplex invariant.
    total = row.sum() if is_dual(row) else float(np.sum(row))
    return SoftIndex(row / total)


def ot_max(x, cfg: SoftConfig = SoftConfig(),
           params: SolverParams | None = None):
    """Soft maximum via top-1: (value, soft argmax index)."""
    values, P = ot_topk(x, 1, cfg, params)
    return values[0], _row_to_index(P.mat[0])


def ot_min(x, cfg: SoftConfig = SoftConfig(),
           params: SolverParams | None = None):
    """Soft minimum by flipping signs: min(x) = -max(-x)."""
    value, idx = ot_max(-x if is_dual(x) else -np.asarray(x, float), cfg, params)
    return -value, idx


def ot_quantile(x, q: float, cfg: SoftConfig = SoftConfig(),
                combine: str = "midpoint",
                params: SolverParams | None = None):
    """Soft q-quantile from a four-anchor transport.

    Anchor 2 carries the lower quantile, anchor 3 the upper; ``combine``
    selects lower, upper, their midpoint, or the fractional interpolation
    between them.
    """
    if combine not in ("lower", "upper", "midpoint", "interpolate"):
        raise ConfigError(f"unknown combine {combine!r}")
    xt, state = _maybe_squash(x, cfg)
    n = value_of(x).size
    spec = _quantile_spec(n, q)
    P = _plan(xt, spec, cfg, params)
    lower = unsquash_destandardize(P[1] @ xt, state)
    upper = unsquash_destandardize(P[2] @ xt, state)
    if combine == "lower":
        return lower
    if combine == "upper":
        return upper
    if combine == "midpoint":
        return 0.5 * (lower + upper)
    frac = q * (n - 1) - np.floor(q * (n - 1))
    return (1.0 - frac) * lower + frac * upper


def ot_median(x, cfg: SoftConfig = SoftConfig(), combine: str = "midpoint",
              params: SolverParams | None = None):
    """Soft median: the q = 0.5 quantile."""
    return ot_quantile(x, 0.5, cfg, combine, params)


def ot_argmax(x, cfg: SoftConfig = SoftConfig(),
              params: SolverParams | None = None) -> SoftIndex:
    """Soft argmax index: the top-1 row of the transport plan."""
    _, idx = ot_max(x, cfg, params)
    return idx


def ot_argmin(x, cfg: SoftConfig = SoftConfig(),
              params: SolverParams | None = None) -> SoftIndex:
    _, idx = ot_min(x, cfg, params)
    return idx


def ot_argquantile(x, q: float, cfg: SoftConfig = SoftConfig(),
                   side: str = "lower",
                   params: SolverParams | None = None) -> SoftIndex:
    """Soft arg-quantile: the lower or upper quantile anchor's plan row."""
    if side not in ("lower", "upper"):
        raise ConfigError(f"side must be 'lower' or 'upper', got {side!r}")
    xt, _ = _maybe_squash(x, cfg)
    spec = _quantile_spec(value_of(x).size, q)
    P = _plan(xt, spec, cfg, params)
    return _row_to_index(P[1] if side == "lower" else P[2])


def ot_argmedian(x, cfg: SoftConfig = SoftConfig(), side: str = "lower",
                 params: SolverParams | None = None) -> SoftIndex:
    return ot_argquantile(x, 0.5, cfg, side, params)
