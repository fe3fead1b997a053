"""Value-space sorting and ranking via permutahedron projection.

FastSoftSort reduces the regularized projection onto the permutahedron of a
vector z to isotonic optimization over the descending arrangement; pools are
solved in closed form per regularizer (means, log-mean-exp, or the quadratic
/ Cardano threshold roots).  SmoothSort instead adds entropic regularization
to a dual of the projection LP with the hard order-statistic bounds replaced
by log-sum-exp relaxations of the prefix sums, making the whole operator
smooth at the price of an O(n^2) bound computation and an L-BFGS solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (ConfigError, Dual, Mode, SoftConfig, fd_jacobian, is_dual,
                   value_of)
from .otrank import _maybe_squash, unsquash_destandardize
from .simplex import phi_of_slack
from .solvers import DEFAULT_PARAMS, SolverParams, lbfgs, pav_isotonic

__all__ = ["PermutahedronSpec", "SmoothBounds", "permutahedron_project",
           "fastsoftsort_sort", "fastsoftsort_rank", "smooth_bounds",
           "smoothsort_sort", "smoothsort_rank", "smoothsort_jacobian"]


@dataclass(frozen=True)
class PermutahedronSpec:
    """Projection problem: maximize <y, p> - tau R(p) over P(z).

    Sorting conventions: sort(x) projects the position labels [1..n] onto the
    permutahedron of x; rank(x) projects -x onto the permutahedron of the
    labels.
    """

    z: np.ndarray
    y: np.ndarray
    tau: float

    def __post_init__(self):
        if value_of(self.z).shape != value_of(self.y).shape:
            raise ValueError("z and y must have the same length")
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")


def permutahedron_project(y, z, tau: float, mode: Mode):
    """Regularized projection onto the permutahedron of z.

    Modes: C0 is the Euclidean projection of y/tau; C1/C2 use the matching
    p-norm regularizers; SMOOTH is the log-domain entropic variant, which
    optimizes over the permutahedron of exp(z) and returns the log of the
    optimizer (so its output lives in z units, not in P(z) itself).

    The solution is comonotone with y: sort y descending, run the isotonic
    fit against the descending z, undo the permutation.
    """
    yv = value_of(y)
    n = yv.size
    perm = np.argsort(-yv, kind="stable")
    y_d = y[perm] if is_dual(y) else yv[perm]
    zv = value_of(z)
    if mode in (Mode.C1, Mode.C2) and np.any(zv < 0.0):
        raise ValueError(
            "p-norm permutahedron projection needs a nonnegative generator "
            "(the standardize-and-squash preprocessing guarantees this); "
            "got negative entries")
    z_d = z[np.argsort(-zv, kind="stable")] if is_dual(z) \
        else np.sort(zv)[::-1].copy()
    if mode is Mode.C0:
        d = y_d - tau * z_d
        lam = pav_isotonic(d, direction="decreasing", loss="euclidean")
        p_d = (y_d - lam) / tau
    elif mode is Mode.SMOOTH:
        s = y_d / tau
        v = pav_isotonic(s, direction="decreasing", loss="logkl", targets=z_d)
        p_d = s - v
    else:
        loss = "pnorm-c1" if mode is Mode.C1 else "pnorm-c2"
        lam = pav_isotonic(y_d, direction="decreasing", loss=loss, tau=tau,
                           targets=z_d)
        p_d = phi_of_slack(y_d - lam, tau, mode)
    if is_dual(p_d) or is_dual(y) or is_dual(z):
        out = Dual(np.empty(n), np.empty(n))
        out[perm] = p_d if is_dual(p_d) else Dual(np.asarray(p_d))
        return out
    out = np.empty(n)
    out[perm] = p_d
    return out


def fastsoftsort_sort(x, cfg: SoftConfig = SoftConfig()):
    """Soft ascending sort: project the position labels onto the
    permutahedron of the (squashed) input, then un-squash.

    The projection preserves the total sum of the squashed input exactly in
    the Euclidean and p-norm modes.
    """
    xt, state = _maybe_squash(x, cfg)
    n = value_of(x).size
    labels = np.arange(1, n + 1, dtype=float)
    out = permutahedron_project(labels, xt, cfg.tau, cfg.mode)
    return unsquash_destandardize(out, state)


def fastsoftsort_rank(x, cfg: SoftConfig = SoftConfig()):
    """Soft ranks: project the negated (squashed) input onto the
    permutahedron of the labels [1..n]; rank 1 goes to the largest element."""
    xt, _ = _maybe_squash(x, cfg)
    n = value_of(x).size
    labels = np.arange(1, n + 1, dtype=float)
    neg = -xt if is_dual(xt) else -np.asarray(xt, float)
    return permutahedron_project(neg, labels, cfg.tau, cfg.mode)


# ---------------------------------------------------------------------------
# SmoothSort
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmoothBounds:
    """Smoothed prefix-sum bounds: b_k = tau * log e_k(exp(z / tau)).

    Always at least the hard descending prefix sums, with equality in the
    tau -> 0 limit and exact equality at k = n (the total is preserved).
    """

    b_tilde: np.ndarray
    tau: float


def smooth_bounds(z, tau: float) -> SmoothBounds:
    """Log-domain evaluation of the elementary symmetric polynomial bounds.

    Uses the O(n^2) recurrence over log e_k accumulators with logaddexp
    updates; a final elementwise floor at the hard prefix sums removes
    rounding-level violations of the analytic bound b_tilde >= b.
    """
    zv = np.asarray(value_of(z), dtype=float)
    if zv.ndim != 1 or zv.size == 0:
        raise ValueError("smooth_bounds expects a nonempty vector")
    if tau <= 0:
        raise ConfigError(f"tau must be positive, got {tau}")
    n = zv.size
    u = zv / tau
    L = np.full(n + 1, -np.inf)
    L[0] = 0.0
    for j in range(1, n + 1):
        # Descending slice update keeps each e_k free of the new element's
        # self-product; numpy evaluates the right side before assignment.
        hi = min(j, n)
        L[1:hi + 1] = np.logaddexp(L[1:hi + 1], u[j - 1] + L[0:hi])
    b_tilde = tau * L[1:]
    hard = np.cumsum(np.sort(zv)[::-1])
    b_tilde = np.maximum(b_tilde, hard)
    return SmoothBounds(b_tilde=b_tilde, tau=tau)


_EXP_CLAMP = 500.0


def _clamped_exp(u):
    return np.exp(np.minimum(u, _EXP_CLAMP))


def _smoothsort_core(y: np.ndarray, z: np.ndarray, tau: float,
                     params: SolverParams) -> np.ndarray:
    """Solve the entropically smoothed permutahedron LP dual over beta.

    After eliminating the equality multiplier and the bound multipliers
    alpha through the stationarity constraint, the dual is an unconstrained
    convex problem in the ordering multipliers beta, solved by L-BFGS from
    beta = 1.  The primal is recovered from the bound slacks by differencing
    the prefix sums.
    """
    n = y.size
    if n < 2:
        return z.copy()
    perm = np.argsort(-y, kind="stable")
    y_d = y[perm]
    bnds = smooth_bounds(z, tau).b_tilde
    b = bnds[:-1]
    c = float(bnds[-1])
    Dy = y_d[:-1] - y_d[1:]
    main = 2.0 * np.ones(n - 1)
    off = -np.ones(n - 2)

    def ddt(v):
        out = main * v
        out[:-1] += off * v[1:]
        out[1:] += off * v[:-1]
        return out

    def objective(beta):
        alpha = Dy + ddt(beta)
        s = _clamped_exp(-alpha / tau)
        d = _clamped_exp(-beta / tau)
        nu = y_d[-1] - beta[-1]
        val = alpha @ b + nu * c + tau * (s.sum() + d.sum())
        grad = ddt(b - s) - d
        grad[-1] -= c
        return val, grad

    beta = lbfgs(objective, np.ones(n - 1), params)
    alpha = Dy + ddt(beta)
    s = _clamped_exp(-alpha / tau)
    r = b - s
    p_d = np.empty(n)
    p_d[0] = r[0]
    p_d[1:-1] = r[1:] - r[:-1]
    p_d[-1] = c - r[-1]
    out = np.empty(n)
    out[perm] = p_d
    return out


def _require_plain(x, who: str):
    if is_dual(x):
        raise TypeError(
            f"{who} does not support Dual inputs; its gradients are computed "
            "by finite differences (see smoothsort_jacobian)")
    return np.asarray(x, dtype=float)


_SMOOTHSORT_PARAMS = SolverParams(max_iter=2000, tol=1e-6)


def smoothsort_sort(x, cfg: SoftConfig = SoftConfig(),
                    params: SolverParams = _SMOOTHSORT_PARAMS):
    """Entropically smoothed ascending sort values.

    Smooth in the input with dense Jacobians, unlike the isotonic variants.
    Skips standardize-and-squash: outputs need not be convex combinations of
    the inputs, so the squash inverse could leave its domain.  Valid only in
    smooth mode.
    """
    if cfg.mode is not Mode.SMOOTH:
        raise ConfigError("smoothsort supports only mode='smooth' "
                          "(see the method/mode support matrix in the README)")
    xv = _require_plain(x, "smoothsort_sort")
    if xv.size < 2:
        raise ValueError("smoothsort needs n >= 2")
    n = xv.size
    labels = np.arange(1, n + 1, dtype=float)
    return _smoothsort_core(labels, xv, cfg.tau, params)


def smoothsort_rank(x, cfg: SoftConfig = SoftConfig(),
                    params: SolverParams = _SMOOTHSORT_PARAMS):
    """Entropically smoothed ranks; rank 1 goes to the largest element."""
    if cfg.mode is not Mode.SMOOTH:
        raise ConfigError("smoothsort supports only mode='smooth' "
                          "(see the method/mode support matrix in the README)")
    xv = _require_plain(x, "smoothsort_rank")
    if xv.size < 2:
        raise ValueError("smoothsort needs n >= 2")
    n = xv.size
    labels = np.arange(1, n + 1, dtype=float)
    return _smoothsort_core(-xv, labels, cfg.tau, params)


def smoothsort_jacobian(x, cfg: SoftConfig = SoftConfig(), which: str = "sort",
                        params: SolverParams = _SMOOTHSORT_PARAMS,
                        h: float | None = None) -> np.ndarray:
    """Central finite-difference Jacobian of smoothsort sort or rank."""
    fn = smoothsort_sort if which == "sort" else smoothsort_rank
    return fd_jacobian(lambda v: fn(v, cfg, params), np.asarray(x, float), h=h)
