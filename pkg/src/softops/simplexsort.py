"""SoftSort and NeuralSort operator families built on row-wise simplex
projections.

SoftSort anchors each row at a hard order statistic of the input and projects
the negated absolute differences; it is cheap (one projection per output row)
but inherits kinks from the hard sort and absolute value.  NeuralSort projects
a linear combination of the input and its soft absolute-difference sums,
which keeps every row smooth when the soft abs is used; it is the default for
sort/rank/quantile/median while SoftSort is the default for (arg)max/(arg)min.
"""

from __future__ import annotations

import numpy as np

from .core import (ConfigError, Dual, SoftConfig, SoftIndex, SoftPerm,
                   absolute, is_dual, stack, value_of)
from .elementwise import abs as soft_abs
from .otrank import _maybe_squash, unsquash_destandardize
from .simplex import project

__all__ = [
    "softsort_argsort", "softsort_argrank", "softsort_sort", "softsort_rank",
    "softsort_topk", "softsort_argmax", "softsort_argmin", "softsort_max",
    "softsort_min", "softsort_quantile",
    "neuralsort_argsort", "neuralsort_rank", "neuralsort_sort",
    "neuralsort_argmax", "neuralsort_argmin", "neuralsort_argmedian",
    "neuralsort_argquantile", "neuralsort_quantile", "neuralsort_median",
]


def _rows_project(rows, cfg: SoftConfig):
    """Apply the simplex projection to each row; rows may be Dual."""
    projected = [project(rows[i], cfg).probs.probs
                 for i in range(value_of(rows).shape[0])]
    return stack(projected, axis=0)


def _quantile_indices(n: int, q: float):
    if not 0.0 <= q <= 1.0:
        raise ConfigError(f"quantile level must be in [0, 1], got {q}")
    lo = int(np.floor(q * (n - 1)))
    lo = min(max(lo, 0), n - 2)
    return lo, lo + 1


def _combine(lower, upper, q: float, n: int, combine: str):
    if combine == "lower":
        return lower
    if combine == "upper":
        return upper
    if combine == "midpoint":
        return 0.5 * (lower + upper)
    if combine == "interpolate":
        frac = q * (n - 1) - np.floor(q * (n - 1))
        return (1.0 - frac) * lower + frac * upper
    raise ConfigError(f"unknown combine {combine!r}")


# ---------------------------------------------------------------------------
# SoftSort family
# ---------------------------------------------------------------------------


def _softsort_matrix(xt, anchors, cfg: SoftConfig):
    """Rows: project(-|anchor_i - x_j|) over j.  Hard absolute differences."""
    diff = anchors.reshape(-1, 1) - xt.reshape(1, -1) if is_dual(xt) \
        else value_of(anchors)[:, None] - value_of(xt)[None, :]
    return _rows_project(-absolute(diff), cfg)


def _sorted_anchor(xt):
    s, _ = _sorted_by_value(xt)
    return s


def _sorted_by_value(xt):
    perm = np.argsort(value_of(xt), kind="stable")
    return (xt[perm] if is_dual(xt) else value_of(xt)[perm]), perm


def softsort_argsort(x, cfg: SoftConfig = SoftConfig()) -> SoftPerm:
    """Row-stochastic soft ascending argsort: row i is the distribution over
    elements at sorted position i."""
    xt, _ = _maybe_squash(x, cfg)
    return SoftPerm(_softsort_matrix(xt, _sorted_anchor(xt), cfg),
                    row_stochastic=True)


def softsort_sort(x, cfg: SoftConfig = SoftConfig()):
    """Soft ascending sort values by operator substitution."""
    xt, state = _maybe_squash(x, cfg)
    M = _softsort_matrix(xt, _sorted_anchor(xt), cfg)
    return unsquash_destandardize(M @ xt, state)


def softsort_argrank(x, cfg: SoftConfig = SoftConfig()) -> SoftPerm:
    """Transpose-cost variant: row i is element i's distribution over sorted
    positions (rank positions)."""
    xt, _ = _maybe_squash(x, cfg)
    anchors = _sorted_anchor(xt)
    diff = xt.reshape(-1, 1) - anchors.reshape(1, -1) if is_dual(xt) \
        else value_of(xt)[:, None] - value_of(anchors)[None, :]
    return SoftPerm(_rows_project(-absolute(diff), cfg), row_stochastic=True)


def softsort_rank(x, cfg: SoftConfig = SoftConfig()):
    """Soft ranks from the argrank matrix; rank 1 for the largest element."""
    n = value_of(x).size
    M = softsort_argrank(x, cfg).mat
    labels = np.arange(n, 0, -1, dtype=float)
    return M @ labels


def softsort_topk(x, k: int, cfg: SoftConfig = SoftConfig()):
    """Soft top-k values (descending) and the k x n soft index matrix."""
    n = value_of(x).size
    if not 1 <= k <= n:
        raise ConfigError(f"top-k needs 1 <= k <= n, got k={k}, n={n}")
    xt, state = _maybe_squash(x, cfg)
    srt = _sorted_anchor(xt)
    anchors = srt[::-1][:k] if not is_dual(srt) else srt[np.arange(
        len(srt) - 1, len(srt) - 1 - k, -1)]
    M = _softsort_matrix(xt, anchors, cfg)
    return unsquash_destandardize(M @ xt, state), SoftPerm(M, row_stochastic=True)


def softsort_argmax(x, cfg: SoftConfig = SoftConfig()) -> SoftIndex:
    """Single-projection soft argmax; reduces to softmax in smooth mode and to
    the sparse Euclidean projection in c0 mode."""
    xt, _ = _maybe_squash(x, cfg)
    return SoftIndex(project(xt, cfg).probs.probs)


def softsort_argmin(x, cfg: SoftConfig = SoftConfig()) -> SoftIndex:
    return softsort_argmax(-x if is_dual(x) else -np.asarray(x, float), cfg)


def softsort_max(x, cfg: SoftConfig = SoftConfig()):
    """Soft maximum: expectation of x under the soft argmax."""
    values, M = softsort_topk(x, 1, cfg)
    return values[0]


def softsort_min(x, cfg: SoftConfig = SoftConfig()):
    return -softsort_max(-x if is_dual(x) else -np.asarray(x, float), cfg)


def softsort_quantile(x, q: float, cfg: SoftConfig = SoftConfig(),
                      combine: str = "midpoint"):
    """Soft quantile: rows anchored at the hard lower/upper order statistics."""
    n = value_of(x).size
    lo, hi = _quantile_indices(n, q)
    xt, state = _maybe_squash(x, cfg)
    srt = _sorted_anchor(xt)
    anchors = srt[np.array([lo, hi])]
    M = _softsort_matrix(xt, anchors, cfg)
    vals = unsquash_destandardize(M @ xt, state)
    return _combine(vals[0], vals[1], q, n, combine)


def softsort_argquantile(x, q: float, cfg: SoftConfig = SoftConfig(),
                         side: str = "lower") -> SoftIndex:
    """Soft arg-quantile row anchored at the hard order statistic."""
    if side not in ("lower", "upper"):
        raise ConfigError(f"side must be 'lower' or 'upper', got {side!r}")
    n = value_of(x).size
    lo, hi = _quantile_indices(n, q)
    idx = lo if side == "lower" else hi
    xt, _ = _maybe_squash(x, cfg)
    srt = _sorted_anchor(xt)
    M = _softsort_matrix(xt, srt[np.array([idx])], cfg)
    return SoftIndex(M[0])


def softsort_argmedian(x, cfg: SoftConfig = SoftConfig(),
                       side: str = "lower") -> SoftIndex:
    return softsort_argquantile(x, 0.5, cfg, side)


# ---------------------------------------------------------------------------
# NeuralSort family
# ---------------------------------------------------------------------------


def _abs_diff_sums(xt, cfg: SoftConfig):
    """Row sums of the soft absolute-difference matrix A_ij = abs_tau(x_i - x_j)."""
    diff = xt.reshape(-1, 1) - xt.reshape(1, -1) if is_dual(xt) \
        else value_of(xt)[:, None] - value_of(xt)[None, :]
    return soft_abs(diff, cfg).sum(axis=1) if is_dual(xt) \
        else soft_abs(diff, cfg).sum(axis=1)


def _neuralsort_row(xt, coeff: float, cfg: SoftConfig):
    return project(coeff * xt - _abs_diff_sums(xt, cfg), cfg).probs.probs


def neuralsort_argsort(x, cfg: SoftConfig = SoftConfig()) -> SoftPerm:
    """Row-stochastic soft ascending argsort.

    Row i (1-based) projects (2i - n - 1) * x - A 1 onto the simplex, with A
    the soft absolute-difference matrix, so every row is smooth in the input.
    """
    xt, _ = _maybe_squash(x, cfg)
    n = value_of(xt).size
    a1 = _abs_diff_sums(xt, cfg)
    rows = [project((2.0 * i - n - 1.0) * xt - a1, cfg).probs.probs
            for i in range(1, n + 1)]
    return SoftPerm(stack(rows, axis=0), row_stochastic=True)


def neuralsort_sort(x, cfg: SoftConfig = SoftConfig()):
    xt, state = _maybe_squash(x, cfg)
    M = neuralsort_argsort_from(xt, cfg)
    return unsquash_destandardize(M @ xt, state)


def neuralsort_argsort_from(xt, cfg: SoftConfig):
    """Argsort matrix from an already-squashed input (internal)."""
    n = value_of(xt).size
    a1 = _abs_diff_sums(xt, cfg)
    rows = [project((2.0 * i - n - 1.0) * xt - a1, cfg).probs.probs
            for i in range(1, n + 1)]
    return stack(rows, axis=0)


def neuralsort_argmax(x, cfg: SoftConfig = SoftConfig()) -> SoftIndex:
    xt, _ = _maybe_squash(x, cfg)
    n = value_of(xt).size
    return SoftIndex(_neuralsort_row(xt, float(n - 1), cfg))


def neuralsort_argmin(x, cfg: SoftConfig = SoftConfig()) -> SoftIndex:
    xt, _ = _maybe_squash(x, cfg)
    n = value_of(xt).size
    return SoftIndex(_neuralsort_row(xt, -float(n - 1), cfg))


def neuralsort_argmedian(x, cfg: SoftConfig = SoftConfig()) -> SoftIndex:
    """Projection of the negated soft absolute-difference sums alone."""
    xt, _ = _maybe_squash(x, cfg)
    return SoftIndex(_neuralsort_row(xt, 0.0, cfg))


def neuralsort_argquantile(x, q: float, cfg: SoftConfig = SoftConfig(),
                           side: str = "upper") -> SoftIndex:
    """Soft arg-quantile row; ceil index convention for the upper side and
    floor for the lower side."""
    xt, _ = _maybe_squash(x, cfg)
    n = value_of(xt).size
    if not 0.0 <= q <= 1.0:
        raise ConfigError(f"quantile level must be in [0, 1], got {q}")
    if side == "upper":
        c = n - 1 - 2.0 * np.ceil(q * (n - 1))
    elif side == "lower":
        c = n - 1 - 2.0 * np.floor(q * (n - 1))
    else:
        raise ConfigError(f"side must be 'upper' or 'lower', got {side!r}")
    return SoftIndex(_neuralsort_row(xt, -float(c), cfg))


def neuralsort_quantile(x, q: float, cfg: SoftConfig = SoftConfig(),
                        combine: str = "midpoint"):
    n = value_of(x).size
    xt, state = _maybe_squash(x, cfg)
    lower = unsquash_destandardize(
        _dot(neuralsort_argquantile_from(xt, q, cfg, "lower"), xt), state)
    upper = unsquash_destandardize(
        _dot(neuralsort_argquantile_from(xt, q, cfg, "upper"), xt), state)
    return _combine(lower, upper, q, n, combine)


def neuralsort_argquantile_from(xt, q: float, cfg: SoftConfig, side: str):
    n = value_of(xt).size
    if side == "upper":
        c = n - 1 - 2.0 * np.ceil(q * (n - 1))
    else:
        c = n - 1 - 2.0 * np.floor(q * (n - 1))
    return _neuralsort_row(xt, -float(c), cfg)


def neuralsort_median(x, cfg: SoftConfig = SoftConfig()):
    """Soft median value: expectation of x under the argmedian distribution."""
    xt, state = _maybe_squash(x, cfg)
    return unsquash_destandardize(_dot(_neuralsort_row(xt, 0.0, cfg), xt), state)


def neuralsort_max(x, cfg: SoftConfig = SoftConfig()):
    """Soft maximum: expectation of x under the soft argmax row."""
    xt, state = _maybe_squash(x, cfg)
    n = value_of(xt).size
    row = _neuralsort_row(xt, float(n - 1), cfg)
    return unsquash_destandardize(_dot(row, xt), state)


def neuralsort_min(x, cfg: SoftConfig = SoftConfig()):
    xt, state = _maybe_squash(x, cfg)
    n = value_of(xt).size
    row = _neuralsort_row(xt, -float(n - 1), cfg)
    return unsquash_destandardize(_dot(row, xt), state)


def neuralsort_topk(x, k: int, cfg: SoftConfig = SoftConfig()):
    """Soft top-k values (descending) from the top rows of the argsort matrix."""
    n = value_of(x).size
    if not 1 <= k <= n:
        raise ConfigError(f"top-k needs 1 <= k <= n, got k={k}, n={n}")
    xt, state = _maybe_squash(x, cfg)
    a1 = _abs_diff_sums(xt, cfg)
    rows = [project((2.0 * i - n - 1.0) * xt - a1, cfg).probs.probs
            for i in range(n, n - k, -1)]
    M = stack(rows, axis=0)
    return unsquash_destandardize(M @ xt, state), SoftPerm(M, row_stochastic=True)


def _dot(p, x):
    if is_dual(p) or is_dual(x):
        from .core import dot

        return dot(p, x)
    return float(np.dot(p, x))


def neuralsort_rank(x, cfg: SoftConfig = SoftConfig()):
    """Soft ranks: column-normalize the argsort matrix, then apply the
    descending label vector [n, ..., 1].

    Raises if a column sums to zero (possible only at extreme sparsity in c0
    mode), since the normalization is then undefined.
    """
    xt, _ = _maybe_squash(x, cfg)
    n = value_of(xt).size
    M = neuralsort_argsort_from(xt, cfg)
    col = M.sum(axis=0)
    colv = value_of(col)
    if np.any(colv <= 0.0):
        bad = int(np.argmin(colv))
        raise ArithmeticError(
            f"column {bad} of the soft argsort matrix sums to zero; "
            "rank normalization is undefined (raise tau or use smooth mode)")
    P = M / (col.reshape(1, -1) if is_dual(col) else colv[None, :])
    labels = np.arange(n, 0, -1, dtype=float)
    return P.T @ labels
