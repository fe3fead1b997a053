"""Fuzzy-logic combinators over soft Booleans, plus soft selection.

A soft Boolean is a value in [0, 1]: the probability that a hard comparison
is True.  The combinators below use the product family: ``all`` is the joint
probability of independent events, everything else derives from ``all`` and
negation.  On crisp {0, 1} inputs they reproduce the Boolean truth tables.
"""

from __future__ import annotations

import numpy as np

from .core import SoftBool, is_dual, value_of

__all__ = ["all", "any", "logical_not", "logical_and", "logical_or",
           "logical_xor", "where"]

_builtin_all = all
_builtin_any = any


def _prob(p):
    """Unwrap SoftBool; pass floats, arrays and Duals through."""
    return p.p if isinstance(p, SoftBool) else p


def all(ps, aggregator: str = "product"):  # noqa: A001 - mirrors the hard op
    """Probability that every event holds.

    ``product`` multiplies; ``geomean`` takes the geometric mean, which scales
    better for gradients.  An empty input is the empty product, 1.  A geomean
    over an input containing an exact 0 returns 0 (limit convention).
    """
    ps = [_prob(p) for p in ps]
    if not ps:
        return 1.0
    out = ps[0]
    for p in ps[1:]:
        out = out * p
    if aggregator == "product":
        return out
    if aggregator == "geomean":
        n = len(ps)
        if np.all(value_of(out) > 0.0):
            return out ** (1.0 / n)
        if is_dual(out):
            from .core import Dual

            v = np.power(out.value, 1.0 / n)
            safe = out.value > 0.0
            t = np.where(safe, v / np.where(safe, out.value, 1.0) / n, 0.0)
            return Dual(v, t * out.tangent)
        return np.power(value_of(out), 1.0 / n)
    raise ValueError(f"unknown aggregator {aggregator!r}")


def logical_not(p):
    return 1.0 - _prob(p)


def any(ps, aggregator: str = "product"):  # noqa: A001 - mirrors the hard op
    """not(all(not p)) - De Morgan by construction."""
    return logical_not(all([logical_not(p) for p in ps], aggregator))


def logical_and(p, q):
    return all([p, q])


def logical_or(p, q):
    return any([p, q])


def logical_xor(p, q):
    return logical_or(logical_and(p, logical_not(q)),
                      logical_and(logical_not(p), q))


def where(p, x, y):
    """Soft selection via the expectation p * x + (1 - p) * y, elementwise."""
    p = _prob(p)
    pv, xv, yv = value_of(p), value_of(x), value_of(y)
    try:
        np.broadcast_shapes(np.shape(pv), np.shape(xv), np.shape(yv))
    except ValueError as exc:
        raise ValueError(
            f"where: shapes {np.shape(pv)}, {np.shape(xv)}, {np.shape(yv)} "
            "do not broadcast"
        ) from exc
    return p * x + (1.0 - p) * y
