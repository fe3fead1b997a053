"""Heaviside-derived scalar surrogates: sign, abs, round, relu, clip, comparisons.

All operations are elementwise, accept plain floats/arrays or Duals, and
recover their hard counterpart as tau -> 0+.
"""

from __future__ import annotations

import enum

import numpy as np

from .core import ConfigError, Dual, SoftConfig, is_dual, value_of
from .sigmoid import RESCALE, _h_value, _relu_integrated, heaviside

__all__ = [
    "ReluStyle",
    "sign",
    "abs",
    "round",
    "relu",
    "clip",
    "compare",
    "greater",
    "gtr_equal",
    "less",
    "less_equal",
    "equal",
    "not_equal",
    "isclose",
]

_EPS = float(np.finfo(np.float64).eps)


class ReluStyle(enum.Enum):
    """Two ways to lift a sigmoid to a relu surrogate.

    INTEGRATION integrates the sigmoid (Softplus-like, derivative equals the
    soft Heaviside); GATING multiplies the input by it (SiLU-like).
    """

    INTEGRATION = "integration"
    GATING = "gating"


def sign(x, cfg: SoftConfig = SoftConfig()):
    """Soft sign: 2 * H_tau(x) - 1.  Odd, in [-1, 1]."""
    return 2.0 * heaviside(x, cfg) - 1.0


def abs(x, cfg: SoftConfig = SoftConfig()):  # noqa: A001 - mirrors the hard op
    """Soft absolute value: sign_tau(x) * x.  Even, and never exceeds |x|."""
    return sign(x, cfg) * x


def round(x, cfg: SoftConfig = SoftConfig()):  # noqa: A001 - mirrors the hard op
    """Soft half-up rounding via differences of shifted soft Heavisides.

    Sums k * [H(x - k + 1/2) - H(x - k - 1/2)] for k within ``round_k`` of
    floor(x).  The neighbour count is widened automatically for large tau so
    the truncation error stays below ~1e-3.
    """
    k_half = int(cfg.round_k)
    if cfg.tau > 0.4:
        k_half = max(k_half, int(np.ceil(RESCALE * cfg.tau)) + 1)
    v = value_of(x)
    scalar = np.ndim(v) == 0
    base = np.floor(np.atleast_1d(v))
    xs = x if not scalar else (x.reshape(1) if is_dual(x) else np.atleast_1d(v))
    out = None
    for off in range(-k_half, k_half + 1):
        k = base + off
        inc = heaviside(xs - k + 0.5, cfg) - heaviside(xs - k - 0.5, cfg)
        term = k * inc
        out = term if out is None else out + term
    if scalar:
        return out[0] if is_dual(out) else out.reshape(())
    return out


def relu(x, cfg: SoftConfig = SoftConfig(), style: ReluStyle = ReluStyle.GATING):
    """Soft relu, either gating-style x * H_tau(x) or integration-style.

    Integration style is the antiderivative of the soft Heaviside: Softplus in
    smooth mode, closed-form polynomial antiderivatives in piecewise modes
    (exactly 0 below the transition band and exactly x above it).
    """
    if style is ReluStyle.GATING:
        return x * heaviside(x, cfg)
    v = value_of(x)
    scalar = np.ndim(v) == 0
    val = _relu_integrated(np.atleast_1d(v), cfg.tau, cfg.mode)
    if is_dual(x):
        # d/dx of the antiderivative is the soft Heaviside itself.
        t = _h_value(np.atleast_1d(v), cfg.tau, cfg.mode) * np.atleast_1d(x.tangent)
        if scalar:
            return Dual(val.reshape(()), t.reshape(()))
        return Dual(val, t)
    return val.reshape(()) if scalar else val


def clip(x, a, b, cfg: SoftConfig = SoftConfig(),
         style: ReluStyle = ReluStyle.INTEGRATION):
    """Soft clip to [a, b]: a + relu(x - a) - relu(x - b)."""
    if a > b:
        raise ConfigError(f"clip requires a <= b, got a={a}, b={b}")
    return a + relu(x - a, cfg, style) - relu(x - b, cfg, style)


def greater(x, y, cfg: SoftConfig = SoftConfig()):
    """Soft x > y: probability H_tau(x - y - eps), eps = machine epsilon."""
    return heaviside(x - y - _EPS, cfg)


def gtr_equal(x, y, cfg: SoftConfig = SoftConfig()):
    return heaviside(x - y + _EPS, cfg)


def less(x, y, cfg: SoftConfig = SoftConfig()):
    return heaviside(y - x - _EPS, cfg)


def less_equal(x, y, cfg: SoftConfig = SoftConfig()):
    return heaviside(y - x + _EPS, cfg)


def equal(x, y, cfg: SoftConfig = SoftConfig()):
    """Soft x == y: 2 * less_equal(abs_tau(x - y), 0).

    Uses the soft absolute value inside, keeping the composition fully smooth
    in smooth mode.  At large tau the output can exceed 1 by a rounding-level
    amount; this follows the defining formula verbatim.
    """
    return 2.0 * less_equal(abs(x - y, cfg), 0.0, cfg)


def not_equal(x, y, cfg: SoftConfig = SoftConfig()):
    return 1.0 - equal(x, y, cfg)


def isclose(x, y, cfg: SoftConfig = SoftConfig()):
    """Soft closeness test with tol = atol + rtol * abs_tau(y)."""
    tol = cfg.atol + cfg.rtol * abs(y, cfg)
    return 2.0 * less_equal(abs(x - y, cfg), tol, cfg)


_COMPARISONS = {
    "greater": greater,
    "gtr_equal": gtr_equal,
    "less": less,
    "less_equal": less_equal,
    "equal": equal,
    "not_equal": not_equal,
    "isclose": isclose,
}


def compare(kind: str, x, y, cfg: SoftConfig = SoftConfig()):
    """Dispatch to one of the soft comparison operators by name."""
    try:
        fn = _COMPARISONS[kind]
    except KeyError:
        raise ConfigError(
            f"unknown comparison {kind!r}; choose from {sorted(_COMPARISONS)}"
        ) from None
    return fn(x, y, cfg)
