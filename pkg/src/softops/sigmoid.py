"""Soft Heaviside step functions, the root of every elementwise surrogate.

Four sigmoidal families share the same interface: the exponential sigmoid
(``smooth`` mode) and three piecewise-polynomial sigmoids of increasing
regularity (``c0`` linear, ``c1`` Hermite cubic, ``c2`` Hermite quintic).
The piecewise families transition on [-5*tau, 5*tau]: their natural unit
transition is rescaled by 1/5 so that all modes share an effective width of
about 10*tau, matching where the exponential sigmoid saturates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, Dual, Mode, SoftConfig, value_of

__all__ = ["SigmoidalFamily", "heaviside", "heaviside_grad", "RESCALE"]

# Piecewise transition half-width in units of tau.
RESCALE = 5.0


def _g_c0(s):
    return 0.5 + 0.5 * s


def _g_c1(s):
    return 0.5 + 0.75 * s - 0.25 * s ** 3


def _g_c2(s):
    return 0.5 + (15.0 / 16.0) * s - (5.0 / 8.0) * s ** 3 + (3.0 / 16.0) * s ** 5


def _dg_c0(s):
    return np.full_like(s, 0.5)


def _dg_c1(s):
    return 0.75 - 0.75 * s ** 2


def _dg_c2(s):
    return (15.0 / 16.0) - (15.0 / 8.0) * s ** 2 + (15.0 / 16.0) * s ** 4


# Antiderivatives of g from the left edge: G(s) = integral of g over [-1, s].
# All three satisfy G(1) = 1, which makes the integration-style relu hit
# exactly x at the right edge of the transition band.


def _G_c0(s):
    return 0.25 * (s + 1.0) ** 2


def _G_c1(s):
    return 0.5 * s + 0.375 * s ** 2 - 0.0625 * s ** 4 + 0.1875


def _G_c2(s):
    return 0.5 * s + (15.0 / 32.0) * s ** 2 - (5.0 / 32.0) * s ** 4 \
        + (1.0 / 32.0) * s ** 6 + (5.0 / 32.0)


_G_POLY = {Mode.C0: (_g_c0, _dg_c0, _G_c0),
           Mode.C1: (_g_c1, _dg_c1, _G_c1),
           Mode.C2: (_g_c2, _dg_c2, _G_c2)}


def _sigmoid_stable(u):
    """Logistic sigmoid evaluated via exp of a nonpositive argument only."""
    u = np.asarray(u, dtype=np.float64)
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


def _check_cfg(cfg: SoftConfig):
    if cfg.tau <= 0:
        raise ConfigError(f"tau must be positive, got {cfg.tau}")


def _h_value(v: np.ndarray, tau: float, mode: Mode) -> np.ndarray:
    if mode is Mode.SMOOTH:
        return _sigmoid_stable(v / tau)
    g = _G_POLY[mode][0]
    s = v / (RESCALE * tau)
    inner = g(np.clip(s, -1.0, 1.0))
    return np.where(s < -1.0, 0.0, np.where(s > 1.0, 1.0, inner))


def _h_grad(v: np.ndarray, tau: float, mode: Mode) -> np.ndarray:
    if mode is Mode.SMOOTH:
        sig = _sigmoid_stable(v / tau)
        return sig * (1.0 - sig) / tau
    dg = _G_POLY[mode][1]
    s = v / (RESCALE * tau)
    inner = dg(np.clip(s, -1.0, 1.0)) / (RESCALE * tau)
    return np.where(np.abs(s) > 1.0, 0.0, inner)


def heaviside(x, cfg: SoftConfig = SoftConfig()):
    """Soft Heaviside step in [0, 1]; monotone, with H(-x) = 1 - H(x).

    Smooth mode is the logistic sigmoid of x/tau; piecewise modes evaluate the
    mode polynomial on x/(5*tau) and saturate exactly outside [-5*tau, 5*tau].
    """
    _check_cfg(cfg)
    v = value_of(x)
    scalar = np.ndim(v) == 0
    v = np.atleast_1d(v)
    out = _h_value(v, cfg.tau, cfg.mode)
    if isinstance(x, Dual):
        t = _h_grad(v, cfg.tau, cfg.mode) * np.atleast_1d(x.tangent)
        if scalar:
            return Dual(out.reshape(()), t.reshape(()))
        return Dual(out, t)
    return out.reshape(()) if scalar else out


def heaviside_grad(x, cfg: SoftConfig = SoftConfig()):
    """Analytic derivative of the soft Heaviside; nonnegative, integrates to 1."""
    _check_cfg(cfg)
    v = np.asarray(value_of(x), dtype=np.float64)
    scalar = v.ndim == 0
    out = _h_grad(np.atleast_1d(v), cfg.tau, cfg.mode)
    return out.reshape(()) if scalar else out


def _relu_integrated(v: np.ndarray, tau: float, mode: Mode) -> np.ndarray:
    """Antiderivative of the soft Heaviside, zero at -infinity."""
    if mode is Mode.SMOOTH:
        # tau * softplus(v / tau), computed without overflow.
        u = v / tau
        return tau * (np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u))))
    G = _G_POLY[mode][2]
    w = RESCALE * tau
    s = v / w
    inner = w * G(np.clip(s, -1.0, 1.0))
    return np.where(s < -1.0, 0.0, np.where(s > 1.0, v, inner))


@dataclass(frozen=True)
class SigmoidalFamily:
    """A (mode, tau) pair bundled as a callable sigmoid."""

    mode: Mode
    tau: float

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")

    def __call__(self, x):
        return heaviside(x, SoftConfig(tau=self.tau, mode=self.mode))

    def grad(self, x):
        return heaviside_grad(x, SoftConfig(tau=self.tau, mode=self.mode))

    @property
    def support(self) -> float:
        """Half-width of the transition region (infinite for smooth mode)."""
        return np.inf if self.mode is Mode.SMOOTH else RESCALE * self.tau
