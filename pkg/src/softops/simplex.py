"""Regularized linear programs over the unit simplex, for all four modes.

The projection argmax_{p in simplex} <x, p> - tau * R(p) has the threshold
structure p_i = phi(x_i - nu) with phi(t) = exp(t/tau) for the entropic
regularizer and phi(t) = (t/tau)_+^(1/(p-1)) for the p-norm family
(p = 2, 3/2, 4/3 for modes c0, c1, c2).  The scalar nu solves
sum_i phi(x_i - nu) = 1, which this module solves in closed form: sorted
thresholds for c0, a quadratic for c1, Cardano's method for c2.

The same threshold equation with a general right-hand side ("mass") is the
row/column update of the regularized optimal-transport duals and the pooled
subproblem of the permutahedron projection, so the solver here is shared by
those modules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (ConfigError, Dual, Mode, SoftConfig, SoftIndex, cbrt,
                   exp, is_dual, log, logsumexp, sqrt, value_of)

__all__ = ["ProjectionResult", "project", "project_pair_closed_form",
           "solve_threshold", "threshold_rows", "phi_of_slack"]


# Conjugate-exponent bookkeeping: phi(t) = (t/tau)_+^power with
# power = 1/(p-1); p=2 -> 1, p=3/2 -> 2, p=4/3 -> 3.
_PHI_POWER = {Mode.C0: 1, Mode.C1: 2, Mode.C2: 3}


def phi_of_slack(slack, tau: float, mode: Mode):
    """phi applied to a slack array: exp(s/tau) or clipped power of s/tau."""
    if mode is Mode.SMOOTH:
        return exp(slack / tau)
    power = _PHI_POWER[mode]
    pos = value_of(slack) > 0.0
    u = slack * pos / tau  # zero out inactive entries before powering
    if power == 1:
        return u
    if power == 2:
        return u * u
    return u * u * u


def _cardano_root(a, b, c):
    """Real root of the monic cubic nu^3 + a nu^2 + b nu + c, assuming the
    cubic is monotone (discriminant of the depressed form nonnegative)."""
    p = b - a * a / 3.0
    q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c
    disc = q * q / 4.0 + p * p * p / 27.0
    # Monotone cubics keep disc >= 0; tiny negatives are float noise at ties.
    if is_dual(disc):
        disc = Dual(np.maximum(disc.value, 0.0),
                    np.where(disc.value > 0.0, disc.tangent, 0.0))
    else:
        disc = np.maximum(disc, 0.0)
    root = sqrt(disc)
    w = cbrt(-q / 2.0 + root) + cbrt(-q / 2.0 - root)
    return w - a / 3.0


def _threshold_scan(Vv: np.ndarray, mass: np.ndarray, tau: float, mode: Mode):
    """Active-set scan on plain values.

    Returns (nu, k_active, order) per row for the equation
    sum_j phi(V[i, j] - nu_i) = mass_i.
    """
    r, m = Vv.shape
    order = np.argsort(-Vv, axis=1, kind="stable")
    Vs = np.take_along_axis(Vv, order, axis=1)
    ks = np.arange(1, m + 1, dtype=float)
    S1 = np.cumsum(Vs, axis=1)
    if mode is Mode.C0:
        nu_k = (S1 - mass[:, None] * tau) / ks
        valid = np.ones_like(nu_k, dtype=bool)
    elif mode is Mode.C1:
        S2 = np.cumsum(Vs * Vs, axis=1)
        disc = S1 * S1 - ks * (S2 - mass[:, None] * tau * tau)
        valid = disc >= 0.0
        nu_k = (S1 - np.sqrt(np.maximum(disc, 0.0))) / ks
    elif mode is Mode.C2:
        S2 = np.cumsum(Vs * Vs, axis=1)
        S3 = np.cumsum(Vs * Vs * Vs, axis=1)
        a = -3.0 * S1 / ks
        b = 3.0 * S2 / ks
        c = -(S3 - mass[:, None] * tau ** 3) / ks
        nu_k = _cardano_root(a, b, c)
        valid = np.ones_like(nu_k, dtype=bool)
    else:
        raise ConfigError("threshold scan is for piecewise modes only")
    # Accept the first k whose nu keeps entries 1..k active and k+1.. inactive.
    tol = 1e-12 * (1.0 + np.abs(Vs).max(initial=0.0))
    active_ok = Vs - nu_k > -tol
    below = np.concatenate([Vs[:, 1:] - nu_k[:, :-1] <= tol,
                            np.ones((r, 1), dtype=bool)], axis=1)
    accept = valid & active_ok & below
    has = accept.any(axis=1)
    k_active = np.where(has, accept.argmax(axis=1) + 1, m)
    nu = nu_k[np.arange(r), k_active - 1]
    # Bisection fallback for rows that defeated the closed forms (rare ties).
    for i in np.where(~has)[0]:
        nu[i] = _bisect_threshold(Vv[i], float(mass[i]), tau, mode)
        k_active[i] = int(np.sum(Vv[i] > nu[i]))
    return nu, k_active, order


def _bisect_threshold(v: np.ndarray, mass: float, tau: float, mode: Mode) -> float:
    def h(nu):
        return float(np.sum(value_of(phi_of_slack(v - nu, tau, mode)))) - mass

    hi = float(np.max(v))
    lo = hi - tau * max(1.0, mass)
    while h(lo) < 0.0:
        lo -= tau * max(1.0, mass) + (hi - lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _newton_rows(V, active, mass, tau: float, mode: Mode, nu, steps: int):
    """Newton refinement of the threshold roots over frozen active sets.

    Polishes the cancellation error of the closed forms down to machine
    precision; the iteration map is smooth, so it is Dual-safe.
    """
    power = _PHI_POWER[mode]
    for _ in range(steps):
        slack = (V - nu.reshape(-1, 1)) * active / tau if is_dual(V) or is_dual(nu) \
            else (V - nu[:, None]) * active / tau
        slack_p = slack * slack if power == 2 else slack * slack * slack
        h = slack_p.sum(axis=1) - mass
        dh = (slack.sum(axis=1) * 2.0 if power == 2
              else (slack * slack).sum(axis=1) * 3.0) / tau
        if is_dual(dh):
            dh = Dual(np.maximum(dh.value, 1e-300), dh.tangent)
        else:
            dh = np.maximum(dh, 1e-300)
        nu = nu + h / dh
    return nu


def threshold_rows(V, mass, tau: float, mode: Mode):
    """Solve sum_j phi(V[i, :] - nu_i) = mass_i for every row.

    ``V`` is (r, m), plain or Dual; ``mass`` is scalar or (r,), plain or Dual.
    Smooth mode has the closed form nu = tau * (logsumexp(V/tau) - log mass);
    piecewise modes run the active-set scan on values and, for Dual inputs,
    re-evaluate the accepted closed form in Dual arithmetic with the active
    set frozen.  Rows are shifted by their maximum before the scan (the
    equation is shift-equivariant), which keeps the closed forms conditioned,
    and the c1/c2 roots get a Newton polish.
    """
    Vv = value_of(V)
    r, m = Vv.shape
    mass_v = np.broadcast_to(np.atleast_1d(value_of(mass)), (r,)).astype(float)
    if mode is Mode.SMOOTH:
        lse = logsumexp(V / tau, axis=1)
        return tau * lse - tau * log(mass) if (is_dual(V) or is_dual(mass)) \
            else tau * lse - tau * np.log(mass_v)
    # Shift-equivariance: nu(V) = nu(V - c) + c for any per-row constant c
    # (the threshold's input sensitivities sum to one, so a value-only shift
    # leaves tangents untouched).
    shift = Vv.max(axis=1)
    V = V - shift.reshape(-1, 1) if is_dual(V) else Vv - shift[:, None]
    Vv = value_of(V)
    nu_v, k_active, order = _threshold_scan(Vv, mass_v, tau, mode)
    active = np.zeros((r, m), dtype=float)
    rows = np.repeat(np.arange(r), k_active)
    cols = np.concatenate([order[i, :k_active[i]] for i in range(r)]) \
        if r else np.array([], dtype=int)
    active[rows, cols] = 1.0
    if not (is_dual(V) or is_dual(mass)):
        if mode is not Mode.C0:
            nu_v = _newton_rows(V, active, mass_v, tau, mode, nu_v, steps=2)
        return nu_v + shift
    # Frozen active set: recompute nu from Dual sufficient statistics.
    ks = k_active.astype(float)
    S1 = (V * active).sum(axis=1)
    if mode is Mode.C0:
        return (S1 - mass * tau) / ks + shift
    if mode is Mode.C1:
        S2 = (V * V * active).sum(axis=1)
        disc = S1 * S1 - ks * (S2 - mass * tau * tau)
        if is_dual(disc):
            disc = Dual(np.maximum(disc.value, 0.0),
                        np.where(disc.value > 0.0, disc.tangent, 0.0))
        else:
            disc = np.maximum(disc, 0.0)
        nu = (S1 - sqrt(disc)) / ks
    else:
        S2 = (V * V * active).sum(axis=1)
        S3 = (V * V * V * active).sum(axis=1)
        a = -3.0 * S1 / ks
        b = 3.0 * S2 / ks
        c = -(S3 - mass * tau ** 3) / ks
        nu = _cardano_root(a, b, c)
    nu = _newton_rows(V, active, mass, tau, mode, nu, steps=2)
    return nu + shift


def solve_threshold(v, mass, tau: float, mode: Mode):
    """Single-row convenience wrapper around :func:`threshold_rows`."""
    V = v.reshape(1, -1) if is_dual(v) else np.asarray(v, float).reshape(1, -1)
    nu = threshold_rows(V, mass, tau, mode)
    return nu[0] if is_dual(nu) else float(nu[0])


@dataclass(frozen=True)
class ProjectionResult:
    """Simplex projection output: probabilities, threshold, and support."""

    probs: SoftIndex
    nu: float
    support: np.ndarray


def project(x, cfg: SoftConfig = SoftConfig()) -> ProjectionResult:
    """Regularized linear program over the unit simplex.

    Smooth mode is the softmax of x/tau; piecewise modes produce the p-norm
    Bregman projection p_i = phi(x_i - nu) with nu solved in closed form.
    Output entries are nonnegative and sum to 1; entries off the support are
    exactly zero.  Order is preserved: larger inputs get larger probabilities.
    """
    xv = value_of(x)
    if xv.ndim != 1 or xv.size == 0:
        raise ValueError(f"project expects a nonempty vector, got shape {xv.shape}")
    if not np.all(np.isfinite(xv)):
        raise ValueError("project requires finite inputs")
    n = xv.size
    if cfg.mode is Mode.SMOOTH:
        nu = solve_threshold(x, 1.0, cfg.tau, cfg.mode)
        probs = exp((x - nu) / cfg.tau)
        return ProjectionResult(SoftIndex(probs), float(value_of(nu)),
                                np.arange(n))
    nu = solve_threshold(x, 1.0, cfg.tau, cfg.mode)
    probs = phi_of_slack(x - nu, cfg.tau, cfg.mode)
    support = np.where(value_of(probs) > 0.0)[0]
    return ProjectionResult(SoftIndex(probs), float(value_of(nu)), support)


def _pair_foc_bisect(s: float, power: int) -> float:
    """Bisection on the two-point first-order condition.

    Solves root(p) - root(1 - p) = s on [0, 1], where root is the square root
    for mode c1 (power=2) and the cube root for mode c2 (power=3).
    """
    root = {2: np.sqrt, 3: np.cbrt}[power]

    def foc(p):
        return root(p) - root(1.0 - p) - s

    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if foc(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def project_pair_closed_form(x: float, cfg: SoftConfig = SoftConfig()) -> float:
    """Closed-form p1 of the two-point projection of [0, x]: a sigmoid in x/tau.

    Used as an independent oracle for :func:`project` in the n=2 case.  These
    are the unrescaled sigmoidals: the transition region is [-tau, tau].
    """
    s = float(x) / cfg.tau
    if cfg.mode is Mode.SMOOTH:
        return float(1.0 / (1.0 + np.exp(-s))) if s >= 0 \
            else float(np.exp(s) / (1.0 + np.exp(s)))
    if s <= -1.0:
        return 0.0
    if s >= 1.0:
        return 1.0
    if cfg.mode is Mode.C0:
        return 0.5 + 0.5 * s
    if cfg.mode is Mode.C1:
        return float((s + np.sqrt(2.0 - s * s)) ** 2 / 4.0)
    # c2: root of the depressed cubic t^3 + (3/4) s^2 t - 1/2 = 0, then
    # p1 = (t + s/2)^3.  The hyperbolic form loses precision as s -> 0, so
    # fall back to bisection on the first-order condition there.
    if abs(s) < 1e-4:
        return _pair_foc_bisect(s, 3)
    t = -abs(s) * np.sinh(np.arcsinh(-2.0 / (s * s * abs(s))) / 3.0)
    return float((t + s / 2.0) ** 3)
