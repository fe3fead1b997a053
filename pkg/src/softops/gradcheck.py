"""Gradient-checking harness: forward-mode Duals against central finite
differences for every differentiable operator, mode and method.

Cheap closed-form operators get a full Jacobian comparison; solver-backed
operators get directional-derivative probes (one forward-mode pass against a
two-sided difference along a random direction), which checks the same
contract at a fraction of the cost.  Points that land on a piecewise-mode
kink (detected by one-sided difference asymmetry) are resampled, matching
the boundary-exclusion policy of the piecewise smoothness classes.
"""

from __future__ import annotations

import fnmatch
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import elementwise as el
from . import logic
from . import st_select as stm
from .core import (Dual, Method, Mode, SoftConfig, seed_direction,
                   supported_modes, tangent_of, value_of)
from .ops import REGISTRY, resolve
from .solvers import SolverParams

__all__ = ["CheckCase", "build_cases", "run_gradcheck", "GradcheckResult"]

# P-level marginal tolerance; with the 3e-3 finite-difference step the value
# noise (tol / h) and quadratic truncation both stay an order of magnitude
# below the 1e-3 solver-op check tolerance.  The iteration cap bounds the
# cost of stalled degenerate duals, which are resampled anyway.
_OT_SOLVER = SolverParams(max_iter=2500, tol=1e-7)

# Tolerances from the acceptance contract: 1e-4 in general, 1e-3 for
# operators whose forward pass is an iterative transport solve.
TOL_DEFAULT = 1e-4
TOL_SOLVER = 1e-3


@dataclass(frozen=True)
class CheckCase:
    name: str
    fn: Callable  # x -> flat output (generic over Dual)
    sampler: Callable  # rng -> x
    tol: float = TOL_DEFAULT
    directional: bool = False
    fd_step: float | None = None


@dataclass
class GradcheckResult:
    name: str
    max_rel_err: float
    points: int
    tol: float
    passed: bool
    skipped: str | None = None


def _flat(out):
    if isinstance(out, tuple):
        out = out[0]
    from .core import SoftIndex, SoftPerm

    if isinstance(out, SoftPerm):
        out = out.mat
    elif isinstance(out, SoftIndex):
        out = out.probs
    if isinstance(out, Dual):
        return out.ravel() if out.ndim else out.reshape(1)
    arr = np.atleast_1d(np.asarray(value_of(out), dtype=float))
    return arr.ravel()


def _rel_err(approx: np.ndarray, ref: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(ref))) if ref.size else 1.0)
    return float(np.max(np.abs(approx - ref))) / scale


def _asymmetry(fp, fm, f0, hh) -> float:
    """Relative one-sided difference mismatch: a kink inside the stencil."""
    fwd = (fp - f0) / hh
    bwd = (f0 - fm) / hh
    scale = max(1.0, float(np.max(np.abs(fwd))), float(np.max(np.abs(bwd))))
    return float(np.max(np.abs(fwd - bwd))) / scale


def _full_jacobian_err(fn, x, h):
    """(max relative error, max stencil asymmetry) over all coordinates."""
    n = x.size
    f0 = _flat(fn(x))
    cols_d = []
    cols_fd = []
    asym = 0.0
    for j in range(n):
        cols_d.append(tangent_of(_flat(fn(seed_direction(x, j)))))
        hj = h if h is not None else 1e-5 * (1.0 + abs(x[j]))
        xp = x.copy(); xp[j] += hj
        xm = x.copy(); xm[j] -= hj
        fp = _flat(fn(xp))
        fm = _flat(fn(xm))
        cols_fd.append((fp - fm) / (2.0 * hj))
        asym = max(asym, _asymmetry(fp, fm, f0, hj))
    return _rel_err(np.stack(cols_d, 1), np.stack(cols_fd, 1)), asym


def _directional_err(fn, x, rng, h):
    """(JVP-vs-FD relative error, stencil asymmetry) along a random direction."""
    v = rng.normal(size=x.shape)
    v /= np.linalg.norm(v)
    jvp = tangent_of(_flat(fn(Dual(x, v))))
    hh = h if h is not None else 1e-5
    f0 = _flat(fn(x))
    fp = _flat(fn(x + hh * v))
    fm = _flat(fn(x - hh * v))
    fd = (fp - fm) / (2.0 * hh)
    return _rel_err(jvp, fd), _asymmetry(fp, fm, f0, hh)


def check_case(case: CheckCase, rng, points: int = 50,
               max_resample: int = 40) -> GradcheckResult:
    from .core import ConvergenceError

    worst = 0.0
    done = 0
    budget = points + max_resample
    while done < points and budget > 0:
        budget -= 1
        x = np.atleast_1d(np.asarray(case.sampler(rng), dtype=float))
        try:
            if case.directional:
                err, asym = _directional_err(case.fn, x, rng, case.fd_step)
            else:
                err, asym = _full_jacobian_err(case.fn, x, case.fd_step)
        except ConvergenceError:
            # degenerate solver face (stalled dual): a boundary configuration
            continue
        if err > case.tol and asym > 3.0 * case.tol:
            continue  # kink inside the stencil: boundary-excluded point
        worst = max(worst, err)
        done += 1
    return GradcheckResult(case.name, worst, done, case.tol,
                           passed=bool(worst <= case.tol and done == points))


# ---------------------------------------------------------------------------
# Case construction
# ---------------------------------------------------------------------------


def _modes():
    return [Mode.SMOOTH, Mode.C0, Mode.C1, Mode.C2]


def _uniform(lo, hi, n=1):
    def sample(rng):
        u = rng.uniform(lo, hi, size=n)
        return u if n > 1 else u
    return sample


def _spread_normal(n, scale=1.0, min_gap=0.15):
    """Distinct-valued sampler: jittered random permutation of a grid."""

    def sample(rng):
        base = np.arange(n, dtype=float) * max(min_gap * 4, 0.5)
        base += rng.uniform(-min_gap, min_gap, size=n)
        rng.shuffle(base)
        return base * scale

    return sample


def _elementwise_cases() -> list:
    cases = []
    for mode in _modes():
        cfg = SoftConfig(tau=0.7, mode=mode)
        tag = mode.value
        u = _uniform(-5.0, 5.0)
        cases += [
            CheckCase(f"elementwise.heaviside.{tag}",
                      lambda x, c=cfg: el.greater(x[0], 0.0, c), u),
            CheckCase(f"elementwise.sign.{tag}",
                      lambda x, c=cfg: el.sign(x[0], c), u),
            CheckCase(f"elementwise.abs.{tag}",
                      lambda x, c=cfg: el.abs(x[0], c), u),
            CheckCase(f"elementwise.round.{tag}",
                      lambda x, c=cfg: el.round(x[0], c), u),
            CheckCase(f"elementwise.relu_gating.{tag}",
                      lambda x, c=cfg: el.relu(x[0], c, el.ReluStyle.GATING), u),
            CheckCase(f"elementwise.relu_integration.{tag}",
                      lambda x, c=cfg: el.relu(x[0], c, el.ReluStyle.INTEGRATION), u),
            CheckCase(f"elementwise.clip.{tag}",
                      lambda x, c=cfg: el.clip(x[0], -1.0, 1.0, c), u),
            CheckCase(f"elementwise.compare_greater.{tag}",
                      lambda x, c=cfg: el.greater(x[0], x[1], c),
                      _uniform(-3.0, 3.0, 2)),
            CheckCase(f"elementwise.compare_equal.{tag}",
                      lambda x, c=cfg: el.equal(x[0], x[1], c),
                      _uniform(-3.0, 3.0, 2)),
            CheckCase(f"elementwise.compare_isclose.{tag}",
                      lambda x, c=cfg: el.isclose(x[0], x[1], c),
                      _uniform(-3.0, 3.0, 2)),
            CheckCase(f"logic.where_soft.{tag}",
                      lambda x, c=cfg: logic.where(el.greater(x[0], x[1], c),
                                                   x[0], x[1]),
                      _uniform(-3.0, 3.0, 2)),
        ]
    cases += [
        CheckCase("logic.xor",
                  lambda x: logic.logical_xor(x[0], x[1]),
                  _uniform(0.05, 0.95, 2)),
        CheckCase("logic.all_geomean",
                  lambda x: logic.all([x[0], x[1], x[2]], "geomean"),
                  _uniform(0.05, 0.95, 3)),
        CheckCase("select.take_along_axis",
                  lambda x: stm.take(x, np.array([0.2, 0.3, 0.5])),
                  _uniform(-2.0, 2.0, 3)),
        CheckCase("select.dynamic_slice",
                  lambda x: stm.dynamic_slice_in_dim(x, np.array([0.3, 0.5, 0.2]), 3),
                  _uniform(-2.0, 2.0, 5)),
        CheckCase("safe.sqrt", lambda x: stm.safe_sqrt(x[0]), _uniform(0.1, 4.0)),
        CheckCase("safe.log", lambda x: stm.safe_log(x[0]), _uniform(0.1, 4.0)),
        CheckCase("safe.arcsin", lambda x: stm.safe_arcsin(x[0]),
                  _uniform(-0.9, 0.9)),
        CheckCase("safe.div", lambda x: stm.safe_div(x[0], x[1]),
                  _uniform(0.2, 2.0, 2)),
        CheckCase("safe.norm", lambda x: stm.safe_norm(x),
                  _uniform(-2.0, 2.0, 3)),
    ]
    return cases


# Methods whose forward pass runs an iterative transport solve.
_SOLVER_METHODS = {Method.OT}

_CHECK_N = 5
_CHECK_TAU = 0.35

_KW = {"topk": {"k": 2}, "argtopk": {"k": 2}, "quantile": {"q": 0.3},
       "argquantile": {"q": 0.3}}


def _axiswise_cases() -> list:
    cases = []
    for op, impls in sorted(REGISTRY.items()):
        for method in sorted(impls, key=lambda m: m.value):
            if method is Method.SMOOTHSORT:
                continue  # finite differences are its gradient by design
            for mode in sorted(supported_modes(method), key=lambda m: m.value):
                entry = resolve(op, method, mode)
                kw = dict(_KW.get(op, {}))
                solver = method in _SOLVER_METHODS
                if solver:
                    kw["params"] = _OT_SOLVER
                # FastSoftSort only softens once label gaps beat value gaps;
                # check it in its pooling regime.
                tau = 25.0 if method is Method.FASTSOFTSORT else _CHECK_TAU
                cfg = SoftConfig(tau=tau, mode=mode, method=method)

                def fn(x, _e=entry, _c=cfg, _kw=kw):
                    return _e.fn(x, _c, **_kw)

                cases.append(CheckCase(
                    name=f"{method.value}.{op}.{mode.value}",
                    fn=fn,
                    sampler=_spread_normal(_CHECK_N),
                    tol=TOL_SOLVER if solver else TOL_DEFAULT,
                    directional=solver,
                    fd_step=3e-3 if solver else None,
                ))
    return cases


def build_cases() -> list:
    return _elementwise_cases() + _axiswise_cases()


def run_gradcheck(filter_glob: str = "*", tol: float | None = None,
                  seed: int = 0, points: int = 50):
    """Run all matching checks; returns (results, all_passed).

    Raises KeyError if the filter matches nothing (unknown op name).
    """
    cases = [c for c in build_cases() if fnmatch.fnmatch(c.name, filter_glob)
             or fnmatch.fnmatch(c.name, filter_glob + ".*")
             or fnmatch.fnmatch(c.name, "*" + filter_glob + "*")]
    if not cases:
        raise KeyError(f"no gradcheck cases match {filter_glob!r}")
    rng = np.random.default_rng(seed)
    results = []
    for case in cases:
        if tol is not None:
            case = CheckCase(case.name, case.fn, case.sampler, tol,
                             case.directional, case.fd_step)
        results.append(check_case(case, rng, points=points))
    return results, all(r.passed for r in results)
