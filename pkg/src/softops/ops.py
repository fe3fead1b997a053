"""Operator registry: one entry per (axiswise op, method) pair, plus the
drop-in style dispatch functions.

Default methods: the simplex-projection families are cheap and well-behaved,
so single-row operators (argmax/argmin/max/min/top-k) default to the
single-projection family and the fully smooth family handles sort, rank,
quantile and median.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict

from .core import (ConfigError, Method, Mode, SoftConfig, supported_modes,
                   validate_method_mode)
from . import bitonic as _bitonic
from . import otrank as _ot
from . import permusort as _pm
from . import simplexsort as _ss

__all__ = ["OpEntry", "REGISTRY", "DEFAULT_METHOD", "resolve", "dispatch",
           "valid_combinations", "sort", "rank", "argsort", "argmax",
           "argmin", "max", "min", "topk", "argtopk", "quantile",
           "argquantile", "median", "argmedian"]


@dataclass(frozen=True)
class OpEntry:
    """A concrete implementation of an operator under one method."""

    fn: Callable
    kind: str  # "values" | "index" | "matrix" | "values+matrix" | "scalar"


def _net_sort(x, cfg, **kw):
    return _bitonic.network_sort(x, cfg)[0]


def _net_argsort(x, cfg, **kw):
    return _bitonic.network_sort(x, cfg)[1]


def _ot_topk_values(x, cfg, *, k, params=None, **kw):
    return _ot.ot_topk(x, k, cfg, params)[0]


def _ot_argtopk(x, cfg, *, k, params=None, **kw):
    return _ot.ot_topk(x, k, cfg, params)[1]


def _ss_topk_values(x, cfg, *, k, **kw):
    return _ss.softsort_topk(x, k, cfg)[0]


def _ss_argtopk(x, cfg, *, k, **kw):
    return _ss.softsort_topk(x, k, cfg)[1]


def _ns_topk_values(x, cfg, *, k, **kw):
    return _ss.neuralsort_topk(x, k, cfg)[0]


def _ns_argtopk(x, cfg, *, k, **kw):
    return _ss.neuralsort_topk(x, k, cfg)[1]


REGISTRY: Dict[str, Dict[Method, OpEntry]] = {
    "sort": {
        Method.OT: OpEntry(lambda x, cfg, params=None, **kw: _ot.ot_sort(x, cfg, params), "values"),
        Method.SOFTSORT: OpEntry(lambda x, cfg, **kw: _ss.softsort_sort(x, cfg), "values"),
        Method.NEURALSORT: OpEntry(lambda x, cfg, **kw: _ss.neuralsort_sort(x, cfg), "values"),
        Method.FASTSOFTSORT: OpEntry(lambda x, cfg, **kw: _pm.fastsoftsort_sort(x, cfg), "values"),
        Method.SMOOTHSORT: OpEntry(lambda x, cfg, **kw: _pm.smoothsort_sort(x, cfg), "values"),
        Method.NETWORK: OpEntry(_net_sort, "values"),
    },
    "argsort": {
        Method.OT: OpEntry(lambda x, cfg, params=None, **kw: _ot.ot_argsort(x, cfg, params), "matrix"),
        Method.SOFTSORT: OpEntry(lambda x, cfg, **kw: _ss.softsort_argsort(x, cfg), "matrix"),
        Method.NEURALSORT: OpEntry(lambda x, cfg, **kw: _ss.neuralsort_argsort(x, cfg), "matrix"),
        Method.NETWORK: OpEntry(_net_argsort, "matrix"),
    },
    "rank": {
        Method.OT: OpEntry(lambda x, cfg, params=None, **kw: _ot.ot_rank(x, cfg, params), "values"),
        Method.SOFTSORT: OpEntry(lambda x, cfg, **kw: _ss.softsort_rank(x, cfg), "values"),
        Method.NEURALSORT: OpEntry(lambda x, cfg, **kw: _ss.neuralsort_rank(x, cfg), "values"),
        Method.FASTSOFTSORT: OpEntry(lambda x, cfg, **kw: _pm.fastsoftsort_rank(x, cfg), "values"),
        Method.SMOOTHSORT: OpEntry(lambda x, cfg, **kw: _pm.smoothsort_rank(x, cfg), "values"),
    },
    "argrank": {
        Method.SOFTSORT: OpEntry(lambda x, cfg, **kw: _ss.softsort_argrank(x, cfg), "matrix"),
    },
    "max": {
        Method.OT: OpEntry(lambda x, cfg, params=None, **kw: _ot.ot_max(x, cfg, params)[0], "scalar"),
        Method.SOFTSORT: OpEntry(lambda x, cfg, **kw: _ss.softsort_max(x, cfg), "scalar"),
        Method.NEURALSORT: OpEntry(lambda x, cfg, **kw: _ss.neuralsort_max(x, cfg), "scalar"),
    },
    "min": {
        Method.OT: OpEntry(lambda x, cfg, params=None, **kw: _ot.ot_min(x, cfg, params)[0], "scalar"),
        Method.SOFTSORT: OpEntry(lambda x, cfg, **kw: _ss.softsort_min(x, cfg), "scalar"),
        Method.NEURALSORT: OpEntry(lambda x, cfg, **kw: _ss.neuralsort_min(x, cfg), "scalar"),
    },
    "argmax": {
        Method.OT: OpEntry(lambda x, cfg, params=None, **kw: _ot.ot_argmax(x, cfg, params), "index"),
        Method.SOFTSORT: OpEntry(lambda x, cfg, **kw: _ss.softsort_argmax(x, cfg), "index"),
        Method.NEURALSORT: OpEntry(lambda x, cfg, **kw: _ss.neuralsort_argmax(x, cfg), "index"),
    },
    "argmin": {
        Method.OT: OpEntry(lambda x, cfg, params=None, **kw: _ot.ot_argmin(x, cfg, params), "index"),
        Method.SOFTSORT: OpEntry(lambda x, cfg, **kw: _ss.softsort_argmin(x, cfg), "index"),
        Method.NEURALSORT: OpEntry(lambda x, cfg, **kw: _ss.neuralsort_argmin(x, cfg), "index"),
    },
    "topk": {
        Method.OT: OpEntry(_ot_topk_values, "values"),
        Method.SOFTSORT: OpEntry(_ss_topk_values, "values"),
        Method.NEURALSORT: OpEntry(_ns_topk_values, "values"),
    },
    "argtopk": {
        Method.OT: OpEntry(_ot_argtopk, "matrix"),
        Method.SOFTSORT: OpEntry(_ss_argtopk, "matrix"),
        Method.NEURALSORT: OpEntry(_ns_argtopk, "matrix"),
    },
    "quantile": {
        Method.OT: OpEntry(lambda x, cfg, *, q, combine="midpoint",
                           params=None, **kw:
                           _ot.ot_quantile(x, q, cfg, combine, params),
                           "scalar"),
        Method.SOFTSORT: OpEntry(lambda x, cfg, *, q, combine="midpoint", **kw:
                                 _ss.softsort_quantile(x, q, cfg, combine), "scalar"),
        Method.NEURALSORT: OpEntry(lambda x, cfg, *, q, combine="midpoint", **kw:
                                   _ss.neuralsort_quantile(x, q, cfg, combine), "scalar"),
    },
    "argquantile": {
        Method.OT: OpEntry(lambda x, cfg, *, q, side="lower",
                           params=None, **kw:
                           _ot.ot_argquantile(x, q, cfg, side, params),
                           "index"),
        Method.SOFTSORT: OpEntry(lambda x, cfg, *, q, side="lower", **kw:
                                 _ss.softsort_argquantile(x, q, cfg, side), "index"),
        Method.NEURALSORT: OpEntry(lambda x, cfg, *, q, side="upper", **kw:
                                   _ss.neuralsort_argquantile(x, q, cfg, side), "index"),
    },
    "median": {
        Method.OT: OpEntry(lambda x, cfg, *, combine="midpoint",
                           params=None, **kw:
                           _ot.ot_median(x, cfg, combine, params), "scalar"),
        Method.SOFTSORT: OpEntry(lambda x, cfg, *, combine="midpoint", **kw:
                                 _ss.softsort_quantile(x, 0.5, cfg, combine), "scalar"),
        Method.NEURALSORT: OpEntry(lambda x, cfg, **kw:
                                   _ss.neuralsort_median(x, cfg), "scalar"),
    },
    "argmedian": {
        Method.OT: OpEntry(lambda x, cfg, *, side="lower", params=None,
                           **kw:
                           _ot.ot_argmedian(x, cfg, side, params), "index"),
        Method.SOFTSORT: OpEntry(lambda x, cfg, *, side="lower", **kw:
                                 _ss.softsort_argmedian(x, cfg, side), "index"),
        Method.NEURALSORT: OpEntry(lambda x, cfg, **kw:
                                   _ss.neuralsort_argmedian(x, cfg), "index"),
    },
}

DEFAULT_METHOD: Dict[str, Method] = {
    "sort": Method.NEURALSORT,
    "argsort": Method.NEURALSORT,
    "rank": Method.NEURALSORT,
    "argrank": Method.SOFTSORT,
    "max": Method.SOFTSORT,
    "min": Method.SOFTSORT,
    "argmax": Method.SOFTSORT,
    "argmin": Method.SOFTSORT,
    "topk": Method.SOFTSORT,
    "argtopk": Method.SOFTSORT,
    "quantile": Method.NEURALSORT,
    "argquantile": Method.NEURALSORT,
    "median": Method.NEURALSORT,
    "argmedian": Method.NEURALSORT,
}


def valid_combinations():
    """Every reachable (op, method, mode) triple."""
    out = []
    for op, methods in REGISTRY.items():
        for method in methods:
            for mode in sorted(supported_modes(method), key=lambda m: m.value):
                out.append((op, method, mode))
    return out


def resolve(op: str, method: Method | None, mode: Mode) -> OpEntry:
    """Look up an implementation, applying defaults and validating support."""
    try:
        impls = REGISTRY[op]
    except KeyError:
        raise ConfigError(
            f"unknown operator {op!r}; choose from {sorted(REGISTRY)}") from None
    method = method or DEFAULT_METHOD[op]
    if method not in impls:
        raise ConfigError(
            f"operator {op!r} is not available under method {method.value!r}; "
            f"supported methods: {sorted(m.value for m in impls)} "
            "(see the method/mode support matrix in the README)")
    validate_method_mode(method, mode)
    return impls[method]


def dispatch(op: str, x, cfg: SoftConfig = SoftConfig(), **kw):
    entry = resolve(op, cfg.method, cfg.mode)
    return entry.fn(x, cfg, **kw)


def _api(op):
    def call(x, cfg: SoftConfig = SoftConfig(), **kw):
        return dispatch(op, x, cfg, **kw)

    call.__name__ = op
    call.__qualname__ = op
    call.__doc__ = f"Soft {op} under cfg.method (default {DEFAULT_METHOD[op].value})."
    return call


sort = _api("sort")
rank = _api("rank")
argsort = _api("argsort")
argmax = _api("argmax")
argmin = _api("argmin")
max = _api("max")  # noqa: A001 - mirrors the hard ops
min = _api("min")  # noqa: A001
topk = _api("topk")
argtopk = _api("argtopk")
quantile = _api("quantile")
argquantile = _api("argquantile")
median = _api("median")
argmedian = _api("argmedian")
