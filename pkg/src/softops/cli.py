"""Command-line surface: gradient checking, tau-sweep curve dumps, benchmark
CSVs, and the manifold-point case-study demo.

All commands write comma-separated files (header row, UTF-8, LF line endings,
floats at 17 significant digits) and optionally render a figure next to the
CSV with ``--plot``.  Exit codes: 0 success, 1 check failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
import time
import tracemalloc

import numpy as np

from .core import ConfigError, Method, Mode, SoftConfig, jacobian, value_of
from .gradcheck import run_gradcheck
from .manifold import run_case_study
from .ops import DEFAULT_METHOD, REGISTRY, resolve

__all__ = ["main"]


def _fmt(v) -> str:
    if isinstance(v, float) or isinstance(v, np.floating):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[k]) for k in header) + "\n")


def _png_path(out: str) -> str:
    return (out[:-4] if out.endswith(".csv") else out) + ".png"


def _parse_mode(s: str) -> Mode:
    try:
        return Mode(s)
    except ValueError:
        raise ConfigError(f"unknown mode {s!r}; choose from "
                          f"{[m.value for m in Mode]}") from None


def _parse_method(s: str) -> Method:
    try:
        return Method(s)
    except ValueError:
        raise ConfigError(f"unknown method {s!r}; choose from "
                          f"{[m.value for m in Method]}") from None


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------


def cmd_gradcheck(args) -> int:
    try:
        results, ok = run_gradcheck(args.filter, tol=args.tol, seed=args.seed,
                                    points=args.points)
    except KeyError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    width = max(len(r.name) for r in results)
    for r in results:
        status = "pass" if r.passed else "FAIL"
        print(f"{r.name:<{width}s}  max_rel_err={r.max_rel_err:.3e}  "
              f"tol={r.tol:g}  points={r.points}  [{status}]")
    print(f"{'all checks passed' if ok else 'some checks FAILED'} "
          f"({sum(r.passed for r in results)}/{len(results)})")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

_PRESETS = {
    # Soft-rank curves: sweep the first element of a fixed vector.
    "rank-sweep": dict(op="rank", method="neuralsort", mode="smooth",
                       base=[0.0, -1.0, 0.5, 0.8, 2.0],
                       sweep="x", x_grid=np.linspace(-2.0, 3.0, 41)),
    # Softness limit: fixed vector, tau swept to very large values.
    "tau-limit": dict(op="sort", method="softsort", mode="smooth",
                      base=None, sweep="tau", n=6, standardize=False),
}


def cmd_sweep(args) -> int:
    rng = np.random.default_rng(args.seed)
    taus = [float(t) for t in args.tau] if args.tau else [0.1]
    standardize = True
    if args.preset:
        p = _PRESETS[args.preset]
        op, method, mode = p["op"], _parse_method(p["method"]), _parse_mode(p["mode"])
        standardize = p.get("standardize", True)
        if p["base"] is not None:
            base = np.array(p["base"], dtype=float)
        else:
            base = rng.normal(size=p["n"])
        sweep_x = p["sweep"] == "x"
        x_grid = p.get("x_grid") if sweep_x else [base[0]]
        if not sweep_x and not args.tau:
            taus = list(np.geomspace(1e-3, 1e3, 25))
    else:
        if args.n < 1:
            print("usage error: --n must be >= 1", file=sys.stderr)
            return 2
        op = args.op
        method = _parse_method(args.method) if args.method else DEFAULT_METHOD.get(op)
        mode = _parse_mode(args.mode)
        base = rng.normal(size=args.n)
        sweep_x = True
        x_grid = np.linspace(-2.0, 3.0, 41)
    try:
        entry = resolve(op, method, mode)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2

    kw = {}
    if op in ("topk", "argtopk"):
        kw["k"] = args.k
    if op in ("quantile", "argquantile"):
        kw["q"] = args.q

    rows = []
    for tau in taus:
        cfg = SoftConfig(tau=tau, mode=mode, method=method,
                         standardize=standardize)

        def f(x, _cfg=cfg):
            out = entry.fn(x, _cfg, **kw)
            if isinstance(out, tuple):
                out = out[0]
            from .core import SoftIndex, SoftPerm

            if isinstance(out, (SoftIndex, SoftPerm)):
                out = out.probs if isinstance(out, SoftIndex) else out.mat
            return out

        for xv in x_grid:
            x = base.copy()
            x[0] = xv
            out = np.atleast_1d(value_of(f(x)))
            J = jacobian(f, x)
            for i, val in enumerate(out.ravel()):
                jd = J[i, i] if i < min(J.shape) else float("nan")
                rows.append(dict(x_sweep_value=float(xv), tau=float(tau),
                                 output_index=i, output_value=float(val),
                                 jacobian_diag=float(jd)))
    write_csv(args.out, ["x_sweep_value", "tau", "output_index",
                         "output_value", "jacobian_diag"], rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    if args.plot:
        from ._plots import render_sweep

        render_sweep(rows, _png_path(args.out))
        print(f"rendered {_png_path(args.out)}")
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

_HARD_BASELINES = {
    "sort": lambda x: np.sort(x),
    "argsort": lambda x: np.argsort(x),
    "rank": lambda x: np.argsort(np.argsort(-x)) + 1,
    "max": lambda x: np.max(x),
    "min": lambda x: np.min(x),
    "median": lambda x: np.median(x),
}

_JACOBIAN_CAP = 128


def _time_median(fn, reps: int) -> float:
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes]
    if any(s > 8192 for s in sizes):
        print("usage error: sizes are capped at 8192", file=sys.stderr)
        return 2
    rng = np.random.default_rng(args.seed)
    methods = [_parse_method(m) for m in args.methods]
    modes = [_parse_mode(m) for m in args.modes]
    rows = []
    for op in args.ops:
        if op not in REGISTRY:
            print(f"usage error: unknown op {op!r}", file=sys.stderr)
            return 2
        for n in sizes:
            x = rng.normal(size=n)
            if op in _HARD_BASELINES:
                hard = _HARD_BASELINES[op]
                rows.append(dict(
                    op=op, method="hard", mode="-", n=n,
                    median_forward_s=_time_median(lambda: hard(x), args.reps),
                    median_jacobian_s=float("nan"),
                    peak_bytes_estimate=0.0))
            for method in methods:
                if method not in REGISTRY[op]:
                    continue
                for mode in modes:
                    try:
                        entry = resolve(op, method, mode)
                    except ConfigError:
                        continue
                    kw = {"k": min(args.k, n - 1)} if op in ("topk", "argtopk") \
                        else ({"q": args.q} if op in ("quantile", "argquantile")
                              else {})
                    cfg = SoftConfig(tau=args.tau, mode=mode, method=method)

                    def fwd(_e=entry, _c=cfg, _kw=kw):
                        return _e.fn(x, _c, **_kw)

                    fwd()  # warm-up
                    t_fwd = _time_median(fwd, args.reps)
                    if n <= _JACOBIAN_CAP and method is not Method.SMOOTHSORT:
                        def jac(_e=entry, _c=cfg, _kw=kw):
                            def f(v):
                                out = _e.fn(v, _c, **_kw)
                                if isinstance(out, tuple):
                                    out = out[0]
                                from .core import SoftIndex, SoftPerm
                                if isinstance(out, (SoftIndex, SoftPerm)):
                                    out = out.probs if isinstance(out, SoftIndex) else out.mat
                                return out
                            return jacobian(f, x)

                        t_jac = _time_median(jac, max(1, args.reps // 3))
                    else:
                        t_jac = float("nan")
                    tracemalloc.start()
                    fwd()
                    peak = tracemalloc.get_traced_memory()[1]
                    tracemalloc.stop()
                    rows.append(dict(op=op, method=method.value,
                                     mode=mode.value, n=n,
                                     median_forward_s=t_fwd,
                                     median_jacobian_s=t_jac,
                                     peak_bytes_estimate=float(peak)))
    write_csv(args.out, ["op", "method", "mode", "n", "median_forward_s",
                         "median_jacobian_s", "peak_bytes_estimate"], rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    if args.plot:
        from ._plots import render_bench

        render_bench(rows, _png_path(args.out))
        print(f"rendered {_png_path(args.out)}")
    return 0


# ---------------------------------------------------------------------------
# demo-manifold
# ---------------------------------------------------------------------------


def cmd_demo_manifold(args) -> int:
    if args.n < 5:
        print("usage error: --n must be >= 5 vertices", file=sys.stderr)
        return 2
    mode = _parse_mode(args.mode)
    reports = run_case_study(args.n, select_tau=args.tau,
                             grad_tau=args.grad_tau, mode=mode,
                             seed=args.seed, polygons=args.reps)
    rows = []
    for pid, rep in enumerate(reports):
        hard_zeros = int(np.sum(rep.grad_hard == 0.0))
        for v in range(args.n):
            rows.append(dict(
                polygon=pid, vertex=v,
                vx=rep.polygon[v, 0], vy=rep.polygon[v, 1],
                grad_hard=rep.grad_hard[v], grad_soft=rep.grad_soft[v],
                hard_zero=int(rep.grad_hard[v] == 0.0),
                soft_matches_hard=int(rep.matches),
                n_hard_zero_grads=hard_zeros))
    write_csv(args.out, ["polygon", "vertex", "vx", "vy", "grad_hard",
                         "grad_soft", "hard_zero", "soft_matches_hard",
                         "n_hard_zero_grads"], rows)
    matches = sum(r.matches for r in reports)
    all_hard_sparse = all(np.any(r.grad_hard == 0.0) for r in reports)
    all_soft_dense = all(np.all(np.abs(r.grad_soft) > 1e-8) for r in reports)
    print(f"soft argmax matches hard selection: {matches}/{len(reports)} "
          f"polygons (selection tau={args.tau:g})")
    print(f"hard algorithm has a zero-gradient vertex in every polygon: "
          f"{all_hard_sparse}")
    print(f"soft algorithm has |grad| > 1e-8 at every vertex: "
          f"{all_soft_dense} (gradient tau={args.grad_tau:g})")
    print(f"wrote {len(rows)} rows to {args.out}")
    if args.plot:
        from ._plots import render_demo

        render_demo(reports[0], _png_path(args.out))
        print(f"rendered {_png_path(args.out)}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="softops",
        description="Soft differentiable surrogates: gradient checks, "
                    "tau sweeps, benchmarks, and the manifold-point demo.")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gradcheck", help="forward-mode vs finite differences")
    g.add_argument("--filter", default="*", help="op-name glob, e.g. 'relu'")
    g.add_argument("--tol", type=float, default=None,
                   help="override the per-op tolerance")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--points", type=int, default=50)
    g.set_defaults(fn=cmd_gradcheck)

    s = sub.add_parser("sweep", help="curve dumps over input value or tau")
    s.add_argument("--preset", choices=sorted(_PRESETS), default=None)
    s.add_argument("--op", default="rank", choices=sorted(REGISTRY))
    s.add_argument("--method", default=None)
    s.add_argument("--mode", default="smooth")
    s.add_argument("--n", type=int, default=5)
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--q", type=float, default=0.5)
    s.add_argument("--tau", nargs="*", default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="sweep.csv")
    s.add_argument("--plot", action="store_true")
    s.set_defaults(fn=cmd_sweep)

    b = sub.add_parser("bench", help="forward/jacobian timing and memory CSV")
    b.add_argument("--ops", nargs="+", default=["sort"])
    b.add_argument("--methods", nargs="+",
                   default=[m.value for m in Method])
    b.add_argument("--modes", nargs="+", default=["smooth"])
    b.add_argument("--sizes", nargs="+", default=["128", "512", "2048"])
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--tau", type=float, default=0.1)
    b.add_argument("--k", type=int, default=8)
    b.add_argument("--q", type=float, default=0.5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default="bench.csv")
    b.add_argument("--plot", action="store_true")
    b.set_defaults(fn=cmd_bench)

    d = sub.add_parser("demo-manifold",
                       help="hard vs soft polygon vertex selection")
    d.add_argument("--n", type=int, default=7, help="polygon vertices (>= 5)")
    d.add_argument("--tau", type=float, default=0.01,
                   help="softness for the selection-match test")
    d.add_argument("--grad-tau", type=float, default=0.1,
                   help="softness for the gradient comparison")
    d.add_argument("--mode", default="smooth")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--reps", type=int, default=100, help="polygon count")
    d.add_argument("--out", default="demo_manifold.csv")
    d.add_argument("--plot", action="store_true")
    d.set_defaults(fn=cmd_demo_manifold)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
