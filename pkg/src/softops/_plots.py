"""Figure rendering for the CLI report paths.

Imported lazily; the numeric paths never touch matplotlib, and acceptance
checks read only the CSV output.  Figures are written next to the delimited
file.
"""

from __future__ import annotations

import numpy as np


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_sweep(rows, png_path: str):
    plt = _plt()
    xs = sorted({r["x_sweep_value"] for r in rows})
    taus = sorted({r["tau"] for r in rows})
    idxs = sorted({r["output_index"] for r in rows})
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    sweep_over_x = len(xs) > 1
    for tau in taus:
        for i in idxs:
            pts = [(r["x_sweep_value"] if sweep_over_x else r["tau"],
                    r["output_value"])
                   for r in rows if r["tau"] == tau and r["output_index"] == i]
            pts.sort()
            label = f"out[{i}], tau={tau:g}" if len(taus) > 1 else f"out[{i}]"
            ax.plot([p[0] for p in pts], [p[1] for p in pts], lw=1.2,
                    label=label if len(idxs) * len(taus) <= 12 else None)
    ax.set_xlabel("swept input value" if sweep_over_x else "tau")
    if not sweep_over_x:
        ax.set_xscale("log")
    ax.set_ylabel("output value")
    if len(idxs) * len(taus) <= 12:
        ax.legend(fontsize=7)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)


def render_bench(rows, png_path: str):
    plt = _plt()
    fig, axes = plt.subplots(1, 2, figsize=(9.6, 4.0))
    keys = sorted({(r["op"], r["method"], r["mode"]) for r in rows})
    for key in keys:
        sub = sorted([r for r in rows
                      if (r["op"], r["method"], r["mode"]) == key],
                     key=lambda r: r["n"])
        ns = [r["n"] for r in sub]
        axes[0].loglog(ns, [r["median_forward_s"] for r in sub],
                       marker="o", ms=3, lw=1.0, label="/".join(map(str, key)))
        axes[1].loglog(ns, [r["peak_bytes_estimate"] for r in sub],
                       marker="o", ms=3, lw=1.0)
    axes[0].set_xlabel("n"); axes[0].set_ylabel("median forward time [s]")
    axes[1].set_xlabel("n"); axes[1].set_ylabel("allocator peak [bytes]")
    axes[0].legend(fontsize=7)
    for ax in axes:
        ax.spines["right"].set_visible(False)
        ax.spines["top"].set_visible(False)
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)


def render_demo(report, png_path: str):
    plt = _plt()
    poly = report.polygon
    fig, axes = plt.subplots(1, 2, figsize=(9.6, 4.0))
    ring = np.vstack([poly, poly[:1]])
    axes[0].plot(ring[:, 0], ring[:, 1], "k-", lw=1.0)
    axes[0].plot(poly[:, 0], poly[:, 1], "ko", ms=4)
    sel = poly[report.hard_idx]
    axes[0].plot(sel[:, 0], sel[:, 1], "rs", ms=9, mfc="none",
                 label="hard selection")
    soft_sel = poly[report.soft_idx]
    axes[0].plot(soft_sel[:, 0], soft_sel[:, 1], "b^", ms=7, mfc="none",
                 label="soft selection (argmax)")
    axes[0].set_aspect("equal")
    axes[0].legend(fontsize=8)
    axes[0].set_title("selected manifold points")
    n = poly.shape[0]
    w = 0.35
    axes[1].bar(np.arange(n) - w / 2, np.abs(report.grad_hard), width=w,
                label="hard")
    axes[1].bar(np.arange(n) + w / 2, np.abs(report.grad_soft), width=w,
                label="soft")
    axes[1].set_yscale("symlog", linthresh=1e-10)
    axes[1].set_xlabel("vertex")
    axes[1].set_ylabel("|d mean / d x offset|")
    axes[1].legend(fontsize=8)
    for ax in axes:
        ax.spines["right"].set_visible(False)
        ax.spines["top"].set_visible(False)
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
