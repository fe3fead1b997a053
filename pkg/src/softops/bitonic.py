"""Differentiable bitonic sorting network with soft compare-and-swap.

Each comparator mixes its two lanes with the weight sigma = H_tau(a - b),
a 2x2 doubly stochastic update; a permutation matrix tracked through the
network therefore stays doubly stochastic at every stage and satisfies
sort(x) = P x along the same arithmetic path.  Inputs whose length is not a
power of two are padded with a large sentinel that sorts to the top and is
truncated away afterwards.
"""

from __future__ import annotations

import numpy as np

from .core import Dual, SoftConfig, SoftPerm, concatenate, is_dual, value_of
from .otrank import _maybe_squash
from .sigmoid import heaviside

__all__ = ["comparator_stages", "network_sort"]


def comparator_stages(n_padded: int):
    """Comparator wiring of the bitonic merge network for a power-of-two size.

    Returns a list of stages; each stage is (lo_indices, hi_indices,
    ascending_mask) with all comparators in a stage independent.
    """
    if n_padded & (n_padded - 1):
        raise ValueError(f"network size must be a power of two, got {n_padded}")
    stages = []
    k = 2
    while k <= n_padded:
        j = k // 2
        while j >= 1:
            lo, hi, asc = [], [], []
            for i in range(n_padded):
                partner = i ^ j
                if partner > i:
                    lo.append(i)
                    hi.append(partner)
                    asc.append((i & k) == 0)
            stages.append((np.array(lo), np.array(hi),
                           np.array(asc, dtype=bool)))
            j //= 2
        k *= 2
    return stages


def _pad_sentinel(v):
    """Sentinel larger than every entry; ascending sorts push it to the end."""
    vmax = float(np.max(v))
    vrange = float(np.max(v) - np.min(v))
    return vmax + 10.0 * (vrange + 1.0)


def network_sort(x, cfg: SoftConfig = SoftConfig(), stage_hook=None):
    """Soft ascending sort through a bitonic network.

    Returns (values, P) with values = P @ x exactly (same arithmetic path)
    and P doubly stochastic.  Comparator weights are computed on the
    standardized/squashed copy of the input when ``cfg.standardize`` is set,
    which keeps tau scale-free, while the mixed values stay in input units.

    ``stage_hook(P_value_matrix)`` is invoked after every stage (testing aid).
    """
    xv = value_of(x)
    if xv.ndim != 1 or xv.size == 0:
        raise ValueError("network_sort expects a nonempty vector")
    n = xv.size
    if n == 1:
        P = np.ones((1, 1))
        one = SoftPerm(P, row_stochastic=True, col_stochastic=True)
        return (x if is_dual(x) else xv.copy()), one

    N = 1 << (n - 1).bit_length()
    gate_src, _ = _maybe_squash(x, cfg) if n >= 2 else (x, None)

    if N > n:
        pad_vals = np.full(N - n, _pad_sentinel(xv))
        pad_gate = np.full(N - n, _pad_sentinel(value_of(gate_src)))
        vals = concatenate([x, Dual(pad_vals)]) if is_dual(x) \
            else np.concatenate([xv, pad_vals])
        gates = concatenate([gate_src, Dual(pad_gate)]) if is_dual(gate_src) \
            else np.concatenate([value_of(gate_src), pad_gate])
    else:
        vals = x if is_dual(x) else xv.copy()
        gates = gate_src

    P = Dual(np.eye(N)) if is_dual(x) else np.eye(N)
    for lo, hi, asc in comparator_stages(N):
        a = gates[lo]
        b = gates[hi]
        # sigma -> 1 when the low lane currently holds the larger value.
        sigma = heaviside(a - b, cfg)
        # Ascending comparators put the min on the low lane; descending the max.
        if is_dual(sigma):
            sig_lo = Dual(np.where(asc, 1.0 - sigma.value, sigma.value),
                          np.where(asc, -sigma.tangent, sigma.tangent))
        else:
            sig_lo = np.where(asc, 1.0 - sigma, sigma)
        col_sig = sig_lo.reshape(-1, 1) if is_dual(sig_lo) else sig_lo[:, None]
        new_lo_vals = sig_lo * vals[lo] + (1.0 - sig_lo) * vals[hi]
        new_hi_vals = (1.0 - sig_lo) * vals[lo] + sig_lo * vals[hi]
        new_lo_gates = sig_lo * gates[lo] + (1.0 - sig_lo) * gates[hi]
        new_hi_gates = (1.0 - sig_lo) * gates[lo] + sig_lo * gates[hi]
        new_lo_rows = col_sig * P[lo] + (1.0 - col_sig) * P[hi]
        new_hi_rows = (1.0 - col_sig) * P[lo] + col_sig * P[hi]
        vals = _scatter_pair(vals, lo, hi, new_lo_vals, new_hi_vals)
        gates = _scatter_pair(gates, lo, hi, new_lo_gates, new_hi_gates)
        P = _scatter_pair(P, lo, hi, new_lo_rows, new_hi_rows)
        if stage_hook is not None:
            stage_hook(value_of(P))

    if N > n:
        P_block = P[:n, :n]
        leak = float(np.max(np.sum(value_of(P)[:n, n:], axis=1), initial=0.0))
        if leak > 1e-9:
            # mass escaped onto sentinel columns (tau large vs the range);
            # renormalize the kept rows
            rows = P_block.sum(axis=1)
            P_block = P_block / (rows.reshape(-1, 1) if is_dual(P_block)
                                 else value_of(rows)[:, None])
        P = P_block
        # rebuild the kept values from the truncated matrix so that
        # values = P @ x holds exactly after truncation as well
        vals = P @ (x if is_dual(x) else xv)
    col_ok = bool(np.max(np.abs(value_of(P).sum(axis=0) - 1.0)) <= 1e-6)
    perm = SoftPerm(P, row_stochastic=True, col_stochastic=col_ok)
    return vals, perm


def _scatter_pair(arr, lo, hi, new_lo, new_hi):
    out = arr.copy()
    out[lo] = new_lo
    out[hi] = new_hi
    return out
