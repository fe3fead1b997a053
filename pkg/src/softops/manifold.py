"""Collision-manifold case study: choosing four spread-out polygon vertices.

The hard algorithm picks vertex A by a masked tie-broken argmax, B as the
vertex farthest from A, C as the farthest from the AB line, and D as the
vertex maximizing combined distance from the AC and BC edges.  Every choice
is an argmax, so perturbing an unselected vertex cannot change the output:
its gradient is exactly zero.  The soft variant swaps in the soft argmax,
expectation-based indexing, and the soft absolute value, which makes the
selected points move smoothly and gives every vertex informative gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dual, SoftConfig, is_dual, jacobian, stack, value_of
from .elementwise import abs as soft_abs
from .simplexsort import softsort_argmax
from .st_select import dynamic_index_in_dim

__all__ = ["random_convex_polygon", "manifold_points_hard",
           "manifold_points_soft", "mean_of_selected", "vertex_gradients",
           "ManifoldReport", "run_case_study"]


def random_convex_polygon(n: int, rng) -> np.ndarray:
    """Random convex polygon in the z = 0 plane, vertices ordered by angle.

    Regenerates internally until no three consecutive vertices are collinear.
    """
    if n < 5:
        raise ValueError(f"need at least 5 vertices, got {n}")
    while True:
        angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=n))
        if np.min(np.diff(angles, append=angles[0] + 2 * np.pi)) < 1e-3:
            continue
        radii = rng.uniform(0.5, 1.0, size=n)
        pts = np.stack([radii * np.cos(angles), radii * np.sin(angles),
                        np.zeros(n)], axis=1)
        cross = np.cross(np.roll(pts, -1, 0) - pts, np.roll(pts, -2, 0) - pts)
        if np.min(np.abs(cross[:, 2])) > 1e-6:
            return pts


def _cross_plane_normal(v):
    """cross([0, 0, 1], v) for a length-3 vector, generic over Dual."""
    return stack([-v[1], v[0], 0.0 * v[0]])


def _mask_bias(n: int, mask) -> np.ndarray:
    m = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, bool)
    return np.where(m, 0.0, -1e6)


def manifold_points_hard(poly, mask=None):
    """Hard selection: four vertex indices (A, B, C, D)."""
    pv = value_of(poly)
    n = pv.shape[0]
    bias = _mask_bias(n, mask)
    tie = 0.1 * np.arange(n)

    a_idx = int(np.argmax(bias - tie))
    a = poly[a_idx]
    b_logits = _sq_dist(a, poly) + bias
    b_idx = int(np.argmax(value_of(b_logits)))
    b = poly[b_idx]

    ab = _cross_plane_normal(a - b)
    ap = a - poly
    c_logits_v = np.abs(value_of(ap @ ab)) + bias
    c_idx = int(np.argmax(c_logits_v))
    c = poly[c_idx]

    ac = _cross_plane_normal(a - c)
    bc = _cross_plane_normal(b - c)
    bp = b - poly
    d_logits_v = (np.abs(value_of(bp @ bc)) + bias
                  + np.abs(value_of(ap @ ac)) + bias)
    d_idx = int(np.argmax(d_logits_v))
    return [a_idx, b_idx, c_idx, d_idx]


def _sq_dist(point, poly):
    diff = point - poly if is_dual(point) or is_dual(poly) \
        else value_of(point)[None, :] - value_of(poly)
    return (diff * diff).sum(axis=1)


def _hard_points(poly, mask=None):
    """Hard selection as points, indexing differentiably through the winners."""
    idx = manifold_points_hard(poly, mask)
    return stack([poly[i] for i in idx], axis=0), idx


def manifold_points_soft(poly, cfg: SoftConfig, mask=None):
    """Soft selection: four soft indices and the four expected points."""
    pv = value_of(poly)
    n = pv.shape[0]
    bias = _mask_bias(n, mask)
    tie = 0.1 * np.arange(n)
    no_squash = SoftConfig(tau=cfg.tau, mode=cfg.mode, standardize=False,
                           round_k=cfg.round_k, atol=cfg.atol, rtol=cfg.rtol)

    def argmax(logits):
        return softsort_argmax(logits, no_squash).probs

    a_p = argmax((bias - tie) + 0.0 * (poly[:, 0] if not is_dual(poly)
                                       else poly[:, 0]))
    a = dynamic_index_in_dim(poly, a_p)
    b_p = argmax(_sq_dist(a, poly) + bias)
    b = dynamic_index_in_dim(poly, b_p)

    ab = _cross_plane_normal(a - b)
    ap = a - poly
    c_p = argmax(soft_abs(ap @ ab, no_squash) + bias)
    c = dynamic_index_in_dim(poly, c_p)

    ac = _cross_plane_normal(a - c)
    bc = _cross_plane_normal(b - c)
    bp = b - poly
    d_logits = (soft_abs(bp @ bc, no_squash) + bias
                + soft_abs(ap @ ac, no_squash) + bias)
    d_p = argmax(d_logits)
    d = dynamic_index_in_dim(poly, d_p)

    probs = stack([a_p, b_p, c_p, d_p], axis=0)
    points = stack([a, b, c, d], axis=0)
    return probs, points


def mean_of_selected(points):
    """Mean over all coordinates of the four selected points."""
    return points.mean()


def _with_x_offsets(poly: np.ndarray, dx):
    shifted = np.zeros_like(poly) if not is_dual(dx) \
        else Dual(np.zeros_like(poly), np.zeros_like(poly))
    col = stack([dx, 0.0 * dx, 0.0 * dx], axis=1) if is_dual(dx) \
        else np.stack([dx, np.zeros_like(dx), np.zeros_like(dx)], axis=1)
    return poly + col + (shifted if is_dual(dx) else 0.0)


def vertex_gradients(poly: np.ndarray, cfg: SoftConfig, soft: bool,
                     mask=None) -> np.ndarray:
    """d(mean of selected coordinates)/d(vertex x-offsets), length n.

    The hard variant keeps every argmax hard, so only currently selected
    vertices can receive nonzero gradient.
    """

    def f(dx):
        shifted = _with_x_offsets(poly, dx)
        if soft:
            _, pts = manifold_points_soft(shifted, cfg, mask)
        else:
            pts, _ = _hard_points(shifted, mask)
        return mean_of_selected(pts)

    return jacobian(f, np.zeros(poly.shape[0])).ravel()


@dataclass(frozen=True)
class ManifoldReport:
    polygon: np.ndarray
    hard_idx: list
    soft_idx: list
    matches: bool
    grad_hard: np.ndarray
    grad_soft: np.ndarray


def run_case_study(n_vertices: int, select_tau: float, grad_tau: float,
                   mode, seed: int, polygons: int = 100):
    """Hard-vs-soft selection agreement and gradient sparsity over random
    convex polygons."""
    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(polygons):
        poly = random_convex_polygon(n_vertices, rng)
        hard_idx = manifold_points_hard(poly)
        probs, _ = manifold_points_soft(poly, SoftConfig(tau=select_tau,
                                                         mode=mode))
        soft_idx = [int(np.argmax(value_of(probs)[i])) for i in range(4)]
        g_hard = vertex_gradients(poly, SoftConfig(tau=grad_tau, mode=mode),
                                  soft=False)
        g_soft = vertex_gradients(poly, SoftConfig(tau=grad_tau, mode=mode),
                                  soft=True)
        reports.append(ManifoldReport(
            polygon=poly, hard_idx=hard_idx, soft_idx=soft_idx,
            matches=soft_idx == hard_idx, grad_hard=g_hard, grad_soft=g_soft))
    return reports
