"""Gauss quadrature on edges and on polygons via fan triangulation."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_rule(n):
    """Gauss-Legendre nodes/weights on [-1, 1], exact through degree 2n-1."""
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def edge_rule(a, b, n):
    """Quadrature points (n, 2) and weights for a segment from a to b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x, w = gauss_rule(n)
    pts = 0.5 * (a + b) + 0.5 * np.outer(x, b - a)
    wts = 0.5 * np.linalg.norm(b - a) * w
    return pts, wts


@lru_cache(maxsize=None)
def _triangle_rule_ref(n):
    """Tensor rule on the reference triangle via the Duffy map."""
    x, w = gauss_rule(n)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    U, V = np.meshgrid(u, u, indexing="ij")
    W = np.outer(wu, wu) * (1.0 - U)
    P = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
    return P, W.ravel()


def triangle_rule(tri, n):
    """Quadrature for a triangle given as a (3, 2) vertex array."""
    tri = np.asarray(tri, dtype=float)
    ref_pts, ref_wts = _triangle_rule_ref(n)
    J = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    pts = tri[0] + ref_pts @ J.T
    wts = abs(np.linalg.det(J)) * ref_wts
    return pts, wts


def polygon_rule(vertices, n):
    """Quadrature for a polygon star-shaped about its centroid."""
    vertices = np.asarray(vertices, dtype=float)
    x, y = vertices[:, 0], vertices[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    area = 0.5 * np.sum(cross)
    cx = np.sum((x + np.roll(x, -1)) * cross) / (6.0 * area)
    cy = np.sum((y + np.roll(y, -1)) * cross) / (6.0 * area)
    center = np.array([cx, cy])
    pts, wts = [], []
    m = len(vertices)
    for i in range(m):
        tri = np.array([center, vertices[i], vertices[(i + 1) % m]])
        p, w = triangle_rule(tri, n)
        pts.append(p)
        wts.append(w)
    return np.vstack(pts), np.concatenate(wts)
