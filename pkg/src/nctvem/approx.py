"""Best-approximation errors of Trefftz spaces on a mesh.

Element-wise least squares at quadrature points; serves as the
approximation-term oracle in the a priori error splits.
"""

from __future__ import annotations

import numpy as np

from .basis import harmonic_basis, plane_wave_basis
from .quadrature import polygon_rule

RCOND = 1e-13


def _ls_residual(rows, target):
    sol, res, rank, sv = np.linalg.lstsq(rows, target, rcond=RCOND)
    r = rows @ sol - target
    return float(np.real(np.vdot(r, r)))


def best_approx_error(u, grad_u, mesh, space, *, p=None, k=None, q=None,
                      norm="broken-h1", n_quad=15):
    """Broken-norm distance of u to the discontinuous Trefftz space.

    space is "harmonic" (degree p) or "planewave" (wavenumber k, degree q);
    norm is "broken-h1" (gradient seminorm) or "1kTh" (gradient plus
    k-weighted L2).  u and grad_u are vectorized callables.
    """
    if norm not in ("broken-h1", "1kTh"):
        raise ValueError(f"unknown norm: {norm!r}")
    total = 0.0
    for ci in range(mesh.n_cells):
        poly = mesh.polygon(ci)
        pts, wts = polygon_rule(poly.vertices, n_quad)
        sw = np.sqrt(wts)
        if space == "harmonic":
            basis = harmonic_basis(p, poly)
            vals = basis.values(pts).astype(complex)
            grads = basis.gradients(pts).astype(complex)
            kw = 1.0 if norm == "1kTh" else 0.0
        elif space == "planewave":
            basis = plane_wave_basis(k, q, poly)
            vals = basis.values(pts)
            grads = basis.gradients(pts)
            kw = k if norm == "1kTh" else 0.0
        else:
            raise ValueError(f"unknown space: {space!r}")
        gu = np.asarray(grad_u(pts), dtype=complex)
        blocks = [sw[:, None] * grads[:, :, 0], sw[:, None] * grads[:, :, 1]]
        targets = [sw * gu[:, 0], sw * gu[:, 1]]
        if kw:
            uu = np.asarray(u(pts), dtype=complex)
            blocks.append(kw * sw[:, None] * vals)
            targets.append(kw * sw * uu)
        rows = np.vstack(blocks)
        target = np.concatenate(targets)
        total += _ls_residual(rows, target)
    return np.sqrt(max(total, 0.0))
