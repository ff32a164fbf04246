"""Nonconforming Trefftz VEM for the Helmholtz impedance problem.

Local virtual functions solve the Helmholtz equation with impedance traces
in filtered edge plane-wave spaces; DOFs are scaled edge moments against the
filtered orthogonal trace basis.  The energy projector onto the bulk
plane-wave space is computable from those moments because normal derivatives
of plane waves restrict to edge plane waves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import (EdgeTraceSpace, SIGMA_REL_DEFAULT, plane_wave_basis,
                    polygon_planewave_integral)
from .quadrature import edge_rule, polygon_rule


def pw_directions(q):
    p = 2 * q + 1
    angles = 2 * np.pi * np.arange(p) / p
    return np.column_stack([np.cos(angles), np.sin(angles)])


def impedance_factor(k, d, n):
    """gamma_I of a unit plane wave is this multiple of its edge trace."""
    return 1j * k * (1.0 + float(np.dot(d, n)))


def build_edge_spaces(mesh, k, q, sigma_rel=SIGMA_REL_DEFAULT):
    dirs = pw_directions(q)
    return {e.id: EdgeTraceSpace(e, k, dirs, sigma_rel) for e in mesh.edges}


def pw_volume_form(poly, k, directions):
    """Closed-form matrix M[m, l] = a^K(w_l, w_m) of the plane-wave block.

    a^K(u, v) = int_K grad u . conj(grad v) - k^2 int_K u conj(v), with
    plane waves centered at the element barycenter.
    """
    p = len(directions)
    M = np.zeros((p, p), dtype=complex)
    center = poly.barycenter
    for m in range(p):
        for l in range(p):
            if l == m:
                continue
            kappa = k * (directions[l] - directions[m])
            vol = (polygon_planewave_integral(kappa, poly.vertices)
                   * np.exp(-1j * (kappa @ center)))
            M[m, l] = k * k * (directions[l] @ directions[m] - 1.0) * vol
    return M


class HelmholtzElementOperators:
    """Projector, stabilization, and local discrete form for one element."""

    def __init__(self, mesh, cell_id, k, q, spaces, strict=True):
        poly = mesh.polygon(cell_id)
        self.cell_id = cell_id
        self.k = float(k)
        self.q = int(q)
        self.basis = plane_wave_basis(k, q, poly)
        dirs = self.basis.directions
        p = len(dirs)
        self.edge_ids = list(mesh.cell_edges[cell_id])
        self.spaces = [spaces[eid] for eid in self.edge_ids]
        sizes = [s.n_filtered for s in self.spaces]
        self.dof_slices = []
        off = 0
        for sz in sizes:
            self.dof_slices.append(slice(off, off + sz))
            off += sz
        self.n_dofs = off

        M = pw_volume_form(poly, k, dirs)
        B = np.zeros((p, self.n_dofs), dtype=complex)
        D = np.zeros((self.n_dofs, p), dtype=complex)
        for le, space in enumerate(self.spaces):
            n_out = poly.outward_normal(le)
            sl = self.dof_slices[le]
            phase = np.exp(1j * k * (dirs @ (space.midpoint - poly.barycenter)))
            dn = dirs @ n_out
            # a^K(v, w_m) = sum_e int_e v conj(d_n w_m); the normal
            # derivative trace lies in the edge plane-wave span
            B[:, sl] = (-1j * k * dn * np.conj(phase))[:, None] * space.Q * space.h_e
            D[sl, :] = (phase[None, :] * space.lam[:, None]
                        * np.conj(space.Q).T) / space.h_e

        self.M = M
        self.D = D
        sv = np.linalg.svd(M, compute_uv=False)
        self.cond_M = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
        if strict and self.cond_M > 1e12:
            raise RuntimeError(
                f"plane-wave block condition {self.cond_M:.2e} exceeds 1e12 "
                "(resonance proximity or excessive filtering)")
        self.projector = np.linalg.solve(M, B)
        # crude projector-continuity proxy: reciprocal of the DOF-coordinate
        # operator norm; not claimed to match any analytic constant
        self.beta_proxy = 1.0 / max(np.linalg.norm(self.projector, 2), 1e-300)
        consistency = np.conj(self.projector).T @ M @ self.projector
        consistency = 0.5 * (consistency + np.conj(consistency).T)
        resid = np.eye(self.n_dofs) - D @ self.projector
        # D-recipe: diagonal of the projected stiffness on the canonical
        # basis.  The full projected-stiffness matrix would annihilate the
        # (I - D Pi) residual exactly (Pi D = I), so only its diagonal
        # carries information onto ker(Pi).
        diag = np.abs(np.real(np.diag(consistency)))
        floor = 1e-12 * max(float(diag.max()), 1e-300)
        S = np.diag(np.maximum(diag, floor))
        self.stabilization = np.conj(resid).T @ S @ resid
        self.local_matrix = consistency + self.stabilization


@dataclass
class HelmholtzSolution:
    mesh: object
    k: float
    q: int
    dofs: np.ndarray
    operators: list
    spaces: dict
    offsets: np.ndarray
    min_singular_value: float

    def local_dofs(self, cell_id):
        op = self.operators[cell_id]
        return np.concatenate([
            self.dofs[self.offsets[eid]:self.offsets[eid]
                      + self.spaces[eid].n_filtered]
            for eid in op.edge_ids])

    def projected_weighted_error(self, u, grad_u, n_quad=15):
        """Broken 1,k-norm distance between u and the projected solution."""
        total = 0.0
        for op in self.operators:
            coeff = op.projector @ self.local_dofs(op.cell_id)
            poly = self.mesh.polygon(op.cell_id)
            pts, wts = polygon_rule(poly.vertices, n_quad)
            vals = op.basis.values(pts) @ coeff
            grads = np.tensordot(op.basis.gradients(pts), coeff, axes=([1], [0]))
            du = np.asarray(grad_u(pts), dtype=complex) - grads
            dv = np.asarray(u(pts), dtype=complex) - vals
            total += np.sum(wts * ((np.abs(du) ** 2).sum(axis=1)
                                   + self.k ** 2 * np.abs(dv) ** 2))
        return float(np.sqrt(total))


def dof_offsets(mesh, spaces):
    offsets = np.zeros(mesh.n_edges + 1, dtype=int)
    for e in mesh.edges:
        offsets[e.id + 1] = spaces[e.id].n_filtered
    return np.cumsum(offsets)


def assemble_helmholtz(mesh, k, q, sigma_rel=SIGMA_REL_DEFAULT, strict=True):
    spaces = build_edge_spaces(mesh, k, q, sigma_rel)
    offsets = dof_offsets(mesh, spaces)
    ops = [HelmholtzElementOperators(mesh, ci, k, q, spaces, strict=strict)
           for ci in range(mesh.n_cells)]
    rows, cols, vals = [], [], []
    for op in ops:
        idx = np.concatenate([
            np.arange(offsets[eid], offsets[eid] + spaces[eid].n_filtered)
            for eid in op.edge_ids])
        r, c = np.meshgrid(idx, idx, indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(op.local_matrix.ravel())
    # impedance boundary form ik (proj u, proj v) on boundary edges:
    # diagonal ik h_e^2 / lam_a in the filtered DOF coordinates
    for e in mesh.boundary_edges:
        space = spaces[e.id]
        idx = np.arange(offsets[e.id], offsets[e.id] + space.n_filtered)
        rows.append(idx)
        cols.append(idx)
        vals.append(1j * k * e.length ** 2 / space.lam)
    n = offsets[-1]
    A = sp.coo_matrix((np.concatenate([np.asarray(v, dtype=complex).ravel()
                                       for v in vals]),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    return A, ops, spaces, offsets


def solve_helmholtz(mesh, k, q, g, sigma_rel=SIGMA_REL_DEFAULT, n_quad=None):
    """Solve the impedance problem gamma_I u = g on the boundary."""
    if n_quad is None:
        n_quad = max(20, 2 * q + 10)
    A, ops, spaces, offsets = assemble_helmholtz(mesh, k, q, sigma_rel)
    rhs = np.zeros(offsets[-1], dtype=complex)
    for e in mesh.boundary_edges:
        space = spaces[e.id]
        dg = space.dofs_of_function(g, n_quad)
        idx = np.arange(offsets[e.id], offsets[e.id] + space.n_filtered)
        rhs[idx] = e.length ** 2 * dg / space.lam
    try:
        sol = spla.spsolve(A.tocsc(), rhs)
    except Exception as exc:  # pragma: no cover
        raise RuntimeError("singular Helmholtz system (resonance?)") from exc
    if not np.all(np.isfinite(sol)):
        raise RuntimeError("singular Helmholtz system (resonance?)")
    smin = _min_singular_estimate(A)
    return HelmholtzSolution(mesh=mesh, k=k, q=q, dofs=sol, operators=ops,
                             spaces=spaces, offsets=offsets,
                             min_singular_value=smin)


def _min_singular_estimate(A, n_iter=60):
    if A.shape[0] <= 400:
        return float(np.linalg.svd(A.toarray(), compute_uv=False)[-1])
    # power iteration on (A^H A)^{-1} through one LU factorization
    try:
        lu = spla.splu(A.tocsc())
    except Exception:  # pragma: no cover
        return float("nan")
    rng = np.random.default_rng(0)
    x = rng.standard_normal(A.shape[0]) + 1j * rng.standard_normal(A.shape[0])
    x /= np.linalg.norm(x)
    sigma = np.inf
    for _ in range(n_iter):
        y = lu.solve(lu.solve(x, trans="H"))
        ny = np.linalg.norm(y)
        if ny == 0.0:  # pragma: no cover
            break
        sigma = 1.0 / np.sqrt(ny)
        x = y / ny
    return float(sigma)
