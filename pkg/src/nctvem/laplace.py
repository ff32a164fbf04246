"""Nonconforming Trefftz VEM for the Dirichlet-Laplace problem.

Local virtual functions are harmonic with polynomial Neumann traces and are
known only through scaled edge moments against Legendre polynomials.  All
computable quantities go through the energy projector onto the harmonic
polynomial space; the projector kernel is controlled by a stabilization in
degree-of-freedom coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import harmonic_basis, legendre_edge_values
from .quadrature import edge_rule, polygon_rule

DEFAULT_EDGE_QUAD = 20


class LaplaceElementOperators:
    """Projector, stabilization, and local stiffness for one element.

    DOF layout: p moments per edge, ordered by the element's local edge
    order; moments are taken in the edge's canonical parameterization so
    neighboring elements agree on shared DOFs.
    """

    def __init__(self, mesh, cell_id, p, stabilization="dofi-dofi"):
        poly = mesh.polygon(cell_id)
        self.cell_id = cell_id
        self.p = p
        self.basis = harmonic_basis(p, poly)
        self.edge_ids = list(mesh.cell_edges[cell_id])
        nd = self.basis.dim
        ne = len(self.edge_ids)
        self.n_dofs = p * ne

        D = np.zeros((self.n_dofs, nd))
        B = np.zeros((nd, self.n_dofs))
        G = np.zeros((nd, nd))
        P0 = np.zeros(nd)
        nq = p + 4
        for le, eid in enumerate(self.edge_ids):
            edge = mesh.edges[eid]
            n_out = poly.outward_normal(le)
            a = edge.midpoint - 0.5 * edge.length * edge.tangent
            b = edge.midpoint + 0.5 * edge.length * edge.tangent
            pts, wts = edge_rule(a, b, nq)
            s = (pts - edge.midpoint) @ edge.tangent
            leg = legendre_edge_values(p, s, edge.length)
            vals = self.basis.values(pts)
            dn = self.basis.gradients(pts) @ n_out
            sl = slice(le * p, (le + 1) * p)
            D[sl, :] = (wts[:, None] * leg).T @ vals / edge.length
            # expansion of the normal derivative in the edge Legendre basis:
            # a^K(v, q_j) = sum_e int_e v (n.grad q_j)
            coeff = (wts[:, None] * leg).T @ dn
            coeff *= (2 * np.arange(p) + 1)[:, None]
            B[:, sl] = coeff.T
            G += (wts[:, None] * vals).T @ dn
            P0 += wts @ vals

        self.D = D
        self.G = 0.5 * (G + G.T)
        # the constant mode is invisible to the energy form; pin it through
        # the boundary mean
        Gt = self.G.copy()
        Bt = B.copy()
        Gt[0, :] = P0
        Bt[0, :] = 0.0
        for le, eid in enumerate(self.edge_ids):
            Bt[0, le * p] = mesh.edges[eid].length
        self.projector = np.linalg.solve(Gt, Bt)

        consistency = self.projector.T @ self.G @ self.projector
        resid = np.eye(self.n_dofs) - D @ self.projector
        if stabilization == "dofi-dofi":
            S = np.eye(self.n_dofs)
        elif stabilization == "d-recipe":
            d = np.diag(consistency).copy()
            floor = 1e-12 * max(np.trace(consistency), 1.0e-300)
            S = np.diag(np.maximum(d, floor))
        else:
            raise ValueError(f"unknown stabilization: {stabilization!r}")
        self.stabilization = resid.T @ S @ resid
        self.local_matrix = consistency + self.stabilization


def local_dofs_laplace(mesh, cell_id, p):
    """(edge id, moment index) pairs in the element's local DOF order."""
    return [(eid, a) for eid in mesh.cell_edges[cell_id] for a in range(p)]


def interpolate_laplace(u, mesh, p, n_quad=DEFAULT_EDGE_QUAD):
    """Global DOF vector of the moment interpolant of u."""
    dofs = np.zeros(mesh.n_edges * p)
    for edge in mesh.edges:
        a = edge.midpoint - 0.5 * edge.length * edge.tangent
        b = edge.midpoint + 0.5 * edge.length * edge.tangent
        pts, wts = edge_rule(a, b, n_quad)
        s = (pts - edge.midpoint) @ edge.tangent
        leg = legendre_edge_values(p, s, edge.length)
        vals = np.asarray(u(pts))
        dofs[edge.id * p:(edge.id + 1) * p] = (wts[:, None] * leg).T @ vals / edge.length
    return dofs


@dataclass
class LaplaceSolution:
    mesh: object
    p: int
    dofs: np.ndarray
    operators: list

    def projected_h1_error(self, grad_u, n_quad=12):
        """Broken H1 distance between u and the projected discrete solution."""
        total = 0.0
        for ops in self.operators:
            loc = _gather(self.dofs, self.mesh, ops.cell_id, self.p)
            coeff = ops.projector @ loc
            poly = self.mesh.polygon(ops.cell_id)
            pts, wts = polygon_rule(poly.vertices, n_quad)
            gh = np.tensordot(ops.basis.gradients(pts), coeff, axes=([1], [0]))
            gu = np.asarray(grad_u(pts), dtype=float)
            total += np.sum(wts * ((gu - gh) ** 2).sum(axis=1))
        return float(np.sqrt(total))


def _gather(dofs, mesh, cell_id, p):
    idx = [eid * p + a for eid, a in local_dofs_laplace(mesh, cell_id, p)]
    return dofs[idx]


def assemble_laplace(mesh, p, stabilization="dofi-dofi"):
    ops = [LaplaceElementOperators(mesh, ci, p, stabilization)
           for ci in range(mesh.n_cells)]
    rows, cols, vals = [], [], []
    for op in ops:
        idx = np.array([eid * p + a
                        for eid, a in local_dofs_laplace(mesh, op.cell_id, p)])
        r, c = np.meshgrid(idx, idx, indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(op.local_matrix.ravel())
    n = mesh.n_edges * p
    A = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    return A, ops


def solve_laplace(mesh, p, g, stabilization="dofi-dofi"):
    """Solve the Dirichlet problem with boundary data g imposed by moments."""
    A, ops = assemble_laplace(mesh, p, stabilization)
    n = mesh.n_edges * p
    dofs = np.zeros(n)
    fixed = np.zeros(n, dtype=bool)
    for edge in mesh.boundary_edges:
        a = edge.midpoint - 0.5 * edge.length * edge.tangent
        b = edge.midpoint + 0.5 * edge.length * edge.tangent
        pts, wts = edge_rule(a, b, DEFAULT_EDGE_QUAD)
        s = (pts - edge.midpoint) @ edge.tangent
        leg = legendre_edge_values(p, s, edge.length)
        gv = np.asarray(g(pts))
        sl = slice(edge.id * p, (edge.id + 1) * p)
        dofs[sl] = (wts[:, None] * leg).T @ gv / edge.length
        fixed[sl] = True
    free = ~fixed
    rhs = -A[free][:, fixed] @ dofs[fixed]
    K = A[free][:, free]
    try:
        sol = spla.spsolve(K.tocsc(), rhs)
    except Exception as exc:  # pragma: no cover
        raise RuntimeError("singular Laplace system; check mesh quality") from exc
    if not np.all(np.isfinite(sol)):
        raise RuntimeError("singular Laplace system; check mesh quality")
    dofs[free] = sol
    return LaplaceSolution(mesh=mesh, p=p, dofs=dofs, operators=ops)


def nonconformity_measure(grad_u, dofs, mesh, p, n_quad=DEFAULT_EDGE_QUAD):
    """Computable surrogate of the interelement jump form.

    The integrand's component in the edge polynomial space pairs with the
    shared trace moments and cancels exactly on interior edges; what remains
    pairs the non-polynomial part of the normal flux with the jump of the
    element-wise projections, which is computable.  Edge contributions are
    accumulated in absolute value.
    """
    ops = {ci: LaplaceElementOperators(mesh, ci, p) for ci in range(mesh.n_cells)}
    total = 0.0
    for edge in mesh.interior_edges:
        a = edge.midpoint - 0.5 * edge.length * edge.tangent
        b = edge.midpoint + 0.5 * edge.length * edge.tangent
        pts, wts = edge_rule(a, b, n_quad)
        s = (pts - edge.midpoint) @ edge.tangent
        flux = np.asarray(grad_u(pts), dtype=float) @ edge.normal
        leg = legendre_edge_values(p, s, edge.length)
        mom = (wts[:, None] * leg).T @ flux * (2 * np.arange(p) + 1) / edge.length
        flux_rem = flux - leg @ mom
        traces = []
        for ci in edge.cells:
            op = ops[ci]
            coeff = op.projector @ _gather(dofs, mesh, ci, p)
            traces.append(op.basis.values(pts) @ coeff)
        jump = traces[0] - traces[1]
        total += abs(float(np.sum(wts * flux_rem * jump)))
    return total
