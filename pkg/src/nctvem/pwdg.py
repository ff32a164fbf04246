"""Plane wave discontinuous Galerkin blocks for dispersion analysis.

Implements the interior-edge sesquilinear form with averaged-flux and
jump-penalty terms in closed form for plane-wave pairs; only the pieces the
infinite-lattice dispersion study needs (no boundary fluxes, no BVP solve).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import csinc, plane_wave_basis, polygon_planewave_integral


@dataclass(frozen=True)
class PwdgFluxes:
    """Jump penalties; alpha weights trace jumps, beta normal-derivative jumps.

    alpha = beta = 1/2 is the ultra weak variational formulation.
    """

    alpha: float = 0.5
    beta: float = 0.5

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("flux parameters must be positive")


def _edge_pw_products(k, edge_a, edge_b, dirs, center_u, center_v):
    """Matrix E[m, l] = int_e w_l^{(u)} conj(w_m^{(v)}) ds on a shared edge.

    The segment is given by endpoints; trial waves are centered at center_u,
    test waves at center_v.
    """
    a = np.asarray(edge_a, dtype=float)
    b = np.asarray(edge_b, dtype=float)
    mid = 0.5 * (a + b)
    length = np.linalg.norm(b - a)
    t = (b - a) / length
    tau = dirs @ t
    phase_u = np.exp(1j * k * (dirs @ (mid - center_u)))
    phase_v = np.exp(1j * k * (dirs @ (mid - center_v)))
    args = 0.5 * k * length * (tau[None, :] - tau[:, None])
    return (np.conj(phase_v)[:, None] * phase_u[None, :]
            * length * csinc(args))


def volume_block(poly, k, q):
    """Closed-form a^K(w_l, w_m) for the element's plane-wave basis."""
    basis = plane_wave_basis(k, q, poly)
    dirs = basis.directions
    p = len(dirs)
    M = np.zeros((p, p), dtype=complex)
    for m in range(p):
        for l in range(p):
            if l == m:
                continue
            kappa = k * (dirs[l] - dirs[m])
            vol = (polygon_planewave_integral(kappa, poly.vertices)
                   * np.exp(-1j * (kappa @ poly.barycenter)))
            M[m, l] = k * k * (dirs[l] @ dirs[m] - 1.0) * vol
    return M


def _shared_edges(poly_u, poly_v):
    """Common edges of two polygons as endpoint pairs, with local indices."""
    def key(pt):
        return (round(float(pt[0]), 9), round(float(pt[1]), 9))

    edges_v = {}
    for i in range(poly_v.n_edges):
        a, b = poly_v.edge_endpoints(i)
        edges_v[frozenset((key(a), key(b)))] = i
    shared = []
    for i in range(poly_u.n_edges):
        a, b = poly_u.edge_endpoints(i)
        j = edges_v.get(frozenset((key(a), key(b))))
        if j is not None:
            shared.append((i, j))
    return shared


def edge_coupling(k, dirs, edge_a, edge_b, n_u, n_v, center_u, center_v,
                  fluxes):
    """The four interior-edge terms for trial waves on the n_u side and test
    waves on the n_v side.

    With u a trial wave from element A (outward normal n_u on the edge) and
    v a test wave from element B (outward normal n_v), the contribution is
      (ik/2)(n_u . d_v) E  - (ik/2)(d_u . n_v) E
      + i beta k (d_u . n_u)(d_v . n_v) E + i alpha k (n_u . n_v) E
    where E[m, l] = int_e w_l conj(w_m).
    """
    E = _edge_pw_products(k, edge_a, edge_b, dirs, center_u, center_v)
    d_nu = dirs @ n_u
    d_nv = dirs @ n_v
    n_dot = float(n_u @ n_v)
    coef = (0.5 * 1j * k * d_nu[:, None]
            - 0.5 * 1j * k * d_nv[None, :]
            + 1j * fluxes.beta * k * d_nv[:, None] * d_nu[None, :]
            + 1j * fluxes.alpha * k * n_dot)
    return coef * E


def pair_block(poly_u, poly_v, k, q, fluxes=PwdgFluxes()):
    """Coupling block a(w_l on poly_u, w_m on poly_v) of the lattice form.

    poly_u carries the trial waves, poly_v the test waves.  Identical
    polygons get the volume term plus the same-side edge terms on every
    edge; edge-neighbors get the cross terms on the shared edges; otherwise
    the block is zero.
    """
    dirs = plane_wave_basis(k, q, poly_u).directions
    p = len(dirs)
    same = _polys_equal(poly_u, poly_v)
    block = np.zeros((p, p), dtype=complex)
    if same:
        block += volume_block(poly_u, k, q)
        for i in range(poly_u.n_edges):
            a, b = poly_u.edge_endpoints(i)
            n = poly_u.outward_normal(i)
            block += edge_coupling(k, dirs, a, b, n, n,
                                   poly_u.barycenter, poly_v.barycenter, fluxes)
        return block
    for i, j in _shared_edges(poly_u, poly_v):
        a, b = poly_u.edge_endpoints(i)
        n_u = poly_u.outward_normal(i)
        n_v = poly_v.outward_normal(j)
        block += edge_coupling(k, dirs, a, b, n_u, n_v,
                               poly_u.barycenter, poly_v.barycenter, fluxes)
    return block


def assemble_pwdg(mesh, k, q, fluxes=PwdgFluxes()):
    """Global coupling matrix of the lattice form on a mesh patch.

    Boundary edges carry no flux terms (they are treated by omission; the
    dispersion analysis only ever sees interior edges).
    """
    p = 2 * q + 1
    n = mesh.n_cells * p
    A = np.zeros((n, n), dtype=complex)
    for ci in range(mesh.n_cells):
        poly = mesh.polygon(ci)
        dirs = plane_wave_basis(k, q, poly).directions
        blk = volume_block(poly, k, q)
        for i in range(poly.n_edges):
            if mesh.edges[mesh.cell_edges[ci][i]].is_boundary:
                continue
            a, b = poly.edge_endpoints(i)
            nrm = poly.outward_normal(i)
            blk += edge_coupling(k, dirs, a, b, nrm, nrm,
                                 poly.barycenter, poly.barycenter, fluxes)
        A[ci * p:(ci + 1) * p, ci * p:(ci + 1) * p] = blk
    for edge in mesh.interior_edges:
        cu, cv = edge.cells
        for trial, test in ((cu, cv), (cv, cu)):
            pu, pv = mesh.polygon(trial), mesh.polygon(test)
            blk = np.zeros((p, p), dtype=complex)
            dirs = plane_wave_basis(k, q, pu).directions
            for i, j in _shared_edges(pu, pv):
                a, b = pu.edge_endpoints(i)
                blk += edge_coupling(k, dirs, a, b, pu.outward_normal(i),
                                     pv.outward_normal(j), pu.barycenter,
                                     pv.barycenter, fluxes)
            A[test * p:(test + 1) * p, trial * p:(trial + 1) * p] += blk
    return A


def _polys_equal(poly_u, poly_v):
    if poly_u.n_edges != poly_v.n_edges:
        return False
    def keys(poly):
        return sorted((round(float(x), 9), round(float(y), 9))
                      for x, y in poly.vertices)
    return keys(poly_u) == keys(poly_v)
