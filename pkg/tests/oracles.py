"""Independent reference computations for the test suite.

Everything here deliberately avoids the package's own quadrature and
assembly paths: segment/area integrals use scipy adaptive quadrature or a
vertex-fan triangulation (the package fans from the centroid), matrix
eigenvalues come from companion linearizations, and norms of virtual
functions are approximated with a dense P1 finite element subdivision of
the element.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad


def edge_integral(f, a, b, tol=1e-12):
    """Adaptive integral of a (possibly complex) function along a segment."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = np.linalg.norm(b - a)

    def param(t):
        return a[None, :] + t * (b - a)[None, :]

    re = quad(lambda t: np.real(np.asarray(f(param(t)), dtype=complex)[0]),
              0.0, 1.0, epsabs=tol, limit=200)[0]
    im = quad(lambda t: np.imag(np.asarray(f(param(t)), dtype=complex)[0]),
              0.0, 1.0, epsabs=tol, limit=200)[0]
    return (re + 1j * im) * length


def polygon_integral(f, vertices, n=48):
    """Integral over a polygon by fanning triangles from vertex 0.

    Uses a tensor Gauss rule collapsed onto each triangle; independent of
    the package's centroid-fan rule.
    """
    vertices = np.asarray(vertices, dtype=float)
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    total = 0.0 + 0.0j
    for i in range(1, len(vertices) - 1):
        v0, v1, v2 = vertices[0], vertices[i], vertices[i + 1]
        e1, e2 = v1 - v0, v2 - v0
        jac = abs(e1[0] * e2[1] - e1[1] * e2[0])
        for xi, wi in zip(x, w):
            pts = v0 + xi * (v1 - v0) \
                + np.outer(x * (1.0 - xi), v2 - v0)
            total += jac * wi * np.sum(w * (1.0 - xi)
                                       * np.asarray(f(pts), dtype=complex))
    return total


def quadratic_polyeig(A0, A1, A2):
    """Eigenvalues of A0 + z A1 + z^2 A2 via companion linearization."""
    from scipy.linalg import eig
    n = A0.shape[0]
    AA = np.block([[np.zeros((n, n)), np.eye(n)], [-A0, -A1]])
    BB = np.block([[np.eye(n), np.zeros((n, n))],
                   [np.zeros((n, n)), A2]])
    lam = eig(AA, BB, right=False)
    return lam[np.isfinite(lam)]


class SquareP1Grid:
    """P1 finite elements on a uniform triangulation of an axis-aligned
    square, used as a dense surrogate for norms of virtual functions."""

    def __init__(self, origin, side, n=24):
        self.origin = np.asarray(origin, dtype=float)
        self.side = float(side)
        self.n = n
        xs = np.linspace(0.0, side, n + 1)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        self.nodes = np.column_stack([X.ravel(), Y.ravel()]) + self.origin
        nid = lambda i, j: i * (n + 1) + j
        tris = []
        for i in range(n):
            for j in range(n):
                tris.append([nid(i, j), nid(i + 1, j), nid(i + 1, j + 1)])
                tris.append([nid(i, j), nid(i + 1, j + 1), nid(i, j + 1)])
        self.tris = np.asarray(tris)
        self._assemble()
        self._boundary()

    def _assemble(self):
        nn = len(self.nodes)
        K = np.zeros((nn, nn))
        M = np.zeros((nn, nn))
        for tri in self.tris:
            p0, p1, p2 = self.nodes[tri]
            J = np.column_stack([p1 - p0, p2 - p0])
            area = 0.5 * abs(np.linalg.det(J))
            Jinv = np.linalg.inv(J)
            g = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]) @ Jinv
            K[np.ix_(tri, tri)] += area * g @ g.T
            Mref = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 12.0
            M[np.ix_(tri, tri)] += area * Mref
        self.K = K
        self.M = M

    def _boundary(self):
        n = self.n
        nid = lambda i, j: i * (n + 1) + j
        segs = []
        for i in range(n):
            segs.append((nid(i, 0), nid(i + 1, 0)))
            segs.append((nid(i, n), nid(i + 1, n)))
            segs.append((nid(0, i), nid(0, i + 1)))
            segs.append((nid(n, i), nid(n, i + 1)))
        self.boundary_segments = segs

    def segment_functional(self, a, b, weight, n_quad=10):
        """Nodal vector F with F @ u = int over [a, b] of weight * u ds
        for P1 functions u; [a, b] must be a union of boundary segments."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        x, w = np.polynomial.legendre.leggauss(n_quad)
        x = 0.5 * (x + 1.0)
        w = 0.5 * w
        out = np.zeros(len(self.nodes), dtype=complex)
        for i0, i1 in self.boundary_segments:
            if not (_on_segment(self.nodes[i0], a, b)
                    and _on_segment(self.nodes[i1], a, b)):
                continue
            pa, pb = self.nodes[i0], self.nodes[i1]
            pts = pa[None, :] + x[:, None] * (pb - pa)[None, :]
            length = np.linalg.norm(pb - pa)
            vals = np.asarray(weight(pts), dtype=complex)
            out[i0] += length * np.sum(w * vals * (1.0 - x))
            out[i1] += length * np.sum(w * vals * x)
        return out

    def boundary_mass(self):
        nn = len(self.nodes)
        Mb = np.zeros((nn, nn))
        for i0, i1 in self.boundary_segments:
            h = np.linalg.norm(self.nodes[i1] - self.nodes[i0])
            idx = [i0, i1]
            Mb[np.ix_(idx, idx)] += h * np.array([[2.0, 1.0],
                                                  [1.0, 2.0]]) / 6.0
        return Mb

    def h1_seminorm_sq(self, u):
        return float(np.real(np.conj(u) @ self.K @ u))

    def l2_norm_sq(self, u):
        return float(np.real(np.conj(u) @ self.M @ u))

    def interpolate(self, f):
        return np.asarray(f(self.nodes))


def _on_segment(p, a, b, tol=1e-10):
    d = b - a
    L2 = float(d @ d)
    t = float((p - a) @ d) / L2
    if t < -tol or t > 1.0 + tol:
        return False
    proj = a + np.clip(t, 0.0, 1.0) * d
    return bool(np.linalg.norm(p - proj) < tol)


def square_element_edges(origin, side):
    """(a, b, midpoint, tangent, length) per edge of an axis-aligned square,
    with the package's canonical (lexicographic) tangent orientation."""
    o = np.asarray(origin, dtype=float)
    s = float(side)
    corners = [o, o + (s, 0.0), o + (s, s), o + (0.0, s)]
    edges = []
    for i in range(4):
        a, b = np.asarray(corners[i]), np.asarray(corners[(i + 1) % 4])
        if (round(b[0], 9), round(b[1], 9)) < (round(a[0], 9), round(a[1], 9)):
            a, b = b, a
        t = (b - a) / np.linalg.norm(b - a)
        edges.append((a, b, 0.5 * (a + b), t, float(np.linalg.norm(b - a))))
    return edges


def harmonic_neumann_reconstruction(grid, edges, p):
    """Virtual harmonic functions with polynomial Neumann traces.

    Returns (moment_map, sols): column c of sols is the mean-zero FEM
    solution with Neumann datum equal to the c-th edge Legendre basis
    function (plus the constant function as the last column), and
    moment_map[d, c] is its d-th scaled edge moment.
    """
    from nctvem.basis import legendre_edge_values

    n_data = len(edges) * p
    nn = len(grid.nodes)
    sols = np.zeros((nn, n_data + 1))
    mean = grid.M.sum(axis=0)
    area = mean.sum()
    K = grid.K + np.outer(mean, mean) / area  # pin the mean
    weights = []
    for c in range(n_data):
        e, alpha = divmod(c, p)
        a, b, mid, tan, h_e = edges[e]

        def leg(pts, mid=mid, tan=tan, h_e=h_e, alpha=alpha):
            s = (pts - mid) @ tan
            return legendre_edge_values(alpha + 1, s, h_e)[:, alpha]

        F = grid.segment_functional(a, b, leg).real
        weights.append(F / h_e)
        rhs = F - mean * (F.sum() / area)  # enforce compatibility
        sols[:, c] = np.linalg.solve(K, rhs)
    sols[:, n_data] = 1.0

    moment_map = np.array([w @ sols for w in weights])
    return moment_map, sols


def impedance_reconstruction(grid, spaces, edges, k):
    """Virtual Helmholtz functions with filtered impedance traces.

    spaces: EdgeTraceSpace per element edge; edges: (a, b) endpoint pairs
    in the same order.  Solves the local impedance problem for every
    filtered basis datum; returns (dof_map, sols) with dof_map[d, c] the
    d-th scaled filtered moment of solution c.
    """
    sizes = [sp.n_filtered for sp in spaces]
    starts = np.concatenate([[0], np.cumsum(sizes)])
    n_data = int(starts[-1])
    nn = len(grid.nodes)
    A = grid.K - k * k * grid.M + 1j * k * grid.boundary_mass()
    sols = np.zeros((nn, n_data), dtype=complex)
    weights = []
    for e, sp in enumerate(spaces):
        a, b = edges[e]
        for alpha in range(sizes[e]):
            def trace(pts, sp=sp, alpha=alpha):
                return sp.filtered_values(sp.arclength(pts))[:, alpha]

            F = grid.segment_functional(a, b, trace)
            sols[:, starts[e] + alpha] = np.linalg.solve(A, F)
            Fm = grid.segment_functional(
                a, b, lambda pts, sp=sp, alpha=alpha:
                np.conj(sp.filtered_values(sp.arclength(pts))[:, alpha]))
            weights.append(Fm / sp.h_e)

    dof_map = np.array([w @ sols for w in weights])
    return dof_map, sols
