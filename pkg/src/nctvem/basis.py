"""Trefftz bases: harmonic polynomials, plane waves, and edge trace spaces.

Harmonic polynomials are built from powers of the scaled complex variable
z_hat = ((x - x_K) + i(y - y_K)) / h_K, so every member is harmonic by
construction and conditioning is uniform under mesh refinement.  Plane-wave
products are integrated in closed form on segments and polygons; the edge
trace machinery orthogonalizes plane-wave restrictions per edge and drops
near-dependent combinations below a spectral threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .quadrature import edge_rule, polygon_rule

SIGMA_REL_DEFAULT = 1e-13


class HarmonicPolyBasis:
    """The 2p+1 harmonic polynomials of degree <= p on an element.

    Ordering: 1, Re z_hat, Im z_hat, Re z_hat^2, Im z_hat^2, ...
    """

    def __init__(self, p, center, scale):
        if p < 1:
            raise ValueError("degree must be >= 1")
        self.p = p
        self.center = np.asarray(center, dtype=float)
        self.scale = float(scale)

    @property
    def dim(self):
        return 2 * self.p + 1

    def _zhat(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        d = (points - self.center) / self.scale
        return d[:, 0] + 1j * d[:, 1]

    def values(self, points):
        """Basis values, shape (npoints, 2p+1)."""
        z = self._zhat(points)
        out = np.empty((len(z), self.dim))
        out[:, 0] = 1.0
        zp = np.ones_like(z)
        for m in range(1, self.p + 1):
            zp = zp * z
            out[:, 2 * m - 1] = zp.real
            out[:, 2 * m] = zp.imag
        return out

    def gradients(self, points):
        """Basis gradients, shape (npoints, 2p+1, 2)."""
        z = self._zhat(points)
        out = np.zeros((len(z), self.dim, 2))
        zp = np.ones_like(z)
        for m in range(1, self.p + 1):
            c = m / self.scale
            out[:, 2 * m - 1, 0] = c * zp.real
            out[:, 2 * m - 1, 1] = -c * zp.imag
            out[:, 2 * m, 0] = c * zp.imag
            out[:, 2 * m, 1] = c * zp.real
            zp = zp * z
        return out

    def coefficient_table(self, j):
        """Integer monomial coefficients of member j in x_hat, y_hat.

        Returns a (p+1, p+1) array C with member = sum C[a, b] x_hat^a y_hat^b.
        Exact, so the zero-Laplacian property can be checked symbolically.
        """
        C = np.zeros((self.p + 1, self.p + 1), dtype=object)
        if j == 0:
            C[0, 0] = 1
            return C
        m = (j + 1) // 2
        want_real = (j % 2 == 1)
        for t in range(m + 1):
            c = comb(m, t)
            if want_real and t % 2 == 0:
                C[m - t, t] = (-1) ** (t // 2) * c
            elif not want_real and t % 2 == 1:
                C[m - t, t] = (-1) ** ((t - 1) // 2) * c
        return C


def harmonic_basis(p, polygon):
    return HarmonicPolyBasis(p, polygon.barycenter, polygon.diameter)


def legendre_edge_values(n_funcs, s, h_e):
    """Values of the Legendre edge basis m_1..m_n at arclength offsets s.

    s is measured from the edge midpoint along the canonical tangent;
    m_alpha = P_{alpha-1}(2 s / h_e), so int_e m_a m_b = delta_ab h_e/(2a-1).
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    t = 2.0 * s / h_e
    out = np.empty((len(s), n_funcs))
    for a in range(n_funcs):
        coeffs = np.zeros(a + 1)
        coeffs[a] = 1.0
        out[:, a] = np.polynomial.legendre.legval(t, coeffs)
    return out


@dataclass(frozen=True)
class PlaneWaveBasis:
    """Equispaced unit-direction plane waves w_l(x) = exp(i k d_l.(x - x_K))."""

    k: float
    q: int
    center: np.ndarray
    directions: np.ndarray

    @property
    def p(self):
        return len(self.directions)

    @property
    def delta(self):
        """Angular separation relative to 2 pi / p (1 for equispaced)."""
        angles = np.sort(np.arctan2(self.directions[:, 1], self.directions[:, 0]))
        gaps = np.diff(np.concatenate([angles, [angles[0] + 2 * np.pi]]))
        return float(gaps.min() / (2 * np.pi / self.p))

    def values(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        phase = (points - self.center) @ self.directions.T
        return np.exp(1j * self.k * phase)

    def gradients(self, points):
        vals = self.values(points)
        return 1j * self.k * vals[:, :, None] * self.directions[None, :, :]


def plane_wave_basis(k, q, polygon):
    """2q+1 equispaced directions with d_1 = (1, 0)."""
    if k <= 0 or q < 1:
        raise ValueError("need k > 0 and q >= 1")
    p = 2 * q + 1
    angles = 2 * np.pi * np.arange(p) / p
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    return PlaneWaveBasis(k=float(k), q=int(q),
                          center=np.asarray(polygon.barycenter, dtype=float),
                          directions=dirs)


def csinc(z):
    """sin(z)/z, stable near zero, valid for complex arguments."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-6
    zs = np.where(small, 1.0, z)
    out = np.sin(zs) / zs
    series = 1.0 - z * z / 6.0 + z ** 4 / 120.0
    return np.where(small, series, out)


def segment_planewave_integral(kappa, a, b):
    """Closed form of int over segment [a, b] of exp(i kappa . x) ds."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    kappa = np.asarray(kappa)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    length = 2.0 * np.linalg.norm(half)
    return length * np.exp(1j * (kappa @ mid)) * complex(csinc(kappa @ half))


def polygon_planewave_integral(kappa, vertices):
    """Closed form of int over polygon K of exp(i kappa . x) dx.

    Uses the divergence identity to reduce to edge integrals; falls back
    to quadrature when |kappa| h_K is too small for the 1/|kappa|^2 form.
    """
    vertices = np.asarray(vertices, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    diffs = vertices[:, None, :] - vertices[None, :, :]
    h = np.sqrt((diffs ** 2).sum(-1).max())
    knorm = np.linalg.norm(kappa)
    if knorm * h < 1e-4:
        pts, wts = polygon_rule(vertices, 10)
        return complex(np.sum(wts * np.exp(1j * (pts @ kappa))))
    total = 0.0 + 0.0j
    m = len(vertices)
    for i in range(m):
        a, b = vertices[i], vertices[(i + 1) % m]
        t = (b - a) / np.linalg.norm(b - a)
        n = np.array([t[1], -t[0]])
        total += (kappa @ n) * segment_planewave_integral(kappa, a, b)
    return complex(total * (-1j) / knorm ** 2)


def ortho_filter(gram, sigma_rel=SIGMA_REL_DEFAULT):
    """Orthogonalize edge traces and drop near-null combinations.

    Eigendecomposes the Hermitian Gram matrix and keeps eigenpairs with
    |lambda| >= sigma_rel * max |lambda|, ordered by decreasing eigenvalue.
    Returns (Q, lam) for the kept columns; the filtered functions
    w_hat_a = sum_r Q[r, a] w_r are L2-orthogonal with norms sqrt(lam).
    """
    lam, Q = np.linalg.eigh(gram)
    lam_max = np.abs(lam).max()
    if lam_max == 0.0:
        raise ValueError("edge trace Gram is identically zero")
    keep = np.abs(lam) >= sigma_rel * lam_max
    if not np.any(keep):
        raise ValueError("all edge trace eigenvalues fall below the filter")
    idx = np.nonzero(keep)[0][np.argsort(-lam[keep])]
    return Q[:, idx], lam[idx]


class EdgeTraceSpace:
    """Filtered plane-wave trace space on a single edge.

    The unfiltered traces are the bulk plane waves restricted to the edge
    and stripped of their constant phase: u_r(s) = exp(i k tau_r s) with
    tau_r = d_r . t_e and s the arclength from the edge midpoint along the
    canonical tangent.  Degrees of freedom are the scaled moments
    dof_a(v) = (1/h_e) int_e v conj(w_hat_a) ds against the filtered basis.
    """

    def __init__(self, edge, k, directions, sigma_rel=SIGMA_REL_DEFAULT):
        self.edge_id = edge.id
        self.k = float(k)
        self.h_e = edge.length
        self.midpoint = np.asarray(edge.midpoint, dtype=float)
        self.tangent = np.asarray(edge.tangent, dtype=float)
        self.tau = np.asarray(directions, dtype=float) @ self.tangent
        diff = self.tau[None, :] - self.tau[:, None]
        self.gram = self.h_e * csinc(0.5 * k * self.h_e * diff)
        self.Q, self.lam = ortho_filter(self.gram, sigma_rel)

    @property
    def n_input(self):
        return len(self.tau)

    @property
    def n_filtered(self):
        return self.Q.shape[1]

    def trace_values(self, s):
        """Unfiltered traces at arclength offsets s, shape (ns, p)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.exp(1j * self.k * np.outer(s, self.tau))

    def filtered_values(self, s):
        """Filtered orthogonal basis at arclength offsets s, shape (ns, Ntilde)."""
        return self.trace_values(s) @ self.Q

    def arclength(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return (points - self.midpoint) @ self.tangent

    def dofs_of_function(self, f, n_quad):
        """Scaled filtered moments of a callable f(points) -> values."""
        a = self.midpoint - 0.5 * self.h_e * self.tangent
        b = self.midpoint + 0.5 * self.h_e * self.tangent
        pts, wts = edge_rule(a, b, n_quad)
        vals = np.asarray(f(pts))
        basis = self.filtered_values(self.arclength(pts))
        return (wts[:, None] * np.conj(basis)).T @ vals / self.h_e

    def dofs_of_direction(self, r, phase):
        """Exact dofs of phase * u_r (a bulk plane wave restricted here)."""
        return phase * self.lam * np.conj(self.Q[r, :]) / self.h_e

    def project_dofs(self, dofs):
        """Filtered-basis coefficients of the edge projection of v from dofs.

        The projection onto the filtered span of a function with scaled
        moments dof_a is sum_a (h_e dof_a / lam_a) w_hat_a.
        """
        return self.h_e * np.asarray(dofs) / self.lam
