"""Bloch-wave dispersion analysis on translation-invariant lattice meshes.

For a quasi-periodic ansatz with phase exp(i k_n d . xi_n), the discrete
variational problem reduces to a small nonlinear eigenvalue problem
T(k_n) u = 0 over the fundamental basis functions.  The coupling tensors
a_n(chi_t(. - xi_n), chi_s) are independent of k_n and are precomputed once
per (mesh, method, k, q); each Bloch direction then costs one contour solve.

Also provides the closed-form finite element dispersion relation
cos(k_n) = R_q(k) built from exact Pade approximants.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from fractions import Fraction
from math import comb, floor

import numpy as np

from .basis import EdgeTraceSpace, SIGMA_REL_DEFAULT
from .helmholtz import HelmholtzElementOperators, pw_directions
from .mesh import Polygon
from .nep import default_contour, Contour, select_discrete_wavenumber, solve_nep
from .pwdg import PwdgFluxes, pair_block

_WINDOW_SHIFTS = [(n1, n2) for n1 in range(-3, 4) for n2 in range(-3, 4)]


@dataclass
class DispersionRecord:
    method: str
    mesh_kind: str
    k: float
    q: int
    theta: float
    k_n: complex
    dim_subspace: int

    @property
    def dispersion(self):
        return abs(self.k - self.k_n.real)

    @property
    def dissipation(self):
        return abs(self.k_n.imag)

    @property
    def total(self):
        return abs(self.k - self.k_n)


class BlochProblem:
    """Precomputed coupling tensors for one (mesh, method, k, q) point."""

    def __init__(self, lattice, method, k, q, sigma_rel=SIGMA_REL_DEFAULT,
                 fluxes=None):
        self.lattice = lattice
        self.method = method
        self.k = float(k)
        self.q = int(q)
        if method == "nctvem":
            self.couplings, self.dim = _nctvem_couplings(lattice, k, q,
                                                         sigma_rel)
        elif method == "pwdg":
            self.couplings, self.dim = _pwdg_couplings(
                lattice, k, q, fluxes or PwdgFluxes())
        else:
            raise ValueError(f"unknown Bloch method: {method!r}")

    def assemble_T(self, d, z):
        d = np.asarray(d, dtype=float)
        T = np.zeros((self.dim, self.dim), dtype=complex)
        for n, C in self.couplings.items():
            phase = np.exp(1j * z * (d @ self.lattice.offset_vector(n)))
            T += phase * C
        return T

    def assemble_dT(self, d, z):
        d = np.asarray(d, dtype=float)
        T = np.zeros((self.dim, self.dim), dtype=complex)
        for n, C in self.couplings.items():
            arg = d @ self.lattice.offset_vector(n)
            T += 1j * arg * np.exp(1j * z * arg) * C
        return T


def _translated_space(ref, edge):
    """Edge trace space of a lattice translate, sharing the reference's
    filtered basis bit for bit so translates stay exactly equivalent."""
    space = copy.copy(ref)
    space.edge_id = edge.id
    space.midpoint = np.asarray(edge.midpoint, dtype=float)
    return space


def _nctvem_couplings(lattice, k, q, sigma_rel):
    mesh = lattice.mesh
    dirs = pw_directions(q)
    fund = lattice.fundamental_edges

    refs = [EdgeTraceSpace(mesh.edges[eid], k, dirs, sigma_rel)
            for eid in fund]
    Minv = np.linalg.inv(np.column_stack([lattice.xi1, lattice.xi2]))
    spaces = {}
    edge_class = {}
    for e in mesh.edges:
        for i, eid in enumerate(fund):
            frac = Minv @ (e.midpoint - mesh.edges[eid].midpoint)
            n = np.round(frac)
            if np.max(np.abs(frac - n)) < 1e-6:
                spaces[e.id] = _translated_space(refs[i], e)
                edge_class[e.id] = (i, (int(n[0]), int(n[1])))
                break

    sizes = [spaces[eid].n_filtered for eid in fund]
    starts = np.concatenate([[0], np.cumsum(sizes)])
    dim = int(starts[-1])

    couplings = {}
    fund_cells = set()
    for eid in fund:
        fund_cells.update(mesh.edges[eid].cells)
    for ci in sorted(fund_cells):
        op = HelmholtzElementOperators(mesh, ci, k, q, spaces, strict=False)
        for la, ea in enumerate(op.edge_ids):
            ia, na = edge_class[ea]
            if na != (0, 0):
                continue
            rows = np.arange(starts[ia], starts[ia + 1])
            for lb, eb in enumerate(op.edge_ids):
                ib, nb = edge_class[eb]
                cols = np.arange(starts[ib], starts[ib + 1])
                C = couplings.setdefault(
                    nb, np.zeros((dim, dim), dtype=complex))
                C[np.ix_(rows, cols)] += op.local_matrix[op.dof_slices[la],
                                                         op.dof_slices[lb]]
    return couplings, dim


def _pwdg_couplings(lattice, k, q, fluxes):
    mesh = lattice.mesh
    p = 2 * q + 1
    fund = lattice.fundamental_cells
    dim = len(fund) * p
    couplings = {}
    for n in lattice.neighbor_offsets:
        xi = lattice.offset_vector(n)
        C = np.zeros((dim, dim), dtype=complex)
        nonzero = False
        for jt, ct in enumerate(fund):
            shifted = Polygon(-1, mesh.polygon(ct).vertices + xi)
            for js, cs in enumerate(fund):
                blk = pair_block(shifted, mesh.polygon(cs), k, q, fluxes)
                if np.any(blk):
                    nonzero = True
                    C[js * p:(js + 1) * p, jt * p:(jt + 1) * p] = blk
        if nonzero:
            couplings[n] = C
    return couplings, dim


def discrete_wavenumber(problem, theta, contour=None, n_points=64, seed=0,
                        residual_tol=1e-8):
    """Solve the Bloch NEP for one direction and pick the closest wavenumber."""
    d = np.array([np.cos(theta), np.sin(theta)])
    T = lambda z: problem.assemble_T(d, z)
    dT = lambda z: problem.assemble_dT(d, z)
    k = problem.k
    base = contour or default_contour(k, n_points=n_points)
    radius = base.radius
    eigs = []
    for _ in range(4):
        cont = Contour(base.center, radius, base.n_points)
        eigs = solve_nep(T, problem.dim, cont, seed=seed, dT=dT,
                         residual_tol=residual_tol)
        if eigs:
            break
        radius *= 0.6
    if not eigs:
        raise RuntimeError(
            f"no Bloch eigenvalue found near k={k} (theta={theta})")
    k_n = select_discrete_wavenumber([e.value for e in eigs], k)
    return DispersionRecord(method=problem.method,
                            mesh_kind=problem.lattice.kind,
                            k=k, q=problem.q, theta=float(theta), k_n=k_n,
                            dim_subspace=problem.dim)


def theta_grid(q, n=360, include_pw_angles=True):
    """Equispaced Bloch directions plus the exact plane-wave angles."""
    angles = list(2.0 * np.pi * np.arange(n) / n)
    if include_pw_angles:
        p = 2 * q + 1
        angles.extend(2.0 * np.pi * np.arange(p) / p)
    return np.unique(np.asarray(angles))


def alignment_angles(q):
    p = 2 * q + 1
    return 2.0 * np.pi * np.arange(p) / p


def _is_aligned(theta, q, tol=1e-12):
    p = 2 * q + 1
    frac = theta / (2.0 * np.pi / p)
    return abs(frac - round(frac)) < tol


def max_over_theta(problem, thetas=None, exclude_alignment=True, seed=0):
    """Worst-direction record; alignment angles are exact zeros and are
    excluded from maxima by default."""
    if thetas is None:
        thetas = theta_grid(problem.q)
    best = None
    for th in thetas:
        if exclude_alignment and _is_aligned(th, problem.q):
            continue
        rec = discrete_wavenumber(problem, th, seed=seed)
        if best is None or rec.total > best.total:
            best = rec
    return best


def sweep(lattice, method, k_values, q_values, thetas=None, vary="theta",
          sigma_rel=SIGMA_REL_DEFAULT, fluxes=None, seed=0):
    """Grid of dispersion records.

    vary="theta": one record per Bloch angle at the single (k, q) point.
    vary="k" or "q": one worst-direction record per grid point.
    Individual failures are recorded as None entries' exclusion and the
    sweep continues.
    """
    records = []
    failures = []
    if vary == "theta":
        (k,), (q,) = k_values, q_values
        problem = BlochProblem(lattice, method, k, q, sigma_rel, fluxes)
        for th in (thetas if thetas is not None else theta_grid(q)):
            try:
                records.append(discrete_wavenumber(problem, th, seed=seed))
            except Exception as exc:
                failures.append((k, q, th, str(exc)))
    elif vary in ("k", "q"):
        for k in k_values:
            for q in q_values:
                try:
                    problem = BlochProblem(lattice, method, k, q, sigma_rel,
                                           fluxes)
                    records.append(max_over_theta(problem, thetas, seed=seed))
                except Exception as exc:
                    failures.append((k, q, None, str(exc)))
    else:
        raise ValueError(f"unknown sweep axis: {vary!r}")
    return records, failures


def fit_rate(ks, errors, lo=1e-12, hi=1e-2):
    """Least-squares slope of log(error) vs log(k) in the trusted band."""
    ks = np.asarray(ks, dtype=float)
    errors = np.asarray(errors, dtype=float)
    mask = (errors >= lo) & (errors <= hi)
    if mask.sum() < 2:
        raise ValueError("not enough points in the fit band")
    return float(np.polyfit(np.log(ks[mask]), np.log(errors[mask]), 1)[0])


# ---------------------------------------------------------------------------
# Finite element dispersion relation cos(k_n) = R_q(k)


def _bernoulli(n_max):
    """Bernoulli numbers B_0..B_n as Fractions (B_1 = -1/2)."""
    B = [Fraction(1)]
    for m in range(1, n_max + 1):
        acc = Fraction(0)
        for j in range(m):
            acc += comb(m + 1, j) * B[j]
        B.append(-acc / (m + 1))
    return B


def _zcot_series(n_terms):
    """Coefficients of z cot z = sum c_m w^m with w = z^2."""
    B = _bernoulli(2 * n_terms)
    return [Fraction((-4) ** m) * B[2 * m] / _fact(2 * m)
            for m in range(n_terms)]


def _ztan_series(n_terms):
    """Coefficients of z tan z = sum t_m w^m with w = z^2 (t_0 = 0)."""
    B = _bernoulli(2 * n_terms)
    out = [Fraction(0)]
    for m in range(1, n_terms):
        out.append(Fraction((-1) ** (m - 1) * 4 ** m * (4 ** m - 1))
                   * B[2 * m] / _fact(2 * m))
    return out


def _fact(n):
    out = 1
    for i in range(2, n + 1):
        out *= i
    return out


def _solve_fraction_system(A, b):
    n = len(b)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise ValueError("singular Pade system")
        M[col], M[piv] = M[piv], M[col]
        inv = Fraction(1) / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


def pade(coeffs, L, M):
    """Exact [L/M] Pade approximant from Maclaurin coefficients.

    Returns (numerator, denominator) coefficient lists (Fractions,
    ascending) with denominator constant term 1.
    """
    a = list(coeffs) + [Fraction(0)] * max(0, L + M + 1 - len(coeffs))
    if M == 0:
        return a[:L + 1], [Fraction(1)]
    A = [[a[L + i - j] if 0 <= L + i - j else Fraction(0)
          for j in range(1, M + 1)] for i in range(1, M + 1)]
    rhs = [-a[L + i] for i in range(1, M + 1)]
    qcoef = [Fraction(1)] + _solve_fraction_system(A, rhs)
    pcoef = []
    for i in range(L + 1):
        s = Fraction(0)
        for j in range(0, min(i, M) + 1):
            s += qcoef[j] * a[i - j]
        pcoef.append(s)
    return pcoef, qcoef


def _eval_poly(coeffs, x):
    out = 0.0
    for c in reversed(coeffs):
        out = out * x + float(c)
    return out


@dataclass
class FemDispersionRelation:
    """The rational function R_q with cos(k_n) = R_q(k)."""

    q: int

    def __post_init__(self):
        q = self.q
        if q < 1:
            raise ValueError("degree must be >= 1")
        self.n_odd = floor((q + 1) / 2)
        self.n_even = floor(q / 2)
        n_terms = max(self.n_odd, self.n_even + 1) + 4
        # even series in w = z^2: [2a/2b] in z is [a/b] in w
        self.cot_pade = pade(_zcot_series(n_terms + 4), self.n_odd,
                             self.n_odd - 1)
        self.tan_pade = pade(_ztan_series(n_terms + 4), self.n_even + 1,
                             self.n_even)

    def __call__(self, k):
        w = (0.5 * k) ** 2
        c = (_eval_poly(self.cot_pade[0], w)
             / _eval_poly(self.cot_pade[1], w))
        t = (_eval_poly(self.tan_pade[0], w)
             / _eval_poly(self.tan_pade[1], w))
        return (c - t) / (c + t)


def fem_dispersion(k, q, relation=None):
    """Discrete wavenumber of the 1D spectral-element relation.

    Returns (k_n, evanescent); in the propagative regime |R_q(k)| <= 1 the
    wavenumber is real and dissipation-free.
    """
    rel = relation or FemDispersionRelation(q)
    R = rel(k)
    evanescent = abs(R) > 1.0
    base = np.emath.arccos(complex(R))
    candidates = []
    m_max = int(np.ceil(k / (2 * np.pi))) + 2
    for m in range(0, m_max + 1):
        for s in (1.0, -1.0):
            kn = 2 * np.pi * m + s * base
            if kn.real > 0 or (kn.real == 0 and kn.imag != 0):
                candidates.append(kn)
    k_n = min(candidates, key=lambda z: abs(k - z))
    if not evanescent:
        k_n = complex(k_n.real, 0.0)
    return complex(k_n), bool(evanescent)
