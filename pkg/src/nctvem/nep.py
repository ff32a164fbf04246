"""Contour-integral solver for holomorphic nonlinear eigenvalue problems.

Projects the resolvent's first two moments over a circular contour onto a
random probe block, reduces to a small linear eigenproblem, and polishes
accepted eigenpairs with a bordered Newton iteration.  Deterministic for a
fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Contour:
    center: complex
    radius: float
    n_points: int = 64

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("contour radius must be positive")
        if self.n_points < 16:
            raise ValueError("need at least 16 quadrature points")

    def points(self):
        angles = 2.0 * np.pi * np.arange(self.n_points) / self.n_points
        offs = self.radius * np.exp(1j * angles)
        return self.center + offs, offs


def default_contour(k, radius=None, n_points=64):
    """Circle around the real wavenumber, clipped away from Re <= 0."""
    if radius is None:
        radius = 0.4 * max(k, 1.0)
    radius = min(radius, 0.95 * k)
    return Contour(center=complex(k), radius=float(radius), n_points=n_points)


@dataclass
class NepEigenpair:
    value: complex
    vector: np.ndarray
    residual: float


def _residual(T, lam, vec, scale=0.0):
    """Backward error ||T(lam) v|| / ||T(lam)||_F.

    The denominator is floored at a small multiple of the typical norm of T
    on the contour; otherwise problems where T(lam) itself vanishes at the
    eigenvalue (e.g. scalar multiples of the identity) could never pass.
    """
    Tl = T(lam)
    num = np.linalg.norm(Tl @ vec)
    denom = max(np.linalg.norm(Tl, "fro"), 1e-6 * scale)
    if denom == 0.0:
        return 0.0 if num == 0.0 else np.inf
    return float(num / denom)


def _newton_polish(T, dT, lam, vec, steps=3):
    """Bordered Newton iteration on (vector, eigenvalue)."""
    c = np.conj(vec)
    for _ in range(steps):
        Tl = T(lam)
        if dT is not None:
            Tp = dT(lam)
        else:
            delta = 1e-7 * max(1.0, abs(lam))
            Tp = (T(lam + delta) - T(lam - delta)) / (2.0 * delta)
        n = len(vec)
        J = np.zeros((n + 1, n + 1), dtype=complex)
        J[:n, :n] = Tl
        J[:n, n] = Tp @ vec
        J[n, :n] = c
        F = np.zeros(n + 1, dtype=complex)
        F[:n] = Tl @ vec
        F[n] = c @ vec - 1.0
        try:
            upd = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            break
        vec = vec - upd[:n]
        lam = lam - upd[n]
    nrm = np.linalg.norm(vec)
    if nrm > 0:
        vec = vec / nrm
    return lam, vec


def solve_nep(T, dim, contour, n_probe=None, rank_tol=1e-10, seed=0,
              residual_tol=1e-8, dT=None, refine=True):
    """Eigenvalues of T(z) v = 0 strictly inside the contour.

    Returns accepted NepEigenpair objects (residual below residual_tol)
    sorted by eigenvalue real part; near-contour and high-residual
    candidates are dropped.
    """
    if n_probe is None:
        n_probe = min(dim, 8)
    if n_probe > dim:
        raise ValueError("more probes than problem dimension")
    rng = np.random.default_rng(seed)
    V = (rng.standard_normal((dim, n_probe))
         + 1j * rng.standard_normal((dim, n_probe))) / np.sqrt(2.0)
    zs, offs = contour.points()
    A0 = np.zeros((dim, n_probe), dtype=complex)
    A1 = np.zeros((dim, n_probe), dtype=complex)
    scale = 0.0
    for z, off in zip(zs, offs):
        Tz = np.asarray(T(z), dtype=complex)
        scale = max(scale, np.linalg.norm(Tz, "fro"))
        X = np.linalg.solve(Tz, V)
        A0 += off * X
        A1 += z * off * X
    A0 /= contour.n_points
    A1 /= contour.n_points

    U, s, Wh = np.linalg.svd(A0, full_matrices=False)
    if s[0] == 0.0:
        return []
    keep = s > rank_tol * s[0]
    if not np.any(keep):
        return []
    U = U[:, keep]
    s = s[keep]
    W = np.conj(Wh).T[:, keep]
    B = np.conj(U).T @ A1 @ W / s[None, :]
    lams, Y = np.linalg.eig(B)

    out = []
    for lam, y in zip(lams, Y.T):
        if abs(lam - contour.center) >= contour.radius * (1.0 - 1e-8):
            continue
        vec = U @ y
        nrm = np.linalg.norm(vec)
        if nrm == 0.0:
            continue
        vec = vec / nrm
        if refine:
            lam, vec = _newton_polish(T, dT, lam, vec)
        res = _residual(T, lam, vec, scale)
        if res <= residual_tol:
            out.append(NepEigenpair(value=complex(lam), vector=vec,
                                    residual=res))
    out.sort(key=lambda e: (e.value.real, e.value.imag))
    return out


def select_discrete_wavenumber(eigenvalues, k):
    """The admissible eigenvalue closest to k.

    Candidates must have positive real part; ties in |k - lambda| break
    toward larger real part.
    """
    vals = [complex(v) for v in eigenvalues if complex(v).real > 0.0]
    if not vals:
        raise ValueError("no candidate wavenumbers with positive real part")
    return min(vals, key=lambda v: (abs(k - v), -v.real))
