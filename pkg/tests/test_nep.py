import numpy as np
import pytest

from nctvem.nep import (Contour, NepEigenpair, default_contour,
                        select_discrete_wavenumber, solve_nep)

from oracles import quadratic_polyeig


def _random_quadratic(rng, n=6):
    A = [rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
         for _ in range(3)]
    T = lambda z: A[0] + z * A[1] + z * z * A[2]
    dT = lambda z: A[1] + 2 * z * A[2]
    return A, T, dT


def _test_contour(lam):
    """Contour around the eigenvalue nearest the cloud's median, radius
    chosen to keep the boundary clear of eigenvalues."""
    center = lam[np.argmin(np.abs(lam - np.median(lam)))]
    dist = np.sort(np.abs(lam - center))
    radius = 0.5 * dist[1] if len(dist) > 1 else 1.0
    for _ in range(8):
        margin = np.min(np.abs(np.abs(lam - center) - radius))
        if margin > 0.02 * radius:
            break
        radius *= 0.75
    return Contour(complex(center), float(radius))


def test_contour_validation():
    with pytest.raises(ValueError):
        Contour(0.0, -1.0)
    with pytest.raises(ValueError):
        Contour(0.0, 1.0, n_points=8)
    c = default_contour(5.0)
    assert c.center == 5.0 + 0j
    assert 0 < c.radius < 5.0


def test_scalar_shift():
    eigs = solve_nep(lambda z: (z - 0.7) * np.eye(2, dtype=complex), 2,
                     Contour(0.7, 0.3))
    assert len(eigs) == 2
    assert all(abs(e.value - 0.7) < 1e-10 for e in eigs)


def test_diagonal_pair_and_exclusion():
    T = lambda z: np.diag([z - 1.0, z - 2.0]).astype(complex)
    eigs = solve_nep(T, 2, Contour(1.0, 0.5))
    assert len(eigs) == 1 and abs(eigs[0].value - 1.0) < 1e-10
    eigs = solve_nep(T, 2, Contour(1.5, 1.0))
    vals = sorted(e.value.real for e in eigs)
    assert np.allclose(vals, [1.0, 2.0], atol=1e-10)


def test_quadratic_against_companion_oracle():
    rng = np.random.default_rng(11)
    for _ in range(10):
        A, T, dT = _random_quadratic(rng)
        lam = quadratic_polyeig(*A)
        cont = _test_contour(lam)
        inside = lam[np.abs(lam - cont.center) < cont.radius * 0.98]
        got = solve_nep(T, 6, cont, dT=dT)
        for ev in inside:
            assert min(abs(e.value - ev) for e in got) < 1e-9
        for e in got:
            assert min(abs(e.value - ev) for ev in lam) < 1e-9


def test_contour_doubling_invariance():
    rng = np.random.default_rng(3)
    A, T, dT = _random_quadratic(rng)
    lam = quadratic_polyeig(*A)
    cont = _test_contour(lam)
    e1 = solve_nep(T, 6, cont, dT=dT)
    e2 = solve_nep(T, 6, Contour(cont.center, cont.radius, 2 * cont.n_points),
                   dT=dT)
    key = lambda z: (z.real, z.imag)
    v1 = sorted((e.value for e in e1), key=key)
    v2 = sorted((e.value for e in e2), key=key)
    assert len(v1) == len(v2)
    assert all(abs(a - b) < 1e-9 for a, b in zip(v1, v2))


def test_probe_seed_invariance():
    rng = np.random.default_rng(4)
    A, T, dT = _random_quadratic(rng)
    lam = quadratic_polyeig(*A)
    cont = _test_contour(lam)
    v = []
    for seed in (0, 1, 2):
        eigs = solve_nep(T, 6, cont, seed=seed, dT=dT)
        v.append(sorted((e.value for e in eigs),
                        key=lambda z: (z.real, z.imag)))
    assert len(v[0]) == len(v[1]) == len(v[2])
    for a, b in zip(v[0], v[1]):
        assert abs(a - b) < 1e-9
    for a, b in zip(v[0], v[2]):
        assert abs(a - b) < 1e-9


def test_newton_polish_reduces_residual():
    rng = np.random.default_rng(9)
    A, T, dT = _random_quadratic(rng)
    lam = quadratic_polyeig(*A)
    cont = _test_contour(lam)
    raw = solve_nep(T, 6, cont, dT=dT, refine=False, residual_tol=np.inf)
    ref = solve_nep(T, 6, cont, dT=dT, refine=True, residual_tol=np.inf)
    assert max(e.residual for e in ref) <= max(e.residual for e in raw) + 1e-14


def test_residuals_reported():
    eigs = solve_nep(lambda z: (z - 1.0) * np.eye(1, dtype=complex), 1,
                     Contour(1.0, 0.5))
    assert all(isinstance(e, NepEigenpair) for e in eigs)
    assert all(e.residual <= 1e-8 for e in eigs)


def test_select_discrete_wavenumber():
    vals = [2.9 + 0.1j, -3.05, 3.2]
    assert select_discrete_wavenumber(vals, 3.0) == 2.9 + 0.1j
    with pytest.raises(ValueError):
        select_discrete_wavenumber([-1.0, -2.0], 3.0)
    # tie breaks toward larger real part
    assert select_discrete_wavenumber([2.8, 3.2], 3.0) == 3.2
