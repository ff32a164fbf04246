import dataclasses
from fractions import Fraction

import numpy as np
import pytest

from nctvem.dispersion import (BlochProblem, FemDispersionRelation,
                               _is_aligned, alignment_angles,
                               discrete_wavenumber, fem_dispersion, fit_rate,
                               pade, sweep, theta_grid, _zcot_series,
                               _ztan_series)
from nctvem.mesh import build_lattice


@pytest.fixture(scope="module")
def square_lattice():
    return build_lattice("square", (5, 5))


@pytest.fixture(scope="module")
def nctvem_problem(square_lattice):
    return BlochProblem(square_lattice, "nctvem", 3.0, 3)


@pytest.fixture(scope="module")
def pwdg_problem(square_lattice):
    return BlochProblem(square_lattice, "pwdg", 3.0, 3)


def test_unknown_method_rejected(square_lattice):
    with pytest.raises(ValueError):
        BlochProblem(square_lattice, "fdtd", 3.0, 3)


def test_coupling_locality(nctvem_problem, pwdg_problem):
    for prob in (nctvem_problem, pwdg_problem):
        for n in prob.couplings:
            assert n in {(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)}


def test_window_enlargement_changes_nothing(nctvem_problem):
    big = BlochProblem(build_lattice("square", (7, 7)), "nctvem", 3.0, 3)
    assert big.dim == nctvem_problem.dim
    assert set(big.couplings) == set(nctvem_problem.couplings)
    for n, C in nctvem_problem.couplings.items():
        scale = np.abs(C).max()
        assert np.abs(big.couplings[n] - C).max() < 1e-12 * scale


def test_coupling_hermitian_symmetry(nctvem_problem):
    # the local forms are Hermitian, so C_n = C_{-n}^H and T(z) is Hermitian
    # for real z
    for n, C in nctvem_problem.couplings.items():
        m = (-n[0], -n[1])
        assert m in nctvem_problem.couplings
        assert np.allclose(C, np.conj(nctvem_problem.couplings[m]).T,
                           atol=1e-12)
    d = np.array([0.6, 0.8])
    T = nctvem_problem.assemble_T(d, 2.7)
    assert np.allclose(T, np.conj(T).T, atol=1e-12)


def test_translation_identity(square_lattice, nctvem_problem):
    # rebuilding on a shifted fundamental edge set conjugates T by equal
    # diagonal phases, i.e. leaves it unchanged
    shifted_edges = [square_lattice.shifted_edge(eid, (1, 1))
                     for eid in square_lattice.fundamental_edges]
    assert all(e is not None for e in shifted_edges)
    lat2 = dataclasses.replace(square_lattice,
                               fundamental_edges=shifted_edges,
                               _edge_lookup={}, _cell_lookup={})
    prob2 = BlochProblem(lat2, "nctvem", 3.0, 3)
    d = np.array([np.cos(0.3), np.sin(0.3)])
    z = 2.9 + 0.05j
    assert np.allclose(prob2.assemble_T(d, z),
                       nctvem_problem.assemble_T(d, z), atol=1e-11)


def test_assemble_dT_is_derivative(nctvem_problem):
    d = np.array([np.cos(1.0), np.sin(1.0)])
    z = 3.0 + 0.01j
    h = 1e-6
    fd = (nctvem_problem.assemble_T(d, z + h)
          - nctvem_problem.assemble_T(d, z - h)) / (2 * h)
    assert np.allclose(nctvem_problem.assemble_dT(d, z), fd, atol=1e-7)


@pytest.mark.parametrize("prob_name", ["nctvem_problem", "pwdg_problem"])
def test_alignment_angle_is_exact(prob_name, request):
    prob = request.getfixturevalue(prob_name)
    rec = discrete_wavenumber(prob, alignment_angles(prob.q)[1])
    assert rec.total <= 1e-10 * prob.k
    # error split identity
    assert abs(rec.total ** 2 - rec.dispersion ** 2 - rec.dissipation ** 2) \
        <= 1e-14 * max(rec.total ** 2, 1e-300)


def test_generic_angle_has_nonzero_error(nctvem_problem):
    rec = discrete_wavenumber(nctvem_problem, 0.37)
    assert rec.total > 1e-8
    assert rec.dim_subspace == nctvem_problem.dim


def test_theta_grid_contains_pw_angles():
    q = 3
    grid = theta_grid(q, 36)
    for a in alignment_angles(q):
        assert np.min(np.abs(grid - a)) < 1e-14
    assert _is_aligned(2 * np.pi / (2 * q + 1), q)
    assert not _is_aligned(0.37, q)


def test_sweep_records_and_failures(square_lattice):
    recs, fails = sweep(square_lattice, "pwdg", [3.0], [3],
                        thetas=[0.2, 0.5], vary="theta")
    assert len(recs) == 2 and not fails
    with pytest.raises(ValueError):
        sweep(square_lattice, "pwdg", [3.0], [3], vary="bogus")


def test_fit_rate_band():
    ks = np.geomspace(0.1, 1.0, 6)
    errs = 0.5 * ks ** 4
    assert abs(fit_rate(ks, errs) - 4.0) < 1e-10
    with pytest.raises(ValueError):
        fit_rate(ks, np.full(6, 1e-15))


# ---------------------------------------------------------------- FEM branch

def test_pade_exponential():
    # [1/1] of exp: (1 + x/2)/(1 - x/2)
    coeffs = [Fraction(1), Fraction(1), Fraction(1, 2), Fraction(1, 6)]
    num, den = pade(coeffs, 1, 1)
    assert num == [Fraction(1), Fraction(1, 2)]
    assert den == [Fraction(1), Fraction(-1, 2)]


def test_series_coefficients():
    # z cot z = 1 - z^2/3 - z^4/45 - ...; z tan z = z^2 + z^4/3 + ...
    c = _zcot_series(3)
    assert c == [Fraction(1), Fraction(-1, 3), Fraction(-1, 45)]
    t = _ztan_series(3)
    assert t == [Fraction(0), Fraction(1), Fraction(1, 3)]


def test_fem_relation_q1_closed_form():
    rel = FemDispersionRelation(1)
    for k in np.linspace(0.05, 1.95, 25):
        expect = (1 - k * k / 3.0) / (1 + k * k / 6.0)
        assert abs(rel(k) - expect) < 1e-13


def test_fem_dispersion_consistency_and_flags():
    for q in (1, 2, 3):
        k_n, ev = fem_dispersion(0.3, q)
        assert not ev
        assert k_n.imag == 0.0
        assert abs(k_n - 0.3) < 0.3 ** (2 * q + 1)
    # q=1 cutoff at k = sqrt(12): beyond it the mode is evanescent
    k_n, ev = fem_dispersion(4.0, 1)
    assert ev and k_n.imag != 0.0


def test_fem_dispersion_rates():
    ks = np.geomspace(0.2, 1.2, 10)
    for q in (1, 2, 3):
        rel = FemDispersionRelation(q)
        errs = [abs(fem_dispersion(k, q, rel)[0] - k) for k in ks]
        rate = fit_rate(ks, errs, lo=1e-13, hi=1e-2)
        assert abs(rate - (2 * q + 1)) <= 0.15 * (2 * q + 1)
