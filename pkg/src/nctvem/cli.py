"""Batch driver: mesh generation, convergence studies, dispersion sweeps.

All results go to CSV with a provenance header (tool version, config hash,
seed); the same configuration and seed produce byte-identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import __version__
from .dispersion import (BlochProblem, DispersionRecord, FemDispersionRelation,
                         _is_aligned, discrete_wavenumber, fem_dispersion,
                         fit_rate, theta_grid)
from .helmholtz import solve_helmholtz
from .laplace import nonconformity_measure, solve_laplace
from .mesh import (PolygonalMesh, build_lattice, shape_regularity,
                   unit_square_mesh)
from .nep import Contour, solve_nep
from .pwdg import PwdgFluxes

DISPERSION_COLUMNS = ("method,mesh,k,q,theta,re_kn,im_kn,dispersion,"
                      "dissipation,total,dim_subspace")


def _fmt(x):
    return f"{x:.16g}"


def _config_hash(args):
    payload = {k: v for k, v in sorted(vars(args).items())
               if k not in ("out", "func")}
    digest = hashlib.sha256(
        json.dumps(payload, sort_keys=True, default=str).encode())
    return digest.hexdigest()[:12]


def _write_csv(path, args, columns, rows, summary=()):
    lines = [f"# nctvem {__version__} config={_config_hash(args)} "
             f"seed={getattr(args, 'seed', 0)}", columns]
    lines.extend(rows)
    lines.extend(f"# summary: {s}" for s in summary)
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _record_row(rec):
    return ",".join([rec.method, rec.mesh_kind, _fmt(rec.k), str(rec.q),
                     _fmt(rec.theta), _fmt(rec.k_n.real), _fmt(rec.k_n.imag),
                     _fmt(rec.dispersion), _fmt(rec.dissipation),
                     _fmt(rec.total), str(rec.dim_subspace)])


def cmd_mesh(args):
    if args.lattice:
        lat = build_lattice(args.mesh, (args.n, args.n))
        mesh = lat.mesh
    else:
        mesh = unit_square_mesh(args.n, args.mesh)
    report = shape_regularity(mesh)
    if args.out:
        mesh.save(args.out)
    print(f"{args.mesh} mesh: {mesh.n_cells} cells, {mesh.n_edges} edges, "
          f"gamma={report.gamma_estimate:.3f}, "
          f"flagged={len(report.flagged)}")
    return 0


def _laplace_solution():
    z0 = 1.5 + 0.75j

    def u(pts):
        z = pts[:, 0] + 1j * pts[:, 1]
        return (1.0 / (z - z0)).real

    def grad_u(pts):
        z = pts[:, 0] + 1j * pts[:, 1]
        fp = -1.0 / (z - z0) ** 2
        return np.column_stack([fp.real, -fp.imag])

    return u, grad_u


def unit_square_boundary_normals(pts, tol=1e-12):
    """Outward normals at boundary points of (0, 1)^2."""
    n = np.zeros_like(pts)
    n[np.abs(pts[:, 0]) < tol] = (-1.0, 0.0)
    n[np.abs(pts[:, 0] - 1.0) < tol] = (1.0, 0.0)
    n[np.abs(pts[:, 1]) < tol] = (0.0, -1.0)
    n[np.abs(pts[:, 1] - 1.0) < tol] = (0.0, 1.0)
    return n


def impedance_data(u, grad_u, k):
    """gamma_I u = iku + d_n u on the boundary of the unit square."""

    def g(pts):
        nrm = unit_square_boundary_normals(pts)
        return (1j * k * np.asarray(u(pts))
                + (np.asarray(grad_u(pts)) * nrm).sum(axis=1))

    return g


def cmd_convergence(args):
    levels = [4, 8, 16, 32][:args.levels]
    rows = []
    errors, hs = [], []
    if args.method == "laplace":
        u, grad_u = _laplace_solution()
        for n in levels:
            mesh = unit_square_mesh(n, args.mesh)
            sol = solve_laplace(mesh, args.p, lambda pts: u(pts))
            err = sol.projected_h1_error(grad_u)
            nc = nonconformity_measure(grad_u, sol.dofs, mesh, args.p)
            rows.append(",".join([_fmt(1.0 / n), str(mesh.n_edges * args.p),
                                  _fmt(err), _fmt(nc)]))
            errors.append(err)
            hs.append(1.0 / n)
        columns = "h,n_dofs,projected_h1_error,nonconformity"
    elif args.method == "helmholtz":
        k = args.k[0]
        d = np.array([np.cos(0.2), np.sin(0.2)])
        u = lambda pts: np.exp(1j * k * (pts @ d))
        grad_u = lambda pts: 1j * k * u(pts)[:, None] * d[None, :]
        g = impedance_data(u, grad_u, k)
        for n in levels:
            mesh = unit_square_mesh(n, args.mesh)
            sol = solve_helmholtz(mesh, k, args.q[0], g,
                                  sigma_rel=args.sigma)
            err = sol.projected_weighted_error(u, grad_u)
            rows.append(",".join([_fmt(1.0 / n), _fmt(k), str(args.q[0]),
                                  str(len(sol.dofs)), _fmt(err),
                                  _fmt(sol.min_singular_value)]))
            errors.append(err)
            hs.append(1.0 / n)
        columns = "h,k,q,n_dofs,projected_weighted_error,min_singular_value"
    else:
        raise SystemExit(f"unknown convergence method: {args.method!r}")
    summary = []
    if len(errors) >= 2 and min(errors) > 0:
        slope = np.polyfit(np.log(hs), np.log(errors), 1)[0]
        summary.append(f"fitted_rate={slope:.3f}")
    _write_csv(args.out, args, columns, rows, summary)
    return 0


def _dispersion_contour(k, args):
    if args.contour_radius is not None:
        return Contour(complex(k), args.contour_radius)
    return None


def _trefftz_records(args, kind, method, k, q, thetas):
    lat = build_lattice(kind, (5, 5))
    fluxes = PwdgFluxes(args.alpha, args.beta) if method == "pwdg" else None
    problem = BlochProblem(lat, method, k, q, sigma_rel=args.sigma,
                           fluxes=fluxes)
    recs = []
    for th in thetas:
        recs.append(discrete_wavenumber(problem, th,
                                        contour=_dispersion_contour(k, args),
                                        seed=args.seed))
    return recs


def _fem_record(k, q, kind="square"):
    k_n, _ = fem_dispersion(k, q)
    return DispersionRecord(method="fem", mesh_kind=kind, k=k, q=q,
                            theta=0.0, k_n=k_n, dim_subspace=q)


def _max_total(recs, q):
    live = [r for r in recs if not _is_aligned(r.theta, q)]
    return max(live, key=lambda r: r.total) if live else None


def cmd_dispersion(args):
    if args.preset == "fig5":
        args.mesh, args.k, args.q = "square", [3.0], [7]
        args.method = ["nctvem", "pwdg"]
    elif args.preset == "table1":
        args.k, args.q = [2.0, 0.3], [3]
        args.method = ["nctvem", "pwdg"]
        args.mesh = "square,triangle"
    elif args.preset == "fem-compare":
        args.mesh, args.k, args.q = "square", [3.0], [1, 2, 3, 4, 5]
        args.method = ["nctvem", "pwdg", "fem"]
    elif args.preset is not None:
        raise SystemExit(f"unknown preset: {args.preset!r}")

    kinds = args.mesh.split(",")
    rows, summary = [], []
    for kind in kinds:
        for method in args.method:
            per_k = []
            for k in args.k:
                for q in args.q:
                    if method == "fem":
                        recs = [_fem_record(k, q, kind)]
                    else:
                        thetas = (theta_grid(q, args.theta_grid)
                                  if args.theta_grid else [args.theta])
                        recs = _trefftz_records(args, kind, method, k, q,
                                                thetas)
                    rows.extend(_record_row(r) for r in recs)
                    worst = _max_total(recs, q) or recs[0]
                    per_k.append((k, worst.total / k))
                    summary.append(
                        f"max method={method} mesh={kind} k={_fmt(k)} q={q} "
                        f"rel_total={_fmt(worst.total / k)}")
            if len({k for k, _ in per_k}) >= 2:
                ks = np.array([k for k, _ in per_k])
                es = np.array([e for _, e in per_k])
                try:
                    eta = fit_rate(ks, es, lo=0.0, hi=np.inf)
                    summary.append(f"rate method={method} mesh={kind} "
                                   f"eta={eta:.3f}")
                except ValueError:
                    pass
    _write_csv(args.out, args, DISPERSION_COLUMNS, rows, summary)
    return 0


def cmd_nep_selftest(args):
    rng = np.random.default_rng(args.seed)
    failures = []

    eigs = solve_nep(lambda z: (z - 0.7) * np.eye(2, dtype=complex), 2,
                     Contour(0.7, 0.3), seed=args.seed)
    if not (len(eigs) == 2 and all(abs(e.value - 0.7) < 1e-10 for e in eigs)):
        failures.append("scalar shift")

    eigs = solve_nep(lambda z: np.diag([z - 1.0, z - 2.0]).astype(complex), 2,
                     Contour(1.5, 1.0), seed=args.seed)
    vals = sorted(e.value.real for e in eigs)
    if not (len(vals) == 2 and abs(vals[0] - 1) < 1e-10
            and abs(vals[1] - 2) < 1e-10):
        failures.append("diagonal pair")

    for trial in range(5):
        A = [rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
             for _ in range(3)]
        T = lambda z: A[0] + z * A[1] + z * z * A[2]
        lam = np.linalg.eigvals(np.block(
            [[np.zeros((6, 6)), np.eye(6)],
             [np.linalg.solve(-A[2], A[0]), np.linalg.solve(-A[2], A[1])]]))
        center = lam[np.argmin(np.abs(lam))]
        radius = 0.5 * np.sort(np.abs(lam - center))[1]
        inside = lam[np.abs(lam - center) < radius * 0.98]
        got = solve_nep(T, 6, Contour(complex(center), float(radius)),
                        seed=args.seed)
        for ev in inside:
            if not any(abs(e.value - ev) < 1e-8 for e in got):
                failures.append(f"quadratic trial {trial}")
                break

    if failures:
        print("nep-selftest FAILED:", ", ".join(failures))
        return 1
    print("nep-selftest ok")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nctvem",
        description="Trefftz VEM solvers and dispersion analysis on "
                    "polygonal lattice meshes")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=None, help="output CSV path")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("mesh", help="generate a mesh and report quality")
    p.add_argument("--mesh", default="square",
                   choices=["square", "triangle", "hexagon"])
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--lattice", action="store_true",
                   help="emit a lattice window instead of a unit-square mesh")
    common(p)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("convergence", help="h-refinement study")
    p.add_argument("--method", default="laplace",
                   choices=["laplace", "helmholtz"])
    p.add_argument("--mesh", default="square",
                   choices=["square", "triangle"])
    p.add_argument("--p", type=int, default=2, help="harmonic degree")
    p.add_argument("--q", type=int, nargs="+", default=[3])
    p.add_argument("--k", type=float, nargs="+", default=[5.0])
    p.add_argument("--sigma", type=float, default=1e-13)
    p.add_argument("--levels", type=int, default=4)
    common(p)
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("dispersion", help="Bloch dispersion sweep")
    p.add_argument("--mesh", default="square",
                   help="comma-separated lattice kinds")
    p.add_argument("--method", nargs="+", default=["nctvem"],
                   choices=["nctvem", "pwdg", "fem"])
    p.add_argument("--k", type=float, nargs="+", default=[3.0])
    p.add_argument("--q", type=int, nargs="+", default=[3])
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--theta-grid", type=int, default=360,
                   help="number of equispaced Bloch angles (0 = single "
                        "--theta)")
    p.add_argument("--sigma", type=float, default=1e-13)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--contour-radius", type=float, default=None)
    p.add_argument("--preset", default=None)
    common(p)
    p.set_defaults(func=cmd_dispersion)

    p = sub.add_parser("nep-selftest", help="nonlinear eigensolver checks")
    common(p)
    p.set_defaults(func=cmd_nep_selftest)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
