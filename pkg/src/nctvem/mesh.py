"""Polygonal meshes, lattice generators, and translation-invariance metadata.

Meshes are lists of CCW polygons over a shared vertex table.  Edges are
deduplicated with a canonical orientation (endpoint with lexicographically
smaller coordinates first) so that translated copies of an edge carry the
same tangent direction; this is what makes edge-local basis constructions
translation invariant on lattice meshes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

_COORD_DECIMALS = 9


def _coord_key(point):
    return (round(float(point[0]), _COORD_DECIMALS),
            round(float(point[1]), _COORD_DECIMALS))


class Polygon:
    """A simple CCW polygon with the geometric data used by local solvers."""

    def __init__(self, poly_id, vertices):
        vertices = np.asarray(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2 or len(vertices) < 3:
            raise ValueError("polygon needs an (n, 2) vertex array with n >= 3")
        x, y = vertices[:, 0], vertices[:, 1]
        area2 = np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
        if area2 <= 0.0:
            raise ValueError("polygon vertices must be counter-clockwise")
        self.id = poly_id
        self.vertices = vertices
        self.area = 0.5 * area2
        cross = x * np.roll(y, -1) - np.roll(x, -1) * y
        cx = np.sum((x + np.roll(x, -1)) * cross) / (6.0 * self.area)
        cy = np.sum((y + np.roll(y, -1)) * cross) / (6.0 * self.area)
        self.barycenter = np.array([cx, cy])
        diffs = vertices[:, None, :] - vertices[None, :, :]
        self.diameter = float(np.sqrt((diffs ** 2).sum(-1).max()))

    @property
    def n_edges(self):
        return len(self.vertices)

    def edge_endpoints(self, i):
        """Endpoints of local edge i, in CCW traversal order."""
        return self.vertices[i], self.vertices[(i + 1) % len(self.vertices)]

    def edge_length(self, i):
        a, b = self.edge_endpoints(i)
        return float(np.linalg.norm(b - a))

    def edge_midpoint(self, i):
        a, b = self.edge_endpoints(i)
        return 0.5 * (a + b)

    def outward_normal(self, i):
        a, b = self.edge_endpoints(i)
        t = (b - a) / np.linalg.norm(b - a)
        return np.array([t[1], -t[0]])


@dataclass(frozen=True)
class Edge:
    """A mesh edge with canonical orientation and adjacency.

    ``v0 -> v1`` runs toward lexicographically larger coordinates; ``cells``
    lists adjacent cell ids in ascending order and ``normal`` is the outward
    normal of ``cells[0]``.
    """

    id: int
    v0: int
    v1: int
    cells: tuple
    length: float
    midpoint: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray

    @property
    def is_boundary(self):
        return len(self.cells) == 1


@dataclass
class MeshQualityReport:
    star_radius: np.ndarray
    star_ratio: np.ndarray
    edge_ratio_max: np.ndarray
    edge_ratio_min: np.ndarray
    gamma_estimate: float
    flagged: list

    @property
    def ok(self):
        return not self.flagged


class PolygonalMesh:
    """Polygonal mesh with deduplicated, canonically oriented edges."""

    def __init__(self, vertices, cells):
        self.vertices = np.asarray(vertices, dtype=float)
        self.cells = [np.asarray(c, dtype=int) for c in cells]
        self._polygons = [Polygon(i, self.vertices[c])
                          for i, c in enumerate(self.cells)]
        self._build_edges()

    def _build_edges(self):
        edge_of_pair = {}
        records = []
        self.cell_edges = []
        for ci, cell in enumerate(self.cells):
            local = []
            n = len(cell)
            for i in range(n):
                a, b = int(cell[i]), int(cell[(i + 1) % n])
                key = (min(a, b), max(a, b))
                if key not in edge_of_pair:
                    edge_of_pair[key] = len(records)
                    records.append([a, b, [ci]])
                else:
                    records[edge_of_pair[key]][2].append(ci)
                local.append(edge_of_pair[key])
            self.cell_edges.append(local)

        self.edges = []
        for eid, (a, b, adj) in enumerate(records):
            pa, pb = self.vertices[a], self.vertices[b]
            if _coord_key(pb) < _coord_key(pa):
                a, b = b, a
                pa, pb = pb, pa
            tangent = pb - pa
            length = float(np.linalg.norm(tangent))
            if length <= 0.0:
                raise ValueError("degenerate edge")
            tangent = tangent / length
            adj = tuple(sorted(adj))
            first = self.cells[adj[0]]
            idx = int(np.where(first == a)[0][0])
            # outward normal of the first-listed cell: CCW traversal a->b
            # means rot(-90); traversal b->a flips it.
            ccw_next = int(first[(idx + 1) % len(first)])
            sign = 1.0 if ccw_next == b else -1.0
            normal = sign * np.array([tangent[1], -tangent[0]])
            self.edges.append(Edge(eid, a, b, adj, length,
                                   0.5 * (pa + pb), tangent, normal))

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    def polygon(self, i):
        return self._polygons[i]

    @property
    def interior_edges(self):
        return [e for e in self.edges if not e.is_boundary]

    @property
    def boundary_edges(self):
        return [e for e in self.edges if e.is_boundary]

    def jump_sign(self, edge_id, cell_id):
        """+1 if the cell's outward normal on the edge equals the stored one."""
        edge = self.edges[edge_id]
        if cell_id not in edge.cells:
            raise ValueError(f"cell {cell_id} is not adjacent to edge {edge_id}")
        return 1 if cell_id == edge.cells[0] else -1

    def cell_edge_normal(self, cell_id, local_edge):
        """Outward normal of a cell on one of its edges."""
        return self._polygons[cell_id].outward_normal(local_edge)

    def save(self, path):
        data = {"vertices": self.vertices.tolist(),
                "cells": [c.tolist() for c in self.cells]}
        with open(path, "w") as fh:
            json.dump(data, fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        return cls(np.array(data["vertices"]), data["cells"])


def shape_regularity(mesh, gamma_threshold=10.0):
    """Edge-length ratios and star-shapedness radii for every element.

    The star-shapedness radius is the Chebyshev radius of the polygon kernel
    (intersection of the edge half-planes), found by a small linear program.
    Elements are flagged when h_K / h_e exceeds the threshold or the star
    radius falls below h_K / threshold.
    """
    n = mesh.n_cells
    star = np.zeros(n)
    ratio_max = np.zeros(n)
    ratio_min = np.zeros(n)
    flagged = []
    for ci in range(n):
        poly = mesh.polygon(ci)
        if poly.area <= 0.0:
            raise ValueError(f"element {ci} is degenerate")
        lengths = np.array([poly.edge_length(i) for i in range(poly.n_edges)])
        ratio_max[ci] = poly.diameter / lengths.min()
        ratio_min[ci] = poly.diameter / lengths.max()
        star[ci] = _kernel_ball_radius(poly)
        bad = (ratio_max[ci] > gamma_threshold
               or star[ci] < poly.diameter / gamma_threshold)
        if bad:
            flagged.append(ci)
    h = np.array([mesh.polygon(i).diameter for i in range(n)])
    with np.errstate(divide="ignore"):
        gamma = float(max(ratio_max.max(), np.max(h / np.maximum(star, 1e-300))))
    return MeshQualityReport(star_radius=star,
                             star_ratio=star / h,
                             edge_ratio_max=ratio_max,
                             edge_ratio_min=ratio_min,
                             gamma_estimate=gamma,
                             flagged=flagged)


def _kernel_ball_radius(poly):
    """Radius of the largest ball inside the kernel of a polygon.

    Solves max r subject to n_i . c + r <= n_i . p_i over all edge
    half-planes; an infeasible or nonpositive optimum means the polygon is
    not star-shaped with respect to any ball.
    """
    rows = []
    rhs = []
    for i in range(poly.n_edges):
        nrm = poly.outward_normal(i)
        a, _ = poly.edge_endpoints(i)
        rows.append([nrm[0], nrm[1], 1.0])
        rhs.append(float(nrm @ a))
    res = linprog(c=[0.0, 0.0, -1.0], A_ub=np.array(rows), b_ub=np.array(rhs),
                  bounds=[(None, None), (None, None), (0.0, None)],
                  method="highs")
    if not res.success:
        return 0.0
    return float(res.x[2])


@dataclass
class TranslationInvariantMesh:
    """A finite window of a lattice mesh plus its translation structure."""

    mesh: PolygonalMesh
    kind: str
    xi1: np.ndarray
    xi2: np.ndarray
    fundamental_vertices: list
    fundamental_edges: list
    fundamental_cells: list
    neighbor_offsets: list
    _edge_lookup: dict = field(default_factory=dict, repr=False)
    _cell_lookup: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for e in self.mesh.edges:
            self._edge_lookup[_coord_key(e.midpoint)] = e.id
        for ci in range(self.mesh.n_cells):
            key = _coord_key(self.mesh.polygon(ci).barycenter)
            self._cell_lookup[key] = ci

    def offset_vector(self, n):
        return n[0] * self.xi1 + n[1] * self.xi2

    def shifted_edge(self, edge_id, n):
        """Window edge equal to the given edge translated by xi_n, or None."""
        mid = self.mesh.edges[edge_id].midpoint + self.offset_vector(n)
        return self._edge_lookup.get(_coord_key(mid))

    def shifted_cell(self, cell_id, n):
        bc = self.mesh.polygon(cell_id).barycenter + self.offset_vector(n)
        return self._cell_lookup.get(_coord_key(bc))


def _lattice_classes(signatures, xi1, xi2):
    """Group entity signatures into equivalence classes modulo the lattice.

    Two entities are equivalent when their signatures differ by an integer
    combination of the translation vectors.  Returns a list of index lists.
    """
    M = np.column_stack([xi1, xi2])
    Minv = np.linalg.inv(M)
    keys = {}
    classes = []
    for i, sig in enumerate(signatures):
        frac = Minv @ sig
        frac = frac - np.floor(frac + 0.5 * 1e-9)
        # snap near-integer fractional parts consistently
        key = (round(float(frac[0]) % 1.0, 6) % 1.0,
               round(float(frac[1]) % 1.0, 6) % 1.0)
        key = (key[0] if key[0] < 1.0 - 1e-7 else 0.0,
               key[1] if key[1] < 1.0 - 1e-7 else 0.0)
        if key in keys:
            classes[keys[key]].append(i)
        else:
            keys[key] = len(classes)
            classes.append([i])
    return classes


def _pick_representatives(classes, signatures, center):
    reps = []
    for cls in classes:
        dist = [(np.linalg.norm(signatures[i] - center), _coord_key(signatures[i]), i)
                for i in cls]
        reps.append(min(dist)[2])
    return sorted(reps)


NEIGHBOR_OFFSETS = [(n1, n2) for n1 in (-1, 0, 1) for n2 in (-1, 0, 1)]


def build_lattice(kind, window=(3, 3)):
    """Build a translation-invariant lattice mesh window.

    Kinds: ``square`` (unit squares), ``triangle`` (unit squares split along
    the (0,0)-(1,1) diagonal), ``hexagon`` (regular hexagons with unit
    translation length).  The window must be at least 3x3 cells so every
    fundamental entity has its full coupling neighborhood inside the window.
    """
    mx, my = window
    if mx < 3 or my < 3:
        raise ValueError("lattice window must be at least 3x3")
    if kind == "square":
        mesh = _square_window(mx, my)
        xi1, xi2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    elif kind == "triangle":
        mesh = _triangle_window(mx, my)
        xi1, xi2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    elif kind == "hexagon":
        mesh, xi1, xi2 = _hexagon_window(mx, my)
    else:
        raise ValueError(f"unknown lattice kind: {kind!r}")

    vsig = [mesh.vertices[i] for i in range(len(mesh.vertices))]
    esig = [e.midpoint for e in mesh.edges]
    csig = [mesh.polygon(i).barycenter for i in range(mesh.n_cells)]
    center = np.mean(np.array(csig), axis=0)

    fverts = _pick_representatives(_lattice_classes(vsig, xi1, xi2), vsig, center)
    fedges = _pick_representatives(_lattice_classes(esig, xi1, xi2), esig, center)
    fcells = _pick_representatives(_lattice_classes(csig, xi1, xi2), csig, center)

    return TranslationInvariantMesh(mesh=mesh, kind=kind, xi1=xi1, xi2=xi2,
                                    fundamental_vertices=fverts,
                                    fundamental_edges=fedges,
                                    fundamental_cells=fcells,
                                    neighbor_offsets=list(NEIGHBOR_OFFSETS))


def _square_window(mx, my):
    verts = [(i, j) for j in range(my + 1) for i in range(mx + 1)]
    vid = lambda i, j: j * (mx + 1) + i
    cells = []
    for j in range(my):
        for i in range(mx):
            cells.append([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])
    return PolygonalMesh(np.array(verts, dtype=float), cells)


def _triangle_window(mx, my):
    verts = [(i, j) for j in range(my + 1) for i in range(mx + 1)]
    vid = lambda i, j: j * (mx + 1) + i
    cells = []
    for j in range(my):
        for i in range(mx):
            cells.append([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)])
            cells.append([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)])
    return PolygonalMesh(np.array(verts, dtype=float), cells)


def _hexagon_window(mx, my):
    # side chosen so the translation vectors have unit length
    s = 1.0 / np.sqrt(3.0)
    xi1 = np.array([1.5 * s, 0.5 * np.sqrt(3.0) * s])
    xi2 = np.array([0.0, np.sqrt(3.0) * s])
    corner = s * np.array([(np.cos(a), np.sin(a))
                           for a in np.pi / 3.0 * np.arange(6)])
    vert_index = {}
    verts = []
    cells = []
    for m in range(mx):
        for n in range(my):
            c = m * xi1 + n * xi2
            cell = []
            for p in corner + c:
                key = _coord_key(p)
                if key not in vert_index:
                    vert_index[key] = len(verts)
                    verts.append([p[0], p[1]])
                cell.append(vert_index[key])
            cells.append(cell)
    return PolygonalMesh(np.array(verts), cells), xi1, xi2


def unit_square_mesh(n, kind="square"):
    """Mesh of (0,1)^2 with n x n cells of the given kind (square|triangle)."""
    if kind == "square":
        base = _square_window(n, n)
    elif kind == "triangle":
        base = _triangle_window(n, n)
    else:
        raise ValueError(f"unknown mesh kind for the unit square: {kind!r}")
    return PolygonalMesh(base.vertices / n, [c for c in base.cells])
