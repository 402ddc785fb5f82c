"""Polygonal bulk-surface meshes and the boundary-fitted cut generator.

The mesh data model keeps the boundary polyline first: nodes ``0 .. M-1`` are
the boundary cycle in order (boundary edge ``k`` joins nodes ``k`` and
``(k+1) % M``) and interior nodes follow.  Every transformation in this module
(generation, node merging, sliver removal, renumbering, file I/O) preserves
that ordering, so the coupling operator between bulk and surface unknowns is
a pure index slice downstream.

The generator follows the cut-cell construction optimized for assembly cost:
a Cartesian grid of squares covers the domain, cells with no corner inside
are discarded, outside corners of cut cells are projected onto the boundary
curve along the closest-point map, and two clean-up passes (merging of close
nodes, removal of small-angle slivers) restore mesh quality near the curve.
All interior elements are translated copies of one square, so only O(1/h) of
the elements require individual local matrices during assembly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DomainDescriptor


class MeshError(Exception):
    """Base class for mesh failures."""


class MeshFormatError(MeshError):
    """Malformed mesh file or violated structural invariant."""


class MeshGenerationError(MeshError):
    """Generator preconditions violated or construction impossible."""


_AREA_TOL = 1e-12  # relative to diameter^2: below this an element is degenerate


def _polygon_area(coords):
    x = coords[:, 0]
    y = coords[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _polygon_diameter(coords):
    d = coords[:, None, :] - coords[None, :, :]
    return float(np.sqrt((d * d).sum(axis=2).max()))


def _interior_angles(coords):
    """Interior angles in radians of a CCW simple polygon, per vertex."""
    prev = np.roll(coords, 1, axis=0) - coords
    nxt = np.roll(coords, -1, axis=0) - coords
    cross = nxt[:, 0] * prev[:, 1] - nxt[:, 1] * prev[:, 0]
    dot = (nxt * prev).sum(axis=1)
    ang = np.arctan2(cross, dot)
    return np.where(ang < 0.0, ang + 2.0 * np.pi, ang)


class BulkSurfaceMesh:
    """Conforming polygonal mesh with a single closed boundary polyline.

    Parameters
    ----------
    nodes : (N, 2) float array
        Coordinates, boundary nodes first in cycle order.
    elements : sequence of int sequences
        Counterclockwise vertex index lists, arity >= 3.
    num_boundary : int
        Number M of boundary nodes; boundary edge k joins k and (k+1) % M.
    """

    def __init__(self, nodes, elements, num_boundary):
        # own the storage: later caller-side mutation must not reach the
        # mesh (diameters and boundary data are derived once, here)
        self.nodes = np.array(nodes, dtype=float)
        self.elements = [np.asarray(e, dtype=np.int64) for e in elements]
        self.num_boundary = int(num_boundary)
        self.band_kappa = None  # set by the generator when a domain is known
        self._validate_structure()
        m = self.num_boundary
        self.boundary_edges = np.column_stack(
            [np.arange(m), (np.arange(m) + 1) % m]
        ).astype(np.int64)
        self.element_diameters = np.array(
            [_polygon_diameter(self.nodes[e]) for e in self.elements]
        )
        self.meshsize = float(self.element_diameters.max())
        bset = {(k, (k + 1) % m) for k in range(m)}
        band = []
        for i, e in enumerate(self.elements):
            for a, b in zip(e, np.roll(e, -1)):
                if (a, b) in bset or (b, a) in bset:
                    band.append(i)
                    break
        self.narrow_band_elements = np.array(sorted(band), dtype=np.int64)

    # -- structural invariants -------------------------------------------

    def _validate_structure(self):
        n = len(self.nodes)
        m = self.num_boundary
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2:
            raise MeshFormatError("nodes must be an (N, 2) array")
        if not self.elements:
            raise MeshFormatError("mesh has no elements")
        if m < 3 or m > n:
            raise MeshFormatError("need 3 <= num_boundary <= num_nodes")
        used = np.zeros(n, dtype=bool)
        edge_count = {}
        for i, e in enumerate(self.elements):
            if len(e) < 3:
                raise MeshFormatError("element %d has fewer than 3 vertices" % i)
            if e.min() < 0 or e.max() >= n:
                raise MeshFormatError("element %d references a missing node" % i)
            if np.any(e == np.roll(e, -1)):
                raise MeshFormatError("element %d repeats a vertex" % i)
            coords = self.nodes[e]
            area = _polygon_area(coords)
            diam2 = _polygon_diameter(coords) ** 2
            if area <= _AREA_TOL * diam2:
                raise MeshFormatError(
                    "element %d is not counterclockwise or has zero area" % i
                )
            used[e] = True
            for a, b in zip(e, np.roll(e, -1)):
                key = (int(a), int(b)) if a < b else (int(b), int(a))
                edge_count[key] = edge_count.get(key, 0) + 1
        if not used.all():
            raise MeshFormatError(
                "nodes %s are not referenced by any element"
                % np.nonzero(~used)[0].tolist()
            )
        over = [k for k, c in edge_count.items() if c > 2]
        if over:
            raise MeshFormatError("edge %s shared by more than two elements" % (over[0],))
        free = {k for k, c in edge_count.items() if c == 1}
        cycle = {(min(k, (k + 1) % m), max(k, (k + 1) % m)) for k in range(m)}
        if free != cycle:
            extra = free - cycle
            if extra and max(max(a, b) for a, b in extra) >= m:
                raise MeshFormatError(
                    "interior node lies on the mesh boundary: "
                    "boundary nodes must be listed first, in cycle order"
                )
            raise MeshFormatError(
                "boundary edges do not form the declared node cycle"
            )

    # -- convenience ------------------------------------------------------

    @property
    def num_nodes(self):
        return len(self.nodes)

    @property
    def num_elements(self):
        return len(self.elements)

    def element_coords(self, i):
        return self.nodes[self.elements[i]]

    def element_areas(self):
        return np.array([_polygon_area(self.nodes[e]) for e in self.elements])

    def boundary_lengths(self):
        a = self.nodes[self.boundary_edges[:, 0]]
        b = self.nodes[self.boundary_edges[:, 1]]
        return np.hypot(*(b - a).T)

    def num_edges(self):
        edges = set()
        for e in self.elements:
            for a, b in zip(e, np.roll(e, -1)):
                edges.add((int(min(a, b)), int(max(a, b))))
        return len(edges)

    def __eq__(self, other):
        if not isinstance(other, BulkSurfaceMesh):
            return NotImplemented
        return (
            self.num_boundary == other.num_boundary
            and self.nodes.shape == other.nodes.shape
            and np.array_equal(self.nodes, other.nodes)
            and len(self.elements) == len(other.elements)
            and all(np.array_equal(a, b) for a, b in zip(self.elements, other.elements))
        )


def _rebuild(nodes, elements, drop_degenerate=True):
    """Normalize raw polygon soup into a valid BulkSurfaceMesh.

    Removes repeated vertices and degenerate elements, prunes unused nodes,
    derives the topological boundary (edges used by exactly one element),
    orients the cycle counterclockwise starting from the lexicographically
    smallest boundary node and renumbers nodes boundary-first.
    """
    nodes = np.asarray(nodes, dtype=float)
    cleaned = []
    for e in elements:
        e = np.asarray(e, dtype=np.int64)
        keep = e != np.roll(e, -1)
        e = e[keep]
        if len(e) < 3:
            if drop_degenerate:
                continue
            raise MeshError("element collapsed below 3 vertices")
        coords = nodes[e]
        area = _polygon_area(coords)
        diam2 = _polygon_diameter(coords) ** 2
        if area <= _AREA_TOL * diam2:
            if drop_degenerate and area > -1e-9 * diam2:
                continue
            raise MeshError("element with negative area after transformation")
        cleaned.append(e)
    if not cleaned:
        raise MeshError("all elements degenerated during rebuild")

    used = np.zeros(len(nodes), dtype=bool)
    for e in cleaned:
        used[e] = True
    old_ids = np.nonzero(used)[0]
    remap = -np.ones(len(nodes), dtype=np.int64)
    remap[old_ids] = np.arange(len(old_ids))
    nodes = nodes[old_ids]
    cleaned = [remap[e] for e in cleaned]

    edge_count = {}
    for e in cleaned:
        for a, b in zip(e, np.roll(e, -1)):
            key = (int(a), int(b)) if a < b else (int(b), int(a))
            edge_count[key] = edge_count.get(key, 0) + 1
    free = [k for k, c in edge_count.items() if c == 1]
    if not free:
        raise MeshError("mesh has no boundary")
    neighbors = {}
    for a, b in free:
        neighbors.setdefault(a, []).append(b)
        neighbors.setdefault(b, []).append(a)
    for v, nb in neighbors.items():
        if len(nb) != 2:
            raise MeshError("boundary is not a simple closed curve at node %d" % v)

    bnodes = sorted(neighbors)
    start = min(bnodes, key=lambda v: (nodes[v, 0], nodes[v, 1]))
    cycle = [start]
    prev, cur = None, start
    while True:
        a, b = neighbors[cur]
        nxt = b if a == prev else a
        if nxt == start:
            break
        cycle.append(nxt)
        prev, cur = cur, nxt
        if len(cycle) > len(bnodes):
            raise MeshError("boundary walk did not close")
    if len(cycle) != len(bnodes):
        raise MeshError("boundary is not a single closed curve")
    if _polygon_area(nodes[cycle]) < 0.0:
        cycle = [cycle[0]] + cycle[:0:-1]

    order = np.array(cycle + [v for v in range(len(nodes)) if v not in neighbors])
    inv = np.empty(len(nodes), dtype=np.int64)
    inv[order] = np.arange(len(nodes))
    return BulkSurfaceMesh(nodes[order], [inv[e] for e in cleaned], len(cycle))


# -- generation -----------------------------------------------------------


def generate_cartesian_cut(domain, h, eps=0.1):
    """Boundary-fitted polygonal mesh from a Cartesian grid of spacing ``h``.

    Parameters
    ----------
    domain : DomainDescriptor
        Target domain; its bounding box places the background grid.
    h : float
        Grid spacing (side of the interior squares), ``0 < h <
        fermi_halfwidth``.  The resulting mesh's ``meshsize`` is the measured
        maximum element diameter, about ``h * sqrt(2)``.
    eps : float
        Quality parameter in (0, 1/2): nodes of an element closer than
        ``eps * meshsize`` are merged and interior angles below ``eps``
        radians are removed together with their sliver elements.
    """
    if not 0.0 < h < domain.fermi_halfwidth:
        raise MeshGenerationError(
            "spacing h=%g must lie in (0, fermi_halfwidth=%g)"
            % (h, domain.fermi_halfwidth)
        )
    if not 0.0 < eps < 0.5:
        raise MeshGenerationError("eps=%g must lie in (0, 1/2)" % eps)

    xmin, ymin, xmax, ymax = domain.bounding_box
    nx = int(math.ceil((xmax - xmin) / h - 1e-9))
    ny = int(math.ceil((ymax - ymin) / h - 1e-9))
    x0 = 0.5 * (xmin + xmax) - 0.5 * nx * h
    y0 = 0.5 * (ymin + ymax) - 0.5 * ny * h
    gx = x0 + h * np.arange(nx + 1)
    gy = y0 + h * np.arange(ny + 1)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    sd = np.asarray(domain.signed_distance(X, Y))
    inside = sd < 0.0

    corner_in = (
        inside[:-1, :-1].astype(int)
        + inside[1:, :-1]
        + inside[1:, 1:]
        + inside[:-1, 1:]
    )
    kept = corner_in > 0
    if not np.any(corner_in == 4):
        raise MeshGenerationError(
            "no interior square at spacing h=%g; refine the grid" % h
        )

    def gid(i, j):
        return i * (ny + 1) + j

    ii, jj = np.nonzero(kept)
    polys = [
        np.array([gid(i, j), gid(i + 1, j), gid(i + 1, j + 1), gid(i, j + 1)])
        for i, j in zip(ii, jj)
    ]

    coords = np.column_stack([X.ravel(), Y.ravel()])
    used = np.zeros(len(coords), dtype=bool)
    for p in polys:
        used[p] = True
    # outside corners of cut cells move onto the curve
    project = used & (sd.ravel() >= 0.0)
    if np.any(project):
        px, py = domain.closest_point(
            coords[project, 0], coords[project, 1]
        )
        coords[project, 0] = px
        coords[project, 1] = py

    mesh = _rebuild(coords, polys)
    for _ in range(8):
        merged = merge_close_nodes(mesh, eps)
        cleaned = collapse_small_angles(merged, eps, domain)
        if cleaned == mesh:
            break
        mesh = cleaned

    # widest band containing the boundary edges, in units of meshsize^2
    mids = 0.5 * (
        mesh.nodes[mesh.boundary_edges[:, 0]] + mesh.nodes[mesh.boundary_edges[:, 1]]
    )
    dmid = np.abs(np.asarray(domain.signed_distance(mids[:, 0], mids[:, 1])))
    mesh.band_kappa = float(dmid.max() / mesh.meshsize**2)
    return mesh


# -- clean-up passes ------------------------------------------------------


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the smaller index as representative (boundary-first order)
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def merge_close_nodes(mesh, eps):
    """Merge element nodes closer than ``eps * meshsize``.

    The merged node sits at the boundary node's position when the pair mixes
    boundary and interior (keeps boundary nodes exactly on the curve); a pair
    of boundary nodes keeps the earlier node of the cycle; interior pairs
    merge at their midpoint.  Repeats until no element has a close pair.
    """
    thresh = eps * mesh.meshsize
    current = mesh
    for _ in range(10):
        uf = _UnionFind(current.num_nodes)
        found = False
        for e in current.elements:
            pts = current.nodes[e]
            d = pts[:, None, :] - pts[None, :, :]
            dist = np.sqrt((d * d).sum(axis=2))
            arity = len(e)
            for a in range(arity):
                for b in range(a + 1, arity):
                    if dist[a, b] < thresh:
                        uf.union(int(e[a]), int(e[b]))
                        found = True
        if not found:
            return current
        groups = {}
        for v in range(current.num_nodes):
            groups.setdefault(uf.find(v), []).append(v)
        m = current.num_boundary
        nodes = current.nodes.copy()
        target = np.arange(current.num_nodes)
        for rep, members in groups.items():
            if len(members) == 1:
                continue
            bnd = [v for v in members if v < m]
            keep = min(bnd) if bnd else min(members)
            pos = nodes[keep] if bnd else nodes[members].mean(axis=0)
            for v in members:
                target[v] = keep
            nodes[keep] = pos
        current = _rebuild(nodes, [target[e] for e in current.elements])
    raise MeshError("node merging did not settle in 10 passes")


def collapse_small_angles(mesh, eps, domain=None):
    """Remove interior angles below ``eps`` radians.

    Sliver elements (width small against their diameter) are deleted and
    their off-curve vertices snapped onto the boundary curve, so the
    neighbours inherit the freed polyline; an isolated sharp corner of a
    healthy element is removed by merging its two closest vertices.  Without
    a ``domain`` descriptor freed vertices are projected onto the chord of
    the adjacent boundary nodes instead (the curve is unknown).
    """
    current = mesh
    for _ in range(10):
        offenders = []
        for idx, e in enumerate(current.elements):
            if np.min(_interior_angles(current.nodes[e])) < eps:
                offenders.append(idx)
        if not offenders:
            return current
        m = current.num_boundary
        nodes = current.nodes.copy()
        drop = set()
        pair_merge = []
        for idx in offenders:
            e = current.elements[idx]
            pts = nodes[e]
            area = _polygon_area(pts)
            diam = _polygon_diameter(pts)
            if area < 0.5 * eps * diam * diam:
                # sliver: delete, pull interior vertices onto the curve
                drop.add(idx)
                inner = [int(v) for v in e if v >= m]
                if inner:
                    xs = nodes[inner, 0]
                    ys = nodes[inner, 1]
                    if domain is not None:
                        px, py = domain.closest_point(xs, ys)
                    else:
                        px, py = _project_on_boundary_chord(current, inner)
                    nodes[inner, 0] = px
                    nodes[inner, 1] = py
            else:
                ang = _interior_angles(pts)
                k = int(np.argmin(ang))
                prev_v = int(e[k - 1])
                next_v = int(e[(k + 1) % len(e)])
                v = int(e[k])
                other = (
                    prev_v
                    if np.hypot(*(nodes[prev_v] - nodes[v]))
                    <= np.hypot(*(nodes[next_v] - nodes[v]))
                    else next_v
                )
                pair_merge.append((v, other))
        elements = [e for i, e in enumerate(current.elements) if i not in drop]
        if pair_merge:
            target = np.arange(current.num_nodes)
            for v, other in pair_merge:
                a, b = (v, other) if v < other else (other, v)
                bnd = [w for w in (a, b) if w < m]
                keep = min(bnd) if bnd else a
                lose = b if keep == a else a
                target[lose] = keep
                if not bnd:
                    nodes[keep] = 0.5 * (nodes[a] + nodes[b])
            elements = [target[e] for e in elements]
        rebuilt = _rebuild(nodes, elements)
        nxt = merge_close_nodes(rebuilt, eps)
        if nxt == current:
            return current
        current = nxt
    raise MeshError("small-angle removal did not settle in 10 passes")


def _project_on_boundary_chord(mesh, inner):
    """Fallback snap target without a domain: nearest boundary chord."""
    m = mesh.num_boundary
    a = mesh.nodes[mesh.boundary_edges[:, 0]]
    b = mesh.nodes[mesh.boundary_edges[:, 1]]
    px = np.empty(len(inner))
    py = np.empty(len(inner))
    for k, v in enumerate(inner):
        p = mesh.nodes[v]
        ab = b - a
        t = np.clip(((p - a) * ab).sum(axis=1) / (ab * ab).sum(axis=1), 0.0, 1.0)
        proj = a + t[:, None] * ab
        j = int(np.argmin(((proj - p) ** 2).sum(axis=1)))
        px[k], py[k] = proj[j]
    return px, py


# -- quality reporting ----------------------------------------------------


@dataclass
class MeshQualityReport:
    """Outcome of validate_mesh; reports violations, never raises."""

    meshsize: float
    num_elements: int
    num_boundary_elements: int
    star_ratios: np.ndarray
    min_distance_ratios: np.ndarray
    band_kappa: float | None
    checks: dict
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return all(self.checks.values())

    def summary(self):
        lines = [
            "mesh quality: %d elements, h = %.6g" % (self.num_elements, self.meshsize)
        ]
        for name in sorted(self.checks):
            lines.append("  %s: %s" % (name, "ok" if self.checks[name] else "FAIL"))
        for code, ident, value in self.violations:
            lines.append("  violation %s at %d (%.3g)" % (code, ident, value))
        return "\n".join(lines)


def _kernel_inradius(coords):
    """Radius of the largest ball in the polygon kernel (0 if empty).

    The kernel of a simple polygon is the intersection of the inner
    half-planes of its edges; its Chebyshev radius is a 3-variable linear
    program.  Triangles get the exact incircle formula.
    """
    n = len(coords)
    if n == 3:
        a = np.hypot(*(coords[1] - coords[0]))
        b = np.hypot(*(coords[2] - coords[1]))
        c = np.hypot(*(coords[0] - coords[2]))
        area = _polygon_area(coords)
        return 2.0 * area / (a + b + c)
    from scipy.optimize import linprog

    t = np.roll(coords, -1, axis=0) - coords
    ln = np.hypot(t[:, 0], t[:, 1])
    # outward normal of a CCW edge
    nx, ny = t[:, 1] / ln, -t[:, 0] / ln
    a_ub = np.column_stack([nx, ny, np.ones(n)])
    b_ub = nx * coords[:, 0] + ny * coords[:, 1]
    res = linprog(
        c=[0.0, 0.0, -1.0],
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=[(None, None), (None, None), (0.0, None)],
        method="highs",
    )
    if not res.success:
        return 0.0
    return float(res.x[2])


def validate_mesh(mesh, domain=None, gamma1=0.05, gamma2=0.05):
    """Check mesh assumptions, returning a MeshQualityReport.

    F1: element diameters within the declared meshsize.
    F2: element intersections are empty, a shared vertex or a full edge.
    F3: boundary nodes on the curve to 1e-10 (needs ``domain``).
    F4: boundary edges inside the Fermi stripe of the curve (needs ``domain``).
    V1: star-shapedness, kernel ball diameter >= gamma1 * element diameter.
    V2: node separation >= gamma2 * element diameter.
    """
    checks = {}
    violations = []

    diam = mesh.element_diameters
    checks["F1"] = bool(np.all(diam <= mesh.meshsize * (1.0 + 1e-12)))

    # F2: conformity of shared edges plus an overlap sweep
    edge_users = {}
    f2_ok = True
    for i, e in enumerate(mesh.elements):
        for a, b in zip(e, np.roll(e, -1)):
            key = (int(min(a, b)), int(max(a, b)))
            edge_users.setdefault(key, []).append((i, int(a)))
    for key, users in edge_users.items():
        if len(users) > 2:
            f2_ok = False
            violations.append(("F2-multi-edge", users[0][0], float(len(users))))
        elif len(users) == 2 and users[0][1] == users[1][1]:
            f2_ok = False
            violations.append(("F2-orientation", users[0][0], 0.0))
    f2_ok &= _no_overlaps(mesh, violations)
    checks["F2"] = bool(f2_ok)

    if domain is not None:
        bx = mesh.nodes[: mesh.num_boundary, 0]
        by = mesh.nodes[: mesh.num_boundary, 1]
        dist = np.abs(np.asarray(domain.signed_distance(bx, by)))
        checks["F3"] = bool(np.all(dist <= 1e-10))
        for k in np.nonzero(dist > 1e-10)[0]:
            violations.append(("F3", int(k), float(dist[k])))
        mids = 0.5 * (
            mesh.nodes[mesh.boundary_edges[:, 0]]
            + mesh.nodes[mesh.boundary_edges[:, 1]]
        )
        dmid = np.abs(np.asarray(domain.signed_distance(mids[:, 0], mids[:, 1])))
        checks["F4"] = bool(np.all(dmid < domain.fermi_halfwidth))
        for k in np.nonzero(dmid >= domain.fermi_halfwidth)[0]:
            violations.append(("F4", int(k), float(dmid[k])))
        band_kappa = float(dmid.max() / mesh.meshsize**2)
    else:
        band_kappa = None

    star = np.empty(mesh.num_elements)
    sep = np.empty(mesh.num_elements)
    for i, e in enumerate(mesh.elements):
        coords = mesh.nodes[e]
        star[i] = 2.0 * _kernel_inradius(coords) / diam[i]
        d = coords[:, None, :] - coords[None, :, :]
        dist = np.sqrt((d * d).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        sep[i] = dist.min() / diam[i]
    checks["V1"] = bool(np.all(star >= gamma1))
    for i in np.nonzero(star < gamma1)[0]:
        violations.append(("V1", int(i), float(star[i])))
    checks["V2"] = bool(np.all(sep >= gamma2))
    for i in np.nonzero(sep < gamma2)[0]:
        violations.append(("V2", int(i), float(sep[i])))

    return MeshQualityReport(
        meshsize=mesh.meshsize,
        num_elements=mesh.num_elements,
        num_boundary_elements=len(mesh.narrow_band_elements),
        star_ratios=star,
        min_distance_ratios=sep,
        band_kappa=band_kappa,
        checks=checks,
        violations=violations,
    )


def _no_overlaps(mesh, violations):
    from shapely import STRtree
    from shapely.geometry import Polygon

    ok = True
    polys = [Polygon(mesh.nodes[e]) for e in mesh.elements]
    # self-intersecting rings break the intersection predicate; flag them
    # instead of letting the sweep raise
    valid = []
    for i, p in enumerate(polys):
        if p.is_valid:
            valid.append(i)
        else:
            ok = False
            violations.append(("F2-invalid", int(i), 0.0))
    tree = STRtree([polys[i] for i in valid])
    pairs = tree.query([polys[i] for i in valid], predicate="intersects")
    for a, b in zip(*pairs):
        i, j = valid[a], valid[b]
        if i >= j:
            continue
        inter = polys[i].intersection(polys[j])
        if inter.area > 1e-12 * min(polys[i].area, polys[j].area):
            ok = False
            violations.append(("F2-overlap", int(i), float(inter.area)))
    return ok


# -- file format -----------------------------------------------------------


def save_mesh(mesh, path):
    """Write the plain-text format: header, counts, nodes, elements."""
    with open(path, "w") as fh:
        fh.write("bsmesh 1\n")
        fh.write("%d %d %d\n" % (mesh.num_nodes, mesh.num_boundary, mesh.num_elements))
        for x, y in mesh.nodes:
            fh.write("%.17g %.17g\n" % (x, y))
        for e in mesh.elements:
            fh.write("%d %s\n" % (len(e), " ".join(str(int(v)) for v in e)))


def load_mesh(path):
    """Read a ``bsmesh 1`` file, validating structure with line numbers."""
    with open(path) as fh:
        lines = fh.read().splitlines()

    def fail(ln, msg):
        raise MeshFormatError("%s:%d: %s" % (path, ln + 1, msg))

    if not lines or lines[0].split() != ["bsmesh", "1"]:
        fail(0, "expected header 'bsmesh 1'")
    if len(lines) < 2:
        fail(1, "missing count line")
    parts = lines[1].split()
    if len(parts) != 3:
        fail(1, "expected '<nodes> <boundary> <elements>'")
    try:
        n, m, k = (int(p) for p in parts)
    except ValueError:
        fail(1, "counts must be integers")
    if len(lines) < 2 + n + k:
        fail(len(lines) - 1, "file truncated: expected %d node and %d element lines" % (n, k))
    nodes = np.empty((n, 2))
    for i in range(n):
        parts = lines[2 + i].split()
        if len(parts) != 2:
            fail(2 + i, "expected 'x y'")
        try:
            nodes[i] = [float(parts[0]), float(parts[1])]
        except ValueError:
            fail(2 + i, "bad coordinate")
    elements = []
    for j in range(k):
        ln = 2 + n + j
        parts = lines[ln].split()
        if not parts:
            fail(ln, "empty element line")
        try:
            vals = [int(p) for p in parts]
        except ValueError:
            fail(ln, "bad element index")
        if vals[0] != len(vals) - 1:
            fail(ln, "arity %d does not match %d indices" % (vals[0], len(vals) - 1))
        elements.append(np.array(vals[1:], dtype=np.int64))
    try:
        return BulkSurfaceMesh(nodes, elements, m)
    except MeshFormatError as exc:
        raise MeshFormatError("%s: %s" % (path, exc)) from None


# -- structured triangulations --------------------------------------------


def structured_disc_triangulation(rings):
    """Quasi-uniform triangulation of the unit disc with concentric rings.

    Ring ``j`` carries ``6 j`` nodes at radius ``j / rings``; the band
    between rings ``j-1`` and ``j`` holds ``6 (2 j - 1)`` triangles, for
    ``6 rings**2`` in total.  All outer-ring nodes lie exactly on the unit
    circle, so the mesh doubles as a comparison triangular method on the
    same geometry.
    """
    rings = int(rings)
    if rings < 1:
        raise MeshGenerationError("rings must be >= 1")
    nodes = [(0.0, 0.0)]
    ring_start = [0]  # index of first node of ring j (ring 0 is the center)
    for j in range(1, rings + 1):
        ring_start.append(len(nodes))
        r = j / rings
        ang = 2.0 * np.pi * np.arange(6 * j) / (6 * j)
        nodes.extend(zip(r * np.cos(ang), r * np.sin(ang)))

    def ring_node(j, k):
        if j == 0:
            return 0
        return ring_start[j] + (k % (6 * j))

    tris = []
    for j in range(1, rings + 1):
        for s in range(6):
            for t in range(j):
                o1 = ring_node(j, j * s + t)
                o2 = ring_node(j, j * s + t + 1)
                i1 = ring_node(j - 1, (j - 1) * s + t)
                tris.append((o1, o2, i1))
                if 0 < t:
                    i0 = ring_node(j - 1, (j - 1) * s + t - 1)
                    tris.append((o1, i1, i0))
    return _rebuild(np.array(nodes), [np.array(t) for t in tris])
