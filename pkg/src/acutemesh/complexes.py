"""Finite constant-curvature polygonal complexes.

Cells are specified intrinsically (per-cell curvature plus side
lengths, or chart vertices for polygons); a complex in general embeds
in no single model space, so each cell is realized in its own copy of
the curvature-``kappa`` model and cells talk to each other only through
edge gluings. Edges may be shared by more than two cells (branching is
allowed); edges with a single incident cell are boundary edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateTriangle,
    GeometryError,
    InvalidSides,
    NotHemispheric,
    SelfIntersectingBoundary,
)
from .charts import unproject_xy
from .geometry import (
    GeodesicTriangle,
    ModelPoint,
    check_sides,
    distance_xyz,
    model_radius,
    solve_triangle,
)

__all__ = [
    "CellSpec",
    "Gluing",
    "CurvedComplex",
    "ValidationIssue",
    "ValidationReport",
    "ChartLayout",
    "validate",
    "dissect_polygons",
    "layout",
]

# Glued side lengths must agree to this relative tolerance.
GLUING_LENGTH_RTOL = 1e-9


@dataclass(frozen=True)
class CellSpec:
    """One cell: a triangle given by side lengths, or a polygon.

    ``side_lengths[i]`` is the length of the side from vertex ``i`` to
    vertex ``i + 1``. Polygons with more than three sides additionally
    need ``chart_vertices``: vertex coordinates in the cell's central
    projection chart (side lengths alone do not pin down an n-gon).
    """

    id: int
    kappa: float
    kind: str  # "triangle" | "polygon"
    side_lengths: tuple
    chart_vertices: tuple = None

    def n_sides(self) -> int:
        return len(self.side_lengths)


@dataclass(frozen=True)
class Gluing:
    """Identification of side ``a`` with side ``b``.

    Sides are ``(cell id, edge index)``. Orientation ``preserving``
    matches arc-length parameters measured from each side's own start
    vertex; ``reversing`` matches ``s`` with ``L - s``.
    """

    a: tuple
    b: tuple
    orientation: str  # "preserving" | "reversing"


@dataclass
class CurvedComplex:
    """A finite collection of cells plus gluings."""

    cells: list
    gluings: list

    def cell_by_id(self, cell_id: int) -> CellSpec:
        for c in self.cells:
            if c.id == cell_id:
                return c
        raise KeyError(f"no cell with id {cell_id}")


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    where: str
    message: str

    def __str__(self):
        return f"{self.code} at {self.where}: {self.message}"


@dataclass
class ValidationReport:
    issues: list = field(default_factory=list)

    def ok(self) -> bool:
        return not self.issues

    def add(self, code: str, where: str, message: str) -> None:
        self.issues.append(ValidationIssue(code, where, message))

    def __str__(self):
        if self.ok():
            return "valid: no issues"
        return "\n".join(str(i) for i in self.issues)


def _chart_polygon_side_lengths(kappa: float, verts: np.ndarray) -> list:
    pts = unproject_xy(kappa, verts)
    nxt = np.roll(pts, -1, axis=0)
    return [float(d) for d in distance_xyz(kappa, pts, nxt)]


def validate(complex_: CurvedComplex) -> ValidationReport:
    """Check every structural and metric invariant of the complex.

    Nothing is raised; each violation is reported with the cell or
    gluing it concerns. An empty report means the complex is valid.
    """
    report = ValidationReport()
    seen_ids = set()
    lengths = {}
    for cell in complex_.cells:
        where = f"cell {cell.id}"
        if cell.id in seen_ids:
            report.add("DuplicateId", where, "cell id already used")
            continue
        seen_ids.add(cell.id)
        if not math.isfinite(cell.kappa):
            report.add("NonFiniteValue", where, f"curvature {cell.kappa!r}")
            continue
        if cell.kind not in ("triangle", "polygon"):
            report.add("BadKind", where, f"unknown cell kind {cell.kind!r}")
            continue
        n = cell.n_sides()
        if cell.kind == "triangle" and n != 3:
            report.add("BadSideCount", where, f"triangle with {n} sides")
            continue
        if n < 3:
            report.add("BadSideCount", where, f"polygon with {n} sides")
            continue
        if not all(math.isfinite(s) and s > 0.0 for s in cell.side_lengths):
            report.add("BadSideLength", where, f"sides {cell.side_lengths}")
            continue
        if cell.kappa > 0.0:
            bound = 2.0 * math.pi * model_radius(cell.kappa)
            perim = sum(cell.side_lengths)
            if perim >= bound:
                report.add(
                    "PerimeterViolation",
                    where,
                    f"perimeter {perim} not below the hemisphere bound {bound}",
                )
                continue
        if cell.kind == "triangle":
            try:
                check_sides(cell.kappa, *cell.side_lengths)
            except GeometryError as exc:
                report.add("InvalidTriangle", where, str(exc))
                continue
            for i in range(3):
                lengths[(cell.id, i)] = cell.side_lengths[i]
        else:
            if n > 3 and cell.chart_vertices is None:
                report.add(
                    "MissingChartVertices",
                    where,
                    "polygons with more than 3 sides need chart_vertices",
                )
                continue
            if cell.chart_vertices is not None:
                verts = np.asarray(cell.chart_vertices, dtype=float)
                if verts.shape != (n, 2) or not np.all(np.isfinite(verts)):
                    report.add("BadChartVertices", where, f"expected {n} finite 2-vectors")
                    continue
                if cell.kappa < 0.0:
                    r = model_radius(cell.kappa)
                    if np.any(np.sum(verts * verts, axis=1) >= r * r):
                        report.add("BadChartVertices", where, "vertex outside the Klein disk")
                        continue
                chart_ls = _chart_polygon_side_lengths(cell.kappa, verts)
                for i, (given, derived) in enumerate(zip(cell.side_lengths, chart_ls)):
                    if abs(given - derived) > GLUING_LENGTH_RTOL * max(given, derived, 1e-300):
                        report.add(
                            "SideLengthMismatch",
                            f"{where} side {i}",
                            f"declared {given}, chart geometry gives {derived}",
                        )
            for i in range(n):
                lengths[(cell.id, i)] = cell.side_lengths[i]

    used_sides = set()
    for gi, g in enumerate(complex_.gluings):
        where = f"gluing {gi}"
        if g.orientation not in ("preserving", "reversing"):
            report.add("BadOrientation", where, f"{g.orientation!r}")
            continue
        ok = True
        for label, side in (("a", g.a), ("b", g.b)):
            if tuple(side) not in lengths:
                report.add("BadEdgeIndex", where, f"side {label} = {tuple(side)} does not exist")
                ok = False
        if not ok:
            continue
        if tuple(g.a) == tuple(g.b):
            report.add("SelfGluing", where, f"side {tuple(g.a)} glued to itself")
            continue
        la, lb = lengths[tuple(g.a)], lengths[tuple(g.b)]
        if abs(la - lb) > GLUING_LENGTH_RTOL * max(la, lb):
            report.add("LengthMismatch", where, f"side lengths {la} vs {lb}")
        for side in (tuple(g.a), tuple(g.b)):
            # repeated appearances are fine (branching), but flag exact duplicates
            pass
        pair = frozenset((tuple(g.a), tuple(g.b)))
        if pair in used_sides:
            report.add("DuplicateGluing", where, f"{tuple(g.a)} ~ {tuple(g.b)} repeated")
        used_sides.add(pair)
    return report


def _segments_intersect(p, q, a, b) -> bool:
    def orient(u, v, w):
        return (v[0] - u[0]) * (w[1] - u[1]) - (v[1] - u[1]) * (w[0] - u[0])

    d1 = orient(a, b, p)
    d2 = orient(a, b, q)
    d3 = orient(p, q, a)
    d4 = orient(p, q, b)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _point_in_triangle(p, a, b, c) -> bool:
    def orient(u, v, w):
        return (v[0] - u[0]) * (w[1] - u[1]) - (v[1] - u[1]) * (w[0] - u[0])

    d1 = orient(a, b, p)
    d2 = orient(b, c, p)
    d3 = orient(c, a, p)
    return (d1 >= 0 and d2 >= 0 and d3 >= 0) or (d1 <= 0 and d2 <= 0 and d3 <= 0)


def _ear_clip(verts: np.ndarray) -> list:
    """Triangulate a simple polygon by diagonals; ties to lowest index.

    Works in chart coordinates, where geodesics are straight, so every
    diagonal chosen here is a geodesic diagonal of the curved polygon.
    Returns triangles as index triples into ``verts``.
    """
    n = len(verts)
    area2 = 0.0
    for i in range(n):
        j = (i + 1) % n
        area2 += verts[i, 0] * verts[j, 1] - verts[j, 0] * verts[i, 1]
    order = list(range(n))
    if area2 < 0.0:
        order.reverse()
    triangles = []
    idx = order[:]
    while len(idx) > 3:
        clipped = False
        for k in range(len(idx)):
            i_prev = idx[k - 1]
            i_cur = idx[k]
            i_next = idx[(k + 1) % len(idx)]
            a, b, c = verts[i_prev], verts[i_cur], verts[i_next]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if cross <= 0.0:
                continue  # reflex or flat corner, not an ear
            if any(
                _point_in_triangle(verts[m], a, b, c)
                for m in idx
                if m not in (i_prev, i_cur, i_next)
            ):
                continue
            triangles.append((i_prev, i_cur, i_next))
            idx.pop(k)
            clipped = True
            break
        if not clipped:
            raise SelfIntersectingBoundary("no ear found; boundary is not simple")
    triangles.append(tuple(idx))
    return triangles


def dissect_polygons(complex_: CurvedComplex) -> CurvedComplex:
    """Replace every polygon cell by triangles joined along diagonals.

    Triangle cells pass through unchanged (ids kept). An n-gon becomes
    n - 2 triangle cells sharing its vertices; boundary gluings are
    re-attached to the triangle sides that now carry the original
    polygon sides, and the diagonals become new preserving gluings.

    Raises
    ------
    NotHemispheric
        ``kappa > 0`` polygon whose perimeter does not fit in an open
        hemisphere.
    SelfIntersectingBoundary
        Chart boundary that crosses itself.
    """
    out_cells = []
    out_gluings = []
    side_map = {}
    used_ids = {c.id for c in complex_.cells}
    for cell in complex_.cells:
        if cell.kind == "triangle":
            out_cells.append(cell)
            for i in range(3):
                side_map[(cell.id, i)] = (cell.id, i)
            continue
        n = cell.n_sides()
        if cell.kappa > 0.0:
            bound = 2.0 * math.pi * model_radius(cell.kappa)
            if sum(cell.side_lengths) >= bound:
                raise NotHemispheric(
                    f"cell {cell.id}: perimeter {sum(cell.side_lengths)} needs a hemisphere "
                    f"bound below {bound}"
                )
        if n == 3:
            tri = CellSpec(cell.id, cell.kappa, "triangle", tuple(cell.side_lengths))
            out_cells.append(tri)
            for i in range(3):
                side_map[(cell.id, i)] = (cell.id, i)
            continue
        verts = np.asarray(cell.chart_vertices, dtype=float)
        m = len(verts)
        for i in range(m):
            for j in range(i + 1, m):
                if j in (i, (i + 1) % m) or (j + 1) % m == i:
                    continue
                if _segments_intersect(
                    verts[i], verts[(i + 1) % m], verts[j], verts[(j + 1) % m]
                ):
                    raise SelfIntersectingBoundary(
                        f"cell {cell.id}: sides {i} and {j} intersect"
                    )
        triangles = _ear_clip(verts)
        pts3 = unproject_xy(cell.kappa, verts)
        tri_ids = []
        tri_specs = []
        for k, tri in enumerate(triangles):
            coords = pts3[list(tri)]
            nxt = np.roll(coords, -1, axis=0)
            sides = tuple(float(d) for d in distance_xyz(cell.kappa, coords, nxt))
            tri_specs.append((tri, sides))
            tid = f"{cell.id}/{k}"
            while tid in used_ids:
                tid = tid + "+"
            used_ids.add(tid)
            tri_ids.append(tid)
        edge_owner = {}
        for tid, (tri, sides) in zip(tri_ids, tri_specs):
            out_cells.append(CellSpec(tid, cell.kappa, "triangle", sides))
            for k in range(3):
                u, v = tri[k], tri[(k + 1) % 3]
                if (u + 1) % m == v:
                    side_map[(cell.id, u)] = (tid, k)
                elif (v + 1) % m == u:
                    # traversed against the polygon's orientation
                    side_map[(cell.id, v)] = (tid, k, "flip")
                else:
                    key = (min(u, v), max(u, v))
                    if key in edge_owner:
                        other_tid, other_k, other_start = edge_owner.pop(key)
                        orientation = "preserving" if other_start == u else "reversing"
                        out_gluings.append(
                            Gluing((other_tid, other_k), (tid, k), orientation)
                        )
                    else:
                        edge_owner[key] = (tid, k, u)
    for g in complex_.gluings:
        ma = side_map[tuple(g.a)]
        mb = side_map[tuple(g.b)]
        orientation = g.orientation
        for mapped in (ma, mb):
            if len(mapped) == 3:
                orientation = "reversing" if orientation == "preserving" else "preserving"
        out_gluings.append(Gluing(tuple(ma[:2]), tuple(mb[:2]), orientation))
    return CurvedComplex(out_cells, out_gluings)


@dataclass
class ChartLayout:
    """Canonical realization of every triangle cell in its own model.

    ``triangles[cell id]`` is a :class:`GeodesicTriangle` with vertex 0
    at the pole, vertex 1 along the ``y = 0`` meridian (positive x),
    and vertex 2 on the positive-y side.
    """

    triangles: dict

    def coords(self, cell_id: int) -> np.ndarray:
        return self.triangles[cell_id].coords_array()


def _realize_triangle(kappa: float, sides) -> GeodesicTriangle:
    l0, l1, l2 = sides
    alpha0, _, _ = solve_triangle(kappa, l1, l2, l0)
    if kappa == 0.0:
        v0 = np.array([0.0, 0.0, 1.0])
        v1 = np.array([l0, 0.0, 1.0])
        v2 = np.array([l2 * math.cos(alpha0), l2 * math.sin(alpha0), 1.0])
    else:
        r = model_radius(kappa)
        s = 1.0 / r

        def from_pole(arc, azimuth):
            if kappa > 0.0:
                rad, z = math.sin(arc * s), math.cos(arc * s)
            else:
                rad, z = math.sinh(arc * s), math.cosh(arc * s)
            return r * np.array(
                [rad * math.cos(azimuth), rad * math.sin(azimuth), z]
            )

        v0 = np.array([0.0, 0.0, r])
        v1 = from_pole(l0, 0.0)
        v2 = from_pole(l2, alpha0)
    return GeodesicTriangle(
        kappa,
        (
            ModelPoint(kappa, v0),
            ModelPoint(kappa, v1),
            ModelPoint(kappa, v2),
        ),
    )


def layout(complex_: CurvedComplex) -> ChartLayout:
    """Realize each triangle cell canonically in its own model space.

    The complex must contain triangles only (run
    :func:`dissect_polygons` first) and should already have passed
    :func:`validate`.
    """
    triangles = {}
    for cell in complex_.cells:
        if cell.kind != "triangle":
            raise InvalidSides(f"cell {cell.id} is not a triangle; dissect polygons first")
        triangles[cell.id] = _realize_triangle(cell.kappa, cell.side_lengths)
    return ChartLayout(triangles)
