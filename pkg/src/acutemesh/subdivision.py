"""Iterated medial subdivision and the Euclidean comparison complex.

The subdivided complex is stored per level-0 cell as flat arrays: a
point pool in the cell's own model space, triangle index triples into
that pool, and per-side edge-class ids with alignment flags. Midpoints
are created once per edge class, so subdivision stays a refinement of
the whole complex and glued cells keep identical edge parameters by
construction. Global vertex ids tie the per-cell pools together.

Side convention: side ``i`` of a triangle runs from its vertex ``i`` to
vertex ``(i + 1) % 3``. An edge class has a canonical direction (that
of its representative side); a member side is ``aligned`` when its own
direction agrees.

Child slots of a subdivided triangle ``(p0, p1, p2)`` with side
midpoints ``(m0, m1, m2)``: slot 0 ``(p0, m0, m2)``, slot 1
``(m0, p1, m1)``, slot 2 ``(m2, m1, p2)``, slot 3 ``(m0, m1, m2)``.
The halves of parent side ``i`` are carried by child ``i`` (first
half) and child ``(i + 1) % 3`` (second half), both as their side
``i``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .complexes import ChartLayout, CurvedComplex, layout as make_layout
from .errors import GeometryError, LevelCapExceeded
from .geometry import (
    distance_xyz,
    point_on_geodesic_xyz,
    solve_triangle_xyz,
    triangle_area_xyz,
)

__all__ = [
    "SubdividedComplex",
    "PlanarComplex",
    "ConvergenceStats",
    "build_subdivided",
    "medial_subdivide",
    "subdivide_to",
    "comparison_complex",
    "comparison_corners_xy",
]

# Default cap on subdivision levels when chasing a max-edge target.
DEFAULT_LEVEL_CAP = 30


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            # smaller root wins, keeping class representatives canonical
            if rj < ri:
                ri, rj = rj, ri
            self.parent[rj] = ri


@dataclass
class SubdividedComplex:
    """Level-``level`` medial subdivision of a triangle complex.

    Arrays are indexed by cell position (``cell_ids[pos]`` is the
    original cell id). ``class_rep[e]`` is ``(cell_pos, tri, side,
    aligned)`` for a deterministic representative of edge class ``e``.
    """

    level: int
    source: CurvedComplex
    cell_ids: list
    kappas: list
    points: list          # per cell: (P, 3) float
    point_gid: list       # per cell: (P,) int
    tris: list            # per cell: (T, 3) int
    tri_classes: list     # per cell: (T, 3) int
    tri_aligned: list     # per cell: (T, 3) bool
    ancestry: list        # per cell: (T,) int, base-4 slot path
    n_vertex_classes: int
    class_lengths: np.ndarray
    class_rep: np.ndarray  # (E, 4) int

    def n_cells(self) -> int:
        return len(self.cell_ids)

    def n_triangles(self) -> int:
        return sum(t.shape[0] for t in self.tris)

    def n_edge_classes(self) -> int:
        return len(self.class_lengths)

    def tri_offsets(self) -> np.ndarray:
        """Offset of each cell's triangles in the flat enumeration."""
        counts = [t.shape[0] for t in self.tris]
        return np.concatenate([[0], np.cumsum(counts)])

    def tri_side_lengths(self, pos: int) -> np.ndarray:
        """(T, 3) side lengths of cell ``pos``'s triangles."""
        return self.class_lengths[self.tri_classes[pos]]

    def tri_angles(self, pos: int) -> np.ndarray:
        """(T, 3) interior angles; column ``j`` is the angle at vertex ``j``."""
        ls = self.tri_side_lengths(pos)
        # the angle at vertex j is opposite side (j + 1) % 3
        a, b, g = solve_triangle_xyz(self.kappas[pos], ls[:, 1], ls[:, 2], ls[:, 0])
        return np.stack([a, b, g], axis=1)

    def tri_areas(self, pos: int) -> np.ndarray:
        ls = self.tri_side_lengths(pos)
        return triangle_area_xyz(self.kappas[pos], ls[:, 0], ls[:, 1], ls[:, 2])

    def class_members(self) -> list:
        """Members of each edge class as ``(cell_pos, tri, side, aligned)``.

        Rebuilt on demand from the per-side class arrays.
        """
        members = [[] for _ in range(self.n_edge_classes())]
        for pos in range(self.n_cells()):
            cls = self.tri_classes[pos]
            ali = self.tri_aligned[pos]
            for t in range(cls.shape[0]):
                for i in range(3):
                    members[cls[t, i]].append((pos, t, i, bool(ali[t, i])))
        return members


@dataclass
class ConvergenceStats:
    """Per-level extremes of the subdivision, exportable as CSV."""

    rows: list = field(default_factory=list)  # (level, max_edge, min_angle, max_angle)

    def add(self, level, max_edge, min_angle, max_angle):
        self.rows.append((level, max_edge, min_angle, max_angle))

    def max_edges(self):
        return [r[1] for r in self.rows]

    def min_angles(self):
        return [r[2] for r in self.rows]

    def max_angles(self):
        return [r[3] for r in self.rows]

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["level", "max_edge", "min_angle", "max_angle"])
        for level, max_edge, min_angle, max_angle in self.rows:
            w.writerow([level, repr(max_edge), repr(min_angle), repr(max_angle)])
        return out.getvalue()


def level_extremes(sub: SubdividedComplex) -> tuple:
    """(max_edge, min_angle, max_angle) over all triangles of the level."""
    max_edge = float(np.max(sub.class_lengths))
    min_angle = math.inf
    max_angle = 0.0
    for pos in range(sub.n_cells()):
        ang = sub.tri_angles(pos)
        min_angle = min(min_angle, float(np.min(ang)))
        max_angle = max(max_angle, float(np.max(ang)))
    return max_edge, min_angle, max_angle


def build_subdivided(complex_: CurvedComplex, chart_layout: ChartLayout = None) -> SubdividedComplex:
    """Level-0 subdivision state for a validated triangle complex.

    Derives vertex and edge identification classes from the gluings.
    Raises ``GeometryError`` when gluing orientations are mutually
    inconsistent (an edge identified with itself reversed).
    """
    if chart_layout is None:
        chart_layout = make_layout(complex_)
    cell_ids = sorted(c.id for c in complex_.cells)
    pos_of = {cid: pos for pos, cid in enumerate(cell_ids)}
    n_cells = len(cell_ids)
    kappas = [complex_.cell_by_id(cid).kappa for cid in cell_ids]

    # vertex classes from gluing endpoint identifications
    vuf = _UnionFind(3 * n_cells)
    suf = _UnionFind(3 * n_cells)
    for g in complex_.gluings:
        ca, ia = pos_of[g.a[0]], g.a[1]
        cb, ib = pos_of[g.b[0]], g.b[1]
        a_start, a_end = 3 * ca + ia, 3 * ca + (ia + 1) % 3
        b_start, b_end = 3 * cb + ib, 3 * cb + (ib + 1) % 3
        if g.orientation == "preserving":
            vuf.union(a_start, b_start)
            vuf.union(a_end, b_end)
        else:
            vuf.union(a_start, b_end)
            vuf.union(a_end, b_start)
        suf.union(3 * ca + ia, 3 * cb + ib)

    roots = {}
    gid_of = [0] * (3 * n_cells)
    for k in range(3 * n_cells):
        r = vuf.find(k)
        if r not in roots:
            roots[r] = len(roots)
        gid_of[k] = roots[r]
    n_vertex_classes = len(roots)

    # edge classes and member alignments; propagate orientation flags
    side_class = {}
    class_list = []
    for k in range(3 * n_cells):
        r = suf.find(k)
        if r not in side_class:
            side_class[r] = len(class_list)
            class_list.append(r)
        # class id assigned by first appearance, i.e. lowest (cell, side)
    n_classes = len(class_list)
    aligned = [None] * (3 * n_cells)
    for r in class_list:
        aligned[r] = True
    adjacency = [[] for _ in range(3 * n_cells)]
    for g in complex_.gluings:
        sa = 3 * pos_of[g.a[0]] + g.a[1]
        sb = 3 * pos_of[g.b[0]] + g.b[1]
        same = g.orientation == "preserving"
        adjacency[sa].append((sb, same))
        adjacency[sb].append((sa, same))
    for r in class_list:
        stack = [r]
        while stack:
            s = stack.pop()
            for nb, same in adjacency[s]:
                want = aligned[s] if same else not aligned[s]
                if aligned[nb] is None:
                    aligned[nb] = want
                    stack.append(nb)
                elif aligned[nb] != want:
                    raise GeometryError(
                        "gluing orientations identify an edge with itself reversed"
                    )

    points = []
    point_gid = []
    tris = []
    tri_classes = []
    tri_aligned = []
    ancestry = []
    class_rep = np.zeros((n_classes, 4), dtype=np.int64)
    seen_class = [False] * n_classes
    for pos, cid in enumerate(cell_ids):
        points.append(chart_layout.coords(cid).copy())
        point_gid.append(np.array([gid_of[3 * pos + v] for v in range(3)], dtype=np.int64))
        tris.append(np.array([[0, 1, 2]], dtype=np.int64))
        cls_row = np.zeros((1, 3), dtype=np.int64)
        ali_row = np.zeros((1, 3), dtype=bool)
        for i in range(3):
            e = side_class[suf.find(3 * pos + i)]
            cls_row[0, i] = e
            ali_row[0, i] = aligned[3 * pos + i]
            if not seen_class[e]:
                seen_class[e] = True
                class_rep[e] = (pos, 0, i, 1 if aligned[3 * pos + i] else 0)
        tri_classes.append(cls_row)
        tri_aligned.append(ali_row)
        ancestry.append(np.zeros(1, dtype=np.int64))

    class_lengths = np.zeros(n_classes)
    for e in range(n_classes):
        pos, t, i, _ = class_rep[e]
        p = points[pos][tris[pos][t, i]]
        q = points[pos][tris[pos][t, (i + 1) % 3]]
        class_lengths[e] = distance_xyz(kappas[pos], p, q)

    return SubdividedComplex(
        level=0,
        source=complex_,
        cell_ids=cell_ids,
        kappas=kappas,
        points=points,
        point_gid=point_gid,
        tris=tris,
        tri_classes=tri_classes,
        tri_aligned=tri_aligned,
        ancestry=ancestry,
        n_vertex_classes=n_vertex_classes,
        class_lengths=class_lengths,
        class_rep=class_rep,
    )


def medial_subdivide(sub: SubdividedComplex) -> SubdividedComplex:
    """One medial subdivision step: 4 children per triangle.

    Midpoints are created once per edge class (giving one new vertex
    class each) and realized in every incident cell from that cell's
    own coordinates, so glued cells stay consistent and sibling
    triangles share bitwise-identical midpoints within a cell.
    """
    n_cells = sub.n_cells()
    E = sub.n_edge_classes()
    offsets = sub.tri_offsets()
    T_total = int(offsets[-1])

    def first_half(e, a):
        return 2 * e if a else 2 * e + 1

    def second_half(e, a):
        return 2 * e + 1 if a else 2 * e

    new_points = []
    new_point_gid = []
    new_tris = []
    new_tri_classes = []
    new_tri_aligned = []
    new_ancestry = []
    mid_coords_by_class = [None] * E  # per class: coords of midpoint in rep cell
    new_class_lengths = np.zeros(2 * E + 3 * T_total)
    # representative bookkeeping for parent halves, filled from class_rep
    new_class_rep = np.zeros((2 * E + 3 * T_total, 4), dtype=np.int64)

    for pos in range(n_cells):
        kappa = sub.kappas[pos]
        pts = sub.points[pos]
        gid = sub.point_gid[pos]
        tri = sub.tris[pos]
        cls = sub.tri_classes[pos]
        ali = sub.tri_aligned[pos]
        T = tri.shape[0]

        flat_cls = cls.ravel()
        uniq, first_idx = np.unique(flat_cls, return_index=True)
        rep_t = first_idx // 3
        rep_i = first_idx % 3
        starts = pts[tri[rep_t, rep_i]]
        ends = pts[tri[rep_t, (rep_i + 1) % 3]]
        d = distance_xyz(kappa, starts, ends)
        mids = point_on_geodesic_xyz(kappa, starts, ends, 0.5 * d)

        P = pts.shape[0]
        mid_local = np.full(E, -1, dtype=np.int64)
        mid_local[uniq] = P + np.arange(len(uniq))
        new_points.append(np.concatenate([pts, mids], axis=0))
        new_point_gid.append(
            np.concatenate([gid, sub.n_vertex_classes + uniq])
        )
        for e_idx, e in enumerate(uniq):
            if mid_coords_by_class[e] is None and sub.class_rep[e, 0] == pos:
                mid_coords_by_class[e] = mids[e_idx]

        p0, p1, p2 = tri[:, 0], tri[:, 1], tri[:, 2]
        m0 = mid_local[cls[:, 0]]
        m1 = mid_local[cls[:, 1]]
        m2 = mid_local[cls[:, 2]]
        children = np.empty((4 * T, 3), dtype=np.int64)
        children[0::4] = np.stack([p0, m0, m2], axis=1)
        children[1::4] = np.stack([m0, p1, m1], axis=1)
        children[2::4] = np.stack([m2, m1, p2], axis=1)
        children[3::4] = np.stack([m0, m1, m2], axis=1)
        new_tris.append(children)

        base = 2 * E + 3 * (offsets[pos] + np.arange(T, dtype=np.int64))
        fh = np.where(ali, 2 * cls, 2 * cls + 1)
        sh = np.where(ali, 2 * cls + 1, 2 * cls)
        ccls = np.empty((4 * T, 3), dtype=np.int64)
        cali = np.empty((4 * T, 3), dtype=bool)
        # slot 0: (fh side0, midseg A, sh side2)
        ccls[0::4] = np.stack([fh[:, 0], base + 0, sh[:, 2]], axis=1)
        cali[0::4] = np.stack([ali[:, 0], np.ones(T, bool), ali[:, 2]], axis=1)
        # slot 1: (sh side0, fh side1, midseg B)
        ccls[1::4] = np.stack([sh[:, 0], fh[:, 1], base + 1], axis=1)
        cali[1::4] = np.stack([ali[:, 0], ali[:, 1], np.ones(T, bool)], axis=1)
        # slot 2: (midseg C, sh side1, fh side2)
        ccls[2::4] = np.stack([base + 2, sh[:, 1], fh[:, 2]], axis=1)
        cali[2::4] = np.stack([np.ones(T, bool), ali[:, 1], ali[:, 2]], axis=1)
        # slot 3: central child traverses the midsegs against their owners
        ccls[3::4] = np.stack([base + 1, base + 2, base + 0], axis=1)
        cali[3::4] = np.zeros((T, 3), dtype=bool)
        new_tri_classes.append(ccls)
        new_tri_aligned.append(cali)

        anc = sub.ancestry[pos]
        new_ancestry.append((anc[:, None] * 4 + np.arange(4)[None, :]).ravel())

        # midseg lengths: A = |m0 m2|, B = |m1 m0|, C = |m2 m1|
        mp = new_points[pos]
        la = distance_xyz(kappa, mp[m0], mp[m2])
        lb = distance_xyz(kappa, mp[m1], mp[m0])
        lc = distance_xyz(kappa, mp[m2], mp[m1])
        new_class_lengths[base + 0] = la
        new_class_lengths[base + 1] = lb
        new_class_lengths[base + 2] = lc
        new_class_rep[base + 0] = np.stack(
            [np.full(T, pos), 4 * np.arange(T) + 0, np.full(T, 1), np.ones(T)], axis=1
        )
        new_class_rep[base + 1] = np.stack(
            [np.full(T, pos), 4 * np.arange(T) + 1, np.full(T, 2), np.ones(T)], axis=1
        )
        new_class_rep[base + 2] = np.stack(
            [np.full(T, pos), 4 * np.arange(T) + 2, np.full(T, 0), np.ones(T)], axis=1
        )

    # parent-half classes: lengths and representatives from the old reps
    for e in range(E):
        pos, t, i, a = (int(x) for x in sub.class_rep[e])
        tri = sub.tris[pos]
        pts = sub.points[pos]
        kappa = sub.kappas[pos]
        start = pts[tri[t, i]]
        end = pts[tri[t, (i + 1) % 3]]
        mid = mid_coords_by_class[e]
        d_start = float(distance_xyz(kappa, start, mid))
        d_end = float(distance_xyz(kappa, mid, end))
        t_first = 4 * t + i
        t_second = 4 * t + (i + 1) % 3
        if a:
            new_class_lengths[2 * e] = d_start
            new_class_lengths[2 * e + 1] = d_end
            new_class_rep[2 * e] = (pos, t_first, i, 1)
            new_class_rep[2 * e + 1] = (pos, t_second, i, 1)
        else:
            # rep runs class-end -> class-start
            new_class_lengths[2 * e] = d_end
            new_class_lengths[2 * e + 1] = d_start
            new_class_rep[2 * e] = (pos, t_second, i, 0)
            new_class_rep[2 * e + 1] = (pos, t_first, i, 0)

    return SubdividedComplex(
        level=sub.level + 1,
        source=sub.source,
        cell_ids=sub.cell_ids,
        kappas=sub.kappas,
        points=new_points,
        point_gid=new_point_gid,
        tris=new_tris,
        tri_classes=new_tri_classes,
        tri_aligned=new_tri_aligned,
        ancestry=new_ancestry,
        n_vertex_classes=sub.n_vertex_classes + E,
        class_lengths=new_class_lengths,
        class_rep=new_class_rep,
    )


def subdivide_to(
    complex_: CurvedComplex,
    levels: int = None,
    max_edge: float = None,
    level_cap: int = DEFAULT_LEVEL_CAP,
) -> tuple:
    """Subdivide until a level count or a max-edge target is reached.

    Exactly one of ``levels`` and ``max_edge`` must be given. Returns
    ``(SubdividedComplex, ConvergenceStats)`` with one stats row per
    visited level (level 0 included).

    Raises
    ------
    LevelCapExceeded
        ``max_edge`` still unmet after ``level_cap`` subdivisions.
    """
    if (levels is None) == (max_edge is None):
        raise ValueError("specify exactly one of levels and max_edge")
    if levels is not None and (levels < 0 or levels > level_cap):
        raise LevelCapExceeded(f"requested {levels} levels with cap {level_cap}")
    sub = build_subdivided(complex_)
    stats = ConvergenceStats()
    stats.add(0, *level_extremes(sub))
    while True:
        if levels is not None:
            if sub.level >= levels:
                return sub, stats
        elif stats.rows[-1][1] <= max_edge:
            return sub, stats
        if sub.level >= level_cap:
            raise LevelCapExceeded(
                f"max edge {stats.rows[-1][1]} above target {max_edge} at the "
                f"level cap {level_cap}",
                best=(sub, stats),
            )
        sub = medial_subdivide(sub)
        stats.add(sub.level, *level_extremes(sub))


def comparison_corners_xy(side_lengths: np.ndarray) -> np.ndarray:
    """Canonical planar corners for (T, 3) side-length rows.

    Vertex 0 at the origin, vertex 1 at ``(l0, 0)``, vertex 2 in the
    upper half-plane. Returns shape (T, 3, 2).
    """
    ls = np.asarray(side_lengths, dtype=float)
    l0, l1, l2 = ls[..., 0], ls[..., 1], ls[..., 2]
    x2 = (l0 * l0 + l2 * l2 - l1 * l1) / (2.0 * l0)
    y2 = np.sqrt(np.maximum(l2 * l2 - x2 * x2, 0.0))
    out = np.zeros(ls.shape[:-1] + (3, 2))
    out[..., 1, 0] = l0
    out[..., 2, 0] = x2
    out[..., 2, 1] = y2
    return out


@dataclass
class PlanarComplex:
    """Euclidean comparison complex of a subdivided complex.

    ``corners[pos][t]`` holds the canonical planar corners of triangle
    ``t`` of cell ``pos``; combinatorics (edge classes, vertex ids,
    alignments) are shared with ``sub``.
    """

    sub: SubdividedComplex
    corners: list  # per cell: (T, 3, 2)

    def planar_angles(self, pos: int) -> np.ndarray:
        ls = self.sub.tri_side_lengths(pos)
        a, b, g = solve_triangle_xyz(0.0, ls[:, 1], ls[:, 2], ls[:, 0])
        return np.stack([a, b, g], axis=1)


def comparison_complex(sub: SubdividedComplex) -> PlanarComplex:
    """Replace every triangle by its comparison triangle, keeping gluings.

    Since glued sides share one class length, matching planar side
    lengths agree exactly and the combinatorial complex is unchanged.
    """
    corners = []
    for pos in range(sub.n_cells()):
        corners.append(comparison_corners_xy(sub.tri_side_lengths(pos)))
    return PlanarComplex(sub, corners)
