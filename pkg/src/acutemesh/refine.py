"""Acute refinement of the Euclidean comparison complex.

The refiner is deterministic and works in two phases. The edge phase
splits every edge class into equal arcs, so each incident triangle
sees one canonical parameter list and the output conforms across
gluings by construction. The cell phase meshes each planar triangle
independently: boundary points from the canonical subdivisions, seed
fans at wide corners, an equilateral interior lattice held away from
the sides by a guard band, then Delaunay plus damped smoothing toward
equilateral-ideal apex positions, with clamped circumcenter insertion
for stubborn triangles whose vertices are all boundary-fixed.

Acceptance is a posteriori: a cell succeeds only when its measured
angles lie strictly inside (min_angle, pi/2 - margin) and the boundary
sub-segments all appear in the triangulation. If any cell exhausts its
budget the whole refinement restarts with a smaller target edge scale
(the edge phase must rerun globally to keep conformity). Interior
points never leave the guard band, which keeps every boundary
sub-segment Delaunay and every interior vertex strictly off the cell
sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay

from .errors import BudgetExhausted, GeometryError
from .subdivision import PlanarComplex


__all__ = [
    "AcuteParams",
    "CellRefinement",
    "PlanarRefinement",
    "subdivide_edges",
    "acute_refine",
    "star_separation",
]

# Interior points keep at least this many local spacings from each side
# line; above 1/2 spacing it also keeps boundary sub-segments Delaunay.
GUARD = 0.58
# Initial lattice filter, slightly wider than the hard guard.
LATTICE_GUARD = 0.65
# A corner triangle is forced (corner plus first boundary point of each
# arm); fans split corners whose forced triangle would be near-right.
FAN_MARGIN = 0.12
FAN_WEDGE = 0.92
# Shrink factor applied to the edge scale on a global restart.
RESTART_SHRINK = 0.75
MAX_RESTARTS = 3
# Corners sharper than this get a bisector spine: interior apexes
# placed ring by ring so the narrow tip triangulates acutely, which no
# amount of smoothing can do once the wedge is thinner than a spacing.
SPINE_MAX = 0.80
# Spine rings stop once the wedge gap at the handoff radius reaches
# this many spacings; below that a midline apex goes near-right.
SPINE_HANDOFF_GAP = 1.2


@dataclass(frozen=True)
class AcuteParams:
    """Targets for the acute refiner.

    ``margin`` is the required gap below a right angle, ``min_angle``
    the angle floor, ``h`` the target edge scale as a fraction of the
    local reference edge length, ``budget`` the per-cell improvement
    rounds before a global restart. Insertion order is always
    deterministic; there is no randomized mode.
    """

    margin: float = 0.05
    min_angle: float = 0.25
    h: float = 1.0 / 3.0
    budget: int = 50

    def __post_init__(self):
        if not (0.0 < self.min_angle < math.pi / 2 - self.margin):
            raise ValueError("need 0 < min_angle < pi/2 - margin")
        if not (0.0 < self.h <= 1.0):
            raise ValueError("need 0 < h <= 1")
        if self.budget < 1:
            raise ValueError("budget must be positive")


@dataclass
class CellRefinement:
    """Refinement of one planar cell.

    ``kinds[j]`` classifies vertex ``j``: ``("corner", i)`` for cell
    corner ``i``, ``("edge", class_id, s)`` for the canonical boundary
    point at arc length ``s`` along its edge class, ``("interior",)``
    otherwise. ``coords`` are chart coordinates, ``triangles`` index
    triples into the vertex list.
    """

    kinds: list
    coords: np.ndarray
    triangles: np.ndarray

    def interior_mask(self) -> np.ndarray:
        return np.array([k[0] == "interior" for k in self.kinds], dtype=bool)


@dataclass
class PlanarRefinement:
    """Conforming acute refinement of a planar comparison complex.

    ``cells`` follows the flat triangle enumeration of the source
    complex (cell position major, triangle index minor). ``edge_params``
    maps each edge class to its ordered interior arc-length parameters,
    identical for every incident cell. ``h_effective`` is the edge
    scale actually used after any restarts.
    """

    source: PlanarComplex
    params: AcuteParams
    h_effective: float
    restarts: int
    edge_params: dict
    cells: list = field(default_factory=list)

    def n_triangles(self) -> int:
        return sum(c.triangles.shape[0] for c in self.cells)

    def n_vertices(self) -> int:
        return sum(c.coords.shape[0] for c in self.cells)


def _initial_arc_counts(pc: PlanarComplex, h: float) -> np.ndarray:
    sub = pc.sub
    n_classes = sub.n_edge_classes()
    ref = np.full(n_classes, np.inf)
    for pos in range(sub.n_cells()):
        ls = sub.tri_side_lengths(pos)
        tri_min = ls.min(axis=1)
        cls = sub.tri_classes[pos]
        for i in range(3):
            np.minimum.at(ref, cls[:, i], tri_min)
    k = np.ones(n_classes, dtype=np.int64)
    for e in range(n_classes):
        length = float(sub.class_lengths[e])
        if math.isfinite(ref[e]):
            k[e] = max(1, math.ceil(length / (h * ref[e]) - 1e-12))
    return k


def _wedge_apex(r: float, phi: float) -> float:
    # wedge with legs 1 and r >= 1 at opening phi: the angle at the
    # nearer endpoint, the first to go obtuse as r grows
    vx = r * math.cos(phi) - 1.0
    vy = r * math.sin(phi)
    return math.acos(max(-1.0, min(1.0, -vx / math.hypot(vx, vy))))


def _wedge_ratio_max(phi: float, target: float) -> float:
    # largest leg ratio a wedge of opening phi tolerates before the
    # angle at its nearer endpoint exceeds target
    if _wedge_apex(2.0, phi) <= target:
        return 2.0
    lo_r, hi_r = 1.0, 2.0
    for _ in range(48):
        mid = 0.5 * (lo_r + hi_r)
        if _wedge_apex(mid, phi) <= target:
            lo_r = mid
        else:
            hi_r = mid
    return lo_r


def _fan_count(theta: float) -> int:
    # m points split a wide corner into m + 1 equal wedges in the
    # 40..55 degree range
    return max(1, math.ceil(theta / FAN_WEDGE) - 1)


def _corner_ratio_bound(theta: float, hi: float) -> float:
    # the triangle forced at a corner (corner plus the first boundary
    # point of each arm) has its largest angle at the short arm's
    # point; solve for the spacing ratio where that angle hits the
    # ceiling less a safety gap. Wide corners are split by fans whose
    # radii blend geometrically, so each of the m + 1 wedges carries an
    # equal share of the ratio and the per-wedge bound compounds.
    if theta < SPINE_MAX:
        return 1.6
    target = hi - 0.03
    if theta > hi - FAN_MARGIN:
        m = _fan_count(theta)
        per = _wedge_ratio_max(theta / (m + 1), target)
        return min(2.0, per ** (m + 1))
    return max(1.05, _wedge_ratio_max(theta, target))


def _equalize_arc_counts(pc: PlanarComplex, k: np.ndarray, hi: float) -> np.ndarray:
    """Raise per-class arc counts until adjacent-arm spacings are tame.

    Classes couple cells, so one pass can create new mismatches
    elsewhere; sweeps repeat to a fixpoint. Counts only grow.
    """
    sub = pc.sub
    lengths = sub.class_lengths
    k = k.copy()
    corner_data = []
    for pos in range(sub.n_cells()):
        cls = sub.tri_classes[pos]
        ang = pc.planar_angles(pos)
        for t in range(cls.shape[0]):
            for j in range(3):
                e_out = int(cls[t, j])
                e_in = int(cls[t, (j + 2) % 3])
                corner_data.append(
                    (e_out, e_in, _corner_ratio_bound(float(ang[t, j]), hi))
                )
    for _ in range(50):
        changed = False
        for e_out, e_in, bound in corner_data:
            s_out = lengths[e_out] / k[e_out]
            s_in = lengths[e_in] / k[e_in]
            if s_out > s_in * bound:
                k[e_out] = math.ceil(lengths[e_out] / (s_in * bound * 0.97))
                changed = True
            elif s_in > s_out * bound:
                k[e_in] = math.ceil(lengths[e_in] / (s_out * bound * 0.97))
                changed = True
        if not changed:
            break
    return k


def _params_from_counts(pc: PlanarComplex, k: np.ndarray) -> dict:
    lengths = pc.sub.class_lengths
    return {
        e: lengths[e] * np.arange(1, int(k[e])) / int(k[e])
        for e in range(len(k))
    }


def _edge_subdivisions(pc: PlanarComplex, h: float) -> dict:
    return _params_from_counts(pc, _initial_arc_counts(pc, h))


def subdivide_edges(pc: PlanarComplex, params: AcuteParams) -> dict:
    """Canonical equal-arc subdivision parameters per edge class.

    Class of length L incident to triangles whose shortest side is
    L_ref gets k = ceil(L / (h * L_ref)) arcs; the returned arrays hold
    the k - 1 interior arc-length parameters, shared by every incident
    triangle.
    """
    return _edge_subdivisions(pc, params.h)


def _spine_ring_cap(theta: float) -> int:
    # hand off to ordinary seeding only once the wedge gap at the next
    # ring radius spans SPINE_HANDOFF_GAP spacings
    need = SPINE_HANDOFF_GAP / (2.0 * math.sin(theta / 2.0))
    return max(0, min(6, math.ceil(need) - 1))


def _corner_ends(pc: PlanarComplex):
    """Corners as (outgoing class end, incoming class end, angle).

    An end is (class, 0) at class parameter 0 and (class, 1) at
    parameter L. Corner j of a cell leaves along side j and is reached
    by side j+2, with the alignment flags translating cell-local side
    direction to the class direction.
    """
    sub = pc.sub
    out = []
    for pos in range(sub.n_cells()):
        cls = sub.tri_classes[pos]
        ali = sub.tri_aligned[pos]
        ang = pc.planar_angles(pos)
        for t in range(cls.shape[0]):
            for j in range(3):
                e_out = (int(cls[t, j]), 0 if ali[t, j] else 1)
                e_in = (int(cls[t, (j + 2) % 3]), 1 if ali[t, (j + 2) % 3] else 0)
                out.append((e_out, e_in, float(ang[t, j])))
    return out


def _end_tip_data(pc: PlanarComplex, k: np.ndarray, hi: float):
    """Tip spacing and lock count per class end.

    Both arms of a sharp corner must tick at one shared spacing for the
    corner's spine, and every corner must keep its first-tick ratio
    under its bound; tip spacings start at the natural class spacing
    and shrink to a fixpoint of those constraints. Lock counts say how
    many ticks from the end hold the tip spacing exactly.
    """
    sub = pc.sub
    lengths = sub.class_lengths
    n = sub.n_edge_classes()
    s_nat = {e: float(lengths[e]) / int(k[e]) for e in range(n)}
    tips = {(e, end): s_nat[e] for e in range(n) for end in (0, 1)}
    locks = {(e, end): 0 for e in range(n) for end in (0, 1)}
    corners = _corner_ends(pc)
    for end_out, end_in, theta in corners:
        if theta < SPINE_MAX:
            want = _spine_ring_cap(theta) + 2
            locks[end_out] = max(locks[end_out], want)
            locks[end_in] = max(locks[end_in], want)
    for _ in range(80):
        changed = False
        for end_out, end_in, theta in corners:
            t_out = tips[end_out]
            t_in = tips[end_in]
            if theta < SPINE_MAX:
                m = min(t_out, t_in)
                if t_out > m * (1.0 + 1e-12):
                    tips[end_out] = m
                    changed = True
                if t_in > m * (1.0 + 1e-12):
                    tips[end_in] = m
                    changed = True
            else:
                b = _corner_ratio_bound(theta, hi)
                if t_out > b * t_in * (1.0 + 1e-9):
                    tips[end_out] = b * t_in
                    changed = True
                elif t_in > b * t_out * (1.0 + 1e-9):
                    tips[end_in] = b * t_out
                    changed = True
        if not changed:
            break
    for e in range(n):
        for end in (0, 1):
            if locks[(e, end)] == 0 and tips[(e, end)] < s_nat[e] * (1.0 - 1e-9):
                locks[(e, end)] = 2
    return tips, locks


def _graded_positions(length, k, n_a, t_a, n_b, t_b):
    """Interior tick parameters with locked uniform runs at the ends.

    The middle section blends the two end spacings with a monotone
    quintic ramp whose end derivatives match the tips, so spacing is
    continuous across the lock boundaries.
    """
    k = int(k)
    if k <= 1:
        return np.empty(0)
    if n_a == 0 and n_b == 0:
        return length * np.arange(1, k) / k
    m = k - n_a - n_b
    rem = length - n_a * t_a - n_b * t_b
    x0 = n_a * t_a
    d_a = min(1.0, t_a * m / rem)
    d_b = min(1.0, t_b * m / rem)
    e_c = 1.0 - 0.5 * (d_a + d_b)
    u = np.arange(1, m) / m
    s_u = u ** 3 * (10.0 - 15.0 * u + 6.0 * u * u)
    is_u = u ** 4 * (2.5 - 3.0 * u + u * u)
    w = d_a * u + (d_b - d_a) * is_u + e_c * s_u
    parts = [t_a * np.arange(1, n_a + 1), x0 + rem * w]
    if n_b > 0:
        parts.append(length - t_b * np.arange(n_b, 0, -1))
    return np.concatenate(parts)


def _arc_layout(pc: PlanarComplex, h: float, hi: float) -> dict:
    """Per-class tick parameters for the refiner's boundary chains.

    Counts come from the canonical rule plus corner equalization; ticks
    are uniform except near ends whose tip spacing was pulled down,
    where locked runs and a blend keep consecutive spacings within a
    third of each other. Classes too short to fit their locks get more
    arcs until the layout fits.
    """
    counts = _equalize_arc_counts(pc, _initial_arc_counts(pc, h), hi)
    sub = pc.sub
    lengths = sub.class_lengths
    n = sub.n_edge_classes()
    out = {}
    for _ in range(40):
        tips, locks = _end_tip_data(pc, counts, hi)
        bumped = False
        out = {}
        for e in range(n):
            length = float(lengths[e])
            kk = int(counts[e])
            n_a, n_b = locks[(e, 0)], locks[(e, 1)]
            t_a = tips[(e, 0)] if n_a else length / kk
            t_b = tips[(e, 1)] if n_b else length / kk
            ok = (
                kk >= n_a + n_b + (2 if (n_a or n_b) else 1)
                and kk >= 2 * max(n_a, n_b)
                and length - n_a * t_a - n_b * t_b > 0.0
            )
            if ok:
                ps = _graded_positions(length, kk, n_a, t_a, n_b, t_b)
                segs = np.diff(np.concatenate([[0.0], ps, [length]]))
                ratio = segs[1:] / segs[:-1]
                ok = (
                    float(segs.min()) > 1e-12
                    and float(ratio.max()) <= 1.34
                    and float(ratio.min()) >= 1.0 / 1.34
                )
            if ok:
                out[e] = ps
            else:
                counts[e] = kk + max(1, kk // 8)
                bumped = True
        if not bumped:
            break
    return out


def _angles_xy(coords: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """(M, 3) interior angles; column j is the angle at vertex j."""
    p = coords[tris]
    out = np.empty((tris.shape[0], 3))
    for j in range(3):
        u = p[:, (j + 1) % 3] - p[:, j]
        v = p[:, (j + 2) % 3] - p[:, j]
        nu = np.linalg.norm(u, axis=1)
        nv = np.linalg.norm(v, axis=1)
        c = np.einsum("ij,ij->i", u, v) / np.maximum(nu * nv, 1e-300)
        out[:, j] = np.arccos(np.clip(c, -1.0, 1.0))
    return out


def _normalize_triangles(coords: np.ndarray, simplices: np.ndarray) -> np.ndarray:
    tris = np.asarray(simplices, dtype=np.int64)
    p = coords[tris]
    cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
        p[:, 1, 1] - p[:, 0, 1]
    ) * (p[:, 2, 0] - p[:, 0, 0])
    flip = cross < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    shift = np.argmin(tris, axis=1)
    rolled = np.stack(
        [tris[np.arange(len(tris)), (shift + j) % 3] for j in range(3)], axis=1
    )
    order = np.lexsort((rolled[:, 2], rolled[:, 1], rolled[:, 0]))
    return rolled[order]


def _side_geometry(corners: np.ndarray):
    """Inward unit normals and base points of the 3 side lines."""
    normals = np.zeros((3, 2))
    for i in range(3):
        a = corners[i]
        b = corners[(i + 1) % 3]
        t = b - a
        n = np.array([-t[1], t[0]])
        n /= np.linalg.norm(n)
        if np.dot(n, corners[(i + 2) % 3] - a) < 0:
            n = -n
        normals[i] = n
    return normals


def _clamp_to_guard(p, corners, normals, dirs, cums, segs) -> np.ndarray:
    # runaway inputs (circumcenters of near-degenerate triangles) must
    # come back to cell scale first; the half-plane passes only fix the
    # normal components and would leave a huge tangential part in place
    lo_c = corners.min(axis=0)
    hi_c = corners.max(axis=0)
    pad = float(np.linalg.norm(hi_c - lo_c))
    q = np.minimum(np.maximum(p, lo_c - pad), hi_c + pad)
    for _ in range(4):
        moved = False
        for i in range(3):
            g = GUARD * _local_seg(q, i, corners, dirs, cums, segs)
            d = float(np.dot(normals[i], q - corners[i]))
            if d < g:
                q = q + (g - d) * normals[i]
                moved = True
        if not moved:
            break
    return q


def _local_seg(p, i, corners, dirs, cums, segs) -> float:
    # boundary spacing of side i nearest to p: graded sides are fine at
    # locked tips and coarse mid-edge, so every depth rule must scale
    # with the sub-segment the point actually faces
    cum = cums[i]
    t = float(np.dot(dirs[i], p - corners[i]))
    t = min(max(t, 0.0), float(cum[-1]))
    idx = int(np.searchsorted(cum, t, side="right")) - 1
    idx = min(max(idx, 0), len(segs[i]) - 1)
    return float(segs[i][idx])


class _CellFailure(Exception):
    def __init__(self, state=None):
        super().__init__()
        self.state = state


def _tri_angles_ok(tri, hi, lo):
    ang = _angles_xy(np.array(tri), np.array([[0, 1, 2]]))[0]
    return min(float(hi - ang.max()), float(ang.min() - lo))


def _tri_margin_batch(p0, p1, p2, hi, lo):
    """Worst angle margin per triangle for batched (n, 2) vertex rows."""
    u1 = p1 - p0
    u2 = p2 - p0
    v1 = p0 - p1
    v2 = p2 - p1
    with np.errstate(divide="ignore", invalid="ignore"):
        c0 = (u1 * u2).sum(axis=1) / (
            np.linalg.norm(u1, axis=1) * np.linalg.norm(u2, axis=1)
        )
        c1 = (v1 * v2).sum(axis=1) / (
            np.linalg.norm(v1, axis=1) * np.linalg.norm(v2, axis=1)
        )
    a0 = np.arccos(np.clip(c0, -1.0, 1.0))
    a1 = np.arccos(np.clip(c1, -1.0, 1.0))
    a2 = math.pi - a0 - a1
    mx = np.maximum(np.maximum(a0, a1), a2)
    mn = np.minimum(np.minimum(a0, a1), a2)
    out = np.minimum(hi - mx, mn - lo)
    return np.where(np.isfinite(out), out, -np.inf)


def _in_circumcircle(tri, q) -> bool:
    a, b, c = (np.asarray(v, dtype=float) for v in tri)
    m = np.array([
        [a[0] - q[0], a[1] - q[1], (a[0] - q[0]) ** 2 + (a[1] - q[1]) ** 2],
        [b[0] - q[0], b[1] - q[1], (b[0] - q[0]) ** 2 + (b[1] - q[1]) ** 2],
        [c[0] - q[0], c[1] - q[1], (c[0] - q[0]) ** 2 + (c[1] - q[1]) ** 2],
    ])
    sign = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    det = float(np.linalg.det(m))
    return det * sign > 1e-12


def _circle_slack_batch(p, q, m, x, scale4):
    # positive when x is outside the circumcircle of (p, q, m) for each
    # m row; scaled so the slack joins angle margins as a feasibility
    # barrier in the spine solves
    r1 = p - x
    r2 = q - x
    r3 = m - x
    s1 = (r1 * r1).sum(axis=-1)
    s2 = (r2 * r2).sum(axis=-1)
    s3 = (r3 * r3).sum(axis=-1)
    det = (
        r1[..., 0] * (r2[..., 1] * s3 - s2 * r3[..., 1])
        - r1[..., 1] * (r2[..., 0] * s3 - s2 * r3[..., 0])
        + s1 * (r2[..., 0] * r3[..., 1] - r2[..., 1] * r3[..., 0])
    )
    orient = (q[..., 0] - p[..., 0]) * (m[..., 1] - p[..., 1]) - (
        q[..., 1] - p[..., 1]
    ) * (m[..., 0] - p[..., 0])
    return -det * np.sign(orient) / scale4


_SPINE_GRID = np.linspace(0.45, 0.98, 12)
# Outer wedge allowance at the terminal spine ring: one continuation
# apex beyond it must split the wedge into two acute triangles.
_WEDGE_MAX = math.radians(150.0)
# Expected terminal lean the interior-chain solve bridges against.
_TERMINAL_LEAN = 0.55


def _build_spine(corners, j, theta, a, b, k_out, k_in, hi, lo):
    """Interior apex chain for a sharp corner.

    Each ring i places one point M_i whose projections onto the two
    arms land between arm points i and i+1, so M_i is the acute apex of
    both arm sub-segments and of the bridges to M_{i-1}. Placement is a
    deterministic grid search over the two projection fractions,
    maximizing the worst template angle margin; rings stop when the
    wedge is wide enough for ordinary seeding, when the arms run out,
    or when no placement clears the margin.

    The final ring is the interface to ordinary meshing and is solved
    separately: it must also keep the outer wedge it presents (the
    angle it subtends between the next arm points) at most _WEDGE_MAX,
    so one continuation apex beyond it can split that wedge acutely.
    The interior rings want to lean outward, which widens the terminal
    wedge toward a straight angle, so without the cap the handoff
    region becomes unmeshable no matter where free points go.
    """
    p0 = corners[j]
    u_out = corners[(j + 1) % 3] - p0
    u_out = u_out / np.linalg.norm(u_out)
    u_in = corners[(j + 2) % 3] - p0
    u_in = u_in / np.linalg.norm(u_in)
    sin_t = math.sin(theta)
    cos_t = math.cos(theta)
    if sin_t <= 1e-12:
        return []
    n_hat = (u_in - cos_t * u_out) / sin_t

    def arm_a(m):
        return p0 + (m * a) * u_out

    def arm_b(m):
        return p0 + (m * b) * u_in

    n_cap = _spine_ring_cap(theta)
    while n_cap > 0 and (n_cap + 2) > 0.5 * min(k_out, k_in):
        n_cap -= 1

    hi_t = hi - 0.01
    lo_t = lo + 0.01
    s4 = (0.5 * (a + b)) ** 4
    arm_la = {m: np.array([m * a, 0.0]) for m in range(1, n_cap + 2)}
    arm_lb = {
        m: np.array([m * b * cos_t, m * b * sin_t]) for m in range(1, n_cap + 2)
    }

    def ring_loc(i, la_i, lb_i):
        p_a = (i + la_i) * a
        q = ((i + lb_i) * b - p_a * cos_t) / sin_t
        return p_a, q

    def terminal_solve(n, prev_loc):
        # 2-d grid over the terminal ring's arm fractions; the wedge
        # slack enters the margin on equal footing with angle margins
        a_n = arm_la[n][None]
        a_j = arm_la[n + 1][None]
        b_n = arm_lb[n][None]
        b_j = arm_lb[n + 1][None]
        best = None
        center = None
        for rnd in range(3):
            if rnd == 0:
                gla = np.linspace(0.4, 0.98, 16)
                glb = np.linspace(0.4, 0.98, 16)
            else:
                span = 0.04 / (3.0 ** (rnd - 1))
                gla = np.clip(center[0] + np.linspace(-span, span, 7), 0.4, 0.995)
                glb = np.clip(center[1] + np.linspace(-span, span, 7), 0.4, 0.995)
            la, lb = (g.ravel() for g in np.meshgrid(gla, glb, indexing="ij"))
            p_a, q = ring_loc(n, la, lb)
            valid = (q > 0.0) & (p_a * sin_t - q * cos_t > 0.0)
            m_loc = np.stack([p_a, q], axis=1)
            margins = np.minimum(
                _tri_margin_batch(a_n, a_j, m_loc, hi_t, lo_t),
                _tri_margin_batch(b_n, b_j, m_loc, hi_t, lo_t),
            )
            # the template must also survive as Delaunay, so each circle
            # keeps its nearby non-members out with positive slack
            checks = [
                (a_n, a_j, b_n), (a_n, a_j, b_j),
                (b_n, b_j, a_n), (b_n, b_j, a_j),
            ]
            if n == 1:
                margins = np.minimum(
                    margins, _tri_margin_batch(a_n, m_loc, b_n, hi_t, lo_t)
                )
                orig = np.zeros((1, 2))
                checks += [(a_n, b_n, orig), (a_n, b_n, a_j), (a_n, b_n, b_j)]
            else:
                pl = prev_loc[None]
                margins = np.minimum(
                    margins, _tri_margin_batch(pl, a_n, m_loc, hi_t, lo_t)
                )
                margins = np.minimum(
                    margins, _tri_margin_batch(pl, b_n, m_loc, hi_t, lo_t)
                )
                checks += [
                    (pl, a_n, a_j), (pl, a_n, b_n),
                    (pl, b_n, b_j), (pl, b_n, a_n),
                ]
            for pp, qq, xx in checks:
                margins = np.minimum(
                    margins, _circle_slack_batch(pp, qq, m_loc, xx, s4)
                )
            va = a_j - m_loc
            vb = b_j - m_loc
            cw = np.sum(va * vb, axis=1) / (
                np.linalg.norm(va, axis=1) * np.linalg.norm(vb, axis=1)
            )
            wedge = np.arccos(np.clip(cw, -1.0, 1.0))
            margins = np.minimum(margins, _WEDGE_MAX - wedge)
            margins = np.where(valid, margins, -np.inf)
            k = int(np.argmax(margins))
            if best is None or float(margins[k]) > best[0]:
                best = (float(margins[k]), m_loc[k].copy())
                center = (float(la[k]), float(lb[k]))
        if best is None or best[0] <= 0.0:
            return None
        return best[1]

    def chain_solve(n):
        # interior rings are solved jointly: the feasible lean window
        # per ring is razor-thin at the sharp end and relaxes moving
        # outward, so the fractions are modeled as first-ring values
        # plus a per-ring drift, judged against a virtual terminal at
        # the expected low lean so the last interior ring stays
        # bridgeable; the real terminal then gets its own 2-d solve
        if n == 1:
            t = terminal_solve(1, None)
            if t is None:
                return []
            return [p0 + t[0] * u_out + t[1] * n_hat]
        p_av, q_v = ring_loc(n, _TERMINAL_LEAN, _TERMINAL_LEAN)
        m_virt = np.array([[p_av, q_v]])
        best_margin = 0.0
        best_params = None
        center = (0.93, 0.93, -0.05)
        for rnd in range(4):
            if rnd == 0:
                gla = _SPINE_GRID
                glb = _SPINE_GRID
                gdd = np.linspace(-0.10, 0.02, 7)
            else:
                la0c, lb0c, ddc = center
                span = 0.05 / (3.0 ** (rnd - 1))
                dspan = 0.02 / (3.0 ** (rnd - 1))
                gla = np.clip(la0c + np.linspace(-span, span, 5), 0.4, 0.995)
                glb = np.clip(lb0c + np.linspace(-span, span, 5), 0.4, 0.995)
                gdd = ddc + np.linspace(-dspan, dspan, 5)
            grids = np.meshgrid(gla, glb, gdd, indexing="ij")
            la0, lb0, dd = (g.ravel() for g in grids)
            margins = np.full(la0.shape, np.inf)
            valid = np.ones(la0.shape, dtype=bool)
            prev = None
            for i in range(1, n):
                la_i = np.clip(la0 + (i - 1) * dd, 0.4, 0.995)
                lb_i = np.clip(lb0 + (i - 1) * dd, 0.4, 0.995)
                p_a, q = ring_loc(i, la_i, lb_i)
                valid &= (q > 0.0) & (p_a * sin_t - q * cos_t > 0.0)
                m_loc = np.stack([p_a, q], axis=1)
                a_i = arm_la[i][None]
                a_j = arm_la[i + 1][None]
                b_i = arm_lb[i][None]
                b_j = arm_lb[i + 1][None]
                margins = np.minimum(margins, _tri_margin_batch(a_i, a_j, m_loc, hi_t, lo_t))
                margins = np.minimum(margins, _tri_margin_batch(b_i, b_j, m_loc, hi_t, lo_t))
                checks = [
                    (a_i, a_j, b_i), (a_i, a_j, b_j),
                    (b_i, b_j, a_i), (b_i, b_j, a_j),
                ]
                if i == 1:
                    margins = np.minimum(margins, _tri_margin_batch(a_i, m_loc, b_i, hi_t, lo_t))
                    orig = np.zeros((1, 2))
                    checks += [(a_i, b_i, orig), (a_i, b_i, a_j), (a_i, b_i, b_j)]
                else:
                    margins = np.minimum(margins, _tri_margin_batch(prev, a_i, m_loc, hi_t, lo_t))
                    margins = np.minimum(margins, _tri_margin_batch(prev, b_i, m_loc, hi_t, lo_t))
                    checks += [
                        (prev, a_i, a_j), (prev, a_i, b_i),
                        (prev, b_i, b_j), (prev, b_i, a_i),
                    ]
                for pp, qq, xx in checks:
                    margins = np.minimum(
                        margins, _circle_slack_batch(pp, qq, m_loc, xx, s4)
                    )
                prev = m_loc
            a_n = arm_la[n][None]
            b_n = arm_lb[n][None]
            margins = np.minimum(margins, _tri_margin_batch(prev, a_n, m_virt, hi_t, lo_t))
            margins = np.minimum(margins, _tri_margin_batch(prev, b_n, m_virt, hi_t, lo_t))
            margins = np.where(valid, margins, -np.inf)
            k = int(np.argmax(margins))
            if float(margins[k]) > best_margin:
                best_margin = float(margins[k])
                best_params = (float(la0[k]), float(lb0[k]), float(dd[k]))
            if best_params is not None:
                center = best_params
        if best_params is None:
            return []
        la0, lb0, dd = best_params
        locs = []
        for i in range(1, n):
            la_i = min(0.995, max(0.4, la0 + (i - 1) * dd))
            lb_i = min(0.995, max(0.4, lb0 + (i - 1) * dd))
            locs.append(np.array(ring_loc(i, la_i, lb_i)))
        t = terminal_solve(n, locs[-1])
        if t is None:
            return []
        locs.append(t)
        return [p0 + pl[0] * u_out + pl[1] * n_hat for pl in locs]

    pts = []
    for n in range(n_cap, 0, -1):
        pts = chain_solve(n)
        if pts:
            break

    # the chain must also be what Delaunay reconstructs, or the arm
    # sub-segments lose their empty circles; truncate at the first ring
    # whose template circles capture a neighboring point
    cluster_base = [corners[j]]
    for idx in range(len(pts)):
        i = idx + 1
        m_pt = pts[idx]
        tris = [(arm_a(i), arm_a(i + 1), m_pt), (arm_b(i), arm_b(i + 1), m_pt)]
        if idx == 0:
            tris.append((arm_a(1), m_pt, arm_b(1)))
        else:
            tris.append((pts[idx - 1], arm_a(i), m_pt))
            tris.append((pts[idx - 1], arm_b(i), m_pt))
        cluster = list(cluster_base)
        for m in range(1, min(i + 3, k_out + 1)):
            cluster.append(arm_a(m))
        for m in range(1, min(i + 3, k_in + 1)):
            cluster.append(arm_b(m))
        cluster.extend(pts[max(0, idx - 1):min(len(pts), idx + 2)])
        bad = False
        for t in tris:
            for qp in cluster:
                if any(np.array_equal(qp, v) for v in t):
                    continue
                if _in_circumcircle(t, qp):
                    bad = True
                    break
            if bad:
                break
        if bad:
            return pts[:idx]
    return pts


# deterministic lattice perturbations tried in turn when a cell's
# optimization stalls in a local minimum
_VARIANTS = ((0.0, 0.0, 0.7), (0.5, 0.29, 0.6), (-0.33, 0.47, 0.8), (0.25, -0.41, 0.65))


def _refine_cell(
    corners: np.ndarray,
    side_classes,
    side_aligned,
    class_lengths: np.ndarray,
    edge_params: dict,
    params: AcuteParams,
) -> CellRefinement:
    state = None
    for variant in _VARIANTS:
        try:
            return _refine_cell_variant(
                corners, side_classes, side_aligned, class_lengths,
                edge_params, params, variant,
            )
        except _CellFailure as f:
            state = f.state
    raise _CellFailure(state=state)


def _refine_cell_variant(
    corners: np.ndarray,
    side_classes,
    side_aligned,
    class_lengths: np.ndarray,
    edge_params: dict,
    params: AcuteParams,
    variant,
) -> CellRefinement:
    shift_x, shift_y, seed_dedupe = variant
    hi = math.pi / 2 - params.margin
    lo = params.min_angle
    hi_t = hi - 0.005
    lo_t = lo + 0.005

    kinds = [("corner", 0), ("corner", 1), ("corner", 2)]
    pts = [corners[0].copy(), corners[1].copy(), corners[2].copy()]
    chains = []  # per side: vertex indices from corner i to corner i+1
    seg_lens = []  # per side: consecutive chain segment lengths
    spacings = np.zeros(3)
    for i in range(3):
        e = int(side_classes[i])
        length = float(class_lengths[e])
        ps = edge_params.get(e, np.empty(0))
        spacings[i] = length / (len(ps) + 1)
        chain = [i]
        a = corners[i]
        b = corners[(i + 1) % 3]
        ordered = ps if side_aligned[i] else ps[::-1]
        for s in ordered:
            t_loc = s / length if side_aligned[i] else (length - s) / length
            chain.append(len(pts))
            kinds.append(("edge", e, float(s)))
            pts.append(a + t_loc * (b - a))
        chain.append((i + 1) % 3)
        chains.append(chain)
        arr = np.array([pts[idx] for idx in chain])
        seg_lens.append(np.linalg.norm(np.diff(arr, axis=0), axis=1))

    a_cell = float(spacings.mean())
    normals = _side_geometry(corners)
    side_dirs = []
    side_cums = []
    for i in range(3):
        t = corners[(i + 1) % 3] - corners[i]
        side_dirs.append(t / float(np.linalg.norm(t)))
        side_cums.append(np.concatenate([[0.0], np.cumsum(seg_lens[i])]))

    def clamp(p):
        return _clamp_to_guard(p, corners, normals, side_dirs, side_cums, seg_lens)

    def local_s(k, p):
        return _local_seg(p, k, corners, side_dirs, side_cums, seg_lens)

    def scale_at(p):
        # local mesh pitch: a side's spacing governs points within a few
        # spacings of it, the global mean governs the deep interior
        cands = []
        for k in range(3):
            s_k = local_s(k, p)
            if float(np.dot(normals[k], p - corners[k])) < 2.5 * s_k:
                cands.append(s_k)
        return min(cands) if cands else a_cell

    def corner_arm_data(j):
        # first segment of the outgoing side, last of the incoming
        # side, and how many uniform ticks each arm holds from corner j
        out_segs = seg_lens[j]
        in_segs = seg_lens[(j + 2) % 3][::-1]
        s_out = float(out_segs[0])
        s_in = float(in_segs[0])
        n_out = 1
        while n_out < len(out_segs) and abs(out_segs[n_out] - s_out) <= 1e-9 * s_out:
            n_out += 1
        n_in = 1
        while n_in < len(in_segs) and abs(in_segs[n_in] - s_in) <= 1e-9 * s_in:
            n_in += 1
        return s_out, s_in, n_out, n_in

    thetas = np.zeros(3)
    for j in range(3):
        u = corners[(j + 1) % 3] - corners[j]
        w = corners[(j + 2) % 3] - corners[j]
        thetas[j] = math.acos(max(-1.0, min(1.0, float(np.dot(u, w)) / (
            float(np.linalg.norm(u)) * float(np.linalg.norm(w))))))

    # sharp corners get their spine first; the points are immovable and
    # ordinary seeds keep out of the claimed tip sector
    spine_zones = []
    for j in range(3):
        if thetas[j] >= SPINE_MAX:
            continue
        s_out, s_in, n_out, n_in = corner_arm_data(j)
        sp = _build_spine(
            corners, j, float(thetas[j]),
            s_out, s_in,
            min(len(chains[j]) - 1, 2 * n_out),
            min(len(chains[(j + 2) % 3]) - 1, 2 * n_in),
            hi, lo,
        )
        if not sp:
            continue
        for p in sp:
            kinds.append(("interior",))
            pts.append(p)
        s_bar = 0.5 * (s_out + s_in)
        spine_zones.append((j, (len(sp) + 1.2) * s_bar))

    def in_spine_zone(p):
        return any(
            float(np.linalg.norm(p - corners[j])) < r for j, r in spine_zones
        )

    # wide corners get their fan next; the points are immovable since
    # the wedge geometry certifies the corner and smoothing must not
    # drag them off the designed rays
    fan_pts = []
    for j in range(3):
        theta = float(thetas[j])
        if theta <= hi - FAN_MARGIN:
            continue
        u = corners[(j + 1) % 3] - corners[j]
        w = corners[(j + 2) % 3] - corners[j]
        u0 = u / float(np.linalg.norm(u))
        sign = 1.0 if (u0[0] * w[1] - u0[1] * w[0]) > 0 else -1.0
        s_out, s_in, _, _ = corner_arm_data(j)
        # radii blend geometrically between the arm tip spacings so all
        # m + 1 wedges share one leg ratio, the layout-bounded one
        m = _fan_count(theta)
        for q in range(1, m + 1):
            f = q / (m + 1)
            phi = sign * theta * f
            rho = s_out * (s_in / s_out) ** f
            c, s = math.cos(phi), math.sin(phi)
            d = np.array([c * u0[0] - s * u0[1], s * u0[0] + c * u0[1]])
            p = corners[j] + rho * d
            if not in_spine_zone(p):
                kinds.append(("interior",))
                pts.append(p)
                fan_pts.append(p)
    n_fixed = len(pts)

    seeds = []

    # one row of equilateral-ideal apexes over every boundary sub-segment,
    # then a lattice for the deeper interior beyond that row
    for i in range(3):
        chain = chains[i]
        n_in = normals[i]
        for a_idx, b_idx in zip(chain[:-1], chain[1:]):
            a = pts[a_idx]
            b = pts[b_idx]
            seg = float(np.linalg.norm(b - a))
            p = 0.5 * (a + b) + (math.sqrt(3.0) / 2.0) * seg * n_in
            ok = all(
                float(np.dot(normals[k], p - corners[k]))
                >= LATTICE_GUARD * (seg if k == i else local_s(k, p))
                for k in range(3)
            )
            r_dd = seed_dedupe * min(a_cell, seg)
            if (
                ok
                and not in_spine_zone(p)
                and all(np.linalg.norm(p - f) >= 0.55 * seg for f in fan_pts)
                and not any(np.linalg.norm(p - f) < r_dd for f in seeds)
            ):
                seeds.append(p)

    lat = []
    longest = int(np.argmax([np.linalg.norm(corners[(i + 1) % 3] - corners[i]) for i in range(3)]))
    u0 = corners[(longest + 1) % 3] - corners[longest]
    u0 = u0 / np.linalg.norm(u0)
    v0 = np.array([-u0[1], u0[0]])
    origin = corners.mean(axis=0) + a_cell * (shift_x * u0 + shift_y * v0)
    rel = corners - origin
    xs = rel @ u0
    ys = rel @ v0
    row_h = math.sqrt(3.0) / 2.0 * a_cell
    j_lo = int(math.floor(ys.min() / row_h)) - 1
    j_hi = int(math.ceil(ys.max() / row_h)) + 1
    i_lo = int(math.floor(xs.min() / a_cell)) - 2
    i_hi = int(math.ceil(xs.max() / a_cell)) + 2
    for j in range(j_lo, j_hi + 1):
        for i in range(i_lo, i_hi + 1):
            p = origin + ((i + 0.5 * (j % 2)) * a_cell) * u0 + (j * row_h) * v0
            ok = all(
                float(np.dot(normals[k], p - corners[k])) >= 1.6 * local_s(k, p)
                for k in range(3)
            )
            if not ok:
                continue
            if in_spine_zone(p):
                continue
            if any(np.linalg.norm(p - f) < 0.8 * a_cell for f in seeds):
                continue
            if any(np.linalg.norm(p - f) < 0.8 * a_cell for f in fan_pts):
                continue
            lat.append(p)

    for p in seeds:
        kinds.append(("interior",))
        pts.append(clamp(p))
    for p in lat:
        kinds.append(("interior",))
        pts.append(p)

    coords = np.array(pts)
    chain_edges = set()
    for chain in chains:
        for a, b in zip(chain[:-1], chain[1:]):
            chain_edges.add((min(a, b), max(a, b)))

    # local spacing at each fixed point: distance to its nearest fixed
    # neighbor; graded tips run much finer than the mean spacing, so
    # crowding tests against fixed points must use this, not a_cell
    fix = coords[:n_fixed]
    d2 = np.sum((fix[:, None, :] - fix[None, :, :]) ** 2, axis=2)
    np.fill_diagonal(d2, np.inf)
    fixed_scale = np.sqrt(d2.min(axis=1))

    def triangulate(cs):
        tris = _normalize_triangles(cs, Delaunay(cs).simplices)
        p = cs[tris]
        area = 0.5 * np.abs(
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
        )
        # collinear boundary chains can make qhull emit zero-area hull
        # slivers; they cover nothing and would poison the angle checks
        return tris[area > 1e-9 * a_cell * a_cell]

    def conforming(tris):
        present = set()
        for t in tris:
            for j in range(3):
                a, b = int(t[j]), int(t[(j + 1) % 3])
                present.add((min(a, b), max(a, b)))
        return chain_edges <= present

    for round_ in range(params.budget):
        tris = triangulate(coords)
        ang = _angles_xy(coords, tris)
        ok = float(ang.max()) < hi and float(ang.min()) > lo
        if ok and conforming(tris):
            return CellRefinement(kinds=kinds, coords=coords, triangles=tris)

        severity = np.maximum(ang.max(axis=1) - hi_t, 0.0) + np.maximum(
            lo_t - ang.min(axis=1), 0.0
        )
        bad = severity > 0.0

        # crowded interior pairs breed slivers; drop one point per pair,
        # and a movable point crowding a fixed one (spine, tick) always
        # loses since nothing else can separate them
        drop = set()
        for ti in np.where(bad)[0]:
            for j in range(3):
                a_i, b_i = int(tris[ti, j]), int(tris[ti, (j + 1) % 3])
                if a_i < n_fixed and b_i < n_fixed:
                    continue
                d = float(np.linalg.norm(coords[a_i] - coords[b_i]))
                if a_i < n_fixed or b_i < n_fixed:
                    fx, mv = (a_i, b_i) if a_i < n_fixed else (b_i, a_i)
                    if d < 0.55 * min(scale_at(coords[mv]), float(fixed_scale[fx])):
                        drop.add(mv)
                elif d < 0.55 * scale_at(0.5 * (coords[a_i] + coords[b_i])):
                    keep, out = min(a_i, b_i), max(a_i, b_i)
                    if keep not in drop:
                        drop.add(out)
        if drop:
            keep_idx = [i for i in range(len(coords)) if i not in drop]
            coords = coords[keep_idx]
            kinds = [kinds[i] for i in keep_idx]
            tris = triangulate(coords)
            ang = _angles_xy(coords, tris)
            severity = np.maximum(ang.max(axis=1) - hi_t, 0.0) + np.maximum(
                lo_t - ang.min(axis=1), 0.0
            )
            bad = severity > 0.0

        # crowding relief: merge the worst bad triangle's movable vertex
        # with its nearest movable neighbor when they sit too close
        if round_ % 4 == 3 and bad.any():
            ti = int(np.argmax(severity))
            merged = False
            for v in sorted(int(x) for x in tris[ti] if x >= n_fixed):
                if merged:
                    break
                dists = np.linalg.norm(coords - coords[v], axis=1)
                dists[v] = np.inf
                w = int(np.argmin(dists))
                lim = 0.8 * scale_at(coords[v])
                if w < n_fixed:
                    lim = min(lim, 0.8 * float(fixed_scale[w]))
                if float(dists[w]) >= lim:
                    continue
                if w < n_fixed:
                    # absorbed by the fixed point: just remove v
                    keep_idx = [i for i in range(len(coords)) if i != v]
                else:
                    mid = 0.5 * (coords[v] + coords[w])
                    coords[v] = clamp(mid)
                    keep_idx = [i for i in range(len(coords)) if i != w]
                coords = coords[keep_idx]
                kinds = [kinds[i] for i in keep_idx]
                merged = True
            if merged:
                tris = triangulate(coords)
                ang = _angles_xy(coords, tris)
                severity = np.maximum(ang.max(axis=1) - hi_t, 0.0) + np.maximum(
                    lo_t - ang.min(axis=1), 0.0
                )
                bad = severity > 0.0

        # triangles with every vertex fixed cannot improve by smoothing;
        # movable ones that persist get help every few rounds
        all_fixed = np.all(tris < n_fixed, axis=1)
        candidates = list(np.where(bad & all_fixed)[0][:8])
        if round_ % 3 == 2:
            movable_bad = np.where(bad & ~all_fixed)[0]
            order = np.argsort(-severity[movable_bad], kind="stable")
            candidates.extend(movable_bad[order][:4])
        inserted = 0
        for ti in candidates:
            tri_pts = coords[tris[ti]]
            cc = _planar_circumcenter_xy(tri_pts)
            cen = tri_pts.mean(axis=0)
            ext = float(np.linalg.norm(tri_pts - cen, axis=1).max())
            off = cc - cen
            n_off = float(np.linalg.norm(off))
            if n_off > 2.0 * ext:
                cc = cen + off * (2.0 * ext / n_off)
            cc = clamp(cc)
            dists = np.linalg.norm(coords - cc, axis=1)
            blocker = int(np.argmin(dists))
            if dists[blocker] < 0.5 * scale_at(cc):
                # a movable point already sits where relief is needed;
                # snapping it there beats stacking a near-duplicate
                if blocker >= n_fixed:
                    coords[blocker] = cc
                continue
            kinds.append(("interior",))
            coords = np.concatenate([coords, cc[None, :]], axis=0)
            inserted += 1
        if inserted:
            tris = triangulate(coords)

        # damped sweep toward area-weighted circumcenters of the stars
        p = coords[tris]
        cc = _circumcenters_xy(p)
        area = 0.5 * np.abs(
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
        )
        # cap runaway circumcenters of near-degenerate triangles
        cen = p.mean(axis=1)
        off = cc - cen
        lim = 2.0 * np.max(
            np.linalg.norm(p - cen[:, None, :], axis=2), axis=1, keepdims=True
        )
        norm_off = np.linalg.norm(off, axis=1, keepdims=True)
        scale = np.minimum(1.0, lim / np.maximum(norm_off, 1e-300))
        cc = cen + off * scale
        targets = np.zeros_like(coords)
        weights = np.zeros(len(coords))
        for j in range(3):
            np.add.at(targets, tris[:, j], area[:, None] * cc)
            np.add.at(weights, tris[:, j], area)
        # annealed damping: late rounds defer to the descent step below
        # instead of pulling apexes back into the same local minimum
        damp = 0.7 * (0.93 ** round_)
        for v in range(n_fixed, len(coords)):
            if weights[v] <= 0:
                continue
            goal = targets[v] / weights[v]
            newp = coords[v] + damp * (goal - coords[v])
            coords[v] = clamp(newp)

        # direct descent on the worst apexes: set each movable violating
        # apex to the height over its chord that meets the target angle
        ang = _angles_xy(coords, tris)
        sev = np.maximum(ang.max(axis=1) - hi_t, 0.0) + np.maximum(
            lo_t - ang.min(axis=1), 0.0
        )
        worst = np.argsort(-sev, kind="stable")[:6]
        for ti in worst:
            if sev[ti] <= 0.0:
                break
            j = int(np.argmax(ang[ti])) if ang[ti].max() >= hi_t else int(np.argmin(ang[ti]))
            v = int(tris[ti, j])
            if v < n_fixed:
                # the offending angle sits at an immovable point; rotate a
                # movable neighbor about it until the angle meets the target
                others = [int(tris[ti, (j + 1) % 3]), int(tris[ti, (j + 2) % 3])]
                mv = [o for o in others if o >= n_fixed]
                if not mv:
                    continue
                m_i = mv[0]
                o_i = others[1] if others[0] == m_i else others[0]
                va = coords[m_i] - coords[v]
                vb = coords[o_i] - coords[v]
                s = 1.0 if (va[0] * vb[1] - va[1] * vb[0]) > 0 else -1.0
                th_v = float(ang[ti, j])
                target = (hi_t - 0.05) if th_v >= hi_t else (lo_t + 0.05)
                delta = s * (th_v - target)
                c, sn = math.cos(delta), math.sin(delta)
                rot = np.array([c * va[0] - sn * va[1], sn * va[0] + c * va[1]])
                coords[m_i] = clamp(coords[v] + rot)
                continue
            a = coords[tris[ti, (j + 1) % 3]]
            b = coords[tris[ti, (j + 2) % 3]]
            x = coords[v]
            t_ab = b - a
            c_len = float(np.linalg.norm(t_ab))
            if c_len <= 0:
                continue
            foot = a + (float(np.dot(x - a, t_ab)) / (c_len * c_len)) * t_ab
            h = float(np.linalg.norm(x - foot))
            if h <= 0:
                continue
            target = hi_t - 0.03 if ang[ti].max() >= hi_t else lo_t + 0.03
            h_target = (c_len / 2.0) / math.tan(target / 2.0)
            newp = foot + (x - foot) * (h_target / h)
            coords[v] = clamp(newp)

    raise _CellFailure(state=(kinds, coords, triangulate(coords)))


def _circumcenters_xy(p: np.ndarray) -> np.ndarray:
    """Circumcenters of (M, 3, 2) triangles; centroid fallback when flat."""
    ax, ay = p[:, 0, 0], p[:, 0, 1]
    bx, by = p[:, 1, 0], p[:, 1, 1]
    cx, cy = p[:, 2, 0], p[:, 2, 1]
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    sa = ax * ax + ay * ay
    sb = bx * bx + by * by
    sc = cx * cx + cy * cy
    with np.errstate(divide="ignore", invalid="ignore"):
        ux = (sa * (by - cy) + sb * (cy - ay) + sc * (ay - by)) / d
        uy = (sa * (cx - bx) + sb * (ax - cx) + sc * (bx - ax)) / d
    out = np.stack([ux, uy], axis=1)
    flat = ~np.isfinite(out).all(axis=1)
    if flat.any():
        out[flat] = p[flat].mean(axis=1)
    return out


def _planar_circumcenter_xy(p: np.ndarray) -> np.ndarray:
    ax, ay = p[0]
    bx, by = p[1]
    cx, cy = p[2]
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(d) < 1e-300:
        return p.mean(axis=0)
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d
    return np.array([ux, uy])


def acute_refine(pc: PlanarComplex, params: AcuteParams = None) -> PlanarRefinement:
    """Refine every cell of the comparison complex into acute triangles.

    Success is certified per cell from measured angles and boundary
    conformity. When any cell fails within its budget the edge scale
    shrinks by one restart step and the whole refinement reruns, since
    edge subdivisions are global. After the restart allowance the
    failure surfaces as ``BudgetExhausted``.
    """
    if params is None:
        params = AcuteParams()
    sub = pc.sub
    h = params.h
    hi = math.pi / 2 - params.margin
    for restart in range(MAX_RESTARTS + 1):
        edge_params = _arc_layout(pc, h, hi)
        cells = []
        failed = False
        for pos in range(sub.n_cells()):
            if failed:
                break
            cls = sub.tri_classes[pos]
            ali = sub.tri_aligned[pos]
            for t in range(cls.shape[0]):
                try:
                    cells.append(
                        _refine_cell(
                            pc.corners[pos][t],
                            cls[t],
                            ali[t],
                            sub.class_lengths,
                            edge_params,
                            params,
                        )
                    )
                except _CellFailure:
                    failed = True
                    break
        if not failed:
            return PlanarRefinement(
                source=pc,
                params=params,
                h_effective=h,
                restarts=restart,
                edge_params=edge_params,
                cells=cells,
            )
        h *= RESTART_SHRINK
    raise BudgetExhausted(
        f"a cell failed its {params.budget}-round budget after {MAX_RESTARTS} restarts"
    )


def star_separation(r: PlanarRefinement) -> np.ndarray:
    """Minimum base angle between interior vertices and cell sides.

    For each cell, over every interior vertex X and every side (a, b)
    of the cell, takes the two angles of triangle (X, a, b) at a and at
    b; returns the per-cell minimum, with +inf for cells that have no
    interior vertices.
    """
    sub = r.source.sub
    out = np.full(len(r.cells), np.inf)
    flat = 0
    for pos in range(sub.n_cells()):
        T = sub.tris[pos].shape[0]
        for t in range(T):
            cell = r.cells[flat]
            corners = r.source.corners[pos][t]
            mask = cell.interior_mask()
            if mask.any():
                xs = cell.coords[mask]
                worst = math.inf
                for i in range(3):
                    a = corners[i]
                    b = corners[(i + 1) % 3]
                    for base, other in ((a, b), (b, a)):
                        u = other - base
                        v = xs - base
                        nu = np.linalg.norm(u)
                        nv = np.linalg.norm(v, axis=1)
                        c = (v @ u) / np.maximum(nu * nv, 1e-300)
                        worst = min(worst, float(np.arccos(np.clip(c, -1, 1)).min()))
                out[flat] = worst
            flat += 1
    return out
