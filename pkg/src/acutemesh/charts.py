"""Geodesic charts: comparison triangles, central projections, fits.

The chart of a curved triangle is the composite ``psi . project . tau``
where ``tau`` is the isometry moving the triangle's circumcenter to the
model pole, ``project`` is the central (gnomonic / Klein) projection
onto the tangent plane at the pole, and ``psi`` is the affine map
taking the projected triangle onto its Euclidean comparison triangle.
Vertices map exactly; geodesic segments map to straight segments; the
metric distortion shrinks quadratically with the triangle's size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CircumcenterUndefined,
    DegenerateTriangle,
    InvalidEps,
    OutsideHemisphere,
)
from .geometry import (
    GeodesicTriangle,
    ModelPoint,
    check_sides,
    distance_xyz,
    model_radius,
    minkowski_dot,
    solve_triangle,
)

__all__ = [
    "PlanarTriangle",
    "Isometry",
    "AffineMap",
    "GeodesicChart",
    "comparison_triangle",
    "comparison_vertices",
    "circumcenter_isometry",
    "project_xyz",
    "unproject_xy",
    "project",
    "unproject",
    "affine_fit",
    "chart_for",
    "metric_ratio_bounds",
]


@dataclass(frozen=True, eq=False)
class PlanarTriangle:
    """Euclidean triangle; ``vertices`` has shape (3, 2)."""

    vertices: np.ndarray

    def side_lengths(self) -> tuple:
        v = self.vertices
        return (
            float(np.hypot(*(v[1] - v[0]))),
            float(np.hypot(*(v[2] - v[1]))),
            float(np.hypot(*(v[0] - v[2]))),
        )

    def angles(self) -> tuple:
        l0, l1, l2 = self.side_lengths()
        return solve_triangle(0.0, l1, l2, l0)

    def signed_area(self) -> float:
        (x0, y0), (x1, y1), (x2, y2) = self.vertices
        return 0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))


def comparison_vertices(a: float, b: float, c: float) -> np.ndarray:
    """Canonical planar placement of the triangle with sides (a, b, c).

    Side ``a`` runs from vertex 0 at the origin to vertex 1 on the
    positive x-axis; vertex 2 sits in the open upper half-plane at
    distance ``c`` from vertex 0 and ``b`` from vertex 1 (side
    convention: side i joins vertices i and i + 1).
    """
    x2 = (a * a + c * c - b * b) / (2.0 * a)
    y2sq = c * c - x2 * x2
    if y2sq <= 0.0:
        raise DegenerateTriangle(f"sides ({a}, {b}, {c}) give a flat placement")
    return np.array([[0.0, 0.0], [a, 0.0], [x2, math.sqrt(y2sq)]])


def comparison_triangle(t: GeodesicTriangle) -> PlanarTriangle:
    """The Euclidean triangle with the same side lengths as ``t``.

    Canonical placement as in :func:`comparison_vertices`. For
    ``kappa < 0`` every planar angle strictly exceeds the matching
    geodesic angle; for ``kappa > 0`` it is strictly smaller.
    """
    a, b, c = t.side_lengths()
    check_sides(0.0, a, b, c)
    return PlanarTriangle(comparison_vertices(a, b, c))


@dataclass(frozen=True, eq=False)
class Isometry:
    """Linear self-map of the embedding preserving the model quadric.

    ``matrix`` acts on column vectors; for ``kappa = 0`` it is a
    homogeneous rigid motion of the ``z = 1`` chart. ``inverse`` is
    stored explicitly (analytic, not solved) to keep round-trips tight.
    """

    kappa: float
    matrix: np.ndarray
    inverse: np.ndarray

    def apply(self, coords) -> np.ndarray:
        return np.asarray(coords, dtype=float) @ self.matrix.T

    def apply_inverse(self, coords) -> np.ndarray:
        return np.asarray(coords, dtype=float) @ self.inverse.T

    def apply_point(self, p: ModelPoint) -> ModelPoint:
        return ModelPoint(self.kappa, self.apply(p.coords))


def _identity_isometry(kappa: float) -> Isometry:
    eye = np.eye(3)
    return Isometry(kappa, eye, eye.copy())


def _reflection(kappa: float, w: np.ndarray) -> np.ndarray:
    """Matrix of ``x -> x - 2 <x, w> w / <w, w>`` in the ambient form."""
    g = np.diag([1.0, 1.0, -1.0]) if kappa < 0.0 else np.eye(3)
    ww = float(w @ g @ w)
    return np.eye(3) - 2.0 * np.outer(w, g @ w) / ww


def _pole(kappa: float) -> np.ndarray:
    return np.array([0.0, 0.0, model_radius(kappa)])


def _transvection_to_pole(kappa: float, c: np.ndarray) -> Isometry:
    """Isometry moving ``c`` to the pole along their common geodesic.

    Built as a product of two reflections through ``c + pole`` and the
    pole; degenerates smoothly to the identity as ``c`` approaches the
    pole. ``c`` must not be (near-)antipodal to the pole.
    """
    r = model_radius(kappa)
    pole = _pole(kappa)
    u = c / r
    v = pole / r
    w = u + v
    g = np.diag([1.0, 1.0, -1.0]) if kappa < 0.0 else np.eye(3)
    if abs(float(w @ g @ w)) < 1e-14:
        raise CircumcenterUndefined("circumcenter antipodal to the pole")
    m = _reflection(kappa, v) @ _reflection(kappa, w)
    # both factors are involutions, so the inverse is the reverse product
    m_inv = _reflection(kappa, w) @ _reflection(kappa, v)
    return Isometry(kappa, m, m_inv)


def _planar_circumcenter(v: np.ndarray) -> np.ndarray:
    ax, ay = v[0, 0], v[0, 1]
    bx, by = v[1, 0], v[1, 1]
    cx, cy = v[2, 0], v[2, 1]
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        raise CircumcenterUndefined("collinear vertices")
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
          + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
          + (cx * cx + cy * cy) * (bx - ax)) / d
    return np.array([ux, uy])


def circumcenter(t: GeodesicTriangle) -> ModelPoint:
    """Point equidistant from the three vertices of ``t``.

    Solved linearly in the embedding: the center is ambient-orthogonal
    to both vertex differences. For ``kappa > 0`` the admissible center
    is the one at circumradius below ``pi / (2 sqrt(kappa))``; for
    ``kappa < 0`` the linear solution must be timelike to meet the
    hyperboloid.

    Raises
    ------
    CircumcenterUndefined
        Degenerate vertex data, circumradius at or beyond the
        ``kappa > 0`` bound, or a ``kappa < 0`` triangle whose
        equidistant locus misses the model surface.
    """
    v = t.coords_array()
    kappa = t.kappa
    r = model_radius(kappa)
    if kappa == 0.0:
        c = _planar_circumcenter(v)
        return ModelPoint(0.0, np.array([c[0], c[1], 1.0]))
    cr = np.cross(v[1] - v[0], v[2] - v[0])
    if kappa > 0.0:
        n = np.linalg.norm(cr)
        if n < 1e-300:
            raise CircumcenterUndefined("collinear vertices")
        c = cr / n * r
        dot = float(np.dot(c, v[0]))
        if dot < 0.0:
            c = -c
            dot = -dot
        if dot * kappa <= 1e-12:
            # equidistance only at distance >= pi r / 2
            raise CircumcenterUndefined("circumradius reaches the quarter-circle bound")
        return ModelPoint(kappa, c)
    # Minkowski normal: G c is Euclidean-orthogonal to the differences
    c = np.array([cr[0], cr[1], -cr[2]])
    q = minkowski_dot(c, c)
    if q >= -1e-300:
        raise CircumcenterUndefined("equidistant locus misses the hyperboloid")
    c = c * (r / math.sqrt(-q))
    if c[2] < 0.0:
        c = -c
    return ModelPoint(kappa, c)


def circumcenter_isometry(t: GeodesicTriangle) -> Isometry:
    """Isometry taking the circumcenter of ``t`` to the model pole.

    The pole is ``(0, 0, 1/sqrt(|kappa|))``, or the chart origin for
    ``kappa = 0``. Equidistance of the vertex images from the pole is
    preserved since the map is an isometry.
    """
    c = circumcenter(t)
    kappa = t.kappa
    if kappa == 0.0:
        m = np.eye(3)
        m[0, 2] = -c.coords[0]
        m[1, 2] = -c.coords[1]
        m_inv = np.eye(3)
        m_inv[0, 2] = c.coords[0]
        m_inv[1, 2] = c.coords[1]
        return Isometry(0.0, m, m_inv)
    pole = _pole(kappa)
    if float(np.max(np.abs(c.coords - pole))) < 1e-15 * model_radius(kappa):
        return _identity_isometry(kappa)
    return _transvection_to_pole(kappa, c.coords)


def project_xyz(kappa: float, coords) -> np.ndarray:
    """Central projection onto the tangent plane at the pole, broadcasting.

    Maps the open upper hemisphere (``kappa > 0``) or the whole upper
    hyperboloid sheet (``kappa < 0``) onto the plane; a point at
    geodesic distance d from the pole lands at planar radius
    ``r tan(d/r)`` resp. ``r tanh(d/r)``. For ``kappa = 0`` this is the
    trivial chart drop.
    """
    coords = np.asarray(coords, dtype=float)
    if kappa == 0.0:
        return coords[..., :2].copy()
    r = model_radius(kappa)
    z = coords[..., 2]
    return r * coords[..., :2] / z[..., None]


def unproject_xy(kappa: float, xy) -> np.ndarray:
    """Inverse of :func:`project_xyz`, broadcasting over rows."""
    xy = np.asarray(xy, dtype=float)
    if kappa == 0.0:
        out = np.empty(xy.shape[:-1] + (3,), dtype=float)
        out[..., :2] = xy
        out[..., 2] = 1.0
        return out
    r = model_radius(kappa)
    lifted = np.empty(xy.shape[:-1] + (3,), dtype=float)
    lifted[..., :2] = xy
    lifted[..., 2] = r
    rho2 = np.sum(xy * xy, axis=-1)
    if kappa > 0.0:
        scale = r / np.sqrt(rho2 + r * r)
    else:
        inside = r * r - rho2
        if np.any(inside <= 0.0):
            raise OutsideHemisphere("planar point outside the Klein disk")
        scale = r / np.sqrt(inside)
    return lifted * scale[..., None]


def project(p: ModelPoint) -> np.ndarray:
    """Central projection of a single point; see :func:`project_xyz`.

    Raises
    ------
    OutsideHemisphere
        ``kappa > 0`` point with non-positive third coordinate.
    """
    if p.kappa > 0.0 and p.coords[2] <= 0.0:
        raise OutsideHemisphere("point outside the open hemisphere around the pole")
    return project_xyz(p.kappa, p.coords)


def unproject(kappa: float, xy) -> ModelPoint:
    """Lift a planar point back to the model surface."""
    return ModelPoint(kappa, unproject_xy(kappa, np.asarray(xy, dtype=float)))


@dataclass(frozen=True, eq=False)
class AffineMap:
    """Invertible planar affine map ``x -> linear @ x + offset``."""

    linear: np.ndarray
    offset: np.ndarray

    def apply(self, xy) -> np.ndarray:
        return np.asarray(xy, dtype=float) @ self.linear.T + self.offset

    def inverse(self) -> "AffineMap":
        inv = np.linalg.inv(self.linear)
        return AffineMap(inv, -inv @ self.offset)


def affine_fit(src: PlanarTriangle, dst: PlanarTriangle) -> AffineMap:
    """The unique affine map taking ``src``'s vertices onto ``dst``'s.

    Raises
    ------
    DegenerateTriangle
        Either triangle has (numerically) collinear vertices.
    """
    s = src.vertices
    d = dst.vertices
    m = np.column_stack([s[1] - s[0], s[2] - s[0]])
    det = float(np.linalg.det(m))
    scale = float(np.max(np.abs(m)))
    if scale == 0.0 or abs(det) < 1e-14 * scale * scale:
        raise DegenerateTriangle("source triangle is degenerate")
    n = np.column_stack([d[1] - d[0], d[2] - d[0]])
    if abs(float(np.linalg.det(n))) == 0.0:
        raise DegenerateTriangle("target triangle is degenerate")
    linear = n @ np.linalg.inv(m)
    offset = d[0] - linear @ s[0]
    return AffineMap(linear, offset)


@dataclass(frozen=True, eq=False)
class GeodesicChart:
    """Composite chart of a geodesic triangle onto its comparison triangle.

    ``forward`` maps embedding coordinates in the triangle's model
    space to the comparison plane; ``inverse`` goes back. Vertices map
    exactly (up to roundoff) and geodesics correspond to straight
    segments in both directions.
    """

    kappa: float
    tau: Isometry
    psi: AffineMap
    psi_inv: AffineMap

    def forward(self, coords) -> np.ndarray:
        moved = self.tau.apply(coords)
        return self.psi.apply(project_xyz(self.kappa, moved))

    def inverse(self, xy) -> np.ndarray:
        lifted = unproject_xy(self.kappa, self.psi_inv.apply(xy))
        return self.tau.apply_inverse(lifted)

    def forward_point(self, p: ModelPoint) -> np.ndarray:
        return self.forward(p.coords)

    def inverse_point(self, xy) -> ModelPoint:
        return ModelPoint(self.kappa, self.inverse(np.asarray(xy, dtype=float)))


def chart_for(t: GeodesicTriangle) -> GeodesicChart:
    """Build the chart of ``t`` onto its comparison triangle.

    The circumcenter is moved to the pole first so the central
    projection is evaluated where its distortion is smallest and,
    for ``kappa > 0``, the whole triangle sits inside the open
    hemisphere being projected.
    """
    tau = circumcenter_isometry(t)
    moved = tau.apply(t.coords_array())
    projected = PlanarTriangle(project_xyz(t.kappa, moved))
    target = comparison_triangle(t)
    psi = affine_fit(projected, target)
    return GeodesicChart(t.kappa, tau, psi, psi.inverse())


def metric_ratio_bounds(kappa: float, eps: float) -> tuple:
    """Bracket for intrinsic/projected distance ratios near the pole.

    For point pairs inside the geodesic ball of radius ``eps`` around
    the pole, the ratio of intrinsic to projected distance lies within
    the returned ``(lo, hi)``. With ``u = sqrt(|kappa|) eps``:

    * ``kappa < 0``: the ratio is at least 1 and at most
      ``1/(1 - u^2) + u^2/(1 - u^2)^2``, a closed-form bound that
      dominates the exact maximum ``cosh(u)^2``.
    * ``kappa > 0``: the ratio is at most 1 and at least
      ``cos(u)^2``, from the exact radial stretch ``sec(d)^2`` of the
      projection at geodesic distance d.

    Both ends tend to 1 as ``eps`` shrinks.

    Raises
    ------
    InvalidEps
        ``eps <= 0``, ``kappa = 0``, or (``kappa < 0``) a radius with
        ``1 + kappa eps^2 <= 0``, where the bound expression blows up.
    """
    if kappa == 0.0:
        raise InvalidEps("the flat chart has no distortion to bound")
    if not (eps > 0.0) or not math.isfinite(eps):
        raise InvalidEps(f"ball radius must be positive and finite, got {eps}")
    u2 = abs(kappa) * eps * eps
    if kappa < 0.0:
        if 1.0 - u2 <= 0.0:
            raise InvalidEps(f"radius {eps} leaves the Klein disk of curvature {kappa}")
        one = 1.0 / (1.0 - u2)
        return (1.0, one + u2 * one * one)
    if u2 >= (0.5 * math.pi) ** 2:
        raise InvalidEps(f"radius {eps} reaches the quarter-circle bound")
    c = math.cos(math.sqrt(u2))
    return (c * c, 1.0)
