"""Trigonometry on the three constant-curvature model surfaces.

Points are kept in embedding coordinates: for curvature ``kappa > 0``
the sphere ``x . x = 1/kappa`` in Euclidean 3-space, for ``kappa < 0``
the upper sheet of ``<x, x> = 1/kappa`` in Minkowski signature
``(+, +, -)``, and for ``kappa = 0`` the plane embedded as ``z = 1``.
The embedding makes every isometry a linear 3x3 map and every geodesic
closed-form, which is what keeps the numerics tight.

Side and angle conventions used throughout the package: a triangle's
side ``i`` runs from vertex ``i`` to vertex ``(i + 1) % 3``, and
``solve_triangle`` follows the law-of-cosines convention where the
first angle is opposite the first side.

The ``*_xyz`` functions are the vectorized kernels; they take raw
coordinate arrays of shape ``(..., 3)`` plus a scalar curvature and
broadcast. The ``ModelPoint`` wrappers add the per-call validation
promised by the public API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AntipodalPoints,
    CurvatureMismatch,
    DegeneratePoints,
    DegenerateTriangle,
    InvalidSides,
    NonUniqueGeodesic,
    OutOfRange,
)

# Relative tolerance of the embedding constraint for stored points.
EMBED_RTOL = 1e-12
# Relative tolerance the operations promise for derived quantities.
OP_RTOL = 1e-10

__all__ = [
    "EMBED_RTOL",
    "OP_RTOL",
    "ModelPoint",
    "GeodesicTriangle",
    "model_point",
    "model_radius",
    "embedding_residual_xyz",
    "minkowski_dot",
    "distance",
    "distance_xyz",
    "point_on_geodesic",
    "point_on_geodesic_xyz",
    "tangent_xyz",
    "angle_at",
    "angle_xyz",
    "solve_triangle",
    "solve_triangle_xyz",
    "triangle_area",
    "triangle_area_xyz",
    "check_sides",
]


def model_radius(kappa: float) -> float:
    """Model radius ``1/sqrt(|kappa|)``; ``inf`` for the plane."""
    if kappa == 0.0:
        return math.inf
    return 1.0 / math.sqrt(abs(kappa))


def minkowski_dot(x, y):
    """Bilinear form ``x1 y1 + x2 y2 - x3 y3``, broadcasting over rows."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1] - x[..., 2] * y[..., 2]


def _dot(kappa, x, y):
    """Ambient inner product of the model for curvature ``kappa``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if kappa < 0.0:
        return minkowski_dot(x, y)
    return np.sum(x * y, axis=-1)


def embedding_residual_xyz(kappa: float, coords) -> np.ndarray:
    """Relative defect of the model constraint at the given coordinates.

    Zero means the point sits exactly on the sphere / hyperboloid /
    ``z = 1`` plane of curvature ``kappa``.
    """
    coords = np.asarray(coords, dtype=float)
    if kappa == 0.0:
        return np.abs(coords[..., 2] - 1.0)
    q = _dot(kappa, coords, coords)
    return np.abs(q * kappa - 1.0)


@dataclass(frozen=True, eq=False)
class ModelPoint:
    """A point of the curvature-``kappa`` model surface.

    ``coords`` is the embedding 3-vector. Instances are immutable;
    construct through :func:`model_point`, which validates the
    embedding constraint.
    """

    kappa: float
    coords: np.ndarray

    def __repr__(self):
        x, y, z = self.coords
        return f"ModelPoint(kappa={self.kappa!r}, coords=({x!r}, {y!r}, {z!r}))"


def model_point(kappa: float, coords) -> ModelPoint:
    """Validate ``coords`` against the curvature-``kappa`` model and wrap.

    For ``kappa = 0`` a 2-vector is accepted and lifted to ``z = 1``.

    Raises
    ------
    OutOfRange
        Coordinates off the model surface (beyond ``EMBED_RTOL``), or a
        lower-sheet point for ``kappa < 0``.
    """
    if not math.isfinite(kappa):
        raise CurvatureMismatch(f"curvature must be finite, got {kappa!r}")
    coords = np.asarray(coords, dtype=float)
    if kappa == 0.0 and coords.shape == (2,):
        coords = np.array([coords[0], coords[1], 1.0])
    if coords.shape != (3,):
        raise OutOfRange(f"embedding coordinates must be a 3-vector, got shape {coords.shape}")
    if not np.all(np.isfinite(coords)):
        raise OutOfRange("embedding coordinates must be finite")
    res = float(embedding_residual_xyz(kappa, coords))
    if res > EMBED_RTOL * 8.0:
        raise OutOfRange(
            f"coordinates violate the kappa={kappa} embedding constraint "
            f"(relative residual {res:.3e})"
        )
    if kappa < 0.0 and coords[2] <= 0.0:
        raise OutOfRange("hyperboloid points must lie on the upper sheet (x3 > 0)")
    return ModelPoint(kappa, coords.copy())


def _same_kappa(*points: ModelPoint) -> float:
    kappa = points[0].kappa
    for p in points[1:]:
        if p.kappa != kappa:
            raise CurvatureMismatch(f"mixed curvatures {kappa} and {p.kappa}")
    return kappa


def distance_xyz(kappa: float, p, q) -> np.ndarray:
    """Geodesic distance between coordinate arrays, broadcasting.

    Uses quadrant-safe forms: ``atan2`` of the cross-product norm on
    the sphere and ``asinh`` of the Lorentz cross-product norm on the
    hyperboloid, both stable for nearby points.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if kappa == 0.0:
        d = q[..., :2] - p[..., :2]
        return np.hypot(d[..., 0], d[..., 1])
    r = model_radius(kappa)
    if kappa > 0.0:
        cr = np.cross(p, q)
        sin_term = np.sqrt(np.sum(cr * cr, axis=-1))
        cos_term = np.sum(p * q, axis=-1)
        return r * np.arctan2(sin_term, cos_term)
    # <p x_L q, p x_L q> = <p,q>^2 - <p,p><q,q> = r^4 sinh^2(d/r)
    g = minkowski_dot(p, q)
    gram = g * g - minkowski_dot(p, p) * minkowski_dot(q, q)
    gram = np.maximum(gram, 0.0)
    return r * np.arcsinh(np.sqrt(gram) / (r * r))


def distance(p: ModelPoint, q: ModelPoint) -> float:
    """Minimal geodesic distance between two points of one model.

    Raises
    ------
    CurvatureMismatch
        Points tagged with different curvatures.
    AntipodalPoints
        Antipodal sphere points; the distance is attained by a
        non-unique family of geodesics and downstream callers expect
        uniqueness.
    """
    kappa = _same_kappa(p, q)
    if kappa > 0.0:
        r2 = 1.0 / kappa
        if float(np.dot(p.coords, q.coords)) <= -r2 * (1.0 - 1e-12):
            raise AntipodalPoints("antipodal sphere points")
    return float(distance_xyz(kappa, p.coords, q.coords))


def tangent_xyz(kappa: float, p, q) -> np.ndarray:
    """Unit tangent at ``p`` of the geodesic toward ``q``, broadcasting.

    The tangent is a direction vector of the embedding space lying in
    the tangent plane at ``p`` (ambient-orthogonal to ``p`` for curved
    models, horizontal for the plane). Not defined for coincident or
    antipodal inputs; callers guard those.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if kappa == 0.0:
        v = q - p
        v = v.copy()
        v[..., 2] = 0.0
        n = np.linalg.norm(v, axis=-1, keepdims=True)
        return v / n
    gpq = _dot(kappa, p, q)[..., None]
    gpp = _dot(kappa, p, p)[..., None]
    v = q - (gpq / gpp) * p
    gvv = _dot(kappa, v, v)[..., None]
    return v / np.sqrt(np.maximum(gvv, 0.0))


def point_on_geodesic_xyz(kappa: float, p, q, s) -> np.ndarray:
    """Point at arc length ``s`` from ``p`` along the geodesic toward ``q``.

    Broadcasts over leading axes of ``p``, ``q`` and ``s``.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    s = np.asarray(s, dtype=float)
    if kappa == 0.0:
        d = distance_xyz(kappa, p, q)
        t = (s / d)[..., None]
        out = p + t * (q - p)
        out[..., 2] = 1.0
        return out
    r = model_radius(kappa)
    u = tangent_xyz(kappa, p, q)
    a = s[..., None] / r
    if kappa > 0.0:
        return np.cos(a) * p + np.sin(a) * (r * u)
    return np.cosh(a) * p + np.sinh(a) * (r * u)


def point_on_geodesic(p: ModelPoint, q: ModelPoint, s: float) -> ModelPoint:
    """The point at arc length ``s`` from ``p`` on the geodesic to ``q``.

    Parameters
    ----------
    s : float
        Arc length in ``[0, distance(p, q)]``.

    Raises
    ------
    NonUniqueGeodesic
        Coincident endpoints, or antipodal sphere endpoints.
    OutOfRange
        ``s`` outside ``[0, distance(p, q)]`` (with a tiny slack for
        roundoff at the endpoints).
    """
    kappa = _same_kappa(p, q)
    d = float(distance_xyz(kappa, p.coords, q.coords))
    if d == 0.0:
        raise NonUniqueGeodesic("coincident endpoints define no direction")
    if kappa > 0.0:
        r = model_radius(kappa)
        if d >= math.pi * r * (1.0 - 1e-12):
            raise NonUniqueGeodesic("antipodal sphere endpoints")
    slack = 64.0 * np.finfo(float).eps * max(d, 1.0)
    if s < -slack or s > d + slack:
        raise OutOfRange(f"arc length {s} outside [0, {d}]")
    s = min(max(s, 0.0), d)
    return ModelPoint(kappa, point_on_geodesic_xyz(kappa, p.coords, q.coords, s))


def angle_xyz(kappa: float, b, a, c) -> np.ndarray:
    """Angle at ``b`` between the geodesics toward ``a`` and ``c``.

    Computed from the two unit tangents with the half-angle form
    ``2 atan2(|t1 - t2|, |t1 + t2|)``, which stays accurate near 0 and
    near pi. Norms are taken in the ambient form of the model; both
    tangents are spacelike for ``kappa < 0`` so the form is positive
    definite on their span.
    """
    t1 = tangent_xyz(kappa, b, a)
    t2 = tangent_xyz(kappa, b, c)
    diff = np.sqrt(np.maximum(_dot(kappa, t1 - t2, t1 - t2), 0.0))
    summ = np.sqrt(np.maximum(_dot(kappa, t1 + t2, t1 + t2), 0.0))
    return 2.0 * np.arctan2(diff, summ)


def angle_at(a: ModelPoint, b: ModelPoint, c: ModelPoint) -> float:
    """Interior angle at ``b`` of the geodesic path ``a - b - c``.

    Raises
    ------
    DegeneratePoints
        ``b`` coincides with ``a`` or ``c``, or an arm is antipodal so
        its initial direction is undefined.
    """
    kappa = _same_kappa(a, b, c)
    for arm in (a, c):
        d = float(distance_xyz(kappa, b.coords, arm.coords))
        if d == 0.0:
            raise DegeneratePoints("angle apex coincides with an endpoint")
        if kappa > 0.0 and d >= math.pi * model_radius(kappa) * (1.0 - 1e-12):
            raise DegeneratePoints("angle arm reaches the antipode")
    return float(angle_xyz(kappa, b.coords, a.coords, c.coords))


def check_sides(kappa: float, a: float, b: float, c: float) -> None:
    """Validate that ``(a, b, c)`` are sides of a non-degenerate triangle.

    Raises ``InvalidSides`` for non-positive sides, violation of the
    strict triangle inequality, or (``kappa > 0``) sides or perimeter
    at or beyond the spherical bounds; ``DegenerateTriangle`` when the
    triangle inequality holds only with equality.
    """
    sides = (a, b, c)
    if not all(math.isfinite(s) and s > 0.0 for s in sides):
        raise InvalidSides(f"sides must be positive and finite, got {sides}")
    if kappa > 0.0:
        r = model_radius(kappa)
        if a + b + c >= 2.0 * math.pi * r:
            raise InvalidSides(
                f"perimeter {a + b + c} reaches the hemisphere bound {2.0 * math.pi * r}"
            )
        if max(sides) >= math.pi * r:
            raise InvalidSides(f"side {max(sides)} reaches the antipodal bound {math.pi * r}")
    lo = min(sides)
    hi = max(sides)
    mid = a + b + c - lo - hi
    if hi > lo + mid:
        raise InvalidSides(f"triangle inequality fails for {sides}")
    if hi == lo + mid:
        raise DegenerateTriangle(f"degenerate (flat) triangle with sides {sides}")


def solve_triangle_xyz(kappa: float, a, b, c) -> tuple:
    """Vectorized angles-from-sides, no validation.

    Returns ``(alpha, beta, gamma)`` with ``alpha`` opposite ``a``.
    Uses the half-angle forms, e.g. for the sphere
    ``tan^2(alpha/2) = sin(s-b) sin(s-c) / (sin s sin(s-a))`` with
    ``s`` the semiperimeter, which avoid the cancellation the plain
    law of cosines hits on small triangles.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if kappa != 0.0:
        scale = math.sqrt(abs(kappa))
        a = a * scale
        b = b * scale
        c = c * scale
    s = 0.5 * (a + b + c)
    if kappa > 0.0:
        f = np.sin
    elif kappa < 0.0:
        f = np.sinh
    else:
        f = lambda x: x
    fs, fa, fb, fc = f(s), f(s - a), f(s - b), f(s - c)

    def half_angle(opp, adj1, adj2):
        t2 = (adj1 * adj2) / (fs * opp)
        return 2.0 * np.arctan(np.sqrt(np.maximum(t2, 0.0)))

    alpha = half_angle(fa, fb, fc)
    beta = half_angle(fb, fc, fa)
    gamma = half_angle(fc, fa, fb)
    return alpha, beta, gamma


def solve_triangle(kappa: float, a: float, b: float, c: float) -> tuple:
    """Angles of the triangle with side lengths ``(a, b, c)``.

    Returns ``(alpha, beta, gamma)``, each opposite the side in the
    same position. The triangle is unique up to isometry; the angle
    sum satisfies Gauss-Bonnet against :func:`triangle_area`.

    Raises
    ------
    InvalidSides, DegenerateTriangle
        See :func:`check_sides`.
    """
    check_sides(kappa, a, b, c)
    alpha, beta, gamma = solve_triangle_xyz(kappa, a, b, c)
    return float(alpha), float(beta), float(gamma)


def triangle_area_xyz(kappa: float, a, b, c) -> np.ndarray:
    """Vectorized area-from-sides, no validation.

    Heron for the plane; for curved models the excess/defect comes from
    the half-excess product form
    ``tan(E/4)^2 = tan(s/2) tan((s-a)/2) tan((s-b)/2) tan((s-c)/2)``
    (``tanh`` for ``kappa < 0``), then area = excess / |kappa|. This
    route never touches the angles, so it can serve as the independent
    leg of Gauss-Bonnet cross-checks.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if kappa == 0.0:
        s = 0.5 * (a + b + c)
        return np.sqrt(np.maximum(s * (s - a) * (s - b) * (s - c), 0.0))
    scale = math.sqrt(abs(kappa))
    a = a * scale
    b = b * scale
    c = c * scale
    s = 0.5 * (a + b + c)
    f = np.tan if kappa > 0.0 else np.tanh
    prod = f(0.5 * s) * f(0.5 * (s - a)) * f(0.5 * (s - b)) * f(0.5 * (s - c))
    excess = 4.0 * np.arctan(np.sqrt(np.maximum(prod, 0.0)))
    return excess / abs(kappa)


def triangle_area(kappa: float, a: float, b: float, c: float) -> float:
    """Area of the triangle with side lengths ``(a, b, c)``."""
    check_sides(kappa, a, b, c)
    return float(triangle_area_xyz(kappa, a, b, c))


@dataclass(frozen=True, eq=False)
class GeodesicTriangle:
    """Three model points of common curvature with positive area.

    Side ``i`` runs from vertex ``i`` to vertex ``(i + 1) % 3``. For
    ``kappa > 0`` the vertices must fit in an open hemisphere, which is
    equivalent to perimeter ``< 2 pi / sqrt(kappa)``.
    """

    kappa: float
    vertices: tuple

    def side_lengths(self) -> tuple:
        v = self.vertices
        return (
            distance(v[0], v[1]),
            distance(v[1], v[2]),
            distance(v[2], v[0]),
        )

    def angles(self) -> tuple:
        """Interior angles at vertices 0, 1, 2."""
        l0, l1, l2 = self.side_lengths()
        # angle at vertex i is opposite side (i + 1) % 3
        return solve_triangle(self.kappa, l1, l2, l0)

    def diameter(self) -> float:
        return max(self.side_lengths())

    def coords_array(self) -> np.ndarray:
        return np.stack([v.coords for v in self.vertices])


def geodesic_triangle(p0: ModelPoint, p1: ModelPoint, p2: ModelPoint) -> GeodesicTriangle:
    """Build and validate a :class:`GeodesicTriangle`.

    Raises
    ------
    DegenerateTriangle
        Zero-area (coincident or collinear) vertices.
    InvalidSides
        ``kappa > 0`` vertices without a common open hemisphere.
    """
    kappa = _same_kappa(p0, p1, p2)
    t = GeodesicTriangle(kappa, (p0, p1, p2))
    sides = t.side_lengths()
    check_sides(kappa, *sides)
    return t
