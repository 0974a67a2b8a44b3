"""Exception types raised across the package.

Validation of input documents does not raise; it returns a report
(see ``acutemesh.complexes.validate``). Exceptions are reserved for
contract violations at call sites and for pipeline-level failures.
"""


class GeometryError(Exception):
    """Base class for every error raised by this package."""


class CurvatureMismatch(GeometryError):
    """Operands live in model spaces of different curvature."""


class AntipodalPoints(GeometryError):
    """Antipodal sphere points: no unique minimizing geodesic."""


class NonUniqueGeodesic(GeometryError):
    """The geodesic between the points is not unique."""


class OutOfRange(GeometryError):
    """A parameter lies outside its admissible interval."""


class DegeneratePoints(GeometryError):
    """Coincident or otherwise degenerate point data."""


class DegenerateTriangle(GeometryError):
    """Triangle with zero area (collinear or repeated vertices)."""


class InvalidSides(GeometryError):
    """Side lengths violate the triangle inequality or model bounds."""


class CircumcenterUndefined(GeometryError):
    """The equidistance system has no admissible solution."""


class OutsideHemisphere(GeometryError):
    """Point outside the open hemisphere covered by the projection."""


class InvalidEps(GeometryError):
    """Ball radius outside the projection's validity range."""


class NotHemispheric(GeometryError):
    """Spherical polygon not contained in an open hemisphere."""


class SelfIntersectingBoundary(GeometryError):
    """Polygon boundary crosses itself."""


class ParameterMismatch(GeometryError):
    """Edge vertex parameters disagree across cells sharing an edge."""


class BudgetExhausted(GeometryError):
    """The refiner ran out of rounds before certifying its contract."""


class LevelCapExceeded(GeometryError):
    """Subdivision reached the level cap without meeting the target.

    Carries the best attempt so far in ``best`` when raised by the
    pipeline driver.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DocumentError(GeometryError):
    """Malformed input document. ``where`` locates the offending field."""

    def __init__(self, message, where=None):
        super().__init__(message if where is None else f"{where}: {message}")
        self.where = where
