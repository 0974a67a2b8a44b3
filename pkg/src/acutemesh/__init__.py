"""Conforming all-acute triangulations of constant-curvature complexes.

The pipeline: realize each triangle cell in its own model space,
medially subdivide until the cells are small, replace each cell by its
Euclidean comparison triangle, mesh the flat complex with a conforming
acute refiner, pull the refinement back through per-cell geodesic
charts, and merge the edge vertices so neighboring cells agree. An
independent verifier recomputes every claimed property from raw
coordinates.
"""

__version__ = "0.1.0"

from .errors import (
    AntipodalPoints,
    BudgetExhausted,
    CircumcenterUndefined,
    CurvatureMismatch,
    DegeneratePoints,
    DegenerateTriangle,
    DocumentError,
    GeometryError,
    InvalidEps,
    InvalidSides,
    LevelCapExceeded,
    NonUniqueGeodesic,
    NotHemispheric,
    OutOfRange,
    OutsideHemisphere,
    ParameterMismatch,
    SelfIntersectingBoundary,
)
from .geometry import (
    GeodesicTriangle,
    ModelPoint,
    angle_at,
    distance,
    geodesic_triangle,
    model_point,
    point_on_geodesic,
    solve_triangle,
    triangle_area,
)
from .charts import (
    AffineMap,
    GeodesicChart,
    Isometry,
    PlanarTriangle,
    affine_fit,
    chart_for,
    circumcenter_isometry,
    comparison_triangle,
    metric_ratio_bounds,
    project,
    unproject,
)

__all__ = [name for name in dir() if not name.startswith("_")]
