"""Hausdorff dimension of planar open billiards and its deformation rate.

The package computes, for a family of disjoint strictly convex obstacles
satisfying the no-eclipse condition, the Hausdorff dimension of the set of
trajectories trapped for all time, together with the derivative of that
dimension along a one-parameter deformation of the obstacles.  Periodic
orbits are found variationally, a convex-front recurrence turns them into
expansion data, and the dimension is the root of the resulting pressure
function on a cylinder graph.
"""

from .errors import (
    AlphaRangeError,
    BilliardError,
    DegenerateConfigurationError,
    DegenerateObstacleError,
    DominanceError,
    InadmissibleClosureError,
    InadmissibleWordError,
    JetOrderError,
    NumericalError,
    OrbitConvergenceError,
    UnknownObstacleError,
    ValidationError,
)
from .geometry import (
    BilliardTable,
    BoundaryJet,
    Circle,
    DeformationConstants,
    Ellipse,
    NoEclipseReport,
    PolarHarmonic,
    TableAtAlpha,
    TableValidation,
    check_no_eclipse,
    curve_from_config,
    deformation_constants,
    pairwise_clearance,
    point_and_jets,
    validate_table,
)
from .linalg import (
    CyclicTridiagonal,
    cyclic_tridiag_solve,
    varah_bound,
)
from .symbolic import (
    admissible_closure,
    canonical_rotation,
    count_fix,
    count_linear,
    cylinder_metric,
    enumerate_cyclic_words,
    format_word,
    iter_cyclic_words,
    iter_linear_words,
    parse_word,
    rotate_word,
    truncate_periodic,
    validate_word,
)
from .orbit import (
    OrbitCache,
    PeriodicOrbit,
    PoolStats,
    find_orbit,
    length_gradient,
    length_hessian,
    pool_stats,
    total_length,
    verify_orbit,
)
from .deform import (
    AlphaDerivatives,
    BoundConstants,
    alpha_rhs,
    bound_constants,
    du_dalpha,
    du_dalpha_second_fd,
    quantity_derivs,
    scaled_sensitivity_matrix,
)
from .front import (
    FrontBounds,
    FrontData,
    cycle_curvatures,
    derivative_bounds,
    dk_dalpha,
    dpsi_dalpha,
    front_data,
    k_bounds,
)
from .pressure import (
    ConstantPotential,
    CylinderGraph,
    CylinderPotential,
    DimensionReport,
    GibbsMeasure,
    PressureEstimate,
    TransferPressure,
    bowen_root,
    dimension_derivative,
    dimension_report,
    gibbs_integrals,
    pressure_periodic_sum,
    pressure_transfer_matrix,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
