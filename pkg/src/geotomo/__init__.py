"""Attenuated geodesic X-ray transforms on the disk and their inversion."""

from .errors import (
    DecompositionError,
    DomainError,
    GeotomoError,
    GridMismatchError,
    InputError,
    SimplicityError,
    TrappingError,
)
from .metrics import (
    BoundaryPoint,
    ConformalMetric,
    EuclideanMetric,
    GaussianMetric,
    GridMetric,
    flow_derivative,
    metric_from_config,
    santalo_weight,
)
from .tracing import (
    GeodesicPath,
    antipodal_fan,
    check_simplicity,
    exit_time,
    scattering,
    scattering_fan,
    trace_geodesic,
    trace_rays,
)
from .grids import BoundaryGrid, BoundarySMGrid, DiskGrid, SMGrid
from .transport import (
    Attenuation,
    Geometry,
    Pair,
    beam_odd_solution,
    boundary_data_field,
    d_a_pair,
    forward_I0,
    forward_Iperp,
    forward_Ipm1,
    forward_callable,
    forward_pair,
    forward_point,
    integrating_factor_U,
    op_B,
    op_Q,
    pair_inner,
    pair_norm,
    psi_extension,
    sharp_extension,
)
from .adjoints import (
    OperatorMatrix,
    adjoint_I,
    adjoint_I0,
    adjoint_I1,
    assemble,
    factorization_residual,
    op_P,
    pinv,
)
from .hodge import (
    DirichletSolver,
    HoloBasis,
    canonical_rep,
    harmonic_conjugate,
    hodge_oneform,
    holo_basis,
    pair_decompose,
    poisson_dirichlet,
    split_h,
)
from .holo import (
    Holomorphizer,
    IntegratingFactor,
    antipodal_pullback,
    antipodal_split,
    first_integral,
    holo_integrating_factor,
    holomorphizer,
    invariant_with_mode,
)
from .range_ops import (
    RangeReport,
    range_test_I0,
    range_test_I1sol,
    range_test_charac2,
    range_test_pair,
)
from .reconstruct import (
    Quadruple,
    decompose_data,
    forward_quadruple,
    g_kernel_solve,
    projections,
    recover_f_h0,
    recover_omegas,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
