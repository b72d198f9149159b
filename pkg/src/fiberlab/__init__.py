"""Tangent fields and splitting decompositions of discrete measures."""

from .kernels import BACKEND
from .measures import DiscreteMeasure, MeasureMixture, make_measure, mix, restrict
from .ot_core import (
    NotCyclicallyMonotoneError,
    TransportPlan,
    extend_optimal_plan,
    is_cyclically_monotone,
    kantorovich_potential,
    solve_ot,
    truncate_plan,
    wasserstein,
)
from .fields import FiberCoupling, FiberMeasure, MeasureField, barycenter, center, gamma_of, map_field
from .fiber_geometry import bundle_distance, is_orthogonal_to_gamma, metric_dot, w_mu
from .cones import (
    GrassmannSection,
    closedness_regression,
    doubling_limit,
    estimate_section,
    membership,
    orthogonal_section,
    project_onto_section_cone,
)
from .dc_geometry import (
    DCParametrization,
    build_separating_convex,
    check_affine_ortho,
    dc_eval,
    dc_jacobian,
    subdiff_dim,
    tangent_plane,
)
from .decomposition import (
    chebyshev_bound_check,
    maxmin_component_mass,
    decompose,
    estimate_dtan,
    blowup_sequence,
    tube_mass,
    verify_tangent_alignment,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
