"""Sampled certification of differential positivity for nonlinear systems."""

__version__ = "0.1.0"

from .checker import (  # noqa: E402
    CheckSettings,
    check_monotone_order,
    check_theorem1,
    check_theorem2,
    check_theorem3,
    estimate_contraction,
    verify_invariance_along_flow,
)
from .cones import (  # noqa: E402
    ConeField,
    boundary_sampler,
    cone_center,
    extreme_rays,
    feasibility_margin,
    hilbert,
    hilbert_distance,
    membership,
    polyhedral_cone,
    quadratic_cone,
)
from .dynamics import (  # noqa: E402
    SystemModel,
    check_forward_invariance,
    integrate_normalized,
    integrate_prolonged,
    integrate_trajectory,
)
from .regions import CompactRegion, PhaseGapRegion, TubeRegion  # noqa: E402

__all__ = [
    "CheckSettings",
    "CompactRegion",
    "ConeField",
    "PhaseGapRegion",
    "SystemModel",
    "TubeRegion",
    "boundary_sampler",
    "check_forward_invariance",
    "check_monotone_order",
    "check_theorem1",
    "check_theorem2",
    "check_theorem3",
    "cone_center",
    "estimate_contraction",
    "extreme_rays",
    "feasibility_margin",
    "hilbert",
    "hilbert_distance",
    "integrate_normalized",
    "integrate_prolonged",
    "integrate_trajectory",
    "membership",
    "polyhedral_cone",
    "quadratic_cone",
    "verify_invariance_along_flow",
]
