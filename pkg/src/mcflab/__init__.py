"""Numerical laboratory for mean curvature flow of curves and hypersurfaces of revolution."""

from .diagnostics import (
    DensityProbe,
    andrews_bruteforce,
    andrews_quantities,
    classify_tangent_flow,
    convexity_ratio,
    gaussian_density,
    gaussian_integral,
    monotonicity_report,
    reference_densities,
)
from .errors import MCFError
from .estimators import MeanCurvatureFlow, SurgeryFlow
from .exact import (
    BulbChain,
    CylinderSolution,
    DumbbellSpec,
    SphereSolution,
    cylinder_at,
    dumbbell,
    ellipse_curve,
    grim_reaper,
    sphere_at,
    triple_bulb,
)
from .flow import EngineParams, FlowHistory, FlowState, StopCriterion, choose_dt, evolve, step
from .geometry import (
    AxisymProfile,
    PolyCurve,
    QuantityField,
    SpacetimePoint,
    axisym_quantities,
    curve_quantities,
    enclosed_volume,
    hausdorff_distance,
    parabolic_rescale,
    quantities,
    resample,
    total_area,
)
from .io import read_history, read_snapshot, write_history, write_snapshot
from .surgery import SurgeryParams, detect_necks, replace_neck, surgery_flow

__version__ = "0.1.0"
