"""Kinematics and actuation planning for the Tilt-X continuum aerial manipulator."""
from .arckin import (
    ArcParams,
    CableLengths,
    arc_transform,
    cable_deltas_from_config,
    cables_from_config,
    config_from_cables,
)
from .chain import (
    ActuationPlan,
    ActuatorState,
    TiltXConfig,
    actuation_plan,
    IKResult,
    ik_position,
    ik_solve,
    motor_from_tilt,
    telescopic_delta,
    tilt_compensation,
    tilt_from_motor,
    tiltx_fk,
    world_fk,
)
from .errors import RangeError, TiltXError, UnreachableTargetError
from .geometry import CableLayout, Geometry, PulleyGeometry, load_geometry
from .se3core import RigidTransform, UnitQuaternion, compose, elementary, geodesic_angle, quat_average
from .workspace import PointCloud, export_cloud, reach_stats, sample_workspace, slice_targets

__version__ = "0.1.0"
