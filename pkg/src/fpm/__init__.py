"""Kinematics, sensitivity analysis and metrology for flat-plane mechanisms."""

from .design import DesignParams, LinkSet, OPTIMAL_DESIGN, design_from_links, links_from_design, validate_links
from .kinematics import ControlInput, JointAngles, forward, forward_many, ideal_endpoint, inverse
from .sensitivity import SensitivityConfig, kinematic_sensitivity

__all__ = [
    "ControlInput",
    "DesignParams",
    "JointAngles",
    "LinkSet",
    "OPTIMAL_DESIGN",
    "SensitivityConfig",
    "design_from_links",
    "forward",
    "forward_many",
    "ideal_endpoint",
    "inverse",
    "kinematic_sensitivity",
    "links_from_design",
    "validate_links",
]
