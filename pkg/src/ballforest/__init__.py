"""Tidy ball forests, crossing-length oracles and shear compositions."""

from .geom import GeometryError, HullSpec, SolidBall, TangentBall
from .sphere_net import SphericalNet, build_net, net_constants, verify_net
from .forest import TidyForest, build_shell_forest, build_bound_forest, build_complete_forest, verify_tidy
from .path_oracle import CrossingProblem, falsify_bound, min_crossing_length
from .runge import Hypersurface, ShearAutomorphism, build_shear, runge_witness
from .composer import AutomorphismSeq, ComposeConfig, build_exhaustion, compose, completeness_report

__version__ = "0.1.0"

__all__ = [
    "GeometryError", "HullSpec", "SolidBall", "TangentBall",
    "SphericalNet", "build_net", "net_constants", "verify_net",
    "TidyForest", "build_shell_forest", "build_bound_forest", "build_complete_forest", "verify_tidy",
    "CrossingProblem", "falsify_bound", "min_crossing_length",
    "Hypersurface", "ShearAutomorphism", "build_shear", "runge_witness",
    "AutomorphismSeq", "ComposeConfig", "build_exhaustion", "compose", "completeness_report",
]
