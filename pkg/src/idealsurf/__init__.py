"""Discrete geometry of critical points of F = int |grad H|^2 dmu.

Meshes, exact chart oracles, curvature operators, the energy and its first
variation, the gradient flow, and an audit of the integral estimates.
"""

from .analytic import ParametricSurface, exact_curvature, sample_mesh
from .curvature import discrete_curvature, el_residual
from .energy import energy, first_variation, finite_difference_variation
from .flow import FlowConfig, planarity_test, run_flow
from .mesh import Mesh, MeshError, load_mesh, make_mesh, save_obj

__all__ = [
    "FlowConfig", "Mesh", "MeshError", "ParametricSurface", "discrete_curvature",
    "el_residual", "energy", "exact_curvature", "first_variation",
    "finite_difference_variation", "load_mesh", "make_mesh", "planarity_test",
    "run_flow", "sample_mesh", "save_obj",
]
__version__ = "0.1.0"
