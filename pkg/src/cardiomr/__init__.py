"""cardiomr: adaptive multiresolution finite-volume cardiac tissue solver.

Explicit finite-volume discretization of the monodomain and bidomain
equations on a graded dyadic quadtree, with cell-average multiresolution
(projection / prediction / detail thresholding), conservative interface
fluxes, and three time integrators: global explicit Euler, locally varying
time stepping, and an embedded RK3(2) pair with adaptive step control.
"""

__version__ = "0.1.0"

from .fvcore import GridSpec
from .kinetics import ConductivitySpec, FhnParams, ModelConstants, MsParams
from .mrtree import NodeKey, Tree

__all__ = [
    "ConductivitySpec",
    "FhnParams",
    "GridSpec",
    "ModelConstants",
    "MsParams",
    "NodeKey",
    "Tree",
    "__version__",
]
