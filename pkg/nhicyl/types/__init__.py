"""
🌀 nhicyl.types

Contains the records passed between the stages of the pipeline: the
system and its saddle, trajectories and events, the local chart,
homoclinic orbits, section maps, periodic orbits, the cylinder atlas and
the run configuration.
"""

import sys
from importlib import import_module
from typing import Any, Dict, Tuple, TYPE_CHECKING

if TYPE_CHECKING:
    from .system import *
    from .orbits import *
    from .chart import *
    from .homoclinic import *
    from .sections import *
    from .periodic import *
    from .cylinder import *
    from .config import *


IMPORT_MAP: Dict[str, Tuple[str, str]] = {
    # system
    "TorusPotential": (".system", "TorusPotential"),
    "QuadraticPotential": (".system", "QuadraticPotential"),
    "HamiltonianModel": (".system", "HamiltonianModel"),
    "SaddleSpectrum": (".system", "SaddleSpectrum"),
    "MinimumReport": (".system", "MinimumReport"),
    "H1Certificate": (".system", "H1Certificate"),
    # orbits
    "EventSpec": (".orbits", "EventSpec"),
    "OrbitSegment": (".orbits", "OrbitSegment"),
    "VariationalSegment": (".orbits", "VariationalSegment"),
    "EventHit": (".orbits", "EventHit"),
    # chart
    "LocalChart": (".chart", "LocalChart"),
    "ManifoldGraph": (".chart", "ManifoldGraph"),
    "ConeParams": (".chart", "ConeParams"),
    "ConeReport": (".chart", "ConeReport"),
    "ConeConstants": (".chart", "ConeConstants"),
    # homoclinics
    "SectionCrossing": (".homoclinic", "SectionCrossing"),
    "HomoclinicOrbit": (".homoclinic", "HomoclinicOrbit"),
    "H2Certificate": (".homoclinic", "H2Certificate"),
    "HomoclinicChain": (".homoclinic", "HomoclinicChain"),
    # sections
    "SectionSpec": (".sections", "SectionSpec"),
    "SectionMapResult": (".sections", "SectionMapResult"),
    "ExpansionReport": (".sections", "ExpansionReport"),
    "SplitInnerResult": (".sections", "SplitInnerResult"),
    # periodic orbits
    "Leg": (".periodic", "Leg"),
    "ShadowingSpec": (".periodic", "ShadowingSpec"),
    "PeriodicOrbit": (".periodic", "PeriodicOrbit"),
    "CylinderFamily": (".periodic", "CylinderFamily"),
    "FloquetReport": (".periodic", "FloquetReport"),
    "ProbeReport": (".periodic", "ProbeReport"),
    "OracleResult": (".periodic", "OracleResult"),
    "PeriodLawReport": (".periodic", "PeriodLawReport"),
    "SymmetryReport": (".periodic", "SymmetryReport"),
    # cylinder
    "ScalingFit": (".cylinder", "ScalingFit"),
    "FloquetScaling": (".cylinder", "FloquetScaling"),
    "JoinReport": (".cylinder", "JoinReport"),
    "VertexReport": (".cylinder", "VertexReport"),
    "HyperbolicityReport": (".cylinder", "HyperbolicityReport"),
    "WindowRates": (".cylinder", "WindowRates"),
    "MeshInvarianceReport": (".cylinder", "MeshInvarianceReport"),
    "CheckResult": (".cylinder", "CheckResult"),
    "VerificationReport": (".cylinder", "VerificationReport"),
    "CylinderMesh": (".cylinder", "CylinderMesh"),
    "CylinderAtlas": (".cylinder", "CylinderAtlas"),
    # config
    "RunConfig": (".config", "RunConfig"),
}

__all__ = list(IMPORT_MAP)


def __getattr__(name: str) -> Any:
    """Handle dynamic imports for module attributes."""
    if name in IMPORT_MAP:
        module_path, attr_name = IMPORT_MAP[name]
        module = import_module(module_path, __name__)
        return getattr(module, attr_name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__() -> "list[str]":
    """Return list of module attributes for auto-completion."""
    return list(__all__)


if sys.version_info >= (3, 7):
    __getattr__.__module__ = __name__
