"""
## 🌀 nhicyl

Periodic orbits born from the homoclinics of a saddle, continued across
E = 0 and assembled into a singular normally hyperbolic invariant cylinder.
"""

import sys
from importlib import import_module
from typing import Any, Dict, Tuple, TYPE_CHECKING

from .common.logger import (
    verbosity,
    setup_logging as _setup_logging,
)

_setup_logging()


if TYPE_CHECKING:
    from .model import (
        evaluate,
        evaluate_mp,
        normalize_potential,
        build_model,
        load_system,
        check_minimum,
        analyze_saddle,
        check_H1,
        kappa_min,
        pendulum,
        coupled_pendula,
        linear_saddle,
    )
    from .flow import (
        integrate,
        integrate_variational,
        integrate_to_event,
        locate_events,
        event_value,
        reflect,
        export_segment_csv,
    )
    from .localframe import (
        build_chart,
        to_local,
        from_local,
        local_jacobians,
        hamiltonian_in_local,
        local_vector_field,
        graph_residual,
        admissible_alpha,
        cone_check,
        approach_direction,
        chart_to_json,
        chart_from_json,
    )
    from .homoclinics import (
        find_homoclinics,
        homoclinic_from_start,
        pair_by_symmetry,
        check_H2,
        transversality_margin,
        analyze_H3,
        is_shrinkable,
        class_label,
    )
    from .sectionmaps import (
        hat_indices,
        embed_anchor,
        project_anchor,
        correct_jacobian,
        section_differential,
        outer_map,
        inner_map,
        split_inner_map,
        inner_transit_time,
        fit_cone_constants,
        verify_expansion_contraction,
    )
    from .continuation import (
        positive_spec,
        negative_spec,
        partner_index,
        energy_grid,
        initial_guess,
        return_map,
        solve_periodic,
        rebuild_periodic,
        floquet_analysis,
        continue_family,
        uniqueness_probe,
        graph_transform_oracle,
        reflect_periodic,
        symmetric_crossings,
        period_law,
        pendulum_period,
    )
    from .cylinder import (
        count_holes,
        build_mesh,
        assemble,
        hausdorff_distance,
        skeleton_distance,
        hausdorff_convergence,
        transit_time_fit,
        floquet_scaling_fit,
        c1_join_test,
        vertex_differentiability_test,
        normal_hyperbolicity_test,
        window_rates,
        alignment_trend,
        mesh_invariance,
        verify,
    )
    from .types import (
        HamiltonianModel,
        SaddleSpectrum,
        LocalChart,
        OrbitSegment,
        EventSpec,
        HomoclinicOrbit,
        HomoclinicChain,
        SectionSpec,
        SectionMapResult,
        ShadowingSpec,
        PeriodicOrbit,
        CylinderFamily,
        CylinderAtlas,
        VerificationReport,
        RunConfig,
    )


IMPORT_MAP: Dict[str, Tuple[str, str]] = {
    # LOGGING
    "verbosity": (".common.logger", "verbosity"),
    # MODEL
    "evaluate": (".model", "evaluate"),
    "evaluate_mp": (".model", "evaluate_mp"),
    "normalize_potential": (".model", "normalize_potential"),
    "build_model": (".model", "build_model"),
    "load_system": (".model", "load_system"),
    "check_minimum": (".model", "check_minimum"),
    "analyze_saddle": (".model", "analyze_saddle"),
    "check_H1": (".model", "check_H1"),
    "kappa_min": (".model", "kappa_min"),
    "pendulum": (".model", "pendulum"),
    "coupled_pendula": (".model", "coupled_pendula"),
    "linear_saddle": (".model", "linear_saddle"),
    # FLOW
    "integrate": (".flow", "integrate"),
    "integrate_variational": (".flow", "integrate_variational"),
    "integrate_to_event": (".flow", "integrate_to_event"),
    "locate_events": (".flow", "locate_events"),
    "event_value": (".flow", "event_value"),
    "reflect": (".flow", "reflect"),
    "export_segment_csv": (".flow", "export_segment_csv"),
    # LOCALFRAME
    "build_chart": (".localframe", "build_chart"),
    "to_local": (".localframe", "to_local"),
    "from_local": (".localframe", "from_local"),
    "local_jacobians": (".localframe", "local_jacobians"),
    "hamiltonian_in_local": (".localframe", "hamiltonian_in_local"),
    "local_vector_field": (".localframe", "local_vector_field"),
    "graph_residual": (".localframe", "graph_residual"),
    "admissible_alpha": (".localframe", "admissible_alpha"),
    "cone_check": (".localframe", "cone_check"),
    "approach_direction": (".localframe", "approach_direction"),
    "chart_to_json": (".localframe", "chart_to_json"),
    "chart_from_json": (".localframe", "chart_from_json"),
    # HOMOCLINICS
    "find_homoclinics": (".homoclinics", "find_homoclinics"),
    "homoclinic_from_start": (".homoclinics", "homoclinic_from_start"),
    "pair_by_symmetry": (".homoclinics", "pair_by_symmetry"),
    "check_H2": (".homoclinics", "check_H2"),
    "transversality_margin": (".homoclinics", "transversality_margin"),
    "analyze_H3": (".homoclinics", "analyze_H3"),
    "is_shrinkable": (".homoclinics", "is_shrinkable"),
    "class_label": (".homoclinics", "class_label"),
    # SECTIONMAPS
    "hat_indices": (".sectionmaps", "hat_indices"),
    "embed_anchor": (".sectionmaps", "embed_anchor"),
    "project_anchor": (".sectionmaps", "project_anchor"),
    "correct_jacobian": (".sectionmaps", "correct_jacobian"),
    "section_differential": (".sectionmaps", "section_differential"),
    "outer_map": (".sectionmaps", "outer_map"),
    "inner_map": (".sectionmaps", "inner_map"),
    "split_inner_map": (".sectionmaps", "split_inner_map"),
    "inner_transit_time": (".sectionmaps", "inner_transit_time"),
    "fit_cone_constants": (".sectionmaps", "fit_cone_constants"),
    "verify_expansion_contraction": (".sectionmaps", "verify_expansion_contraction"),
    # CONTINUATION
    "positive_spec": (".continuation", "positive_spec"),
    "negative_spec": (".continuation", "negative_spec"),
    "partner_index": (".continuation", "partner_index"),
    "energy_grid": (".continuation", "energy_grid"),
    "initial_guess": (".continuation", "initial_guess"),
    "return_map": (".continuation", "return_map"),
    "solve_periodic": (".continuation", "solve_periodic"),
    "rebuild_periodic": (".continuation", "rebuild_periodic"),
    "floquet_analysis": (".continuation", "floquet_analysis"),
    "continue_family": (".continuation", "continue_family"),
    "uniqueness_probe": (".continuation", "uniqueness_probe"),
    "graph_transform_oracle": (".continuation", "graph_transform_oracle"),
    "reflect_periodic": (".continuation", "reflect_periodic"),
    "symmetric_crossings": (".continuation", "symmetric_crossings"),
    "period_law": (".continuation", "period_law"),
    "pendulum_period": (".continuation", "pendulum_period"),
    # CYLINDER
    "count_holes": (".cylinder", "count_holes"),
    "build_mesh": (".cylinder", "build_mesh"),
    "assemble": (".cylinder", "assemble"),
    "hausdorff_distance": (".cylinder", "hausdorff_distance"),
    "skeleton_distance": (".cylinder", "skeleton_distance"),
    "hausdorff_convergence": (".cylinder", "hausdorff_convergence"),
    "transit_time_fit": (".cylinder", "transit_time_fit"),
    "floquet_scaling_fit": (".cylinder", "floquet_scaling_fit"),
    "c1_join_test": (".cylinder", "c1_join_test"),
    "vertex_differentiability_test": (".cylinder", "vertex_differentiability_test"),
    "normal_hyperbolicity_test": (".cylinder", "normal_hyperbolicity_test"),
    "window_rates": (".cylinder", "window_rates"),
    "alignment_trend": (".cylinder", "alignment_trend"),
    "mesh_invariance": (".cylinder", "mesh_invariance"),
    "verify": (".cylinder", "verify"),
    # TYPES
    "HamiltonianModel": (".types", "HamiltonianModel"),
    "SaddleSpectrum": (".types", "SaddleSpectrum"),
    "LocalChart": (".types", "LocalChart"),
    "OrbitSegment": (".types", "OrbitSegment"),
    "EventSpec": (".types", "EventSpec"),
    "HomoclinicOrbit": (".types", "HomoclinicOrbit"),
    "HomoclinicChain": (".types", "HomoclinicChain"),
    "SectionSpec": (".types", "SectionSpec"),
    "SectionMapResult": (".types", "SectionMapResult"),
    "ShadowingSpec": (".types", "ShadowingSpec"),
    "PeriodicOrbit": (".types", "PeriodicOrbit"),
    "CylinderFamily": (".types", "CylinderFamily"),
    "CylinderAtlas": (".types", "CylinderAtlas"),
    "VerificationReport": (".types", "VerificationReport"),
    "RunConfig": (".types", "RunConfig"),
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
