"""
🌀 nhicyl.utils.converters

Contains the conversions between pipeline records and the plain data
written to (and read back from) the stage artifacts of a run.
"""

import json
import logging
import math
from dataclasses import is_dataclass, fields as dataclass_fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel

from ..common.errors import HomoclinicError, StageMissing
from ..types.chart import LocalChart
from ..types.cylinder import CylinderMesh
from ..types.homoclinic import HomoclinicChain, HomoclinicOrbit, SectionCrossing
from ..types.periodic import CylinderFamily, FloquetReport, PeriodicOrbit, ShadowingSpec
from ..types.system import H1Certificate, HamiltonianModel, SaddleSpectrum

logger = logging.getLogger(__name__)

__all__ = [
    "convert_to_plain",
    "write_json",
    "read_json",
    "convert_spectrum_to_record",
    "convert_crossing_to_record",
    "convert_homoclinic_to_record",
    "convert_record_to_homoclinic",
    "convert_periodic_to_record",
    "convert_family_to_record",
    "convert_record_to_family",
    "convert_mesh_to_record",
]


def convert_to_plain(obj: Any) -> Any:
    """
    Converts numpy arrays & scalars, pydantic models, dataclasses and
    tuples into JSON-ready python values. Non-finite floats become None.

    Args:
        obj: The object to convert.

    Returns:
        Nested dicts, lists, strings, ints, floats and None.
    """
    if isinstance(obj, BaseModel):
        return convert_to_plain(obj.model_dump(mode="python"))
    if isinstance(obj, np.ndarray):
        return convert_to_plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, Mapping):
        return {str(k): convert_to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [convert_to_plain(v) for v in obj]
    if is_dataclass(obj) and not isinstance(obj, type):
        return {
            f.name: convert_to_plain(getattr(obj, f.name))
            for f in dataclass_fields(obj)
            if f.repr
        }
    return obj


def write_json(path: Union[str, Path], obj: Any) -> Path:
    """
    Writes `obj` as sorted, indented JSON. Floats use python's shortest
    round-trip representation, so identical inputs give identical bytes.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(convert_to_plain(obj), indent=2, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n")
    logger.debug(f"Wrote {path}")
    return path


def read_json(path: Union[str, Path], stage: str = "") -> Any:
    """
    Reads a stage artifact.

    Raises:
        StageMissing: the file does not exist or is not valid JSON.
    """
    path = Path(path)
    if not path.is_file():
        raise StageMissing(stage or path.stem, str(path))
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise StageMissing(stage or path.stem, f"{path} ({e})") from e


# ------------------------------------------------------------------------------
# SADDLE
# ------------------------------------------------------------------------------


def convert_spectrum_to_record(
    model: HamiltonianModel, spectrum: SaddleSpectrum, certificate: H1Certificate
) -> Dict[str, Any]:
    return {
        "system": model.name,
        "n": model.n,
        "exponents": spectrum.exponents,
        "eigvec_plus": spectrum.eigvec_plus,
        "eigvec_minus": spectrum.eigvec_minus,
        "max_residual": spectrum.max_residual,
        "min_gap": spectrum.min_gap if np.isfinite(spectrum.min_gap) else None,
        "smallest_combination": spectrum.smallest_combination,
        "certificate": certificate,
        "passed": not certificate.failures,
    }


# ------------------------------------------------------------------------------
# HOMOCLINICS
# ------------------------------------------------------------------------------


def convert_crossing_to_record(crossing: Optional[SectionCrossing]) -> Optional[Dict[str, Any]]:
    if crossing is None:
        return None
    return {
        "kind": crossing.kind,
        "sign": int(crossing.sign),
        "t": float(crossing.t),
        "w": crossing.w,
        "lattice_shift": crossing.lattice_shift.astype(int),
    }


def convert_homoclinic_to_record(orbit: HomoclinicOrbit, csv: Optional[str] = None) -> Dict[str, Any]:
    """Manifest entry of one homoclinic; `csv` names its sample file."""
    return {
        "label": orbit.label,
        "homology_class": list(orbit.homology_class),
        "seed": orbit.seed,
        "start_w": orbit.start_w,
        "end_w": orbit.end_w,
        "mismatch": orbit.mismatch,
        "transversality_margin": orbit.transversality_margin,
        "outer_time": orbit.outer_time if orbit.entry is not None and orbit.exit is not None else None,
        "entry": convert_crossing_to_record(orbit.entry),
        "exit": convert_crossing_to_record(orbit.exit),
        "csv": csv,
    }


def convert_record_to_homoclinic(
    model: HamiltonianModel,
    chart: LocalChart,
    record: Mapping[str, Any],
    t_max: float = 20.0,
    tol: float = 1e-12,
    box: float = 50.0,
) -> HomoclinicOrbit:
    """
    Re-integrates a stored homoclinic from its start point and checks that
    it lands in the recorded class.

    Raises:
        HomoclinicError: the re-integrated orbit has another class.
    """
    from ..homoclinics import homoclinic_from_start

    seed = record.get("seed")
    orbit = homoclinic_from_start(
        model,
        chart,
        np.asarray(record["start_w"], dtype=float),
        t_max=t_max,
        tol=tol,
        box=box,
        seed=None if seed is None else tuple(seed),
    )
    expected = tuple(int(c) for c in record["homology_class"])
    if tuple(orbit.homology_class) != expected:
        raise HomoclinicError(
            f"Stored homoclinic {record.get('label')} re-integrated to class "
            f"{orbit.homology_class}, expected {expected}"
        )
    margin = record.get("transversality_margin")
    return orbit.with_margin(margin) if margin is not None else orbit


# ------------------------------------------------------------------------------
# PERIODIC ORBITS
# ------------------------------------------------------------------------------


def convert_periodic_to_record(orbit: PeriodicOrbit, csv: Optional[str] = None) -> Dict[str, Any]:
    return {
        "energy": orbit.energy,
        "period": orbit.period,
        "anchors": orbit.anchors,
        "closure": orbit.closure,
        "iterations": orbit.iterations,
        "itinerary": [list(step) for step in orbit.itinerary],
        "floquet": orbit.floquet,
        "csv": csv,
    }


def convert_family_to_record(
    family: CylinderFamily, csvs: Optional[Sequence[Optional[str]]] = None
) -> Dict[str, Any]:
    csvs = list(csvs) if csvs is not None else [None] * len(family)
    return {
        "label": family.label,
        "spec": family.spec,
        "orbits": [convert_periodic_to_record(o, c) for o, c in zip(family.orbits, csvs)],
    }


def convert_record_to_family(
    model: HamiltonianModel,
    chart: LocalChart,
    library: Sequence[HomoclinicOrbit],
    record: Mapping[str, Any],
    tol: float = 1e-12,
    energy_tol: float = 1e-9,
    tube_factor: float = 10.0,
) -> CylinderFamily:
    """
    Rebuilds a stored family: every orbit's legs are re-evaluated at its
    stored anchors (no Newton steps) and its Floquet report reattached.
    """
    from ..continuation import rebuild_periodic

    spec = ShadowingSpec.model_validate(record["spec"])
    orbits: List[PeriodicOrbit] = []
    for entry in record["orbits"]:
        orbit = rebuild_periodic(
            model,
            chart,
            spec,
            library,
            float(entry["energy"]),
            np.asarray(entry["anchors"], dtype=float),
            tol=tol,
            energy_tol=energy_tol,
            tube_factor=tube_factor,
        )
        if entry.get("floquet") is not None:
            orbit = orbit.with_floquet(FloquetReport.model_validate(entry["floquet"]))
        orbits.append(orbit)
    return CylinderFamily(spec=spec, orbits=orbits, label=record.get("label", "")).sorted()


def convert_mesh_to_record(mesh: CylinderMesh, chain: HomoclinicChain, hole_count: int) -> Dict[str, Any]:
    return {
        "h": chain.h,
        "ell": chain.ell,
        "hole_count": hole_count,
        "resolution": mesh.resolution,
        "energies": mesh.energies,
        "phases": mesh.phases,
        "vertices": mesh.vertices,
        "faces": mesh.faces.astype(int),
    }
