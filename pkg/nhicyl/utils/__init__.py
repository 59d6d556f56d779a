"""
🌀 nhicyl.utils

Contains the artifact conversions and report formatting used by the
command line and by anyone reading a run back from disk.
"""

import sys
from importlib import import_module
from typing import Any, Dict, Tuple, TYPE_CHECKING

if TYPE_CHECKING:
    from .converters import *
    from .formatting import *


IMPORT_MAP: Dict[str, Tuple[str, str]] = {
    # converters
    "convert_to_plain": (".converters", "convert_to_plain"),
    "write_json": (".converters", "write_json"),
    "read_json": (".converters", "read_json"),
    "convert_spectrum_to_record": (".converters", "convert_spectrum_to_record"),
    "convert_crossing_to_record": (".converters", "convert_crossing_to_record"),
    "convert_homoclinic_to_record": (".converters", "convert_homoclinic_to_record"),
    "convert_record_to_homoclinic": (".converters", "convert_record_to_homoclinic"),
    "convert_periodic_to_record": (".converters", "convert_periodic_to_record"),
    "convert_family_to_record": (".converters", "convert_family_to_record"),
    "convert_record_to_family": (".converters", "convert_record_to_family"),
    "convert_mesh_to_record": (".converters", "convert_mesh_to_record"),
    # formatting
    "format_number": (".formatting", "format_number"),
    "verification_table": (".formatting", "verification_table"),
    "family_table": (".formatting", "family_table"),
    "homoclinic_table": (".formatting", "homoclinic_table"),
    "render_text": (".formatting", "render_text"),
    "format_verification": (".formatting", "format_verification"),
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
