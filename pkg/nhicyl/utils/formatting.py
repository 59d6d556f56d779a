"""
🌀 nhicyl.utils.formatting

Contains the rich renderings of run results: the verification table and
the family and homoclinic summaries printed by the command line.
"""

import io
import logging
from typing import Optional, Sequence

from rich import box
from rich.console import Console
from rich.table import Table

from ..types.cylinder import VerificationReport
from ..types.homoclinic import HomoclinicOrbit
from ..types.periodic import CylinderFamily

logger = logging.getLogger(__name__)

__all__ = [
    "format_number",
    "verification_table",
    "family_table",
    "homoclinic_table",
    "render_text",
    "format_verification",
]


def format_number(value: Optional[float], digits: int = 4) -> str:
    if value is None:
        return "-"
    return f"{value:.{digits}g}"


def verification_table(report: VerificationReport) -> Table:
    table = Table(
        title=f"{report.system}: {report.hole_count}-hole cylinder, h = {tuple(report.h)}, l = {report.ell}",
        box=box.SIMPLE_HEAVY,
    )
    table.add_column("check", style="bold")
    table.add_column("result")
    table.add_column("value", justify="right")
    table.add_column("threshold")
    table.add_column("detail", overflow="fold")
    for check in report.checks:
        table.add_row(
            check.name,
            "[green]pass[/green]" if check.passed else "[red]FAIL[/red]",
            format_number(check.value),
            check.threshold or "",
            check.detail,
        )
    return table


def family_table(families: Sequence[CylinderFamily]) -> Table:
    table = Table(title="periodic families", box=box.SIMPLE_HEAVY)
    table.add_column("family", style="bold")
    table.add_column("sign", justify="center")
    table.add_column("orbits", justify="right")
    table.add_column("|E| range", justify="right")
    table.add_column("max closure", justify="right")
    for family in families:
        if len(family) == 0:
            table.add_row(family.label, f"{family.sign:+d}", "0", "-", "-")
            continue
        magnitudes = [abs(o.energy) for o in family.orbits]
        table.add_row(
            family.label,
            f"{family.sign:+d}",
            str(len(family)),
            f"{format_number(min(magnitudes), 2)} .. {format_number(max(magnitudes), 2)}",
            format_number(max(o.closure for o in family.orbits), 2),
        )
    return table


def homoclinic_table(orbits: Sequence[HomoclinicOrbit]) -> Table:
    table = Table(title="homoclinic library", box=box.SIMPLE_HEAVY)
    table.add_column("#", justify="right")
    table.add_column("class", style="bold")
    table.add_column("outer time", justify="right")
    table.add_column("mismatch", justify="right")
    table.add_column("margin", justify="right")
    for i, orbit in enumerate(orbits):
        table.add_row(
            str(i),
            orbit.label,
            format_number(orbit.outer_time if orbit.entry is not None else None),
            format_number(orbit.mismatch, 2),
            format_number(orbit.transversality_margin, 3),
        )
    return table


def render_text(*renderables, width: int = 110) -> str:
    """Renders rich objects to plain text, without colour codes."""
    console = Console(record=True, width=width, file=io.StringIO())
    for item in renderables:
        console.print(item)
    return console.export_text()


def format_verification(report: VerificationReport) -> str:
    """The `verification.txt` artifact: the table, the fitted constants and the caveat."""
    constants = Table(title="fitted constants", box=box.SIMPLE)
    constants.add_column("name")
    constants.add_column("value", justify="right")
    for name, value in sorted(report.fitted_constants.items()):
        constants.add_row(name, format_number(value, 8))
    status = "all enabled checks passed" if report.passed else f"failed: {', '.join(report.failed)}"
    return render_text(verification_table(report), constants, status, f"Note: {report.caveat}")
