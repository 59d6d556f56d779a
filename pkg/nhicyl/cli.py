"""
🌀 nhicyl.cli

Contains the `nhicyl` command line: five stages (analyze, homoclinics,
continue, verify, export) run from one config file, each writing its
artifacts into the output directory and reading the earlier ones back.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import typer
from rich.console import Console

from .common.errors import (
    CheckFailed,
    ConfigInvalid,
    ContinuationError,
    DefectiveSpectrum,
    FlowError,
    NHICError,
    SectionMapError,
    StageMissing,
)
from .common.logger import verbosity
from .continuation import (
    continue_family,
    energy_grid,
    floquet_analysis,
    negative_spec,
    partner_index,
    positive_spec,
    reflect_periodic,
)
from .cylinder import assemble, verify
from .flow import export_segment_csv
from .homoclinics import analyze_H3, check_H2, class_label, find_homoclinics, is_shrinkable, pair_by_symmetry
from .localframe import build_chart, chart_from_json, chart_to_json
from .sectionmaps import fit_cone_constants
from .model import analyze_saddle, check_H1, load_system
from .types.chart import LocalChart
from .types.config import RunConfig, Tolerances
from .types.cylinder import CylinderAtlas
from .types.homoclinic import HomoclinicChain, HomoclinicOrbit
from .types.periodic import CylinderFamily, PeriodicOrbit, ShadowingSpec
from .types.system import HamiltonianModel
from .utils.converters import (
    convert_family_to_record,
    convert_homoclinic_to_record,
    convert_mesh_to_record,
    convert_record_to_family,
    convert_record_to_homoclinic,
    convert_spectrum_to_record,
    read_json,
    write_json,
)
from .utils.formatting import family_table, format_verification, homoclinic_table, verification_table

logger = logging.getLogger(__name__)

__all__ = ["app", "main", "Stage", "Pipeline", "EXIT_CODES"]


app = typer.Typer(
    name="nhicyl",
    help="Construct and verify the cylinder of periodic orbits born from the homoclinics of a saddle.",
    add_completion=False,
    no_args_is_help=True,
)

stdout = Console()


class Stage(str, Enum):
    analyze = "analyze"
    homoclinics = "homoclinics"
    continue_ = "continue"
    verify = "verify"
    export = "export"


STAGES: List[Stage] = list(Stage)

EXIT_CODES: Dict[str, int] = {
    "ok": 0,
    "check_failed": 1,
    "config_invalid": 2,
    "stage_missing": 3,
    "error": 4,
}


# ------------------------------------------------------------------------------
# PIPELINE
# ------------------------------------------------------------------------------


class Pipeline:
    """
    One run over an output directory. Stages before `stage_from` are read
    back from their artifacts; the others are computed and written.
    """

    def __init__(self, config: RunConfig, out: Path, jobs: int = 1):
        self.config = config
        self.out = Path(out)
        self.jobs = max(1, int(jobs))
        self.failed: List[str] = []

        self._model: Optional[HamiltonianModel] = None
        self.chart: Optional[LocalChart] = None
        self.library: List[HomoclinicOrbit] = []
        self.chain: Optional[HomoclinicChain] = None
        self.positive: List[CylinderFamily] = []
        self.negative: List[CylinderFamily] = []
        self.atlas: Optional[CylinderAtlas] = None

    # --------------------------------------------------------------------------
    # shared state
    # --------------------------------------------------------------------------

    @property
    def model(self) -> HamiltonianModel:
        if self._model is None:
            source = self.config.system if self.config.system is not None else self.config.system_file
            self._model = load_system(source)
        return self._model

    @property
    def tolerances(self) -> Tolerances:
        return self.config.tolerances

    def run(self, target: Stage, stage_from: Optional[Stage] = None) -> None:
        """
        Runs every stage up to `target`.

        Raises:
            CheckFailed: after all stages ran, if any certificate or check failed.
        """
        stage_from = target if stage_from is None else stage_from
        first, last = STAGES.index(stage_from), STAGES.index(target)
        if first > last:
            raise ConfigInvalid(f"--stage-from {stage_from.value} comes after {target.value}")
        for index, stage in enumerate(STAGES[: last + 1]):
            if index < first:
                logger.info(f"Loading stage '{stage.value}' from {self.out}")
                self._load(stage)
            else:
                logger.info(f"Running stage '{stage.value}'")
                self._compute(stage)
        if self.failed:
            raise CheckFailed(self.failed)

    def _compute(self, stage: Stage) -> None:
        {
            Stage.analyze: self.analyze,
            Stage.homoclinics: self.homoclinics,
            Stage.continue_: self.continue_families,
            Stage.verify: self.verify,
            Stage.export: self.export,
        }[stage]()

    def _load(self, stage: Stage) -> None:
        {
            Stage.analyze: self.load_chart,
            Stage.homoclinics: self.load_homoclinics,
            Stage.continue_: self.load_families,
            Stage.verify: lambda: None,
            Stage.export: lambda: None,
        }[stage]()

    # --------------------------------------------------------------------------
    # analyze
    # --------------------------------------------------------------------------

    def analyze(self) -> None:
        config = self.config
        spectrum = analyze_saddle(self.model, config.nonresonance_order)
        certificate = check_H1(self.model, spectrum)
        write_json(self.out / "spectrum.json", convert_spectrum_to_record(self.model, spectrum, certificate))
        if certificate.failures:
            self.failed.extend(f"H1: {f}" for f in certificate.failures)
            raise CheckFailed(self.failed)

        section = config.chart
        self.chart = build_chart(
            self.model,
            spectrum,
            degree=section.degree,
            r_prime=section.r_prime,
            r=section.r,
            delta=section.delta,
        )
        if self.model.n > 1:
            energies = np.geomspace(config.energy.e0, config.energy.e_min, 4)
            constants = fit_cone_constants(
                self.chart,
                self.model,
                energies=np.concatenate([energies, -energies]).tolist(),
                tol=self.tolerances.integration,
                energy_tol=self.tolerances.energy,
            )
            self.chart = replace(self.chart, cone_constants=constants)
        write_json(self.out / "chart.json", chart_to_json(self.chart))
        logger.info(
            f"Saddle exponents {np.round(spectrum.exponents, 6).tolist()}, chart r' = "
            f"{self.chart.r_prime:.3e}, r = {self.chart.r:.3e}, delta = {self.chart.delta:.3e}"
        )

    def load_chart(self) -> None:
        self.chart = chart_from_json(read_json(self.out / "chart.json", "analyze"))

    # --------------------------------------------------------------------------
    # homoclinics
    # --------------------------------------------------------------------------

    def _required_classes(self) -> List[Tuple[int, ...]]:
        chain = self.config.chain
        if not chain.classes:
            raise ConfigInvalid("chain.classes must list at least one homology class")
        wanted = [tuple(c) for c in chain.classes]
        for c in chain.pairs:
            wanted.extend([tuple(c), tuple(-v for v in c)])
        wanted.extend(tuple(-v for v in c) for c in chain.classes)
        for c in wanted:
            if len(c) != self.model.n:
                raise ConfigInvalid(f"Class {list(c)} does not have {self.model.n} entries")
        return list(dict.fromkeys(wanted))

    def _index_of(self, homology_class: Sequence[int]) -> int:
        for i, orbit in enumerate(self.library):
            if tuple(orbit.homology_class) == tuple(homology_class):
                return i
        raise ConfigInvalid(f"No homoclinic of class {list(homology_class)} was found")

    def homoclinics(self) -> None:
        config, tol = self.config, self.tolerances
        section = config.homoclinics
        if not section.seeds:
            raise ConfigInvalid("homoclinics.seeds is empty")

        found = find_homoclinics(
            self.model,
            self.chart,
            section.seeds,
            t_max=section.t_max,
            eps0=section.eps0,
            tol=tol.integration,
            homoclinic_tol=tol.homoclinic,
            box=section.box,
            jobs=self.jobs,
        )
        library: List[HomoclinicOrbit] = []
        certificates = []
        for orbit in found:
            if is_shrinkable(orbit):
                logger.info(f"Skipping shrinkable homoclinic from seed {orbit.seed}")
                continue
            certificate = check_H2(
                self.model,
                self.chart,
                orbit,
                tangency_tol=tol.tangency,
                angle_tol=tol.approach_angle,
                tol=tol.integration,
                raise_on_failure=False,
            )
            certificates.append(certificate)
            if not certificate.passed:
                logger.warning(f"Homoclinic {orbit.label} fails (H2): {certificate.failures}")
                continue
            library.append(orbit.with_margin(certificate.margin))

        self.library = library
        missing = [c for c in self._required_classes() if not self._has(c)]
        for c in missing:
            source = next((o for o in self.library if tuple(-v for v in o.homology_class) == c), None)
            if source is None:
                continue
            self.library.append(
                pair_by_symmetry(
                    self.model, self.chart, source, t_max=section.t_max, tol=tol.integration,
                    homoclinic_tol=tol.homoclinic, box=section.box,
                ).with_margin(source.transversality_margin)
            )

        order = [self._index_of(c) for c in config.chain.classes]
        self.chain = analyze_H3(
            [self.library[i] for i in order],
            h_max=config.chain.h_max,
            ell_max=config.chain.ell_max,
            sep_tol=tol.separation,
            order=order,
        )

        records = []
        for i, orbit in enumerate(self.library):
            csv = f"{i:02d}_{orbit.label or class_label(orbit.homology_class)}.csv"
            export_segment_csv(self.model, orbit.segment, self.out / "homoclinics" / csv)
            records.append(convert_homoclinic_to_record(orbit, csv))
        write_json(
            self.out / "homoclinics" / "manifest.json",
            {"system": self.model.name, "orbits": records, "certificates": certificates},
        )
        write_json(self.out / "chain.json", self.chain)
        stdout.print(homoclinic_table(self.library))

    def _has(self, homology_class: Tuple[int, ...]) -> bool:
        return any(tuple(o.homology_class) == homology_class for o in self.library)

    def load_homoclinics(self) -> None:
        manifest = read_json(self.out / "homoclinics" / "manifest.json", "homoclinics")
        section, tol = self.config.homoclinics, self.tolerances
        self.library = [
            convert_record_to_homoclinic(
                self.model, self.chart, record, t_max=section.t_max, tol=tol.integration, box=section.box
            )
            for record in manifest["orbits"]
        ]
        self.chain = HomoclinicChain.model_validate(read_json(self.out / "chain.json", "homoclinics"))

    # --------------------------------------------------------------------------
    # continue
    # --------------------------------------------------------------------------

    def _continue(self, spec: ShadowingSpec, sign: int, label: str) -> CylinderFamily:
        energy, tol = self.config.energy, self.tolerances
        family = continue_family(
            self.model,
            self.chart,
            spec,
            self.library,
            energy_grid(energy.e0, energy.e_min, energy.ratio, sign),
            e0=energy.e0,
            tol=tol.integration,
            energy_tol=tol.energy,
            newton_tol=tol.newton,
            tube_factor=tol.tube_factor,
            label=label,
        )
        return self._with_floquet(family)

    def _with_floquet(self, family: CylinderFamily) -> CylinderFamily:
        orbits = []
        for orbit in family.orbits:
            try:
                orbit = orbit.with_floquet(floquet_analysis(orbit, self.tolerances.pairing))
            except DefectiveSpectrum as e:
                logger.warning(f"{family.label} at E = {orbit.energy:.3e}: {e}")
            orbits.append(orbit)
        return CylinderFamily(spec=family.spec, orbits=orbits, label=family.label)

    def _partner_family(self, family: CylinderFamily) -> CylinderFamily:
        tol = self.tolerances
        partners: List[PeriodicOrbit] = []
        for orbit in family.orbits:
            try:
                partners.append(
                    reflect_periodic(
                        self.model, self.chart, orbit, self.library, tol=tol.integration,
                        energy_tol=tol.energy, newton_tol=tol.newton, tube_factor=tol.tube_factor,
                    )
                )
            except (ContinuationError, SectionMapError, FlowError) as e:
                logger.warning(f"Partner of {family.label} at E = {orbit.energy:.3e} not solved: {e}")
        if not partners:
            raise ContinuationError(f"No s-partner of family {family.label} could be solved")
        spec = partners[0].spec
        label = "E>0 " + " ".join(spec.labels)
        return self._with_floquet(CylinderFamily(spec=spec, orbits=partners, label=label).sorted())

    def continue_families(self) -> None:
        spec = positive_spec(self.library, self.chain)
        tasks = [(spec, 1, "E>0 " + " ".join(spec.labels))]
        for c in self.config.chain.pairs:
            i = self._index_of(c)
            pair = negative_spec(self.library, i, partner_index(self.library, i))
            tasks.append((pair, -1, "E<0 " + " ".join(pair.labels)))

        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            futures = [pool.submit(self._continue, *task) for task in tasks]
            families = [f.result() for f in futures]

        self.positive = [families[0], self._partner_family(families[0])]
        self.negative = families[1:]
        self._write_families()
        stdout.print(family_table(self.positive + self.negative))

    def _write_families(self) -> None:
        records = []
        for f, family in enumerate(self.positive + self.negative):
            csvs = []
            for o, orbit in enumerate(family.orbits):
                csv = f"family{f:02d}_{o:03d}.csv"
                export_segment_csv(self.model, orbit.segment, self.out / "families" / csv)
                csvs.append(csv)
            record = convert_family_to_record(family, csvs)
            record["sign"] = family.sign
            records.append(record)
        write_json(self.out / "families" / "manifest.json", {"system": self.model.name, "families": records})

    def load_families(self) -> None:
        manifest = read_json(self.out / "families" / "manifest.json", "continue")
        tol = self.tolerances
        self.positive, self.negative = [], []
        for record in manifest["families"]:
            family = convert_record_to_family(
                self.model, self.chart, self.library, record, tol=tol.integration,
                energy_tol=tol.energy, tube_factor=tol.tube_factor,
            )
            (self.positive if family.sign > 0 else self.negative).append(family)

    # --------------------------------------------------------------------------
    # verify & export
    # --------------------------------------------------------------------------

    def _atlas(self) -> CylinderAtlas:
        if self.atlas is None:
            self.atlas = assemble(self.positive, self.negative, self.library, self.chain)
        return self.atlas

    def verify(self) -> None:
        config = self.config
        self.atlas = verify(
            self._atlas(),
            self.model,
            self.chart,
            self.library,
            checks=config.checks,
            tolerances=config.tolerances,
            probes=config.probes,
            seed=config.seed,
        )
        report = self.atlas.verification
        write_json(self.out / "verification.json", report)
        (self.out / "verification.txt").write_text(format_verification(report))
        stdout.print(verification_table(report))
        self.failed.extend(report.failed)

    def export(self) -> None:
        atlas = self._atlas()
        write_json(self.out / "mesh.json", convert_mesh_to_record(atlas.mesh, atlas.chain, atlas.hole_count))
        for i, orbit in enumerate(self.library):
            csv = f"{i:02d}_{orbit.label or class_label(orbit.homology_class)}.csv"
            export_segment_csv(self.model, orbit.segment, self.out / "homoclinics" / csv)
        self._write_families()
        logger.info(f"Exported {len(atlas.mesh.vertices)} mesh vertices to {self.out / 'mesh.json'}")


# ------------------------------------------------------------------------------
# COMMANDS
# ------------------------------------------------------------------------------


def _execute(
    target: Stage,
    config_path: Path,
    out: Optional[Path],
    jobs: Optional[int],
    stage_from: Optional[Stage],
    verbose: bool,
) -> None:
    verbosity("info" if verbose else "warning")
    try:
        config = RunConfig.from_file(config_path)
        pipeline = Pipeline(
            config,
            out if out is not None else Path(config.out),
            jobs if jobs is not None else config.jobs,
        )
        pipeline.run(target, stage_from)
    except ConfigInvalid as e:
        logger.error(str(e))
        raise typer.Exit(EXIT_CODES["config_invalid"])
    except StageMissing as e:
        logger.error(str(e))
        raise typer.Exit(EXIT_CODES["stage_missing"])
    except CheckFailed as e:
        logger.error(str(e))
        raise typer.Exit(EXIT_CODES["check_failed"])
    except NHICError as e:
        logger.error(f"{type(e).__name__}: {e}")
        raise typer.Exit(EXIT_CODES["error"])


ConfigOption = typer.Option(..., "--config", "-c", help="Run config (.cfg, YAML).")
OutOption = typer.Option(
    None, "--out", "-o", envvar="NHICYL_OUT", help="Output directory; overrides the config's `out`."
)
JobsOption = typer.Option(None, "--jobs", "-j", min=1, help="Parallel workers for seeds and families.")
StageFromOption = typer.Option(
    None, "--stage-from", help="First stage to compute; earlier stages are read from --out."
)
VerboseOption = typer.Option(False, "--verbose", "-v", help="Log stage progress.")


@app.command()
def analyze(
    config: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    jobs: Optional[int] = JobsOption,
    stage_from: Optional[Stage] = StageFromOption,
    verbose: bool = VerboseOption,
) -> None:
    """Certify the saddle and build the local chart (spectrum.json, chart.json)."""
    _execute(Stage.analyze, config, out, jobs, stage_from, verbose)


@app.command()
def homoclinics(
    config: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    jobs: Optional[int] = JobsOption,
    stage_from: Optional[Stage] = StageFromOption,
    verbose: bool = VerboseOption,
) -> None:
    """Shoot and certify homoclinics, find the covering (homoclinics/, chain.json)."""
    _execute(Stage.homoclinics, config, out, jobs, stage_from, verbose)


@app.command("continue")
def continue_command(
    config: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    jobs: Optional[int] = JobsOption,
    stage_from: Optional[Stage] = StageFromOption,
    verbose: bool = VerboseOption,
) -> None:
    """Continue the periodic families on both sides of E = 0 (families/)."""
    _execute(Stage.continue_, config, out, jobs, stage_from, verbose)


@app.command("verify")
def verify_command(
    config: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    jobs: Optional[int] = JobsOption,
    stage_from: Optional[Stage] = StageFromOption,
    verbose: bool = VerboseOption,
) -> None:
    """Run the enabled checks (verification.json, verification.txt)."""
    _execute(Stage.verify, config, out, jobs, stage_from, verbose)


@app.command()
def export(
    config: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    jobs: Optional[int] = JobsOption,
    stage_from: Optional[Stage] = StageFromOption,
    verbose: bool = VerboseOption,
) -> None:
    """Write the cylinder mesh and every orbit CSV (mesh.json)."""
    _execute(Stage.export, config, out, jobs, stage_from, verbose)


def main() -> None:
    app()


if __name__ == "__main__":
    main()
