"""
🌀 nhicyl.types.config

Contains the run configuration read from a `.cfg` file (a YAML document).
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..common.errors import ConfigInvalid

__all__ = (
    "ChartSection",
    "HomoclinicSection",
    "ChainSection",
    "EnergySection",
    "Tolerances",
    "Checks",
    "RunConfig",
)


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ChartSection(_Section):
    degree: int = Field(5, ge=3)
    r_prime: Optional[float] = None
    """
    Chart radius; chosen automatically when omitted.
    """
    r: Optional[float] = None
    """
    Section radius; r'/4 when omitted.
    """
    delta: Optional[float] = None
    """
    Anchor window; r/4 when omitted.
    """

    @model_validator(mode="after")
    def _check(self) -> "ChartSection":
        if self.r_prime is not None and self.r_prime <= 0.0:
            raise ValueError("r_prime must be positive")
        if self.r is not None:
            if self.r <= 0.0:
                raise ValueError("r must be positive")
            if self.r_prime is not None and self.r >= self.r_prime:
                raise ValueError("r must be smaller than r_prime")
        if self.delta is not None:
            if self.delta <= 0.0:
                raise ValueError("delta must be positive")
            if self.r is not None and self.delta >= self.r:
                raise ValueError("delta must be smaller than r")
        return self


class HomoclinicSection(_Section):
    seeds: List[List[float]] = []
    """
    Directions on the local unstable manifold, one n-vector each.
    """
    t_max: float = Field(20.0, gt=0.0)
    eps0: Optional[float] = None
    """
    Seed distance from the saddle; r'/10 when omitted.
    """
    box: float = Field(50.0, gt=0.0)


class ChainSection(_Section):
    classes: List[List[int]] = []
    """
    Homology classes of the E > 0 chain, in order.
    """
    pairs: List[List[int]] = []
    """
    Classes i whose pairs (z_i, s z_i) carry the E < 0 families.
    """
    h_max: int = Field(4, ge=1)
    ell_max: int = Field(3, ge=0)


class EnergySection(_Section):
    e0: float = 1e-3
    e_min: float = 1e-12
    ratio: float = 0.5

    @model_validator(mode="after")
    def _check(self) -> "EnergySection":
        if not (self.e0 > self.e_min > 0.0):
            raise ValueError(f"Need e0 > e_min > 0, got e0 = {self.e0}, e_min = {self.e_min}")
        if not (0.0 < self.ratio < 1.0):
            raise ValueError(f"ratio must lie in (0, 1), got {self.ratio}")
        return self


class Tolerances(_Section):
    integration: float = Field(1e-12, gt=0.0)
    energy: float = Field(1e-9, gt=0.0)
    newton: float = Field(1e-10, gt=0.0)
    homoclinic: float = Field(1e-8, gt=0.0)
    tangency: float = Field(1e-6, gt=0.0)
    approach_angle: float = Field(1e-3, gt=0.0)
    separation: float = Field(1e-4, gt=0.0)
    join: float = Field(1e-3, gt=0.0)
    pairing: float = Field(1e-4, gt=0.0)
    tube_factor: float = Field(10.0, gt=0.0)


class Checks(_Section):
    transit_time: bool = True
    floquet_scaling: bool = True
    eigenvector_alignment: bool = True
    hausdorff: bool = True
    c1_join: bool = True
    vertex: bool = True
    normal_hyperbolicity: bool = True
    expansion_contraction: bool = True
    mesh_invariance: bool = True
    symmetry: bool = True
    period_law: bool = True
    uniqueness: bool = True
    oracle: bool = False

    def enabled(self) -> List[str]:
        return [name for name, on in self.model_dump().items() if on]


class RunConfig(_Section):
    """
    Everything an end-to-end run needs. Exactly one of `system` (an inline
    system definition) and `system_file` must be given.
    """

    system: Optional[Dict[str, Any]] = None
    system_file: Optional[str] = None
    nonresonance_order: int = Field(8, ge=1)
    chart: ChartSection = ChartSection()
    homoclinics: HomoclinicSection = HomoclinicSection()
    chain: ChainSection = ChainSection()
    energy: EnergySection = EnergySection()
    tolerances: Tolerances = Tolerances()
    checks: Checks = Checks()
    probes: int = Field(5, ge=0)
    seed: int = 0
    out: str = "runs/default"
    jobs: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _check_system(self) -> "RunConfig":
        if (self.system is None) == (self.system_file is None):
            raise ValueError("Give exactly one of 'system' and 'system_file'")
        return self

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        """
        Reads and validates a config file.

        Raises:
            ConfigInvalid: unreadable file, malformed YAML or failed validation.
        """
        path = Path(path)
        try:
            document = yaml.safe_load(path.read_text())
        except (OSError, yaml.YAMLError) as e:
            raise ConfigInvalid(str(e), str(path)) from e
        if not isinstance(document, dict):
            raise ConfigInvalid("Config must be a mapping", str(path))
        try:
            config = cls.model_validate(document)
        except ValidationError as e:
            raise ConfigInvalid(str(e), str(path)) from e
        if config.system_file is not None and not Path(config.system_file).is_absolute():
            resolved = (path.parent / config.system_file).resolve()
            config = config.model_copy(update={"system_file": str(resolved)})
        return config
