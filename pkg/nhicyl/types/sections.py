"""
🌀 nhicyl.types.sections

Contains the section descriptors and the results of the outer and inner
section maps.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .homoclinic import SectionKind
from .orbits import OrbitSegment

__all__ = (
    "SectionSpec",
    "SectionMapResult",
    "ExpansionReport",
    "SplitInnerResult",
)


class SectionSpec(BaseModel):
    """
    A section at the saddle together with the window of anchors used on it.
    """

    model_config = ConfigDict(frozen=True)

    kind: SectionKind
    sign: int = 1
    r: float
    energy: Optional[float] = None
    """
    Energy level the anchors are constrained to, or None for the whole section.
    """
    delta: float = 0.0
    """
    Half width of the anchor window |u^ - u^-| <= delta, |v^ - v^-| <= delta.
    """
    r_prime: Optional[float] = None

    @model_validator(mode="after")
    def _check_radii(self) -> "SectionSpec":
        if self.sign not in (-1, 1):
            raise ValueError("Section sign must be +1 or -1")
        if self.r <= 0.0:
            raise ValueError("Section radius must be positive")
        if self.r_prime is not None and not self.r < self.r_prime:
            raise ValueError(f"Section radius {self.r} must be below r' = {self.r_prime}")
        if self.delta < 0.0 or self.delta >= self.r:
            raise ValueError(f"Window {self.delta} must lie in [0, r)")
        return self

    @property
    def level(self) -> float:
        if self.kind in ("u1", "v1"):
            return self.sign * self.r
        return 0.0


@dataclass(frozen=True)
class SectionMapResult:
    """
    One passage from a source section to a target section.
    """

    source: SectionSpec
    target: SectionSpec
    start_w: np.ndarray
    image_w: np.ndarray
    """
    Chart coordinates of the image, relative to `lattice_shift`.
    """
    transit_time: float
    jacobian: np.ndarray
    """
    Chart-coordinate differential of the flow map, corrected so that every
    column is tangent to the target section.
    """
    projected: np.ndarray
    """
    (2n - 2) x (2n - 2) differential on (u^, v^) restricted to H = E.
    """
    free: np.ndarray
    """
    (2n - 1) x (2n - 1) differential between the sections without the energy
    restriction, in the coordinates left free by each section.
    """
    fundamental: np.ndarray
    """
    Phase-space fundamental matrix Psi(t_z) of the passage.
    """
    energy: float
    lattice_shift: np.ndarray
    segment: Optional[OrbitSegment] = None
    tube_distance: float = 0.0
    transit_deviation: Optional[float] = None
    """
    |t - tau_0| / tau_0 against the homoclinic's outer time; outer maps only.
    """

    @property
    def image_hat(self) -> np.ndarray:
        n = self.image_w.shape[0] // 2
        return np.concatenate([self.image_w[1:n], self.image_w[n + 1 :]])

    @property
    def start_hat(self) -> np.ndarray:
        n = self.start_w.shape[0] // 2
        return np.concatenate([self.start_w[1:n], self.start_w[n + 1 :]])

    @property
    def symplectic_defect(self) -> float:
        m = self.projected
        if m.size == 0:
            return 0.0
        k = m.shape[0] // 2
        J = np.block([[np.zeros((k, k)), np.eye(k)], [-np.eye(k), np.zeros((k, k))]])
        return float(np.max(np.abs(m.T @ J @ m - J)))


class ExpansionReport(BaseModel):
    """
    Measured expansion of u^ and contraction of v^ by one inner passage.
    """

    model_config = ConfigDict(frozen=True)

    transit_time: float
    r: float
    samples: int
    c: float
    """
    The constant c checked against, frozen for the system.
    """
    c_prime: float
    measured_c: Optional[float] = None
    """
    Smallest c with |xi*_u^| >= exp((lambda_2 - c r) t_z) |xi_u^| on this passage's samples.
    """
    measured_c_prime: Optional[float] = None
    """
    Smallest c' with |xi*_v^| <= c' r exp(-(lambda_1 - c r) t_z) t_z |xi*_u^|.
    """
    expansion: float
    """
    Smallest ratio |xi*_u^| / |xi_u^| over the samples.
    """
    violations: List[str] = []

    @property
    def passed(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class SplitInnerResult:
    """An inner passage factored at the diagonal section."""

    first: SectionMapResult
    second: SectionMapResult
    whole: SectionMapResult
    composition_defect: float
    """
    Relative difference between the product of the two halves' free
    differentials and the whole passage's.
    """
