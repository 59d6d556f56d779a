"""
🌀 nhicyl.types.homoclinic

Contains the homoclinic orbit record, its section crossings, the
transversality certificate and the covering-space chain data.
"""

from dataclasses import dataclass, field, replace
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from .orbits import OrbitSegment

__all__ = (
    "SectionKind",
    "SectionCrossing",
    "HomoclinicOrbit",
    "H2Certificate",
    "HomoclinicChain",
)


SectionKind = Literal["u1", "v1", "diag_plus", "diag_minus"]
"""
`u1`: {u_1 = sign r} (entry side of the outer map), `v1`: {v_1 = sign r}
(exit side), and the diagonals {u_1 = v_1}, {u_1 = -v_1}.
"""


@dataclass(frozen=True)
class SectionCrossing:
    """A point where an orbit crosses one of the sections at the saddle."""

    kind: SectionKind
    sign: int
    t: float
    w: np.ndarray
    """
    Chart coordinates of the crossing, relative to `lattice_shift`.
    """
    lattice_shift: np.ndarray

    @property
    def hat(self) -> np.ndarray:
        """(u_2..u_n, v_2..v_n)."""
        n = self.w.shape[0] // 2
        return np.concatenate([self.w[1:n], self.w[n + 1 :]])


@dataclass(frozen=True)
class HomoclinicOrbit:
    """
    A zero-energy orbit leaving the saddle along its unstable manifold and
    returning along its stable manifold, truncated at the ball |w| = eps0.

    The segment starts in the lattice cell of the origin and ends in the cell
    `homology_class`.
    """

    segment: OrbitSegment
    homology_class: Tuple[int, ...]
    start_w: Optional[np.ndarray] = None
    """
    Chart coordinates at the start, on the local unstable manifold.
    """
    end_w: Optional[np.ndarray] = None
    """
    Chart coordinates at the end, relative to the end cell.
    """
    entry: Optional[SectionCrossing] = None
    """
    First crossing of {u_1 = +-r}.
    """
    exit: Optional[SectionCrossing] = None
    """
    Last crossing of {v_1 = +-r}, relative to the end cell.
    """
    seed: Optional[Tuple[float, ...]] = None
    mismatch: float = 0.0
    """
    |u| at the end: distance to the local stable manifold.
    """
    transversality_margin: Optional[float] = None
    label: str = ""

    @property
    def n(self) -> int:
        return self.segment.dim // 2

    @property
    def departure_sign(self) -> int:
        return int(self.entry.sign) if self.entry is not None else 0

    @property
    def arrival_sign(self) -> int:
        return int(self.exit.sign) if self.exit is not None else 0

    @property
    def outer_time(self) -> float:
        """Time from the entry crossing to the exit crossing."""
        return float(self.exit.t - self.entry.t)

    def with_margin(self, margin: float) -> "HomoclinicOrbit":
        return replace(self, transversality_margin=float(margin))

    def x_curve(self) -> np.ndarray:
        return self.segment.states[:, : self.n].copy()


class H2Certificate(BaseModel):
    """
    Transversality of the stable and unstable manifolds along a homoclinic
    and the direction in which it leaves and approaches the saddle.
    """

    model_config = ConfigDict(frozen=True)

    homology_class: List[int]
    margin: float
    """
    Smallest singular value of the combined orthonormal bases of
    T W^u and T W^s with the flow direction projected out.
    """
    margin_tolerance: float
    departure_angle: float
    arrival_angle: float
    angle_tolerance: float
    departure_coefficient: float = 1.0
    """
    Relative weight of the weakest unstable direction in the departure data.
    """
    arrival_coefficient: float = 1.0
    failures: List[str] = []

    @property
    def passed(self) -> bool:
        return not self.failures


class HomoclinicChain(BaseModel):
    """
    An ordered concatenation of homoclinic classes together with the covering
    torus T^n_h = R^n / (h_1 Z x ... x h_n Z) in which (l + 1) laps of the
    chain close up without self-intersection.
    """

    model_config = ConfigDict(frozen=True)

    order: List[int]
    """
    Indices of the chain's orbits in the homoclinic library, in order.
    """
    classes: List[List[int]]
    h: List[int]
    ell: int
    separation: float
    junctions: List[List[int]] = []
    """
    Lattice points (mod h) at which the (l + 1) k lifted curves meet.
    """
    labels: List[str] = []

    @property
    def k(self) -> int:
        return len(self.order)

    @property
    def hole_count(self) -> int:
        return (self.ell + 1) * self.k

    @property
    def total_class(self) -> List[int]:
        return np.sum(np.array(self.classes, dtype=int), axis=0).astype(int).tolist()
