"""
🌀 nhicyl.types.periodic

Contains the shadowing specification, the periodic orbits solved for it,
their families in energy and the reports produced about them.
"""

from dataclasses import dataclass, field, replace
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .orbits import OrbitSegment
from .sections import SectionMapResult

__all__ = (
    "Leg",
    "ShadowingSpec",
    "PeriodicOrbit",
    "CylinderFamily",
    "FloquetReport",
    "ProbeReport",
    "OracleResult",
    "PeriodLawReport",
    "SymmetryReport",
)


class Leg(BaseModel):
    """One section-to-section passage of a shadowing orbit."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["outer", "inner"]
    orbit: int
    """
    Position in the chain of the homoclinic this leg follows (outer legs) or
    has just left (inner legs).
    """
    source_sign: int
    target_sign: int
    shift: List[int]
    """
    Lattice translate accumulated by the leg.
    """


class ShadowingSpec(BaseModel):
    """
    The itinerary a periodic orbit has to follow: the homoclinics of the chain
    in order, outside the ball, joined by inner passages whose exit side is
    fixed by the sign of the energy.
    """

    model_config = ConfigDict(frozen=True)

    order: List[int]
    """
    Library indices of the homoclinics followed, in order.
    """
    classes: List[List[int]]
    departure_signs: List[int]
    arrival_signs: List[int]
    energy_sign: int
    pair: Optional[int] = None
    """
    Library index i of the pair (z_i, s z_i) an E < 0 orbit shadows.
    """
    labels: List[str] = []

    @model_validator(mode="after")
    def _check(self) -> "ShadowingSpec":
        k = len(self.order)
        if k == 0:
            raise ValueError("A shadowing itinerary needs at least one homoclinic")
        if not (len(self.classes) == len(self.departure_signs) == len(self.arrival_signs) == k):
            raise ValueError("Itinerary lists must have one entry per homoclinic")
        if self.energy_sign not in (-1, 1):
            raise ValueError("Energy sign must be +1 or -1")
        if self.energy_sign < 0 and k != 2:
            raise ValueError("A negative-energy itinerary shadows exactly one pair")
        return self

    @property
    def k(self) -> int:
        return len(self.order)

    @property
    def legs(self) -> List[Leg]:
        """Outer and inner legs in alternation, starting on the first {u_1 = +-r}."""
        legs = []
        zero = [0] * len(self.classes[0])
        for j in range(self.k):
            legs.append(
                Leg(
                    kind="outer",
                    orbit=j,
                    source_sign=self.departure_signs[j],
                    target_sign=self.arrival_signs[j],
                    shift=list(self.classes[j]),
                )
            )
            legs.append(
                Leg(
                    kind="inner",
                    orbit=j,
                    source_sign=self.arrival_signs[j],
                    target_sign=self.arrival_signs[j] * self.energy_sign,
                    shift=zero,
                )
            )
        return legs

    @property
    def total_shift(self) -> List[int]:
        return np.sum(np.array(self.classes, dtype=int), axis=0).astype(int).tolist()


@dataclass(frozen=True)
class PeriodicOrbit:
    """
    A periodic orbit on H = E shadowing a chain of homoclinics.

    Anchors alternate between the entry sections {u_1 = +-r} and the exit
    sections {v_1 = +-r}; legs[j] maps anchors[j] to anchors[j + 1]
    (cyclically).
    """

    energy: float
    period: float
    spec: ShadowingSpec
    anchors: np.ndarray
    """
    Chart coordinates of the 2k anchors, shape (2k, 2n).
    """
    legs: List[SectionMapResult] = field(repr=False)
    monodromy: np.ndarray
    """
    Phase-space monodromy at the first anchor.
    """
    return_jacobian: np.ndarray
    """
    Product of the projected leg differentials, (2n - 2) x (2n - 2).
    """
    closure: float
    iterations: int = 0
    itinerary: List[Tuple[int, ...]] = field(default_factory=list)
    segment: Optional[OrbitSegment] = field(default=None, repr=False)
    floquet: Optional["FloquetReport"] = None

    @property
    def n(self) -> int:
        return self.anchors.shape[1] // 2

    @property
    def unknowns(self) -> np.ndarray:
        """Hat coordinates of every anchor, stacked."""
        n = self.n
        return np.concatenate([np.concatenate([a[1:n], a[n + 1 :]]) for a in self.anchors])

    @property
    def entry_anchor(self) -> np.ndarray:
        return self.anchors[0].copy()

    def with_floquet(self, report: "FloquetReport") -> "PeriodicOrbit":
        return replace(self, floquet=report)

    def with_segment(self, segment: OrbitSegment) -> "PeriodicOrbit":
        return replace(self, segment=segment)


@dataclass(frozen=True)
class CylinderFamily:
    """Periodic orbits of one itinerary, sorted by energy."""

    spec: ShadowingSpec
    orbits: List[PeriodicOrbit] = field(default_factory=list)
    label: str = ""

    @property
    def energies(self) -> np.ndarray:
        return np.array([o.energy for o in self.orbits])

    @property
    def sign(self) -> int:
        return self.spec.energy_sign

    def __len__(self) -> int:
        return len(self.orbits)

    def sorted(self) -> "CylinderFamily":
        return replace(self, orbits=sorted(self.orbits, key=lambda o: o.energy))


class FloquetReport(BaseModel):
    """
    Spectrum of the projected return map of a periodic orbit.
    """

    model_config = ConfigDict(frozen=True)

    energy: float
    multipliers: List[float]
    """
    Moduli sigma_2 <= ... <= sigma_n of the expanding multipliers.
    """
    reciprocals: List[float]
    """
    Moduli of the matched contracting multipliers, computed from the
    product of the inverted leg differentials.
    """
    pairing_defect: float
    sigma_1: float
    """
    Multiplier of the free section map nearest to 1 (energy direction).
    """
    eigenvector_ratios: List[float]
    """
    |eta_v^| / |eta_u^| for the expanding eigenvectors.
    """
    leg_products: List[float] = []
    """
    Per-lap product of the dominant leg multipliers, for compound chains.
    """
    product_defect: Optional[float] = None
    factorization_defect: Optional[float] = None
    """
    Relative difference between the monodromy of one full-period integration
    and the ordered product of the leg fundamental matrices.
    """


class ProbeReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    energy: float
    probes: int
    converged: int
    coincident: int
    distinct: List[float] = []
    """
    For each distinct solution, its largest distance to the homoclinic skeleton.
    """
    diverged: int = 0
    flagged: int = 0
    """
    Solutions whose orbit left the chart ball; reported, not counted.
    """
    max_deviation: float = 0.0

    @property
    def unique(self) -> bool:
        return not self.distinct


class OracleResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    energy: float
    resolution: int
    iterations: int
    history: List[float]
    anchor: List[float]
    """
    (u^, v^) of the fixed point on the invariant graph.
    """
    newton_anchor: Optional[List[float]] = None
    agreement: Optional[float] = None


class PeriodLawReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    inner_passages: int
    exponent: float
    offsets: List[float]
    """
    T(E) - (inner_passages / lambda_1) ln(1 / |E|) over the family.
    """
    band: float
    energies: List[float]
    drift: float = 0.0
    """
    |slope| of the offsets against ln(1 / |E|), relative to k / lambda_1.
    """
    band_bound: float = 1.0
    drift_tolerance: float = 0.02

    @property
    def bounded(self) -> bool:
        return bool(
            np.isfinite(self.band)
            and self.band < self.band_bound
            and self.drift <= self.drift_tolerance
        )


class SymmetryReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    energy: float
    reflection_distance: float
    """
    Hausdorff distance between the orbit and its s-image.
    """
    zero_momentum_crossings: int
    crossing_times: List[float] = []
