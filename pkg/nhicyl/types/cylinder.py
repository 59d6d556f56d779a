"""
🌀 nhicyl.types.cylinder

Contains the assembled cylinder, its mesh, the scaling fits and the reports
of the verification suite.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from .homoclinic import HomoclinicChain, HomoclinicOrbit
from .periodic import CylinderFamily

__all__ = (
    "ScalingFit",
    "FloquetScaling",
    "JoinReport",
    "VertexReport",
    "WindowRates",
    "HyperbolicityReport",
    "MeshInvarianceReport",
    "CheckResult",
    "VerificationReport",
    "CylinderMesh",
    "CylinderAtlas",
    "C1_CAVEAT",
)


C1_CAVEAT = (
    "Join defects below tolerance are consistent with a C^1 cylinder but cannot "
    "distinguish it from a C^0 surface with a kink smaller than the tolerance."
)


class ScalingFit(BaseModel):
    """
    A straight-line fit of a measured quantity against a transform of |E|.
    """

    model_config = ConfigDict(frozen=True)

    quantity: str
    transform: Literal["loglog", "semilog"]
    """
    `loglog`: log y against log x; `semilog`: y against ln(1 / |E|).
    """
    slope: float
    intercept: float
    slope_stderr: float = 0.0
    residual: float
    """
    Sup-norm of the fit residuals.
    """
    e_range: List[float]
    decades: float
    expected: Optional[float] = None
    tolerance: Optional[float] = None
    band: Optional[List[float]] = None
    """
    [inf, sup] of a fitted prefactor over the range, where one is reported.
    """
    band_bound: Optional[float] = None
    """
    Largest admissible width sup - inf of `band`.
    """

    @property
    def band_width(self) -> Optional[float]:
        return None if self.band is None else self.band[1] - self.band[0]

    @property
    def passed(self) -> bool:
        width = self.band_width
        if self.band_bound is not None and (width is None or width >= self.band_bound):
            return False
        if self.expected is None or self.tolerance is None:
            return True
        return abs(self.slope - self.expected) <= self.tolerance * abs(self.expected)


class FloquetScaling(BaseModel):
    model_config = ConfigDict(frozen=True)

    fits: List[ScalingFit]
    sigma_1_deviation: float
    """
    Largest |sigma_1 - 1| over the family.
    """

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.fits) and self.sigma_1_deviation < 0.1


class JoinReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    derivative_plus: List[float]
    """
    Richardson-extrapolated d/dE of the entry anchor from the E > 0 side.
    """
    derivative_minus: List[float]
    hat_u_defect: float
    hat_v_plus: float
    hat_v_minus: float
    alignment_defect: Optional[float] = None
    """
    |pi_u^ dz/dE + A_11^{-1} A_13 pi_1 dz/dE|, relative.
    """
    energy_identity: List[float]
    """
    <grad H, dz/dE> from each side.
    """
    leading_v1: Optional[float] = None
    """
    pi_1 dz/dE times lambda_1 r; close to 1 to leading order.
    """
    tolerance: float
    failures: List[str] = []
    caveat: str = C1_CAVEAT

    @property
    def passed(self) -> bool:
        return not self.failures


class VertexReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    points: int
    slope: Optional[float]
    """
    None when every sampled (u^, v^) vanishes exactly.
    """
    threshold: float
    exact_zero: bool = False
    leaf_slopes: List[float] = []

    @property
    def passed(self) -> bool:
        return self.exact_zero or (self.slope is not None and self.slope >= self.threshold)


class WindowRates(BaseModel):
    """Growth rates fitted over one time window of an orbit."""

    model_config = ConfigDict(frozen=True)

    duration: float
    tangent_rate: float
    tangent_stderr: float
    expanding_rate: float
    expanding_stderr: float
    contracting_rate: float
    contracting_stderr: float


class HyperbolicityReport(BaseModel):
    """
    Growth rates over an inner passage of the smallest-|E| orbit of each
    family and over a window of equal length on a skeleton homoclinic.
    Tangent rates follow the flow direction; normal rates are the growth of
    the orthogonal complement of the cylinder's tangent plane, forward
    (expanding) and backward (contracting).
    """

    model_config = ConfigDict(frozen=True)

    tangent_rate: float
    tangent_stderr: float
    normal_rate: float
    normal_stderr: float
    gap: float
    sigma: float
    contracting_rate: Optional[float] = None
    contracting_stderr: float = 0.0
    exponents: Optional[List[float]] = None
    """
    (lambda_1, lambda_2) the rates are bounded against.
    """
    slack: float = 0.0
    """
    c r, the room allowed around the linear exponents.
    """
    homoclinic_tangent_rate: Optional[float] = None
    homoclinic_tangent_stderr: float = 0.0
    homoclinic_normal_rate: Optional[float] = None
    homoclinic_normal_stderr: float = 0.0
    homoclinic_contracting_rate: Optional[float] = None
    continuity: float = 0.1
    """
    Relative agreement required between homoclinic and periodic normal rates.
    """
    vacuous: bool = False

    @property
    def failures(self) -> List[str]:
        if self.vacuous:
            return []
        out = []
        if self.gap <= 3.0 * self.sigma:
            out.append(f"gap {self.gap:.3g} within 3 sigma ({self.sigma:.2g})")
        if self.exponents is not None:
            lam1, lam2 = self.exponents[0], self.exponents[1]
            ceiling = lam1 + self.slack + 3.0 * self.tangent_stderr
            if abs(self.tangent_rate) > ceiling:
                out.append(f"tangent rate {self.tangent_rate:.4g} outside +-{ceiling:.4g}")
            floor = lam2 - self.slack
            if self.normal_rate < floor - 3.0 * self.normal_stderr:
                out.append(f"normal rate {self.normal_rate:.4g} below {floor:.4g}")
            if (
                self.contracting_rate is not None
                and self.contracting_rate < floor - 3.0 * self.contracting_stderr
            ):
                out.append(f"contracting rate {self.contracting_rate:.4g} below {floor:.4g}")
        if self.homoclinic_tangent_rate is not None and self.homoclinic_normal_rate is not None:
            h_gap = self.homoclinic_normal_rate - abs(self.homoclinic_tangent_rate)
            h_sigma = math.hypot(self.homoclinic_tangent_stderr, self.homoclinic_normal_stderr)
            if h_gap <= 3.0 * h_sigma:
                out.append(f"homoclinic gap {h_gap:.3g} within 3 sigma ({h_sigma:.2g})")
            if abs(self.homoclinic_normal_rate - self.normal_rate) > self.continuity * abs(self.normal_rate):
                out.append(
                    f"homoclinic normal rate {self.homoclinic_normal_rate:.4g} differs from "
                    f"{self.normal_rate:.4g} by more than {self.continuity:.0%}"
                )
        return out

    @property
    def passed(self) -> bool:
        return self.vacuous or not self.failures


class MeshInvarianceReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    epsilon: float
    vertices: int
    max_distance: float
    resolution: float

    @property
    def passed(self) -> bool:
        return self.max_distance < self.resolution


class CheckResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[str] = None
    detail: str = ""


class VerificationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    system: str
    hole_count: int
    h: List[int]
    ell: int
    checks: List[CheckResult]
    fitted_constants: Dict[str, float] = {}
    caveat: str = C1_CAVEAT
    details: Dict[str, Any] = {}

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> List[str]:
        return [c.name for c in self.checks if not c.passed]


# ----------------------------------------------------------------------------
# Atlas
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class CylinderMesh:
    """
    Indexed triangle mesh of the cylinder in the covering space. Vertices
    are phase points; rows of `faces` index into `vertices`.
    """

    vertices: np.ndarray
    energies: np.ndarray
    phases: np.ndarray
    faces: np.ndarray
    resolution: float


@dataclass(frozen=True)
class CylinderAtlas:
    """The singular cylinder: its families, skeleton and covering data."""

    positive: List[CylinderFamily]
    negative: List[CylinderFamily]
    skeleton: List[HomoclinicOrbit]
    chain: HomoclinicChain
    hole_count: int
    junctions: List[List[int]]
    mesh: CylinderMesh
    verification: Optional[VerificationReport] = field(default=None)

    @property
    def families(self) -> List[CylinderFamily]:
        return list(self.positive) + list(self.negative)
