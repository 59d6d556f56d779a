"""
🌀 nhicyl.types.chart

Contains the local chart at the saddle, the graphs of the local invariant
manifolds and the cone parameters used to test dominated splitting.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from ..common.errors import OutOfChart

__all__ = (
    "Branch",
    "ConeFamily",
    "ManifoldGraph",
    "ConeParams",
    "ConeReport",
    "ConeConstants",
    "LocalChart",
    "CHART_SLACK",
)


Branch = Literal["stable", "unstable"]
ConeFamily = Literal["K-_alpha_k", "K-_alpha", "K+_alpha"]

CHART_SLACK = 1.5
"""
Points up to CHART_SLACK * r' are still accepted by the chart maps; the
polynomial shears are entire, only their accuracy degrades.
"""


class ManifoldGraph(BaseModel):
    """
    A local invariant manifold written as a polynomial graph over its own
    directions, v = g(u) for the unstable branch and u = g(v) for the stable
    one, in the linear saddle coordinates (the stable graph is taken after
    the first shear).
    """

    model_config = ConfigDict(frozen=True)

    branch: Branch
    degree: int
    coefficients: List[Tuple[Tuple[int, ...], List[float]]] = []
    """
    (monomial exponent, values of the n graph components) pairs.
    """
    domain_radius: float
    tail_residual: float
    """
    Largest |tangency defect| of the vector field on the straightened graph
    at half the domain radius.
    """


class ConeParams(BaseModel):
    """
    Aperture and split index of a cone in the local tangent space.
    """

    model_config = ConfigDict(frozen=True)

    alpha: float
    k: int = 0
    """
    Split index: K-_{alpha,k} compares u_{k+1..n} against the rest.
    """
    alpha_r: float = 0.0
    """
    Lower end of the admissible range at the section radius, see
    `nhicyl.localframe.admissible_alpha`.
    """

    @model_validator(mode="after")
    def _check_range(self) -> "ConeParams":
        if not (self.alpha_r < self.alpha <= 1.0):
            raise ValueError(
                f"Cone aperture {self.alpha} outside the admissible range "
                f"({self.alpha_r:.3e}, 1]"
            )
        if self.k < 0:
            raise ValueError("Split index must be non-negative")
        return self


class ConeReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: ConeFamily
    alpha: float
    k: int
    samples: int
    times: int
    margin: float
    """
    Smallest normalized distance of an image vector to the cone boundary
    (positive means strictly inside).
    """
    invariant: bool


class ConeConstants(BaseModel):
    """
    The constants c, c' of the inner-passage estimates

        |xi*_u^| >= exp((lambda_2 - c r) t) |xi_u^|,
        |xi*_v^| <= c' r exp(-(lambda_1 - c r) t) t |xi*_u^|,

    fitted once per system and then held fixed while later passages are
    checked against them.
    """

    model_config = ConfigDict(frozen=True)

    c: float
    c_prime: float
    energies: List[float] = []
    """
    Energies of the passages the constants were fitted on.
    """
    passages: int = 0
    margin: float = 1.0


# ----------------------------------------------------------------------------
# Chart
# ----------------------------------------------------------------------------


VectorMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LocalChart:
    """
    Symplectic coordinates w = (u, v) at the saddle in which the local
    unstable manifold is {v = 0} and the local stable manifold is {u = 0}
    up to the certified residual.

    The chart is the linear diagonalization S followed by two shears,
    v -> v - grad F(u) and u -> u - grad G(v), each generated by a polynomial
    of degree <= d + 1.
    """

    n: int
    S: np.ndarray
    """
    Linear symplectic change, z = S w_lin.
    """
    S_inv: np.ndarray
    exponents: np.ndarray
    degree: int
    r_prime: float
    r: float
    delta: float
    residual: float
    """
    Straightening residual at r'.
    """
    unstable_graph: ManifoldGraph
    stable_graph: ManifoldGraph
    F_terms: List[Tuple[Tuple[int, ...], float]]
    G_terms: List[Tuple[Tuple[int, ...], float]]
    residual_profile: List[Tuple[float, float]] = field(default_factory=list)
    grad_F: VectorMap = field(default=None, repr=False)
    hess_F: VectorMap = field(default=None, repr=False)
    grad_G: VectorMap = field(default=None, repr=False)
    hess_G: VectorMap = field(default=None, repr=False)
    cone_constants: Optional[ConeConstants] = None
    """
    Inner-passage constants, once fitted by
    `nhicyl.sectionmaps.fit_cone_constants`.
    """

    def linear_radius(self, z: np.ndarray) -> float:
        """|S^{-1} z| for a reduced phase point."""
        return float(np.linalg.norm(self.S_inv @ np.asarray(z, dtype=float)))

    def _gF(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.grad_F(u), dtype=float).reshape(self.n)

    def _hF(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.hess_F(u), dtype=float).reshape(self.n, self.n)

    def _gG(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(self.grad_G(v), dtype=float).reshape(self.n)

    def _hG(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(self.hess_G(v), dtype=float).reshape(self.n, self.n)

    def to_local(self, z: np.ndarray, check: bool = True) -> np.ndarray:
        n = self.n
        lin = self.S_inv @ np.asarray(z, dtype=float)
        if check:
            norm = float(np.linalg.norm(lin))
            if norm > CHART_SLACK * self.r_prime:
                raise OutOfChart(norm, self.r_prime)
        u, v = lin[:n], lin[n:]
        q = v - self._gF(u)
        p = u - self._gG(q)
        return np.concatenate([p, q])

    def from_local(self, w: np.ndarray, check: bool = True) -> np.ndarray:
        n = self.n
        w = np.asarray(w, dtype=float)
        if check:
            norm = float(np.linalg.norm(w))
            if norm > CHART_SLACK * self.r_prime:
                raise OutOfChart(norm, self.r_prime)
        p, q = w[:n], w[n:]
        u = p + self._gG(q)
        v = q + self._gF(u)
        return self.S @ np.concatenate([u, v])

    def d_to_local(self, z: np.ndarray) -> np.ndarray:
        """Jacobian of `to_local` at a reduced phase point."""
        n = self.n
        lin = self.S_inv @ np.asarray(z, dtype=float)
        u, v = lin[:n], lin[n:]
        q = v - self._gF(u)
        hF, hG = self._hF(u), self._hG(q)
        eye = np.eye(n)
        block = np.block([[eye + hG @ hF, -hG], [-hF, eye]])
        return block @ self.S_inv

    def d_from_local(self, w: np.ndarray) -> np.ndarray:
        """Jacobian of `from_local` at chart coordinates w."""
        n = self.n
        w = np.asarray(w, dtype=float)
        p, q = w[:n], w[n:]
        u = p + self._gG(q)
        hF, hG = self._hF(u), self._hG(q)
        eye = np.eye(n)
        block = np.block([[eye, hG], [hF, eye + hF @ hG]])
        return self.S @ block
