"""
🌀 nhicyl.types.system

Contains the types describing a classical Hamiltonian system
H(x, y) = 1/2 <Ay, y> - V(x) and the linear data of its saddle at the
origin.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..common.errors import ModelError

__all__ = (
    "TorusPotential",
    "QuadraticPotential",
    "Potential",
    "HamiltonianModel",
    "SaddleSpectrum",
    "MinimumReport",
    "H1Certificate",
)


TWO_PI = 2.0 * np.pi


# ----------------------------------------------------------------------------
# Potentials
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class TorusPotential:
    """
    A finite trigonometric polynomial on the torus,

        V(x) = sum_m a_m cos(2 pi <m, x>) + b_m sin(2 pi <m, x>).

    The mode with m = 0 carries the constant term (its sine coefficient is
    ignored). Evaluation is vectorized over the mode table.
    """

    modes: np.ndarray
    """
    Integer mode vectors, shape (K, n).
    """
    cos_coefficients: np.ndarray
    """
    Cosine coefficients a_m, shape (K,).
    """
    sin_coefficients: np.ndarray
    """
    Sine coefficients b_m, shape (K,).
    """

    periodic: bool = field(default=True, init=False)

    def __post_init__(self):
        modes = np.atleast_2d(np.asarray(self.modes, dtype=np.int64))
        a = np.asarray(self.cos_coefficients, dtype=float).reshape(-1)
        b = np.asarray(self.sin_coefficients, dtype=float).reshape(-1)
        if not (modes.shape[0] == a.shape[0] == b.shape[0]):
            raise ModelError(
                f"Mode table has {modes.shape[0]} rows but {a.shape[0]} cosine "
                f"and {b.shape[0]} sine coefficients"
            )
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "cos_coefficients", a)
        object.__setattr__(self, "sin_coefficients", b)

    @classmethod
    def from_modes(
        cls, modes: Sequence[Tuple[Sequence[int], float, float]]
    ) -> "TorusPotential":
        """Builds a potential from `(m, a_m, b_m)` triples."""
        if not modes:
            raise ModelError("A torus potential needs at least one mode")
        m = np.array([np.atleast_1d(mode[0]) for mode in modes], dtype=np.int64)
        a = np.array([float(mode[1]) for mode in modes])
        b = np.array([float(mode[2]) for mode in modes])
        return cls(m, a, b)

    @property
    def n(self) -> int:
        return int(self.modes.shape[1])

    def _phases(self, x: np.ndarray) -> np.ndarray:
        return TWO_PI * (self.modes @ np.asarray(x, dtype=float))

    def value(self, x: np.ndarray) -> float:
        theta = self._phases(x)
        return float(
            self.cos_coefficients @ np.cos(theta)
            + self.sin_coefficients @ np.sin(theta)
        )

    def gradient(self, x: np.ndarray) -> np.ndarray:
        theta = self._phases(x)
        weights = -self.cos_coefficients * np.sin(theta) + self.sin_coefficients * np.cos(
            theta
        )
        return TWO_PI * (self.modes.T @ weights)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        theta = self._phases(x)
        weights = -self.cos_coefficients * np.cos(theta) - self.sin_coefficients * np.sin(
            theta
        )
        return TWO_PI**2 * (self.modes.T * weights) @ self.modes

    def shifted(self, x0: np.ndarray) -> "TorusPotential":
        """
        Returns W(x) = V(x + x0) - V(x0), again as a trigonometric polynomial.
        """
        phi = self._phases(x0)
        a = self.cos_coefficients * np.cos(phi) + self.sin_coefficients * np.sin(phi)
        b = self.sin_coefficients * np.cos(phi) - self.cos_coefficients * np.sin(phi)
        v0 = self.value(x0)

        modes = self.modes
        constant = np.flatnonzero(~modes.any(axis=1))
        if constant.size:
            a = a.copy()
            b = b.copy()
            a[constant[0]] -= v0
            b[constant] = 0.0
        else:
            modes = np.vstack([np.zeros((1, self.n), dtype=np.int64), modes])
            a = np.concatenate([[-v0], a])
            b = np.concatenate([[0.0], b])
        return TorusPotential(modes, a, b)


@dataclass(frozen=True)
class QuadraticPotential:
    """
    V(x) = 1/2 <Bx, x>. Not periodic; its saddle is exactly linear, which
    makes it the closed-form reference system for charts and section maps.
    """

    B: np.ndarray

    periodic: bool = field(default=False, init=False)

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if B.shape[0] != B.shape[1] or not np.allclose(B, B.T, atol=1e-14):
            raise ModelError("Quadratic potential needs a symmetric square matrix")
        object.__setattr__(self, "B", 0.5 * (B + B.T))

    @property
    def n(self) -> int:
        return int(self.B.shape[0])

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.B @ x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.B @ np.asarray(x, dtype=float)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        return self.B.copy()


Potential = Union[TorusPotential, QuadraticPotential]


# ----------------------------------------------------------------------------
# Model
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class HamiltonianModel:
    """
    H(x, y) = 1/2 <Ay, y> - V(x) on T^n x R^n (or R^n x R^n for a quadratic
    potential). Phase points are flat arrays z = (x, y) of length 2n.
    """

    A: np.ndarray
    """
    Kinetic matrix, symmetric positive definite.
    """
    potential: Potential
    """
    The potential V, normalized so that its minimum sits at the origin.
    """
    name: str = "system"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape != (self.potential.n, self.potential.n):
            raise ModelError(
                f"Kinetic matrix shape {A.shape} does not match dimension "
                f"{self.potential.n}"
            )
        if not np.allclose(A, A.T, atol=1e-14):
            raise ModelError("Kinetic matrix A must be symmetric")
        A = 0.5 * (A + A.T)
        eigenvalues = np.linalg.eigvalsh(A)
        if eigenvalues.min() <= 0.0:
            raise ModelError(
                f"Kinetic matrix A must be positive definite (eigenvalues {eigenvalues})"
            )
        object.__setattr__(self, "A", A)

    @property
    def n(self) -> int:
        return self.potential.n

    @property
    def periodic(self) -> bool:
        return self.potential.periodic

    def split(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=float)
        return z[: self.n], z[self.n :]

    def hamiltonian(self, z: np.ndarray) -> float:
        x, y = self.split(z)
        return float(0.5 * y @ self.A @ y - self.potential.value(x))

    def gradient(self, z: np.ndarray) -> np.ndarray:
        x, y = self.split(z)
        return np.concatenate([-self.potential.gradient(x), self.A @ y])

    def vector_field(self, z: np.ndarray) -> np.ndarray:
        x, y = self.split(z)
        return np.concatenate([self.A @ y, self.potential.gradient(x)])

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        """D X_H(z) = J diag(-d^2 V(x), A)."""
        n = self.n
        x, _ = self.split(z)
        out = np.zeros((2 * n, 2 * n))
        out[:n, n:] = self.A
        out[n:, :n] = self.potential.hessian(x)
        return out

    def reduce(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Splits a lifted phase point into its representative near the origin
        and the integer lattice translate it was taken from.
        """
        z = np.asarray(z, dtype=float)
        if not self.periodic:
            return z.copy(), np.zeros(self.n, dtype=np.int64)
        shift = np.rint(z[: self.n])
        reduced = z.copy()
        reduced[: self.n] -= shift
        return reduced, shift.astype(np.int64)

    def reflect(self, z: np.ndarray) -> np.ndarray:
        """The involution s(x, y) = (x, -y)."""
        z = np.array(z, dtype=float)
        z[self.n :] *= -1.0
        return z


# ----------------------------------------------------------------------------
# Saddle data
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SaddleSpectrum:
    """
    Certified linear data of the saddle: ordered exponents and the
    eigenvectors of J diag(-d^2 V(0), A).
    """

    exponents: np.ndarray
    """
    lambda_1 < ... < lambda_n, all positive.
    """
    Q: np.ndarray
    """
    Columns q_i with Q^T A^{-1} Q = I and Q^T B Q = diag(lambda^2), B = d^2 V(0).
    """
    eigvec_plus: np.ndarray
    """
    Rows Xi_i^+ = (Xi_{i,x}, Xi_{i,y}), unit norm, eigenvalue +lambda_i.
    """
    eigvec_minus: np.ndarray
    """
    Rows Xi_i^- = (Xi_{i,x}, -Xi_{i,y}), eigenvalue -lambda_i.
    """
    linearization: np.ndarray
    """
    M = J diag(-d^2 V(0), A).
    """
    nonresonance_order: int
    hessian_pd: bool
    distinctness_margin: float
    min_gap: float
    smallest_combination: Optional[Tuple[Tuple[int, ...], float]] = None
    """
    The integer vector k with the smallest |<k, lambda>| found while certifying
    nonresonance, and that value.
    """

    @property
    def n(self) -> int:
        return int(self.exponents.shape[0])

    @property
    def max_residual(self) -> float:
        residuals = [
            np.linalg.norm(self.linearization @ xi - lam * xi)
            for lam, xi in zip(self.exponents, self.eigvec_plus)
        ] + [
            np.linalg.norm(self.linearization @ xi + lam * xi)
            for lam, xi in zip(self.exponents, self.eigvec_minus)
        ]
        return float(max(residuals))


class MinimumReport(BaseModel):
    """
    Heuristic uniqueness check of the potential minimum on a grid.
    """

    model_config = ConfigDict(frozen=True)

    grid_points: int
    """
    Number of grid points the potential was sampled at.
    """
    minimum_value: float
    """
    Smallest sampled value of the normalized potential (0 at the origin).
    """
    competitors: List[List[float]] = []
    """
    Grid points away from the origin whose potential comes within the
    threshold of the minimum.
    """
    threshold: float
    unique: bool
    heuristic: bool = True


class H1Certificate(BaseModel):
    """
    Pass/fail ledger of the saddle hypothesis: positive definite Hessian,
    distinct exponents, finite-order nonresonance, smoothness order and
    uniqueness of the minimum.
    """

    model_config = ConfigDict(frozen=True)

    exponents: List[float]
    kappa_min: int
    """
    Smallest integer kappa with (kappa - 1) lambda_1 > lambda_n.
    """
    kappa: int
    """
    The smoothness order being certified (defaults to `kappa_min`).
    """
    smoothness_automatic: bool = True
    """
    Trigonometric polynomials are C-infinity, so C^(2 kappa + 1) always holds.
    """
    hessian_pd: bool
    distinct: bool
    min_gap: float
    nonresonance_order: int
    nonresonant: bool
    minimum: Optional[MinimumReport] = None
    failures: List[str] = []

    @property
    def passed(self) -> bool:
        return not self.failures
