"""
🌀 nhicyl.model

Contains the definition of classical Hamiltonian systems
H(x, y) = 1/2 <Ay, y> - V(x), the linear analysis of the saddle at the
minimum of V and the certificate of the saddle hypothesis.
"""

import itertools
import logging
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
import scipy.linalg
import scipy.optimize
import yaml

from .common.cache import cached, make_hashable
from .common.errors import (
    HessianNotPositiveDefinite,
    ModelError,
    RepeatedExponent,
    ResonanceDetected,
)
from .types.system import (
    H1Certificate,
    HamiltonianModel,
    MinimumReport,
    QuadraticPotential,
    SaddleSpectrum,
    TorusPotential,
)

logger = logging.getLogger(__name__)

__all__ = [
    "evaluate",
    "evaluate_mp",
    "normalize_potential",
    "build_model",
    "load_system",
    "check_minimum",
    "analyze_saddle",
    "check_H1",
    "kappa_min",
    "pendulum",
    "coupled_pendula",
    "linear_saddle",
]


DISTINCTNESS_TOLERANCE = 1e-8
RESONANCE_TOLERANCE = 1e-9
GRID_CAP = 262_144


# ------------------------------------------------------------------------------
# EVALUATION
# ------------------------------------------------------------------------------


def evaluate(
    model: HamiltonianModel, z: np.ndarray
) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Evaluates the Hamiltonian, its gradient and the Hamiltonian vector field
    X_H = J grad H at a phase point.

    Args:
        model: The system.
        z: Phase point (x, y) of length 2n.

    Returns:
        (H, grad H, X_H)
    """
    z = np.asarray(z, dtype=float)
    return model.hamiltonian(z), model.gradient(z), model.vector_field(z)


def evaluate_mp(model: HamiltonianModel, z: Sequence[float], dps: int = 50) -> Any:
    """
    Evaluates H at `dps` decimal digits with mpmath, independently of the
    numpy code path. Returns an `mpmath.mpf`.
    """
    n = model.n
    with mpmath.workdps(dps):
        x = [mpmath.mpf(float(c)) for c in z[:n]]
        y = [mpmath.mpf(float(c)) for c in z[n:]]
        A = mpmath.matrix([[mpmath.mpf(float(a)) for a in row] for row in model.A])
        Ay = A * mpmath.matrix(y)
        kinetic = sum(y[i] * Ay[i] for i in range(n)) / 2

        potential = model.potential
        if isinstance(potential, TorusPotential):
            value = mpmath.mpf(0)
            for m, a, b in zip(
                potential.modes,
                potential.cos_coefficients,
                potential.sin_coefficients,
            ):
                theta = 2 * mpmath.pi * sum(int(mi) * xi for mi, xi in zip(m, x))
                value += mpmath.mpf(float(a)) * mpmath.cos(theta)
                value += mpmath.mpf(float(b)) * mpmath.sin(theta)
        else:
            B = mpmath.matrix([[mpmath.mpf(float(v)) for v in row] for row in potential.B])
            Bx = B * mpmath.matrix(x)
            value = sum(x[i] * Bx[i] for i in range(n)) / 2
        return +(kinetic - value)


# ------------------------------------------------------------------------------
# CONSTRUCTION
# ------------------------------------------------------------------------------


def _grid_axis(n: int, per_axis: int = 64) -> int:
    while per_axis > 4 and per_axis**n > GRID_CAP:
        per_axis //= 2
    return per_axis


def _grid_values(potential: TorusPotential, per_axis: int) -> Tuple[np.ndarray, np.ndarray]:
    n = potential.n
    axis = np.arange(per_axis) / per_axis
    points = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    theta = 2.0 * np.pi * points @ potential.modes.T
    values = np.cos(theta) @ potential.cos_coefficients + np.sin(theta) @ potential.sin_coefficients
    return points, values


def normalize_potential(potential: TorusPotential, per_axis: int = 64) -> TorusPotential:
    """
    Locates the global minimum x0 of a torus potential (grid search followed by
    a quasi-Newton and Newton refinement) and returns V(x + x0) - V(x0).

    Raises:
        ModelError: if the refined minimum is not a critical point.
    """
    points, values = _grid_values(potential, _grid_axis(potential.n, per_axis))
    start = points[int(np.argmin(values))]

    result = scipy.optimize.minimize(
        potential.value,
        start,
        jac=potential.gradient,
        method="BFGS",
        options={"gtol": 1e-13},
    )
    x0 = np.asarray(result.x, dtype=float)
    for _ in range(8):
        step = np.linalg.lstsq(potential.hessian(x0), potential.gradient(x0), rcond=None)[0]
        x0 = x0 - step
        if np.linalg.norm(step) < 1e-16:
            break
    x0 = x0 - np.floor(x0 + 0.5)

    if np.linalg.norm(potential.gradient(x0)) > 1e-10:
        raise ModelError(f"Could not locate a critical minimum of V (near {x0})")

    if np.max(np.abs(x0)) < 1e-15 and abs(potential.value(x0)) < 1e-15:
        return potential
    logger.info(f"Translating potential minimum {x0} to the origin")
    return potential.shifted(x0)


def build_model(
    A: Union[Sequence[Sequence[float]], np.ndarray, float],
    modes: Optional[Sequence[Tuple[Sequence[int], float, float]]] = None,
    B: Optional[Union[Sequence[Sequence[float]], np.ndarray]] = None,
    name: str = "system",
    normalize: bool = True,
) -> HamiltonianModel:
    """
    Builds a Hamiltonian model from a kinetic matrix and either a mode list
    (torus potential) or a symmetric matrix B (quadratic potential).
    """
    if (modes is None) == (B is None):
        raise ModelError("Provide exactly one of `modes` or `B`")
    if modes is not None:
        potential = TorusPotential.from_modes(modes)
        if normalize:
            potential = normalize_potential(potential)
    else:
        potential = QuadraticPotential(np.asarray(B, dtype=float))
    n = potential.n
    A = np.asarray(A, dtype=float).reshape(n, n) if np.size(A) == n * n else A
    return HamiltonianModel(np.atleast_2d(A), potential, name=name)


def load_system(source: Union[str, Path, Mapping[str, Any]]) -> HamiltonianModel:
    """
    Loads a system definition.

    The definition is a mapping (or a YAML file holding one) with keys
    `n`, `A` (row-major list of n*n entries or nested rows), and either
    `modes` (list of `{m, a, b}`) or `B` (quadratic potential). Optional
    keys: `name`, `nonresonance_order` (read by the caller).
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            data = yaml.safe_load(path.read_text())
        except (OSError, yaml.YAMLError) as e:
            raise ModelError(f"Could not read system definition {path}: {e}") from e
        name = path.stem
    else:
        data = dict(source)
        name = "system"
    if not isinstance(data, Mapping):
        raise ModelError("System definition must be a mapping")

    try:
        n = int(data["n"])
        A = np.asarray(data["A"], dtype=float).reshape(n, n)
    except (KeyError, ValueError, TypeError) as e:
        raise ModelError(f"Invalid kinetic matrix in system definition: {e}") from e

    name = str(data.get("name", name))
    if "modes" in data:
        modes = []
        for entry in data["modes"]:
            m = [int(c) for c in np.atleast_1d(entry["m"])]
            if len(m) != n:
                raise ModelError(f"Mode {m} does not have dimension {n}")
            modes.append((m, float(entry.get("a", 0.0)), float(entry.get("b", 0.0))))
        return build_model(A, modes=modes, name=name)
    if "B" in data:
        B = np.asarray(data["B"], dtype=float).reshape(n, n)
        return build_model(A, B=B, name=name)
    raise ModelError("System definition needs `modes` or `B`")


# ------------------------------------------------------------------------------
# BUNDLED SYSTEMS
# ------------------------------------------------------------------------------


def pendulum() -> HamiltonianModel:
    """A = [1], V = 1 - cos 2 pi x."""
    return build_model([[1.0]], modes=[([0], 1.0, 0.0), ([1], -1.0, 0.0)], name="pendulum")


def coupled_pendula(coupling: float = 0.1) -> HamiltonianModel:
    """
    A = I, V = (1 - cos 2 pi x1) + 2 (1 - cos 2 pi x2)
    + coupling (1 - cos 2 pi (x1 - x2)).
    """
    return build_model(
        np.eye(2),
        modes=[
            ([0, 0], 3.0 + coupling, 0.0),
            ([1, 0], -1.0, 0.0),
            ([0, 1], -2.0, 0.0),
            ([1, -1], -coupling, 0.0),
        ],
        name="coupled_pendula",
    )


def linear_saddle(exponents: Sequence[float], A: Optional[np.ndarray] = None) -> HamiltonianModel:
    """
    Quadratic potential whose saddle has the requested exponents (for A = I
    the Hessian is diag(lambda^2)).
    """
    lam = np.asarray(exponents, dtype=float)
    A = np.eye(lam.size) if A is None else np.asarray(A, dtype=float)
    if np.allclose(A, np.eye(lam.size)):
        B = np.diag(lam**2)
    else:
        # B = A^{-1/2} diag(lambda^2) A^{-1/2} gives A B similar to diag(lambda^2)
        root = scipy.linalg.sqrtm(np.linalg.inv(A)).real
        B = root @ np.diag(lam**2) @ root
    return build_model(A, B=B, name="linear_saddle")


# ------------------------------------------------------------------------------
# MINIMUM & SADDLE ANALYSIS
# ------------------------------------------------------------------------------


def check_minimum(
    model: HamiltonianModel, per_axis: int = 64, threshold: float = 1e-3
) -> MinimumReport:
    """
    Samples the normalized potential on a grid and lists grid points away from
    the origin whose value comes within `threshold` of the minimum. A
    heuristic: it cannot exclude minima between grid points.
    """
    potential = model.potential
    if not isinstance(potential, TorusPotential):
        eigenvalues = np.linalg.eigvalsh(potential.B)
        return MinimumReport(
            grid_points=0,
            minimum_value=0.0,
            threshold=threshold,
            unique=bool(eigenvalues.min() > 0),
            heuristic=False,
        )

    per_axis = _grid_axis(model.n, per_axis)
    points, values = _grid_values(potential, per_axis)
    offsets = points - np.rint(points)
    distance = np.linalg.norm(offsets, axis=1)
    spacing = 1.0 / per_axis
    # points within two grid cells of the origin belong to its own basin
    away = distance > 2.0 * spacing * np.sqrt(model.n)
    competitors = points[away & (values < threshold)]
    logger.debug(
        f"Minimum check on {per_axis}^{model.n} grid: {len(competitors)} competitor(s)"
    )
    return MinimumReport(
        grid_points=int(points.shape[0]),
        minimum_value=float(values.min()),
        competitors=competitors[:16].tolist(),
        threshold=threshold,
        unique=bool(len(competitors) == 0 and values.min() > -1e-12),
    )


def _spectrum_key(model: HamiltonianModel, nonresonance_order: int = 8) -> str:
    return make_hashable((model.A, model.potential, nonresonance_order))


def _smallest_combination(
    exponents: np.ndarray, order: int
) -> Optional[Tuple[Tuple[int, ...], float]]:
    n = exponents.size
    best: Optional[Tuple[Tuple[int, ...], float]] = None
    for k in itertools.product(range(-order, order + 1), repeat=n):
        norm1 = sum(abs(c) for c in k)
        if norm1 == 0 or norm1 > order:
            continue
        # k and -k give the same modulus
        first = next(c for c in k if c != 0)
        if first < 0:
            continue
        value = abs(float(np.dot(k, exponents)))
        if best is None or value < best[1]:
            best = (tuple(int(c) for c in k), value)
    return best


@cached(key_fn=_spectrum_key)
def analyze_saddle(model: HamiltonianModel, nonresonance_order: int = 8) -> SaddleSpectrum:
    """
    Computes and certifies the saddle's exponents and eigenvectors.

    The generalized symmetric problem B q = mu A^{-1} q (B = d^2 V(0)) gives
    A B q = mu q with Q^T A^{-1} Q = I, so the exponents are lambda = sqrt(mu).

    Raises:
        HessianNotPositiveDefinite: d^2 V(0) has a non-positive eigenvalue.
        RepeatedExponent: two exponents closer than 1e-8.
        ResonanceDetected: |<k, lambda>| < 1e-9 for some 0 < |k|_1 <= N.
    """
    n = model.n
    zero = np.zeros(n)
    if np.linalg.norm(model.potential.gradient(zero)) > 1e-10:
        raise ModelError("grad V(0) does not vanish; normalize the potential first")

    B = model.potential.hessian(zero)
    B = 0.5 * (B + B.T)
    hessian_eigs = np.linalg.eigvalsh(B)
    if hessian_eigs.min() <= 0.0:
        raise HessianNotPositiveDefinite(hessian_eigs)

    A_inv = np.linalg.inv(model.A)
    mu, Q = scipy.linalg.eigh(B, 0.5 * (A_inv + A_inv.T))
    exponents = np.sqrt(mu)

    # deterministic orientation: the largest entry of each column is positive
    for i in range(n):
        j = int(np.argmax(np.abs(Q[:, i])))
        if Q[j, i] < 0:
            Q[:, i] *= -1.0

    gaps = np.diff(exponents)
    min_gap = float(gaps.min()) if gaps.size else float("inf")
    if gaps.size and min_gap < DISTINCTNESS_TOLERANCE:
        raise RepeatedExponent(min_gap, DISTINCTNESS_TOLERANCE)

    smallest = _smallest_combination(exponents, nonresonance_order)
    if smallest is not None and smallest[1] < RESONANCE_TOLERANCE:
        raise ResonanceDetected(smallest[0], smallest[1])

    plus = []
    for i, lam in enumerate(exponents):
        xi = np.concatenate(
            [Q[:, i] / np.sqrt(2.0 * lam), A_inv @ Q[:, i] * np.sqrt(lam / 2.0)]
        )
        plus.append(xi / np.linalg.norm(xi))
    plus = np.array(plus)
    minus = plus.copy()
    minus[:, n:] *= -1.0

    linearization = model.jacobian(np.zeros(2 * n))
    spectrum = SaddleSpectrum(
        exponents=exponents,
        Q=Q,
        eigvec_plus=plus,
        eigvec_minus=minus,
        linearization=linearization,
        nonresonance_order=nonresonance_order,
        hessian_pd=True,
        distinctness_margin=DISTINCTNESS_TOLERANCE,
        min_gap=min_gap,
        smallest_combination=smallest,
    )
    logger.info(
        f"Saddle of {model.name}: exponents {np.array2string(exponents, precision=10)}"
    )
    return spectrum


def kappa_min(exponents: Sequence[float]) -> int:
    """Smallest integer kappa with (kappa - 1) lambda_1 > lambda_n."""
    lam = np.asarray(exponents, dtype=float)
    return int(np.floor(lam[-1] / lam[0])) + 2


def check_H1(
    model: HamiltonianModel,
    spectrum: SaddleSpectrum,
    kappa: Optional[int] = None,
    minimum_grid: int = 64,
) -> H1Certificate:
    """
    Assembles the saddle hypothesis ledger. Failures are recorded on the
    certificate, never raised.
    """
    lam = spectrum.exponents
    k_min = kappa_min(lam)
    kappa = k_min if kappa is None else int(kappa)
    minimum = check_minimum(model, per_axis=minimum_grid)

    failures = []
    if not spectrum.hessian_pd:
        failures.append("hessian not positive definite")
    distinct = spectrum.n == 1 or spectrum.min_gap >= spectrum.distinctness_margin
    if not distinct:
        failures.append("exponents not distinct")
    nonresonant = (
        spectrum.smallest_combination is None
        or spectrum.smallest_combination[1] >= RESONANCE_TOLERANCE
    )
    if not nonresonant:
        failures.append(f"resonance at k = {spectrum.smallest_combination[0]}")
    if (kappa - 1) * lam[0] <= lam[-1]:
        failures.append(f"kappa = {kappa} violates (kappa - 1) lambda_1 > lambda_n")
    if not minimum.unique:
        failures.append("minimum of V not unique on the sampling grid")

    return H1Certificate(
        exponents=lam.tolist(),
        kappa_min=k_min,
        kappa=kappa,
        hessian_pd=spectrum.hessian_pd,
        distinct=distinct,
        min_gap=spectrum.min_gap if np.isfinite(spectrum.min_gap) else 0.0,
        nonresonance_order=spectrum.nonresonance_order,
        nonresonant=nonresonant,
        minimum=minimum,
        failures=failures,
    )
