"""
🌀 nhicyl.continuation

Contains the multiple-shooting solver for periodic orbits that shadow a
chain of homoclinics, its continuation in energy, the Floquet analysis of
the solutions and the checks run against them (uniqueness probes, the
graph-transform oracle, the symmetry of E < 0 orbits and the period law).
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, minimize_scalar
from scipy.spatial import cKDTree
from scipy.special import ellipk
from scipy.stats import linregress

from .common.errors import (
    ContinuationError,
    ContinuationStalled,
    ContractionFailed,
    DefectiveSpectrum,
    EnergyOutOfRange,
    FlowError,
    InconsistentChain,
    LeftTube,
    NewtonDiverged,
    NotInInnerDomain,
    SectionMapError,
    TransitTimeDeviation,
    WrongEnergySign,
    WrongShadowingOrder,
)
from .flow import integrate_variational, locate_events
from .sectionmaps import embed_anchor, inner_map, outer_map, project_anchor
from .types.chart import LocalChart
from .types.homoclinic import HomoclinicChain, HomoclinicOrbit
from .types.orbits import EventSpec, OrbitSegment
from .types.periodic import (
    CylinderFamily,
    FloquetReport,
    OracleResult,
    PeriodicOrbit,
    PeriodLawReport,
    ProbeReport,
    ShadowingSpec,
    SymmetryReport,
)
from .types.sections import SectionMapResult
from .types.system import HamiltonianModel

logger = logging.getLogger(__name__)

__all__ = [
    "positive_spec",
    "negative_spec",
    "partner_index",
    "energy_grid",
    "initial_guess",
    "return_map",
    "solve_periodic",
    "rebuild_periodic",
    "floquet_analysis",
    "continue_family",
    "uniqueness_probe",
    "graph_transform_oracle",
    "reflect_periodic",
    "symmetric_crossings",
    "period_law",
    "pendulum_period",
]


MAX_NEWTON_STEPS = 30
BACKTRACK_STEPS = 10
MIN_RELATIVE_STEP = 1e-3
COINCIDENCE_TOLERANCE = 1e-7
SYMMETRY_SAMPLES = 400


# ------------------------------------------------------------------------------
# ITINERARIES
# ------------------------------------------------------------------------------


def _check_consistent(spec: ShadowingSpec) -> ShadowingSpec:
    """Every inner passage must land on the side the next homoclinic leaves from."""
    k = spec.k
    for j in range(k):
        landing = spec.arrival_signs[j] * spec.energy_sign
        leaving = spec.departure_signs[(j + 1) % k]
        if landing != leaving:
            raise InconsistentChain(
                f"Inner passage after {spec.labels[j] if spec.labels else j} lands on "
                f"u_1 = {landing:+d} r but the next homoclinic leaves from {leaving:+d} r"
            )
    return spec


def _orbit_spec(
    library: Sequence[HomoclinicOrbit],
    order: Sequence[int],
    energy_sign: int,
    pair: Optional[int] = None,
) -> ShadowingSpec:
    orbits = [library[i] for i in order]
    spec = ShadowingSpec(
        order=list(order),
        classes=[list(o.homology_class) for o in orbits],
        departure_signs=[o.departure_sign for o in orbits],
        arrival_signs=[o.arrival_sign for o in orbits],
        energy_sign=energy_sign,
        pair=pair,
        labels=[o.label for o in orbits],
    )
    return _check_consistent(spec)


def positive_spec(library: Sequence[HomoclinicOrbit], chain: HomoclinicChain) -> ShadowingSpec:
    """The E > 0 itinerary following a chain once around."""
    return _orbit_spec(library, chain.order, 1)


def negative_spec(library: Sequence[HomoclinicOrbit], i: int, j: int) -> ShadowingSpec:
    """The E < 0 itinerary of the pair (z_i, s z_i), with library[j] the partner."""
    return _orbit_spec(library, [i, j], -1, pair=i)


def partner_index(library: Sequence[HomoclinicOrbit], i: int) -> int:
    """
    Library index of the s-partner of library[i]: negated class, entry near
    the reflected exit.

    Raises:
        InconsistentChain: no orbit of the negated class is in the library.
    """
    orbit = library[i]
    n = orbit.n
    expected = tuple(-int(c) for c in orbit.homology_class)
    exit_hat = orbit.exit.hat
    # s(u, v) = (-v, -u)
    target = np.concatenate([-exit_hat[n - 1 :], -exit_hat[: n - 1]])
    best, best_distance = None, np.inf
    for j, other in enumerate(library):
        if tuple(other.homology_class) != expected or other.entry is None:
            continue
        distance = float(np.linalg.norm(other.entry.hat - target)) if n > 1 else 0.0
        if distance < best_distance:
            best, best_distance = j, distance
    if best is None:
        raise InconsistentChain(f"No partner of class {list(expected)} for {orbit.label}")
    return best


def energy_grid(e0: float, e_min: float, ratio: float, sign: int = 1) -> np.ndarray:
    """sign * e0 * ratio^j for every j with e0 * ratio^j >= e_min."""
    if e0 < e_min:
        return np.zeros(0)
    count = int(math.floor(math.log(e_min / e0) / math.log(ratio) + 1e-9)) + 1
    return sign * e0 * ratio ** np.arange(count)


def _anchor_sections(spec: ShadowingSpec) -> List[Tuple[str, int]]:
    sections = []
    for j in range(spec.k):
        sections.append(("u1", spec.departure_signs[j]))
        sections.append(("v1", spec.arrival_signs[j]))
    return sections


def initial_guess(library: Sequence[HomoclinicOrbit], spec: ShadowingSpec) -> np.ndarray:
    """Hat coordinates of the homoclinics' section crossings, shape (2k, 2n - 2)."""
    rows = []
    for i in spec.order:
        rows.append(library[i].entry.hat)
        rows.append(library[i].exit.hat)
    return np.array(rows)


def _embed_all(
    chart: LocalChart,
    model: HamiltonianModel,
    spec: ShadowingSpec,
    hats: np.ndarray,
    energy: float,
) -> np.ndarray:
    return np.array(
        [
            embed_anchor(chart, model, kind, sign, chart.r, hat, energy)
            for (kind, sign), hat in zip(_anchor_sections(spec), hats)
        ]
    )


# ------------------------------------------------------------------------------
# LEGS
# ------------------------------------------------------------------------------


def _run_leg(
    chart: LocalChart,
    model: HamiltonianModel,
    spec: ShadowingSpec,
    library: Sequence[HomoclinicOrbit],
    index: int,
    w: np.ndarray,
    tol: float,
    energy_tol: float,
    tube_factor: float,
) -> SectionMapResult:
    j = index // 2
    if index % 2 == 0:
        return outer_map(
            chart, model, w, library[spec.order[j]],
            tol=tol, energy_tol=energy_tol, tube_factor=tube_factor,
        )
    return inner_map(chart, model, w, spec.energy_sign, tol=tol, energy_tol=energy_tol)


def _evaluate_legs(
    chart: LocalChart,
    model: HamiltonianModel,
    spec: ShadowingSpec,
    library: Sequence[HomoclinicOrbit],
    anchors: np.ndarray,
    tol: float,
    energy_tol: float,
    tube_factor: float,
) -> List[SectionMapResult]:
    return [
        _run_leg(chart, model, spec, library, index, w, tol, energy_tol, tube_factor)
        for index, w in enumerate(anchors)
    ]


def _residual(legs: List[SectionMapResult], hats: np.ndarray) -> np.ndarray:
    count = len(legs)
    return np.concatenate(
        [legs[l].image_hat - hats[(l + 1) % count] for l in range(count)]
    )


def _shooting_matrix(legs: List[SectionMapResult], m: int) -> np.ndarray:
    count = len(legs)
    jac = np.zeros((count * m, count * m))
    for l, leg in enumerate(legs):
        nxt = (l + 1) % count
        jac[l * m : (l + 1) * m, l * m : (l + 1) * m] += leg.projected
        jac[l * m : (l + 1) * m, nxt * m : (nxt + 1) * m] -= np.eye(m)
    return jac


def return_map(
    chart: LocalChart,
    model: HamiltonianModel,
    spec: ShadowingSpec,
    library: Sequence[HomoclinicOrbit],
    hat: Sequence[float],
    energy: float,
    tol: float = 1e-12,
    energy_tol: float = 1e-9,
    tube_factor: float = 10.0,
) -> np.ndarray:
    """
    Follows the whole itinerary once from the first entry anchor and returns
    the hat coordinates of the point it comes back to.
    """
    kind, sign = _anchor_sections(spec)[0]
    w = embed_anchor(chart, model, kind, sign, chart.r, hat, energy)
    for index in range(2 * spec.k):
        w = _run_leg(chart, model, spec, library, index, w, tol, energy_tol, tube_factor).image_w
    return project_anchor(w)


def _stitch(legs: List[SectionMapResult], energy: float) -> OrbitSegment:
    """The legs joined into one lifted trajectory."""
    offsets = np.concatenate([[0.0], np.cumsum([leg.transit_time for leg in legs])])
    n = legs[0].start_w.shape[0] // 2
    shifts = np.zeros((len(legs), n))
    for l in range(1, len(legs)):
        shifts[l] = shifts[l - 1] + legs[l - 1].lattice_shift

    times, states = [], []
    for l, leg in enumerate(legs):
        seg = leg.segment
        first = 0 if l == 0 else 1
        times.append(seg.times[first:] + offsets[l])
        part = seg.states[first:].copy()
        part[:, :n] += shifts[l]
        states.append(part)

    def dense(t: float) -> np.ndarray:
        l = int(np.clip(np.searchsorted(offsets, t, side="right") - 1, 0, len(legs) - 1))
        z = np.array(legs[l].segment(t - offsets[l]), dtype=float)
        z[:n] += shifts[l]
        return z

    return OrbitSegment(
        times=np.concatenate(times),
        states=np.vstack(states),
        energy=energy,
        dense=dense,
    )


def _itinerary(legs: List[SectionMapResult]) -> List[Tuple[int, ...]]:
    return [(int(leg.target.sign), *[int(s) for s in leg.lattice_shift]) for leg in legs]


def _assemble(
    chart: LocalChart,
    spec: ShadowingSpec,
    legs: List[SectionMapResult],
    anchors: np.ndarray,
    energy: float,
    iterations: int,
) -> PeriodicOrbit:
    expected = [(leg.target_sign, *leg.shift) for leg in spec.legs]
    found = _itinerary(legs)
    if found != expected:
        raise WrongShadowingOrder(expected, found)

    count = len(legs)
    closure = max(
        float(
            np.linalg.norm(
                chart.from_local(legs[l].image_w, check=False)
                - chart.from_local(anchors[(l + 1) % count], check=False)
            )
        )
        for l in range(count)
    )
    n2 = anchors.shape[1]
    monodromy = np.eye(n2)
    return_jacobian = np.eye(n2 - 2)
    for leg in legs:
        monodromy = leg.fundamental @ monodromy
        return_jacobian = leg.projected @ return_jacobian

    return PeriodicOrbit(
        energy=float(energy),
        period=float(sum(leg.transit_time for leg in legs)),
        spec=spec,
        anchors=np.array(anchors),
        legs=legs,
        monodromy=monodromy,
        return_jacobian=return_jacobian,
        closure=closure,
        iterations=iterations,
        itinerary=found,
        segment=_stitch(legs, energy),
    )


# ------------------------------------------------------------------------------
# SOLVER
# ------------------------------------------------------------------------------


def _check_energy(spec: ShadowingSpec, energy: float, e0: Optional[float]) -> None:
    bound = e0 if e0 is not None else np.inf
    if energy == 0.0 or abs(energy) > bound or np.sign(energy) != spec.energy_sign:
        raise EnergyOutOfRange(energy, bound)


def solve_periodic(
    model: HamiltonianModel,
    chart: LocalChart,
    spec: ShadowingSpec,
    library: Sequence[HomoclinicOrbit],
    energy: float,
    guess: Optional[np.ndarray] = None,
    e0: Optional[float] = None,
    tol: float = 1e-12,
    energy_tol: float = 1e-9,
    newton_tol: float = 1e-10,
    tube_factor: float = 10.0,
    max_iter: int = MAX_NEWTON_STEPS,
) -> PeriodicOrbit:
    """
    Multiple-shooting Newton on the hat coordinates of the 2k section
    anchors. Each anchor is kept on its section and on H = E; leg l must
    carry anchor l onto anchor l + 1 (cyclically).

    Args:
        guess: Hat coordinates (2k, 2n - 2); the homoclinic crossings when omitted.

    Raises:
        EnergyOutOfRange: E = 0, |E| > e0, or sign(E) differs from the spec's.
        NewtonDiverged: no convergence within `max_iter` damped steps.
        WrongShadowingOrder: the solution follows another itinerary.
        SectionMapError: a leg could not be evaluated at the initial guess.
    """
    _check_energy(spec, energy, e0)
    hats = np.array(initial_guess(library, spec) if guess is None else guess, dtype=float)
    m = hats.shape[1]

    def evaluate(h: np.ndarray):
        anchors = _embed_all(chart, model, spec, h, energy)
        legs = _evaluate_legs(chart, model, spec, library, anchors, tol, energy_tol, tube_factor)
        return anchors, legs, _residual(legs, h)

    anchors, legs, residual = evaluate(hats)
    norm = float(np.max(np.abs(residual))) if residual.size else 0.0
    iterations = 0
    while norm > newton_tol:
        if iterations >= max_iter:
            raise NewtonDiverged(energy, norm, iterations)
        iterations += 1
        step = np.linalg.lstsq(_shooting_matrix(legs, m), -residual, rcond=None)[0]
        step = step.reshape(hats.shape)

        alpha = 1.0
        for _ in range(BACKTRACK_STEPS):
            trial = hats + alpha * step
            try:
                t_anchors, t_legs, t_residual = evaluate(trial)
            except (SectionMapError, FlowError) as e:
                logger.debug(f"Newton step {iterations} rejected at alpha = {alpha:g}: {e}")
                alpha *= 0.5
                continue
            t_norm = float(np.max(np.abs(t_residual)))
            if t_norm < norm:
                hats, anchors, legs, residual, norm = trial, t_anchors, t_legs, t_residual, t_norm
                break
            alpha *= 0.5
        else:
            raise NewtonDiverged(energy, norm, iterations)
        logger.debug(f"Newton {iterations}: residual {norm:.3e} (alpha {alpha:g})")

    orbit = _assemble(chart, spec, legs, anchors, energy, iterations)
    logger.info(
        f"Periodic orbit at E = {energy:.3e}: T = {orbit.period:.6g}, closure "
        f"{orbit.closure:.1e}, {iterations} Newton steps"
    )
    return orbit


def rebuild_periodic(
    model: HamiltonianModel,
    chart: LocalChart,
    spec: ShadowingSpec,
    library: Sequence[HomoclinicOrbit],
    energy: float,
    anchors: np.ndarray,
    tol: float = 1e-12,
    energy_tol: float = 1e-9,
    tube_factor: float = 10.0,
) -> PeriodicOrbit:
    """Re-evaluates the legs of stored anchors without Newton steps."""
    anchors = np.asarray(anchors, dtype=float)
    legs = _evaluate_legs(chart, model, spec, library, anchors, tol, energy_tol, tube_factor)
    return _assemble(chart, spec, legs, anchors, energy, 0)


# ------------------------------------------------------------------------------
# FLOQUET
# ------------------------------------------------------------------------------


def _dominant(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(matrix)))) if matrix.size else 1.0


def _pair(multipliers: np.ndarray, reciprocals: np.ndarray) -> Tuple[np.ndarray, float]:
    """Greedy matching of each multiplier with the reciprocal minimizing |sigma tau - 1|."""
    remaining = list(range(len(reciprocals)))
    matched, defect = [], 0.0
    for sigma in multipliers:
        costs = [abs(sigma * reciprocals[j] - 1.0) for j in remaining]
        best = remaining.pop(int(np.argmin(costs)))
        matched.append(reciprocals[best])
        defect = max(defect, min(costs))
    return np.array(matched), defect


def floquet_analysis(
    orbit: PeriodicOrbit,
    pairing_tol: float = 1e-4,
    model: Optional[HamiltonianModel] = None,
    chart: Optional[LocalChart] = None,
    tol: float = 1e-12,
) -> FloquetReport:
    """
    Sorts the spectrum of the projected return map into (sigma, 1/sigma)
    pairs. The contracting multipliers come from the product of the inverted
    leg differentials, which stays accurate where the direct eigenvalues
    would drown next to the expanding ones.

    With `model` and `chart` the monodromy is also compared with one
    full-period variational integration.

    Raises:
        DefectiveSpectrum: the pairing defect exceeds `pairing_tol`.
    """
    n = orbit.n
    m = n - 1
    M = orbit.return_jacobian

    free = np.eye(2 * n - 1)
    for leg in orbit.legs:
        free = leg.free @ free
    free_eigs = np.linalg.eigvals(free)
    sigma_1 = float(np.real(free_eigs[np.argmin(np.abs(free_eigs - 1.0))]))

    multipliers = np.zeros(0)
    reciprocals = np.zeros(0)
    ratios: List[float] = []
    defect = 0.0
    if m > 0:
        values, vectors = np.linalg.eig(M)
        order = np.argsort(-np.abs(values))[:m][::-1]
        multipliers = np.abs(values[order])

        inverse = np.eye(2 * m)
        for leg in orbit.legs:
            inverse = inverse @ np.linalg.inv(leg.projected)
        inverse_values = np.abs(np.linalg.eigvals(inverse))
        reciprocals = 1.0 / np.sort(inverse_values)[::-1][:m]
        reciprocals, defect = _pair(multipliers, reciprocals)

        for i in order:
            eta = vectors[:, i]
            ratios.append(float(np.linalg.norm(eta[m:]) / np.linalg.norm(eta[:m])))

    if defect > pairing_tol:
        raise DefectiveSpectrum(defect, pairing_tol)

    leg_products: List[float] = []
    product_defect = None
    if orbit.spec.k > 1 and m > 0:
        for j in range(orbit.spec.k):
            lap = orbit.legs[2 * j + 1].projected @ orbit.legs[2 * j].projected
            leg_products.append(_dominant(lap))
        product_defect = abs(float(np.prod(leg_products)) / multipliers[-1] - 1.0)

    factorization_defect = None
    if model is not None and chart is not None:
        z0 = chart.from_local(orbit.anchors[0])
        whole = integrate_variational(model, z0, (0.0, orbit.period), tol=tol).final
        factorization_defect = float(
            np.linalg.norm(whole - orbit.monodromy) / np.linalg.norm(orbit.monodromy)
        )

    return FloquetReport(
        energy=orbit.energy,
        multipliers=multipliers.tolist(),
        reciprocals=np.asarray(reciprocals).tolist(),
        pairing_defect=defect,
        sigma_1=sigma_1,
        eigenvector_ratios=ratios,
        leg_products=leg_products,
        product_defect=product_defect,
        factorization_defect=factorization_defect,
    )


# ------------------------------------------------------------------------------
# CONTINUATION
# ------------------------------------------------------------------------------


def _predict(history: List[Tuple[float, np.ndarray]], energy: float) -> Optional[np.ndarray]:
    """Linear extrapolation of the hat unknowns in log|E|."""
    if not history:
        return None
    if len(history) == 1:
        return history[-1][1].copy()
    (s0, h0), (s1, h1) = history[-2], history[-1]
    s = math.log(abs(energy))
    return h1 + (h1 - h0) * (s - s1) / (s1 - s0)


def continue_family(
    model: HamiltonianModel,
    chart: LocalChart,
    spec: ShadowingSpec,
    library: Sequence[HomoclinicOrbit],
    energies: Sequence[float],
    e0: Optional[float] = None,
    tol: float = 1e-12,
    energy_tol: float = 1e-9,
    newton_tol: float = 1e-10,
    tube_factor: float = 10.0,
    label: str = "",
) -> CylinderFamily:
    """
    Continues periodic orbits of one itinerary along a grid of energies,
    starting from the largest |E|. A failed step is retried after the
    geometric midpoint between the last solved energy and the target.

    Raises:
        ContinuationStalled: the step fell below a relative 1e-3.
        ContinuationError: the first energy of the grid could not be solved.
    """
    pending = sorted(energies, key=abs)
    orbits: List[PeriodicOrbit] = []
    history: List[Tuple[float, np.ndarray]] = []
    m = 2 * chart.n - 2

    while pending:
        energy = pending.pop()
        guess = _predict(history, energy)
        try:
            orbit = solve_periodic(
                model, chart, spec, library, energy, guess=guess, e0=e0, tol=tol,
                energy_tol=energy_tol, newton_tol=newton_tol, tube_factor=tube_factor,
            )
        except (ContinuationError, SectionMapError, FlowError) as e:
            if not orbits:
                raise
            last = orbits[-1].energy
            step = abs(energy - last) / abs(last)
            if step < MIN_RELATIVE_STEP:
                raise ContinuationStalled(energy, step) from e
            middle = math.copysign(math.sqrt(abs(last * energy)), energy)
            logger.warning(f"Step to E = {energy:.3e} failed ({e}); trying {middle:.3e} first")
            pending.extend([energy, middle])
            continue
        orbits.append(orbit)
        history.append((math.log(abs(energy)), orbit.unknowns.reshape(len(orbit.anchors), m)))

    family = CylinderFamily(spec=spec, orbits=orbits, label=label).sorted()
    logger.info(f"Family {label or spec.labels}: {len(family)} orbits")
    return family


# ------------------------------------------------------------------------------
# PROBES & ORACLES
# ------------------------------------------------------------------------------


def _skeleton_tree(
    library: Sequence[HomoclinicOrbit], spec: ShadowingSpec, samples: int = 2000
) -> cKDTree:
    points, shift = [], None
    for i in spec.order:
        orbit = library[i]
        if shift is None:
            shift = np.zeros(orbit.n)
        seg = orbit.segment.translated(shift)
        points.append(np.array([seg(t) for t in np.linspace(seg.t0, seg.t_end, samples)]))
        shift = shift + np.asarray(orbit.homology_class, dtype=float)
    return cKDTree(np.vstack(points))


def uniqueness_probe(
    model: HamiltonianModel,
    chart: LocalChart,
    orbit: PeriodicOrbit,
    library: Sequence[HomoclinicOrbit],
    n_probes: int = 5,
    seed: int = 0,
    tol: float = 1e-12,
    energy_tol: float = 1e-9,
    newton_tol: float = 1e-10,
    tube_factor: float = 10.0,
) -> ProbeReport:
    """
    Restarts Newton from random anchors in the delta-window around the
    homoclinic crossings and counts the distinct solutions. Starts that leave
    the tube or the ball are flagged and not counted.
    """
    rng = np.random.default_rng(seed)
    spec = orbit.spec
    base = initial_guess(library, spec)
    reference = orbit.unknowns
    converged = coincident = diverged = flagged = 0
    distinct: List[float] = []
    deviation = 0.0
    tree = None

    for _ in range(n_probes):
        guess = base + rng.uniform(-chart.delta, chart.delta, size=base.shape)
        try:
            other = solve_periodic(
                model, chart, spec, library, orbit.energy, guess=guess, tol=tol,
                energy_tol=energy_tol, newton_tol=newton_tol, tube_factor=tube_factor,
            )
        except NewtonDiverged:
            diverged += 1
            continue
        except (
            LeftTube, TransitTimeDeviation, NotInInnerDomain, WrongEnergySign, WrongShadowingOrder,
        ):
            flagged += 1
            continue
        except (SectionMapError, FlowError):
            diverged += 1
            continue
        converged += 1
        distance = float(np.max(np.abs(other.unknowns - reference))) if reference.size else 0.0
        deviation = max(deviation, distance)
        if distance < COINCIDENCE_TOLERANCE:
            coincident += 1
            continue
        if tree is None:
            tree = _skeleton_tree(library, spec)
        far, _ = tree.query(other.segment.states)
        distinct.append(float(np.max(far)))

    report = ProbeReport(
        energy=orbit.energy,
        probes=n_probes,
        converged=converged,
        coincident=coincident,
        distinct=distinct,
        diverged=diverged,
        flagged=flagged,
        max_deviation=deviation,
    )
    logger.info(
        f"Uniqueness probe at E = {orbit.energy:.3e}: {coincident}/{converged} coincide, "
        f"{len(distinct)} distinct, {flagged} flagged, {diverged} diverged"
    )
    return report


def graph_transform_oracle(
    model: HamiltonianModel,
    chart: LocalChart,
    spec: ShadowingSpec,
    library: Sequence[HomoclinicOrbit],
    energy: float,
    resolution: int = 41,
    tol: float = 1e-9,
    max_iter: int = 100,
    newton_anchor: Optional[Sequence[float]] = None,
    integration_tol: float = 1e-12,
    energy_tol: float = 1e-9,
    tube_factor: float = 10.0,
) -> OracleResult:
    """
    Cross-checks the Newton solution for n = 2 and E > 0.

    A graph v^ = F(u^) over the delta-window on the first entry section is
    pushed forward by the return map until it stops changing; the fixed
    point is then the root of u^'(u^) - u^ along the invariant graph.

    Raises:
        ContractionFailed: the sup-change did not decrease over 10
            iterations, or `max_iter` was reached.
    """
    if chart.n != 2 or energy <= 0.0:
        raise ContinuationError("The graph-transform oracle needs n = 2 and E > 0")

    def forward(u: float, v: float) -> Optional[np.ndarray]:
        try:
            return return_map(
                chart, model, spec, library, [u, v], energy,
                tol=integration_tol, energy_tol=energy_tol, tube_factor=tube_factor,
            )
        except (SectionMapError, FlowError):
            return None

    center = library[spec.order[0]].entry.hat
    grid = np.linspace(center[0] - chart.delta, center[0] + chart.delta, resolution)
    graph = np.full(resolution, center[1])
    history: List[float] = []

    for _ in range(max_iter):
        images = [forward(u, v) for u, v in zip(grid, graph)]
        points = np.array([p for p in images if p is not None])
        if points.shape[0] < 4:
            raise ContractionFailed(history)
        points = points[np.argsort(points[:, 0])]
        _, keep = np.unique(points[:, 0], return_index=True)
        points = points[keep]
        spline = CubicSpline(points[:, 0], points[:, 1])
        inside = (grid >= points[0, 0]) & (grid <= points[-1, 0])
        updated = graph.copy()
        updated[inside] = spline(grid[inside])
        change = float(np.max(np.abs(updated - graph)))
        history.append(change)
        graph = updated
        logger.debug(f"Graph transform: sup-change {change:.3e}")
        if change < tol:
            break
        if len(history) > 10 and np.all(np.diff(history[-10:]) >= 0.0):
            raise ContractionFailed(history)
    else:
        raise ContractionFailed(history)

    curve = CubicSpline(grid, graph)

    def gap(u: float) -> float:
        image = forward(u, float(curve(u)))
        return np.nan if image is None else float(image[0] - u)

    values = np.array([gap(u) for u in grid])
    roots = [
        i for i in range(resolution - 1)
        if np.isfinite(values[i]) and np.isfinite(values[i + 1]) and values[i] * values[i + 1] <= 0.0
    ]
    if not roots:
        raise ContractionFailed(history)
    i = roots[0]
    u_star = grid[i] if values[i] == 0.0 else brentq(gap, grid[i], grid[i + 1], xtol=1e-14)
    anchor = [float(u_star), float(curve(u_star))]

    agreement = None
    if newton_anchor is not None:
        agreement = float(np.max(np.abs(np.asarray(newton_anchor, dtype=float) - anchor)))
    return OracleResult(
        energy=energy,
        resolution=resolution,
        iterations=len(history),
        history=history,
        anchor=anchor,
        newton_anchor=None if newton_anchor is None else [float(a) for a in newton_anchor],
        agreement=agreement,
    )


# ------------------------------------------------------------------------------
# SYMMETRY
# ------------------------------------------------------------------------------


def reflect_periodic(
    model: HamiltonianModel,
    chart: LocalChart,
    orbit: PeriodicOrbit,
    library: Sequence[HomoclinicOrbit],
    tol: float = 1e-12,
    energy_tol: float = 1e-9,
    newton_tol: float = 1e-10,
    tube_factor: float = 10.0,
) -> PeriodicOrbit:
    """
    The s-partner s z(-t) of an E > 0 orbit, solved on the reversed chain of
    partner homoclinics from the reflected anchors.
    """
    spec = orbit.spec
    partners = [partner_index(library, i) for i in reversed(spec.order)]
    reversed_spec = _orbit_spec(library, partners, 1)
    n = orbit.n
    guess = []
    for w in orbit.anchors[::-1]:
        # s(u, v) = (-v, -u)
        reflected = np.concatenate([-w[n:], -w[:n]])
        guess.append(project_anchor(reflected))
    return solve_periodic(
        model, chart, reversed_spec, library, orbit.energy, guess=np.array(guess),
        tol=tol, energy_tol=energy_tol, newton_tol=newton_tol, tube_factor=tube_factor,
    )


def _curve_distance(segment: OrbitSegment, point: np.ndarray, t_guess: float, span: float) -> float:
    lo = max(segment.t0, t_guess - span)
    hi = min(segment.t_end, t_guess + span)
    result = minimize_scalar(
        lambda t: float(np.linalg.norm(segment(t) - point)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(result.fun)


def symmetric_crossings(
    model: HamiltonianModel,
    orbit: PeriodicOrbit,
    y_tol: float = 1e-6,
    samples: int = SYMMETRY_SAMPLES,
) -> SymmetryReport:
    """
    Distance between an orbit and its s-image, and the times at which the
    orbit meets the fixed set {y = 0} of s.
    """
    segment = orbit.segment
    n = model.n
    times = np.linspace(segment.t0, segment.t_end, samples)
    points = np.array([segment(t) for t in times])
    tree = cKDTree(points)
    spacing = float(times[1] - times[0])

    distance = 0.0
    for point in points:
        mirrored = model.reflect(point)
        _, k = tree.query(mirrored)
        distance = max(distance, _curve_distance(segment, mirrored, times[k], 2.0 * spacing))

    crossings = [
        float(t)
        for t, z in locate_events(model, segment, EventSpec(kind="y", chart="xy", index=0))
        if np.linalg.norm(z[n:]) < y_tol
    ]
    return SymmetryReport(
        energy=orbit.energy,
        reflection_distance=distance,
        zero_momentum_crossings=len(crossings),
        crossing_times=crossings,
    )


# ------------------------------------------------------------------------------
# LAWS
# ------------------------------------------------------------------------------


def period_law(
    family: CylinderFamily,
    exponent: float,
    band_bound: float = 1.0,
    drift_tolerance: float = 0.02,
) -> PeriodLawReport:
    """
    T(E) - (k / lambda_1) ln(1 / |E|) over a family, k inner passages per
    period. The offsets must stay in a band narrower than `band_bound` and
    must not trend with ln(1 / |E|): a leftover slope above `drift_tolerance`
    times k / lambda_1 means the period carries more than k logarithms.
    """
    k = family.spec.k
    energies = family.energies
    x = np.log(1.0 / np.abs(energies))
    offsets = [o.period - (k / exponent) * math.log(1.0 / abs(o.energy)) for o in family.orbits]
    band = float(np.ptp(offsets)) if offsets else 0.0
    drift = 0.0
    if len(offsets) >= 3 and np.ptp(x) > 0.0:
        drift = abs(float(linregress(x, offsets).slope)) * exponent / k
    return PeriodLawReport(
        inner_passages=k,
        exponent=exponent,
        offsets=offsets,
        band=band,
        energies=energies.tolist(),
        drift=drift,
        band_bound=band_bound,
        drift_tolerance=drift_tolerance,
    )


def pendulum_period(energy: float) -> float:
    """
    Period of H = y^2 / 2 - (1 - cos 2 pi x) on the level E: one turn for
    E > 0, one libration for -2 < E < 0.
    """
    if energy > 0.0:
        scale = 1.0 + energy / 2.0
        return float(ellipk(1.0 / scale) / (math.pi * math.sqrt(scale)))
    if -2.0 < energy < 0.0:
        return float(2.0 * ellipk(1.0 + energy / 2.0) / math.pi)
    raise ValueError(f"No periodic orbit of the pendulum at E = {energy}")
