"""
🌀 nhicyl.sectionmaps

Contains the outer map (from the entry section {u_1 = +-r} along a
homoclinic to the exit section {v_1 = +-r}), the inner map (the passage
near the saddle back to an entry section), their differentials corrected
onto the target section, and the anchor parameterization of section points
on an energy level.
"""

import logging
import math
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .common.errors import (
    EventNotReached,
    LeftTube,
    NotInInnerDomain,
    SectionMapError,
    TangentialExit,
    TransitTimeDeviation,
    WrongEnergySign,
)
from .flow import integrate_to_event
from .types.chart import ConeConstants, LocalChart
from .types.homoclinic import HomoclinicOrbit, SectionKind
from .types.orbits import EventSpec
from .types.sections import (
    ExpansionReport,
    SectionMapResult,
    SectionSpec,
    SplitInnerResult,
)
from .types.system import HamiltonianModel

logger = logging.getLogger(__name__)

__all__ = [
    "hat_indices",
    "embed_anchor",
    "project_anchor",
    "correct_jacobian",
    "section_differential",
    "outer_map",
    "inner_map",
    "split_inner_map",
    "inner_transit_time",
    "fit_cone_constants",
    "verify_expansion_contraction",
]


TANGENTIAL_THRESHOLD = 1e-10
EMBED_TOLERANCE = 1e-14
TUBE_SAMPLES = 4000
OUTER_TRANSIT_TOLERANCE = 0.5


# ------------------------------------------------------------------------------
# SECTION COORDINATES
# ------------------------------------------------------------------------------


def hat_indices(n: int) -> np.ndarray:
    """Positions of (u_2..u_n, v_2..v_n) in w."""
    return np.array(list(range(1, n)) + list(range(n + 1, 2 * n)), dtype=int)


def _normal(kind: SectionKind, n: int) -> np.ndarray:
    g = np.zeros(2 * n)
    if kind == "u1":
        g[0] = 1.0
    elif kind == "v1":
        g[n] = 1.0
    elif kind == "diag_plus":
        g[0], g[n] = 1.0, -1.0
    else:
        g[0], g[n] = 1.0, 1.0
    return g


def _eliminated(kind: SectionKind, n: int) -> np.ndarray:
    """Direction along which the energy constraint is solved on a section."""
    e = np.zeros(2 * n)
    if kind == "u1":
        e[n] = 1.0
    elif kind == "v1":
        e[0] = 1.0
    elif kind == "diag_plus":
        e[0], e[n] = 1.0, 1.0
    else:
        e[0], e[n] = 1.0, -1.0
    return e


def _free_indices(kind: SectionKind, n: int) -> np.ndarray:
    """The 2n - 1 coordinates left free on a section (u_1 stands for both on a diagonal)."""
    dropped = 0 if kind == "u1" else n
    return np.array([i for i in range(2 * n) if i != dropped], dtype=int)


def _free_basis(kind: SectionKind, n: int) -> np.ndarray:
    indices = _free_indices(kind, n)
    basis = np.zeros((2 * n, 2 * n - 1))
    for col, i in enumerate(indices):
        basis[i, col] = 1.0
    if kind == "diag_plus":
        basis[n, 0] = 1.0
    elif kind == "diag_minus":
        basis[n, 0] = -1.0
    return basis


def _energy_gradient(chart: LocalChart, model: HamiltonianModel, w: np.ndarray) -> np.ndarray:
    z = chart.from_local(w, check=False)
    return chart.d_from_local(w).T @ model.gradient(z)


def _energy_basis(kind: SectionKind, n: int, grad: np.ndarray) -> np.ndarray:
    """Tangent vectors of {section} cap {H = E} indexed by the hat coordinates."""
    e = _eliminated(kind, n)
    along = float(grad @ e)
    if abs(along) < TANGENTIAL_THRESHOLD:
        raise SectionMapError(f"Energy level is tangent to the {kind} section")
    basis = np.zeros((2 * n, 2 * n - 2))
    for col, j in enumerate(hat_indices(n)):
        basis[j, col] = 1.0
        basis[:, col] -= (grad[j] / along) * e
    return basis


def project_anchor(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return w[hat_indices(w.shape[0] // 2)]


def embed_anchor(
    chart: LocalChart,
    model: HamiltonianModel,
    kind: SectionKind,
    sign: int,
    r: float,
    hat: Sequence[float],
    energy: float,
) -> np.ndarray:
    """
    The point of a section with the given hat coordinates on H = E.

    The coordinate paired with the section's (v_1 on {u_1 = sign r}, u_1 on
    {v_1 = sign r}, the diagonal magnitude on {u_1 = +-v_1}) is found by a
    scalar Newton iteration started from the quadratic part of H.

    Raises:
        SectionMapError: the iteration failed to meet H = E.
    """
    n = chart.n
    lam = chart.exponents
    hat = np.asarray(hat, dtype=float).reshape(2 * n - 2)
    w = np.zeros(2 * n)
    w[hat_indices(n)] = hat
    rest = float(np.sum(lam[1:] * hat[: n - 1] * hat[n - 1 :]))
    e = _eliminated(kind, n)

    if kind == "u1":
        w[0] = sign * r
        s = (energy - rest) / (lam[0] * sign * r)
    elif kind == "v1":
        w[n] = sign * r
        s = (energy - rest) / (lam[0] * sign * r)
    else:
        # lambda_1 u_1 v_1 = +-lambda_1 s^2 on the diagonals
        s = sign * math.sqrt(max(abs(energy - rest) / lam[0], 0.0))

    base = w.copy()
    for _ in range(50):
        w = base + s * e
        residual = model.hamiltonian(chart.from_local(w, check=False)) - energy
        if abs(residual) <= EMBED_TOLERANCE * (1.0 + abs(energy)):
            return w
        slope = float(_energy_gradient(chart, model, w) @ e)
        if slope == 0.0:
            break
        s -= residual / slope
    raise SectionMapError(
        f"Could not place an anchor on H = {energy:.3e} in the {kind} section"
    )


# ------------------------------------------------------------------------------
# DIFFERENTIALS
# ------------------------------------------------------------------------------


def correct_jacobian(jacobian: np.ndarray, exit_field: np.ndarray, kind: SectionKind) -> np.ndarray:
    """
    Adds the multiple nu X_H of the exit field that brings every column of
    the flow differential into the target section.

    Raises:
        TangentialExit: the exit field is nearly tangent to the section.
    """
    n = exit_field.shape[0] // 2
    g = _normal(kind, n)
    transversal = float(g @ exit_field)
    if abs(transversal) < TANGENTIAL_THRESHOLD:
        raise TangentialExit(transversal)
    return jacobian - np.outer(exit_field, g @ jacobian) / transversal


def section_differential(
    jacobian: np.ndarray,
    exit_field: np.ndarray,
    target: SectionKind,
    source: Optional[SectionKind] = None,
    energy_gradient: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, Optional[np.ndarray], Optional[np.ndarray]]:
    """
    Corrected differential of a section-to-section map.

    Returns:
        (corrected 2n x 2n, projected (2n-2) x (2n-2) on the energy level or
        None, free (2n-1) x (2n-1) or None); the last two need `source`, the
        projected one also the energy gradient at the start.
    """
    n = exit_field.shape[0] // 2
    corrected = correct_jacobian(jacobian, exit_field, target)
    if source is None:
        return corrected, None, None
    free = corrected[_free_indices(target, n)] @ _free_basis(source, n)
    projected = None
    if energy_gradient is not None:
        projected = corrected[hat_indices(n)] @ _energy_basis(source, n, energy_gradient)
    return corrected, projected, free


# ------------------------------------------------------------------------------
# PASSAGES
# ------------------------------------------------------------------------------


def _crossing_direction(kind: SectionKind, sign: int, outward: bool) -> str:
    """Direction of g through the level for a point moving away from (or toward) the saddle."""
    if kind in ("diag_plus", "diag_minus"):
        return "any"
    moving_up = (sign > 0) == outward
    return "increasing" if moving_up else "decreasing"


def _passage(
    chart: LocalChart,
    model: HamiltonianModel,
    w: np.ndarray,
    events: List[EventSpec],
    t_max: float,
    tol: float,
    energy_tol: float,
    gate: Optional[float] = None,
):
    z0 = chart.from_local(np.asarray(w, dtype=float))
    hit = integrate_to_event(
        model,
        z0,
        events,
        t_max,
        tol=tol,
        chart=chart,
        variational=True,
        gate=gate,
        energy_tol=energy_tol,
    )
    return hit, z0


def _assemble_result(
    chart: LocalChart,
    model: HamiltonianModel,
    hit,
    z0: np.ndarray,
    w: np.ndarray,
    source: SectionSpec,
    target: SectionSpec,
    tube_distance: float = 0.0,
) -> SectionMapResult:
    reduced, shift = model.reduce(hit.z_hit)
    D_exit = chart.d_to_local(reduced)
    psi = hit.fundamental
    jacobian = D_exit @ psi @ chart.d_from_local(w)
    exit_field = D_exit @ model.vector_field(hit.z_hit)
    corrected, projected, free = section_differential(
        jacobian,
        exit_field,
        target.kind,
        source.kind,
        _energy_gradient(chart, model, w),
    )
    return SectionMapResult(
        source=source,
        target=target,
        start_w=w.copy(),
        image_w=hit.w_hit.copy(),
        transit_time=float(hit.t_hit),
        jacobian=corrected,
        projected=projected,
        free=free,
        fundamental=psi,
        energy=model.hamiltonian(z0),
        lattice_shift=np.asarray(shift),
        segment=hit.segment,
        tube_distance=tube_distance,
    )


def _tube_distance(model: HamiltonianModel, segment, reference: HomoclinicOrbit) -> float:
    ref = reference.segment
    ref_times = np.linspace(ref.t0, ref.t_end, TUBE_SAMPLES)
    tree = cKDTree(np.array([ref(t) for t in ref_times]))
    distance, _ = tree.query(segment.states)
    return float(np.max(distance))


def outer_map(
    chart: LocalChart,
    model: HamiltonianModel,
    w: np.ndarray,
    homoclinic: HomoclinicOrbit,
    tol: float = 1e-12,
    energy_tol: float = 1e-9,
    tube_factor: float = 10.0,
    transit_tolerance: Optional[float] = OUTER_TRANSIT_TOLERANCE,
) -> SectionMapResult:
    """
    Follows a point of the entry section along a homoclinic to its exit
    section {v_1 = sign r} in the homoclinic's end cell.

    Raises:
        LeftTube: the orbit strayed more than tube_factor * delta from the
            homoclinic, or arrived in another cell.
        TransitTimeDeviation: the transit time is more than
            `transit_tolerance` (relative) away from the homoclinic's outer
            time; `None` only records the deviation.
        EventNotReached: no exit crossing within three outer times.
    """
    entry, exit_ = homoclinic.entry, homoclinic.exit
    energy = model.hamiltonian(chart.from_local(w))
    source = SectionSpec(kind="u1", sign=entry.sign, r=chart.r, energy=energy,
                         delta=chart.delta, r_prime=chart.r_prime)
    target = SectionSpec(kind="v1", sign=exit_.sign, r=chart.r, energy=energy,
                         delta=chart.delta, r_prime=chart.r_prime)
    event = EventSpec(
        kind="v1",
        level=target.level,
        direction=_crossing_direction("v1", exit_.sign, outward=False),
    )
    t_max = 3.0 * homoclinic.outer_time + 10.0
    hit, z0 = _passage(chart, model, w, [event], t_max, tol, energy_tol)

    radius = tube_factor * chart.delta
    expected = np.asarray(homoclinic.homology_class)
    if not np.array_equal(hit.lattice_shift, expected):
        raise LeftTube(float("inf"), radius)
    distance = _tube_distance(model, hit.segment, homoclinic)
    if distance > radius:
        raise LeftTube(distance, radius)
    deviation = abs(hit.t_hit - homoclinic.outer_time) / homoclinic.outer_time
    if transit_tolerance is not None and deviation > transit_tolerance:
        raise TransitTimeDeviation(float(hit.t_hit), homoclinic.outer_time, transit_tolerance)
    result = _assemble_result(
        chart, model, hit, z0, np.asarray(w, dtype=float), source, target, distance
    )
    return replace(result, transit_deviation=float(deviation))


def inner_transit_time(chart: LocalChart, energy: float) -> float:
    """Transit time of the linear saddle between the sections: (1/lambda_1) ln(lambda_1 r^2 / |E|)."""
    lam = chart.exponents[0]
    return math.log(lam * chart.r**2 / abs(energy)) / lam


def _inner_t_max(chart: LocalChart, energy: float) -> float:
    return 3.0 * max(inner_transit_time(chart, energy), 0.0) + 10.0


def inner_map(
    chart: LocalChart,
    model: HamiltonianModel,
    w: np.ndarray,
    energy_sign: Optional[int] = None,
    tol: float = 1e-12,
    energy_tol: float = 1e-9,
) -> SectionMapResult:
    """
    Follows a point of an exit section {v_1 = sign r} past the saddle to the
    entry section {u_1 = sign sign(E) r}.

    Raises:
        WrongEnergySign: E = 0, E disagrees with `energy_sign`, or the orbit
            reached the entry section on the other side.
        NotInInnerDomain: the orbit left the ball |w| = r' first.
    """
    n = chart.n
    w = np.asarray(w, dtype=float)
    source_sign = 1 if w[n] > 0 else -1
    energy = model.hamiltonian(chart.from_local(w))
    sign_e = 1 if energy > 0 else -1
    if energy == 0.0 or (energy_sign is not None and energy_sign != sign_e):
        raise WrongEnergySign(energy, float(energy_sign or 0))
    exit_sign = source_sign * sign_e

    source = SectionSpec(kind="v1", sign=source_sign, r=chart.r, energy=energy,
                         delta=chart.delta, r_prime=chart.r_prime)
    target = SectionSpec(kind="u1", sign=exit_sign, r=chart.r, energy=energy,
                         delta=chart.delta, r_prime=chart.r_prime)
    events = [
        EventSpec(kind="u1", level=exit_sign * chart.r,
                  direction=_crossing_direction("u1", exit_sign, outward=True)),
        EventSpec(kind="u1", level=-exit_sign * chart.r,
                  direction=_crossing_direction("u1", -exit_sign, outward=True)),
        EventSpec(kind="ball", level=chart.r_prime, direction="increasing"),
    ]
    try:
        hit, z0 = _passage(
            chart, model, w, events, _inner_t_max(chart, energy),
            tol, energy_tol, gate=2.0 * chart.r_prime,
        )
    except EventNotReached as e:
        raise NotInInnerDomain(e.t_max, "no exit before t_max") from e
    if hit.event_index == 1:
        raise WrongEnergySign(energy, float(-exit_sign))
    if hit.event_index == 2:
        raise NotInInnerDomain(hit.t_hit)
    return _assemble_result(chart, model, hit, z0, w, source, target)


def split_inner_map(
    chart: LocalChart,
    model: HamiltonianModel,
    w: np.ndarray,
    energy_sign: Optional[int] = None,
    tol: float = 1e-12,
    energy_tol: float = 1e-9,
) -> SplitInnerResult:
    """
    Factors an inner passage at the diagonal {u_1 = v_1} (E > 0) or
    {u_1 = -v_1} (E < 0) and compares the composed free differentials with
    the whole passage's.
    """
    n = chart.n
    w = np.asarray(w, dtype=float)
    whole = inner_map(chart, model, w, energy_sign, tol, energy_tol)
    energy = whole.energy
    kind: SectionKind = "diag_plus" if energy > 0 else "diag_minus"
    diagonal = SectionSpec(kind=kind, sign=whole.target.sign, r=chart.r, energy=energy,
                           delta=chart.delta, r_prime=chart.r_prime)

    event = EventSpec(kind=kind, direction="any")
    hit, z0 = _passage(
        chart, model, w, [event], _inner_t_max(chart, energy),
        tol, energy_tol, gate=2.0 * chart.r_prime,
    )
    first = _assemble_result(chart, model, hit, z0, w, whole.source, diagonal)

    middle = first.image_w.copy()
    # the diagonal point as a source: u_1 carries both paired coordinates
    middle[n] = middle[0] if kind == "diag_plus" else -middle[0]
    exit_event = EventSpec(
        kind="u1",
        level=whole.target.level,
        direction=_crossing_direction("u1", whole.target.sign, outward=True),
    )
    hit, z0 = _passage(
        chart, model, middle, [exit_event],
        _inner_t_max(chart, energy), tol, energy_tol, gate=2.0 * chart.r_prime,
    )
    second = _assemble_result(chart, model, hit, z0, middle, diagonal, whole.target)

    composed = second.free @ first.free
    defect = float(np.linalg.norm(composed - whole.free) / np.linalg.norm(whole.free))
    logger.debug(f"Split inner passage at {kind}: composition defect {defect:.2e}")
    return SplitInnerResult(first=first, second=second, whole=whole, composition_defect=defect)


# ------------------------------------------------------------------------------
# EXPANSION
# ------------------------------------------------------------------------------


def _stretch(
    result: SectionMapResult, chart: LocalChart, samples: int, seed: int
) -> Tuple[float, float, float]:
    """
    Smallest stretch of u^ on the unit cone |xi_v^| <= |xi_u^|, and the
    smallest c, c' this one passage needs.
    """
    n = chart.n
    t = result.transit_time
    r = chart.r
    lam = chart.exponents
    m = n - 1
    rng = np.random.default_rng(seed)
    xi_u = rng.normal(size=(m, samples))
    xi_u /= np.linalg.norm(xi_u, axis=0)
    xi_v = rng.normal(size=(m, samples))
    xi_v *= rng.uniform(0.0, 1.0, size=samples) / np.linalg.norm(xi_v, axis=0)
    image = result.projected @ np.vstack([xi_u, xi_v])
    image_u = np.linalg.norm(image[:m], axis=0)
    image_v = np.linalg.norm(image[m:], axis=0)

    # |xi_u^| = 1
    expansion = float(np.min(image_u))
    c = max(0.0, float(np.max((lam[1] - np.log(image_u) / t) / r)))
    c_prime = float(np.max(image_v / (r * np.exp(-(lam[0] - c * r) * t) * t * image_u)))
    return expansion, c, c_prime


def fit_cone_constants(
    chart: LocalChart,
    model: HamiltonianModel,
    energies: Sequence[float] = (1e-4, -1e-4, 1e-6, -1e-6, 1e-8, -1e-8),
    margin: float = 1.1,
    floor: float = 1e-6,
    samples: int = 200,
    seed: int = 0,
    tol: float = 1e-12,
    energy_tol: float = 1e-9,
) -> ConeConstants:
    """
    Fits c, c' once for a system from inner passages at the given energies,
    starting on {v_1 = r} at the centre and at a corner of the delta-window.
    The largest values seen, times `margin` plus `floor`, are kept.

    Raises:
        SectionMapError: for n = 1, where there is nothing to fit.
    """
    n = chart.n
    if n < 2:
        raise SectionMapError("Cone constants need n >= 2")
    a = 0.25 * chart.delta
    c_max = c_prime_max = 0.0
    passages = 0
    for energy in energies:
        # u2 v2 of opposite sign to E keeps the exit on the side E selects
        corner = np.concatenate([np.full(n - 1, a), np.full(n - 1, -np.sign(energy) * a)])
        for hat in (np.zeros(2 * (n - 1)), corner):
            w = embed_anchor(chart, model, "v1", 1, chart.r, hat, energy)
            result = inner_map(chart, model, w, tol=tol, energy_tol=energy_tol)
            _, c, c_prime = _stretch(result, chart, samples, seed)
            c_max, c_prime_max = max(c_max, c), max(c_prime_max, c_prime)
            passages += 1
    constants = ConeConstants(
        c=margin * c_max + floor,
        c_prime=margin * c_prime_max + floor,
        energies=[float(e) for e in energies],
        passages=passages,
        margin=margin,
    )
    logger.info(
        f"Cone constants from {passages} passages: c = {constants.c:.4g}, "
        f"c' = {constants.c_prime:.4g}"
    )
    return constants


def verify_expansion_contraction(
    result: SectionMapResult,
    chart: LocalChart,
    constants: Optional[ConeConstants] = None,
    samples: int = 200,
    seed: int = 0,
) -> ExpansionReport:
    """
    Checks how one inner passage stretches u^ and squeezes v^ on vectors
    of the unit cone |xi_v^| <= |xi_u^| against the system's constants

        |xi*_u^| >= exp((lambda_2 - c r) t) |xi_u^|,
        |xi*_v^| <= c' r exp(-(lambda_1 - c r) t) t |xi*_u^|.

    The constants default to the ones frozen on the chart.
    """
    n = chart.n
    t = result.transit_time
    r = chart.r
    constants = constants or chart.cone_constants
    if n < 2 or result.projected is None:
        return ExpansionReport(
            transit_time=t, r=r, samples=0, c=0.0, c_prime=0.0, expansion=1.0,
            violations=["needs n >= 2 and a projected differential"],
        )

    expansion, c, c_prime = _stretch(result, chart, samples, seed)
    violations = []
    if expansion <= 1.0:
        violations.append(f"no expansion: smallest stretch {expansion:.3e}")
    if constants is None:
        violations.append("no cone constants fitted for this system")
    else:
        if c > constants.c:
            violations.append(f"passage needs c = {c:.4g} > {constants.c:.4g}")
        if not c_prime <= constants.c_prime:
            violations.append(f"passage needs c' = {c_prime:.4g} > {constants.c_prime:.4g}")
        if constants.c * r >= chart.exponents[1]:
            violations.append(f"c r = {constants.c * r:.3e} exceeds lambda_2")
    return ExpansionReport(
        transit_time=t,
        r=r,
        samples=samples,
        c=constants.c if constants else c,
        c_prime=constants.c_prime if constants else c_prime,
        measured_c=c,
        measured_c_prime=c_prime,
        expansion=expansion,
        violations=violations,
    )
