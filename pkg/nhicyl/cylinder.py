"""
🌀 nhicyl.cylinder

Contains the assembly of the singular cylinder from its families of
periodic orbits and its homoclinic skeleton, and the verification suite run
against it: Hausdorff convergence, scaling laws, the C^1 join at E = 0,
tangency at the saddle, normal hyperbolicity and invariance of the mesh.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space, orth
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree
from scipy.stats import linregress

from .common.errors import (
    FamiliesTooShort,
    GapNotResolved,
    InconsistentCovering,
    InsufficientRange,
    MissingFamily,
    NHICError,
    TooFewPoints,
)
from .continuation import (
    floquet_analysis,
    graph_transform_oracle,
    period_law,
    symmetric_crossings,
    uniqueness_probe,
)
from .flow import integrate, integrate_variational
from .sectionmaps import hat_indices, outer_map, verify_expansion_contraction
from .types.chart import LocalChart
from .types.config import Checks, Tolerances
from .types.cylinder import (
    C1_CAVEAT,
    CheckResult,
    CylinderAtlas,
    CylinderMesh,
    FloquetScaling,
    HyperbolicityReport,
    JoinReport,
    MeshInvarianceReport,
    ScalingFit,
    VerificationReport,
    VertexReport,
    WindowRates,
)
from .types.homoclinic import HomoclinicChain, HomoclinicOrbit
from .types.orbits import OrbitSegment
from .types.periodic import CylinderFamily, PeriodicOrbit
from .types.system import HamiltonianModel

logger = logging.getLogger(__name__)

__all__ = [
    "count_holes",
    "build_mesh",
    "assemble",
    "hausdorff_distance",
    "skeleton_distance",
    "hausdorff_convergence",
    "transit_time_fit",
    "floquet_scaling_fit",
    "c1_join_test",
    "vertex_differentiability_test",
    "window_rates",
    "normal_hyperbolicity_test",
    "mesh_invariance",
    "alignment_trend",
    "verify",
]


MIN_DECADES = 4.0
MESH_PHASES = 32
CURVE_SAMPLES = 400
WINDOW_SAMPLES = 64
TRANSIT_BAND = 1.0
ALIGNMENT_DECADES = 4.0
ALIGNMENT_FINAL = 1e-3
ALIGNMENT_NOISE = 1e-8


# ------------------------------------------------------------------------------
# ASSEMBLY
# ------------------------------------------------------------------------------


def count_holes(chain: HomoclinicChain) -> int:
    """
    Number of distinct lifts of the chain's homoclinics in T^n_h over
    (l + 1) laps. Each lift bounds one hole of the lifted cylinder.

    Raises:
        InconsistentCovering: the count differs from (l + 1) k, so the
            covering data does not separate the lifts.
    """
    h = np.asarray(chain.h, dtype=np.int64)
    classes = np.asarray(chain.classes, dtype=np.int64)
    total = classes.sum(axis=0)
    lifts = set()
    for lap in range(chain.ell + 1):
        offset = lap * total
        for j in range(chain.k):
            start = np.mod(offset + classes[:j].sum(axis=0), h)
            lifts.add((chain.order[j], tuple(int(c) for c in start)))
    if len(lifts) != chain.hole_count:
        raise InconsistentCovering(
            f"{len(lifts)} distinct lifts in T^n_h for h = {chain.h}, "
            f"expected (l + 1) k = {chain.hole_count}"
        )
    return len(lifts)


def _phase_samples(orbit: PeriodicOrbit, phases: int) -> np.ndarray:
    times = orbit.period * np.arange(phases) / phases
    return np.array([orbit.segment(t) for t in times])


def build_mesh(families: Sequence[CylinderFamily], phases: int = MESH_PHASES) -> CylinderMesh:
    """
    Triangulates each family by joining consecutive orbits at equal phase,
    phase zero being the first entry anchor.
    """
    vertices, energies, phase_values, faces = [], [], [], []
    offset = 0
    for family in families:
        for orbit in family.orbits:
            vertices.append(_phase_samples(orbit, phases))
            energies.append(np.full(phases, orbit.energy))
            phase_values.append(np.arange(phases) / phases)
        for i in range(len(family) - 1):
            a = offset + i * phases
            b = a + phases
            for j in range(phases):
                nxt = (j + 1) % phases
                faces.append([a + j, a + nxt, b + j])
                faces.append([a + nxt, b + nxt, b + j])
        offset += len(family) * phases

    if not vertices:
        raise InconsistentCovering("No orbits to mesh")
    vertices = np.vstack(vertices)
    faces = np.array(faces, dtype=np.int64).reshape(-1, 3)

    if faces.size:
        edges = np.concatenate(
            [
                np.linalg.norm(vertices[faces[:, 0]] - vertices[faces[:, 1]], axis=1),
                np.linalg.norm(vertices[faces[:, 1]] - vertices[faces[:, 2]], axis=1),
                np.linalg.norm(vertices[faces[:, 2]] - vertices[faces[:, 0]], axis=1),
            ]
        )
        resolution = float(np.max(edges))
    else:
        resolution = float(np.max(np.linalg.norm(np.diff(vertices, axis=0), axis=1)))

    return CylinderMesh(
        vertices=vertices,
        energies=np.concatenate(energies),
        phases=np.concatenate(phase_values),
        faces=faces,
        resolution=resolution,
    )


def assemble(
    positive: Sequence[CylinderFamily],
    negative: Sequence[CylinderFamily],
    skeleton: Sequence[HomoclinicOrbit],
    chain: HomoclinicChain,
    phases: int = MESH_PHASES,
) -> CylinderAtlas:
    """
    Collects the families on both sides of E = 0 together with the
    homoclinic skeleton into one atlas.

    Raises:
        MissingFamily: one of the energy sides has no orbits.
        InconsistentCovering: the covering does not separate the lifts.
    """
    if not any(len(f) for f in positive):
        raise MissingFamily("E > 0")
    if not any(len(f) for f in negative):
        raise MissingFamily("E < 0")
    holes = count_holes(chain)
    mesh = build_mesh(list(positive) + list(negative), phases)
    logger.info(
        f"Assembled cylinder: {len(mesh.vertices)} vertices, {holes} holes in "
        f"T^n_h with h = {chain.h}"
    )
    return CylinderAtlas(
        positive=list(positive),
        negative=list(negative),
        skeleton=list(skeleton),
        chain=chain,
        hole_count=holes,
        junctions=[list(j) for j in chain.junctions],
        mesh=mesh,
    )


# ------------------------------------------------------------------------------
# DISTANCES
# ------------------------------------------------------------------------------


def hausdorff_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric sup-inf distance between two point clouds."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    forward, _ = cKDTree(b).query(a)
    backward, _ = cKDTree(a).query(b)
    return float(max(np.max(forward), np.max(backward)))


def _directed(
    source: OrbitSegment,
    source_span: Tuple[float, float],
    target: OrbitSegment,
    target_span: Tuple[float, float],
    coords: slice,
    samples: int,
) -> float:
    """
    sup over the source samples of the distance to the target curve; each
    nearest target sample is refined along the target's dense output.
    """
    times = np.linspace(*source_span, samples)
    grid = np.linspace(*target_span, samples)
    target_points = np.array([target(t)[coords] for t in grid])
    tree = cKDTree(target_points)
    spacing = grid[1] - grid[0]
    worst = 0.0
    for t in times:
        point = source(t)[coords]
        _, k = tree.query(point)
        lo = max(target_span[0], grid[k] - spacing)
        hi = min(target_span[1], grid[k] + spacing)
        result = minimize_scalar(
            lambda s: float(np.linalg.norm(target(s)[coords] - point)),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-13},
        )
        worst = max(worst, float(result.fun))
    return worst


def skeleton_distance(
    orbit: PeriodicOrbit,
    library: Sequence[HomoclinicOrbit],
    samples: int = CURVE_SAMPLES,
    project: bool = False,
) -> float:
    """
    Hausdorff distance between the outer stretches of an orbit (from
    {u_1 = +-r} to {v_1 = +-r}) and the matching stretches of its homoclinics.
    With `project` only the x-coordinates are compared.
    """
    n = orbit.n
    coords = slice(0, n) if project else slice(0, 2 * n)
    worst = 0.0
    for j, index in enumerate(orbit.spec.order):
        leg = orbit.legs[2 * j]
        homoclinic = library[index]
        leg_span = (leg.segment.t0, leg.segment.t_end)
        ref_span = (homoclinic.entry.t, homoclinic.exit.t)
        worst = max(
            worst,
            _directed(leg.segment, leg_span, homoclinic.segment, ref_span, coords, samples),
            _directed(homoclinic.segment, ref_span, leg.segment, leg_span, coords, samples),
        )
    return worst


# ------------------------------------------------------------------------------
# SCALING FITS
# ------------------------------------------------------------------------------


def _decades(energies: np.ndarray) -> float:
    magnitudes = np.abs(energies)
    if magnitudes.size < 2:
        return 0.0
    return float(math.log10(magnitudes.max() / magnitudes.min()))


def _fit(
    quantity: str,
    transform: str,
    x: np.ndarray,
    y: np.ndarray,
    energies: np.ndarray,
    expected: Optional[float] = None,
    tolerance: Optional[float] = None,
    band: Optional[List[float]] = None,
    min_decades: float = MIN_DECADES,
) -> ScalingFit:
    decades = _decades(energies)
    if decades < min_decades or len(x) < 3:
        raise InsufficientRange(decades, min_decades)
    result = linregress(x, y)
    residual = float(np.max(np.abs(y - (result.intercept + result.slope * x))))
    fit = ScalingFit(
        quantity=quantity,
        transform=transform,
        slope=float(result.slope),
        intercept=float(result.intercept),
        slope_stderr=float(result.stderr),
        residual=residual,
        e_range=[float(np.min(np.abs(energies))), float(np.max(np.abs(energies)))],
        decades=decades,
        expected=expected,
        tolerance=tolerance,
        band=band,
    )
    logger.debug(f"Fit {quantity}: slope {fit.slope:.4f} over {decades:.1f} decades")
    return fit


def hausdorff_convergence(
    family: CylinderFamily,
    library: Sequence[HomoclinicOrbit],
    samples: int = CURVE_SAMPLES,
    project: bool = False,
    min_decades: float = MIN_DECADES,
) -> ScalingFit:
    """
    log d_H against log |E| for the distance between each orbit's outer
    stretches and its homoclinics.

    Raises:
        InsufficientRange: fewer than `min_decades` decades of E.
    """
    energies = family.energies
    distances = np.array(
        [skeleton_distance(o, library, samples, project) for o in family.orbits]
    )
    keep = distances > 0.0
    return _fit(
        "hausdorff_x" if project else "hausdorff",
        "loglog",
        np.log(np.abs(energies[keep])),
        np.log(distances[keep]),
        energies[keep],
        min_decades=min_decades,
    )


def transit_time_fit(
    energies: Sequence[float],
    times: Sequence[float],
    exponent: float,
    tolerance: float = 0.02,
    min_decades: float = MIN_DECADES,
    band_bound: Optional[float] = TRANSIT_BAND,
) -> ScalingFit:
    """
    Inner transit time against ln(1 / |E|); the slope should be 1 / lambda_1
    and the residual band is the fitted constant c_E, whose width must stay
    below `band_bound`.
    """
    energies = np.asarray(energies, dtype=float)
    times = np.asarray(times, dtype=float)
    x = np.log(1.0 / np.abs(energies))
    fit = _fit(
        "inner_transit_time", "semilog", x, times, energies,
        expected=1.0 / exponent, tolerance=tolerance, min_decades=min_decades,
    )
    offsets = times - x / exponent
    return fit.model_copy(
        update={"band": [float(offsets.min()), float(offsets.max())], "band_bound": band_bound}
    )


def _inner_records(families: Sequence[CylinderFamily]) -> Tuple[np.ndarray, np.ndarray]:
    energies, times = [], []
    for family in families:
        for orbit in family.orbits:
            for leg in orbit.legs[1::2]:
                energies.append(orbit.energy)
                times.append(leg.transit_time)
    return np.array(energies), np.array(times)


def floquet_scaling_fit(
    family: CylinderFamily,
    exponents: Sequence[float],
    tolerance: float = 0.05,
    pairing_tol: float = 1e-4,
    min_decades: float = MIN_DECADES,
) -> FloquetScaling:
    """
    log sigma_i against log(1 / |E|) for each expanding multiplier; with k
    inner passages per period the slope should be k lambda_i / lambda_1.
    """
    exponents = np.asarray(exponents, dtype=float)
    reports = [o.floquet or floquet_analysis(o, pairing_tol) for o in family.orbits]
    energies = family.energies
    k = family.spec.k
    x = np.log(1.0 / np.abs(energies))
    fits = []
    for i in range(len(exponents) - 1):
        sigma = np.array([r.multipliers[i] for r in reports])
        slope = k * exponents[i + 1] / exponents[0]
        mu = sigma * np.abs(energies) ** slope
        fits.append(
            _fit(
                f"sigma_{i + 2}", "loglog", x, np.log(sigma), energies,
                expected=slope, tolerance=tolerance,
                band=[float(mu.min()), float(mu.max())], min_decades=min_decades,
            )
        )
    deviation = max((abs(r.sigma_1 - 1.0) for r in reports), default=0.0)
    return FloquetScaling(fits=fits, sigma_1_deviation=float(deviation))


# ------------------------------------------------------------------------------
# JOIN & VERTEX
# ------------------------------------------------------------------------------


def _richardson(orbits: List[PeriodicOrbit], anchor: int) -> Tuple[np.ndarray, PeriodicOrbit]:
    """dw/dE at the smallest |E| from three orbits, second order."""
    o1, o2, o3 = sorted(orbits, key=lambda o: abs(o.energy))[:3]
    w1, w2, w3 = (o.anchors[anchor] for o in (o1, o2, o3))
    h2 = o2.energy - o1.energy
    h3 = o3.energy - o1.energy
    d12 = (w2 - w1) / h2
    d13 = (w3 - w1) / h3
    return (h3 * d12 - h2 * d13) / (h3 - h2), o1


def c1_join_test(
    positive: CylinderFamily,
    negative: CylinderFamily,
    model: HamiltonianModel,
    chart: LocalChart,
    library: Sequence[HomoclinicOrbit],
    tol_join: float = 1e-3,
    required: float = 1e-10,
) -> JoinReport:
    """
    Compares the one-sided energy derivatives of the entry anchor of the
    homoclinic shared by an E > 0 and an E < 0 family.

    Raises:
        FamiliesTooShort: either family stops above `required` in |E|, or
            has fewer than three orbits.
    """
    for family in (positive, negative):
        smallest = float(np.min(np.abs(family.energies))) if len(family) else np.inf
        if len(family) < 3 or smallest > required:
            raise FamiliesTooShort(smallest, required)

    shared = negative.spec.order[0]
    if shared not in positive.spec.order:
        raise InconsistentCovering(f"Homoclinic {shared} is not on the E > 0 chain")
    anchor = 2 * positive.spec.order.index(shared)

    d_plus, o_plus = _richardson(positive.orbits, anchor)
    d_minus, o_minus = _richardson(negative.orbits, 0)
    n = chart.n
    hats = hat_indices(n)
    u_hat, v_hat = hats[: n - 1], hats[n - 1 :]

    failures = []
    scale = max(np.linalg.norm(d_plus[u_hat]), np.linalg.norm(d_minus[u_hat]), 1e-300)
    hat_u_defect = float(np.linalg.norm(d_plus[u_hat] - d_minus[u_hat]) / scale) if n > 1 else 0.0
    if hat_u_defect > tol_join:
        failures.append(f"u^ derivatives differ by {hat_u_defect:.2e} (relative)")

    first = abs(d_plus[n])
    hat_v_plus = float(np.linalg.norm(d_plus[v_hat]))
    hat_v_minus = float(np.linalg.norm(d_minus[v_hat]))
    for side, value in (("E > 0", hat_v_plus), ("E < 0", hat_v_minus)):
        if value > tol_join * first:
            failures.append(f"v^ derivative {value:.2e} not small on the {side} side")

    alignment = None
    if n > 1:
        homoclinic = library[shared]
        outer = outer_map(chart, model, homoclinic.entry.w, homoclinic)
        A11 = outer.jacobian[np.ix_(u_hat, u_hat)]
        A13 = outer.jacobian[u_hat, n]
        predicted = -np.linalg.solve(A11, A13) * d_plus[n]
        alignment = float(np.linalg.norm(d_plus[u_hat] - predicted) / scale)
        if alignment > tol_join:
            failures.append(f"u^ derivative off the predicted direction by {alignment:.2e}")

    identity = []
    for d, w in ((d_plus, o_plus.anchors[anchor]), (d_minus, o_minus.anchors[0])):
        grad = chart.d_from_local(w).T @ model.gradient(chart.from_local(w))
        identity.append(float(grad @ d))
    for value in identity:
        if abs(value - 1.0) > 1e-4:
            failures.append(f"<grad H, dz/dE> = {value:.6f}")

    return JoinReport(
        derivative_plus=d_plus.tolist(),
        derivative_minus=d_minus.tolist(),
        hat_u_defect=hat_u_defect,
        hat_v_plus=hat_v_plus,
        hat_v_minus=hat_v_minus,
        alignment_defect=alignment,
        energy_identity=identity,
        leading_v1=float(d_plus[n] * chart.exponents[0] * chart.r),
        tolerance=tol_join,
        failures=failures,
    )


def _local_points(
    family: CylinderFamily, model: HamiltonianModel, chart: LocalChart
) -> np.ndarray:
    points = []
    for orbit in family.orbits:
        for z in orbit.segment.states:
            reduced, _ = model.reduce(z)
            if chart.linear_radius(reduced) < chart.r_prime:
                points.append(chart.to_local(reduced, check=False))
    return np.array(points).reshape(-1, 2 * chart.n)


def _vertex_slope(points: np.ndarray, n: int) -> Optional[float]:
    hats = hat_indices(n)
    first = np.hypot(points[:, 0], points[:, n])
    rest = np.linalg.norm(points[:, hats], axis=1)
    keep = (rest > 0.0) & (first > 0.0)
    if np.count_nonzero(keep) < 3:
        return None
    return float(linregress(np.log(first[keep]), np.log(rest[keep])).slope)


def vertex_differentiability_test(
    families: Sequence[CylinderFamily],
    model: HamiltonianModel,
    chart: LocalChart,
    nu: Optional[float] = None,
    min_points: int = 10,
) -> VertexReport:
    """
    Fits log |(u^, v^)| against log |(u_1, v_1)| over the points of the
    cylinder inside the chart ball. A slope of at least 1 + nu' means
    every leaf is tangent to the (u_1, v_1)-plane at the saddle.

    Raises:
        TooFewPoints: fewer than `min_points` points inside the ball.
    """
    lam = chart.exponents
    ratio_gap = (lam[1] / lam[0] - 1.0) if len(lam) > 1 else 1.0
    nu_prime = min(nu, ratio_gap) / 2.0 if nu is not None else ratio_gap / 2.0
    threshold = 1.0 + nu_prime

    leaves = [_local_points(f, model, chart) for f in families]
    points = np.vstack(leaves) if leaves else np.zeros((0, 2 * chart.n))
    if points.shape[0] < min_points:
        raise TooFewPoints(points.shape[0], min_points)

    hats = hat_indices(chart.n)
    if hats.size == 0 or np.all(points[:, hats] == 0.0):
        return VertexReport(points=points.shape[0], slope=None, threshold=threshold, exact_zero=True)

    slope = _vertex_slope(points, chart.n)
    leaf_slopes = [s for s in (_vertex_slope(p, chart.n) for p in leaves if len(p)) if s is not None]
    return VertexReport(
        points=points.shape[0],
        slope=slope,
        threshold=threshold,
        leaf_slopes=leaf_slopes,
    )


# ------------------------------------------------------------------------------
# NORMAL HYPERBOLICITY
# ------------------------------------------------------------------------------


def _growth_rate(fundamental: np.ndarray, times: np.ndarray, vector: np.ndarray) -> Tuple[float, float]:
    norms = np.linalg.norm(fundamental @ vector, axis=1)
    result = linregress(np.abs(times - times[0]), np.log(norms / np.linalg.norm(vector)))
    return float(result.slope), float(result.stderr)


def _subspace_rate(fundamental: np.ndarray, times: np.ndarray, basis: np.ndarray) -> Tuple[float, float]:
    """Growth of the largest singular value of Psi(t) restricted to `basis`."""
    sizes = np.linalg.norm(fundamental @ basis, ord=2, axis=(1, 2))
    result = linregress(np.abs(times - times[0]), np.log(sizes))
    return float(result.slope), float(result.stderr)


def window_rates(
    model: HamiltonianModel,
    z0: np.ndarray,
    duration: float,
    tangent: Sequence[np.ndarray],
    tol: float = 1e-12,
    samples: int = WINDOW_SAMPLES,
) -> WindowRates:
    """
    Fits growth rates over [0, duration] from z0. The tangent rate is the
    fastest of the `tangent` vectors; the expanding rate is that of the
    orthogonal complement of their span, and the contracting rate the same
    measured backward from the end of the window.
    """
    z0 = np.asarray(z0, dtype=float)
    max_step = duration / samples
    basis = orth(np.column_stack(tangent))
    forward = integrate_variational(model, z0, (0.0, duration), tol=tol, max_step=max_step)
    times = forward.base.times
    t_rate, t_err = max(
        (_growth_rate(forward.fundamental, times, v) for v in tangent), key=lambda f: abs(f[0])
    )
    e_rate, e_err = _subspace_rate(forward.fundamental, times, null_space(basis.T))

    end_basis = orth(forward.final @ basis)
    backward = integrate_variational(
        model, forward.base.end, (0.0, -duration), tol=tol, max_step=max_step
    )
    c_rate, c_err = _subspace_rate(backward.fundamental, backward.base.times, null_space(end_basis.T))
    return WindowRates(
        duration=duration,
        tangent_rate=t_rate,
        tangent_stderr=t_err,
        expanding_rate=e_rate,
        expanding_stderr=e_err,
        contracting_rate=c_rate,
        contracting_stderr=c_err,
    )


def _inner_window(
    model: HamiltonianModel, chart: LocalChart, segment: OrbitSegment, first: bool = False
) -> Optional[Tuple[int, int]]:
    """
    Sample indices [start, stop) of the longest (or the first) stretch
    inside the ball of radius r'.
    """
    inside = np.array(
        [chart.linear_radius(model.reduce(z)[0]) < chart.r_prime for z in segment.states],
        dtype=int,
    )
    edges = np.flatnonzero(np.diff(np.concatenate([[0], inside, [0]]))).reshape(-1, 2)
    if edges.size == 0:
        return None
    start, stop = edges[0] if first else max(edges, key=lambda run: run[1] - run[0])
    if stop - start < (1 if first else 2):
        return None
    return int(start), int(stop)


def _slack(chart: LocalChart) -> float:
    lam1, lam2 = chart.exponents[0], chart.exponents[1]
    if chart.cone_constants is not None:
        return min(chart.cone_constants.c * chart.r_prime, 0.5 * (lam2 - lam1))
    return 0.5 * (lam2 - lam1)


def normal_hyperbolicity_test(
    atlas: CylinderAtlas,
    model: HamiltonianModel,
    chart: LocalChart,
    tol: float = 1e-12,
    continuity: float = 0.1,
    raise_on_failure: bool = True,
) -> HyperbolicityReport:
    """
    Fits growth rates over the inner passage of the smallest-|E| orbit of
    each family, and over a window of the same length on the first skeleton
    homoclinic ending where it leaves the ball of radius r'. Tangent rates
    must stay within lambda_1 + c r, normal rates above lambda_2 - c r, and
    the homoclinic normal rate within `continuity` of the periodic one.

    Raises:
        GapNotResolved: any of the bounds above fails.
    """
    if chart.n < 2:
        return HyperbolicityReport(
            tangent_rate=0.0, tangent_stderr=0.0, normal_rate=0.0, normal_stderr=0.0,
            gap=0.0, sigma=0.0, vacuous=True,
        )
    windows: List[WindowRates] = []
    for family in atlas.families:
        ordered = sorted(family.orbits, key=lambda o: abs(o.energy))
        orbit = ordered[0]
        # two periods hold one whole inner passage
        trace = integrate(
            model, orbit.segment(0.0), (0.0, 2.0 * orbit.period), tol=tol,
            max_step=orbit.period / CURVE_SAMPLES,
        )
        window = _inner_window(model, chart, trace)
        if window is None:
            continue
        start, stop = window
        t_a, t_b = trace.times[start], trace.times[stop - 1]
        z_a = model.reduce(trace.states[start])[0]
        directions = [model.vector_field(z_a)]
        if len(ordered) > 1:
            neighbour = ordered[1]
            phase = math.fmod(t_a, orbit.period) / orbit.period
            directions.append(model.reduce(neighbour.segment(phase * neighbour.period))[0] - z_a)
        windows.append(window_rates(model, z_a, t_b - t_a, directions, tol))
    if not windows:
        raise NHICError("no family enters the ball of radius r'")

    tangent = max(windows, key=lambda w: abs(w.tangent_rate))
    expanding = min(windows, key=lambda w: w.expanding_rate)
    contracting = min(windows, key=lambda w: w.contracting_rate)
    normal_rate = min(expanding.expanding_rate, contracting.contracting_rate)
    normal_stderr = (
        expanding.expanding_stderr
        if expanding.expanding_rate <= contracting.contracting_rate
        else contracting.contracting_stderr
    )
    duration = max(w.duration for w in windows)

    homoclinic = None
    if atlas.skeleton:
        segment = atlas.skeleton[0].segment
        window = _inner_window(model, chart, segment, first=True)
        if window is not None:
            exit_index = window[1] - 1
            exit_time = segment.times[exit_index] - segment.times[0]
            z_exit = segment.states[exit_index]
            z_a = integrate(model, z_exit, (0.0, -duration), tol=tol).end
            homoclinic = window_rates(model, z_a, duration, [model.vector_field(z_a)], tol)
            logger.debug(
                f"Homoclinic window of {duration:.3f} ending {exit_time:.3f} into the orbit"
            )

    report = HyperbolicityReport(
        tangent_rate=tangent.tangent_rate,
        tangent_stderr=tangent.tangent_stderr,
        normal_rate=expanding.expanding_rate,
        normal_stderr=expanding.expanding_stderr,
        gap=normal_rate - abs(tangent.tangent_rate),
        sigma=math.hypot(tangent.tangent_stderr, normal_stderr),
        contracting_rate=contracting.contracting_rate,
        contracting_stderr=contracting.contracting_stderr,
        exponents=[float(chart.exponents[0]), float(chart.exponents[1])],
        slack=_slack(chart),
        homoclinic_tangent_rate=None if homoclinic is None else homoclinic.tangent_rate,
        homoclinic_tangent_stderr=0.0 if homoclinic is None else homoclinic.tangent_stderr,
        homoclinic_normal_rate=None if homoclinic is None else homoclinic.expanding_rate,
        homoclinic_normal_stderr=0.0 if homoclinic is None else homoclinic.expanding_stderr,
        homoclinic_contracting_rate=None if homoclinic is None else homoclinic.contracting_rate,
        continuity=continuity,
    )
    if raise_on_failure and not report.passed:
        raise GapNotResolved(report.gap, report.sigma)
    return report


def mesh_invariance(
    atlas: CylinderAtlas,
    model: HamiltonianModel,
    epsilon: float = 1e-3,
    tol: float = 1e-12,
) -> MeshInvarianceReport:
    """Flows every mesh vertex for time epsilon and measures the distance back to the mesh."""
    mesh = atlas.mesh
    tree = cKDTree(mesh.vertices)
    flowed = np.array([integrate(model, z, (0.0, epsilon), tol=tol).end for z in mesh.vertices])
    distances, _ = tree.query(flowed)
    return MeshInvarianceReport(
        epsilon=epsilon,
        vertices=len(mesh.vertices),
        max_distance=float(np.max(distances)),
        resolution=mesh.resolution,
    )


# ------------------------------------------------------------------------------
# ALIGNMENT
# ------------------------------------------------------------------------------


def alignment_trend(
    energies: Sequence[float],
    ratios: Sequence[float],
    decades: float = ALIGNMENT_DECADES,
    final: float = ALIGNMENT_FINAL,
    noise: float = ALIGNMENT_NOISE,
) -> List[str]:
    """
    Failures of the eigenvector alignment ratios of one family: ordered by
    decreasing |E|, they must not increase (by more than `noise`) over the
    last `decades` decades and must end below `final`. Empty when the
    family passes.
    """
    energies = np.abs(np.asarray(energies, dtype=float))
    ratios = np.asarray(ratios, dtype=float)
    if energies.size < 2:
        return ["fewer than two orbits"]
    order = np.argsort(-energies)
    energies, ratios = energies[order], ratios[order]
    window = energies <= energies[-1] * 10.0**decades
    failures = []
    rises = np.flatnonzero(np.diff(ratios[window]) > noise)
    if rises.size:
        e = energies[window][rises[0] + 1]
        failures.append(f"ratio rises at |E| = {e:.2e}")
    if not ratios[-1] < final:
        failures.append(f"ratio {ratios[-1]:.2e} at |E| = {energies[-1]:.2e} not below {final:g}")
    return failures


# ------------------------------------------------------------------------------
# VERIFICATION
# ------------------------------------------------------------------------------


def _fit_check(name: str, fit: ScalingFit, threshold: str) -> CheckResult:
    return CheckResult(
        name=name,
        passed=fit.passed,
        value=fit.slope,
        threshold=threshold,
        detail=f"{fit.decades:.1f} decades, residual {fit.residual:.2e}",
    )


def verify(
    atlas: CylinderAtlas,
    model: HamiltonianModel,
    chart: LocalChart,
    library: Sequence[HomoclinicOrbit],
    checks: Checks = Checks(),
    tolerances: Tolerances = Tolerances(),
    probes: int = 5,
    seed: int = 0,
    min_decades: float = MIN_DECADES,
    join_energy: float = 1e-10,
) -> CylinderAtlas:
    """
    Runs every enabled check against an atlas and attaches the report. A
    check that cannot run (too few points, too short a range) is recorded
    as failed with the reason.
    """
    lam = chart.exponents
    results: List[CheckResult] = []
    constants: Dict[str, float] = {}
    details: Dict[str, object] = {}

    def attempt(name: str, run) -> None:
        try:
            run()
        except NHICError as e:
            logger.warning(f"Check '{name}' could not complete: {e}")
            results.append(CheckResult(name=name, passed=False, detail=str(e)))

    def transit() -> None:
        for label, families in (("E > 0", atlas.positive), ("E < 0", atlas.negative)):
            energies, times = _inner_records(families)
            fit = transit_time_fit(energies, times, lam[0], tolerance=0.02, min_decades=min_decades)
            constants[f"c_E ({label})"] = float(fit.band_width)
            results.append(
                _fit_check(
                    f"transit_time {label}", fit,
                    f"1/lambda_1 = {1 / lam[0]:.4f} +- 2%, c_E band < {fit.band_bound:g}",
                )
            )

    def hausdorff() -> None:
        for family in atlas.families:
            fit = hausdorff_convergence(family, library, min_decades=min_decades)
            projected = hausdorff_convergence(family, library, project=True, min_decades=min_decades)
            ok = 0.8 <= fit.slope <= 1.05
            results.append(
                CheckResult(
                    name=f"hausdorff {family.label}", passed=ok, value=fit.slope,
                    threshold="[0.8, 1.05]",
                    detail=f"x-projection slope {projected.slope:.3f}",
                )
            )

    def floquet() -> None:
        for family in atlas.families:
            scaling = floquet_scaling_fit(
                family, lam, pairing_tol=tolerances.pairing, min_decades=min_decades
            )
            for fit in scaling.fits:
                constants[f"mu ({family.label}, {fit.quantity})"] = fit.band[0]
                results.append(_fit_check(f"floquet {family.label} {fit.quantity}", fit, f"{fit.expected:.4f} +- 5%"))
            results.append(
                CheckResult(
                    name=f"sigma_1 {family.label}", passed=scaling.sigma_1_deviation < 0.1,
                    value=scaling.sigma_1_deviation, threshold="< 0.1",
                )
            )

    def alignment() -> None:
        for family in atlas.families:
            reports = [o.floquet or floquet_analysis(o, tolerances.pairing) for o in family.orbits]
            pairs = [
                (o.energy, max(r.eigenvector_ratios))
                for o, r in zip(family.orbits, reports)
                if r.eigenvector_ratios
            ]
            energies = [e for e, _ in pairs]
            ratios = [q for _, q in pairs]
            failures = alignment_trend(energies, ratios)
            smallest = min(pairs, key=lambda p: abs(p[0]), default=(None, None))[1]
            results.append(
                CheckResult(
                    name=f"eigenvector_alignment {family.label}", passed=not failures,
                    value=smallest,
                    threshold=f"non-increasing as |E| -> 0, < {ALIGNMENT_FINAL:g} at the smallest |E|",
                    detail="; ".join(failures),
                )
            )

    def join() -> None:
        for negative in atlas.negative:
            positive = next(
                (f for f in atlas.positive if negative.spec.order[0] in f.spec.order), None
            )
            if positive is None:
                raise InconsistentCovering(f"No E > 0 family meets {negative.label}")
            report = c1_join_test(
                positive, negative, model, chart, library, tolerances.join, join_energy
            )
            details[f"join {negative.label}"] = report.model_dump()
            results.append(
                CheckResult(
                    name=f"c1_join {negative.label}", passed=report.passed,
                    value=report.hat_u_defect, threshold=f"< {tolerances.join:g}",
                    detail="; ".join(report.failures),
                )
            )

    def vertex() -> None:
        report = vertex_differentiability_test(atlas.families, model, chart)
        results.append(
            CheckResult(
                name="vertex", passed=report.passed, value=report.slope,
                threshold=f">= {report.threshold:.3f}",
                detail="exact zero" if report.exact_zero else "",
            )
        )

    def hyperbolicity() -> None:
        report = normal_hyperbolicity_test(atlas, model, chart, raise_on_failure=False)
        results.append(
            CheckResult(
                name="normal_hyperbolicity", passed=report.passed, value=report.gap,
                threshold=f"> 3 sigma = {3 * report.sigma:.2e}, rates within c r = {report.slack:.3g}",
                detail="vacuous (n = 1)" if report.vacuous else "; ".join(report.failures),
            )
        )

    def expansion() -> None:
        if chart.n < 2:
            return
        if chart.cone_constants is None:
            raise NHICError("no cone constants on the chart")
        constants["c"] = chart.cone_constants.c
        constants["c'"] = chart.cone_constants.c_prime
        for family in atlas.families:
            ordered = sorted(family.orbits, key=lambda o: abs(o.energy))
            for orbit in (ordered[0], ordered[-1]):
                reports = [
                    verify_expansion_contraction(leg, chart, seed=seed) for leg in orbit.legs[1::2]
                ]
                violations = [v for r in reports for v in r.violations]
                results.append(
                    CheckResult(
                        name=f"expansion_contraction {family.label} E={orbit.energy:.1e}",
                        passed=not violations,
                        value=min(r.expansion for r in reports),
                        threshold="stretch > 1 within the frozen c, c'",
                        detail="; ".join(violations),
                    )
                )

    def invariance() -> None:
        report = mesh_invariance(atlas, model)
        results.append(
            CheckResult(
                name="mesh_invariance", passed=report.passed, value=report.max_distance,
                threshold=f"< {report.resolution:.2e}",
            )
        )

    def symmetry() -> None:
        for family in atlas.negative:
            reports = [symmetric_crossings(model, o) for o in family.orbits]
            worst = max(r.reflection_distance for r in reports)
            results.append(
                CheckResult(
                    name=f"symmetry {family.label}",
                    passed=worst < 1e-7 and all(r.zero_momentum_crossings == 2 for r in reports),
                    value=worst, threshold="< 1e-7, two crossings of y = 0",
                )
            )

    def oracle() -> None:
        if chart.n != 2:
            return
        for family in atlas.positive:
            orbit = min(family.orbits, key=lambda o: abs(o.energy))
            result = graph_transform_oracle(
                model, chart, family.spec, library, orbit.energy,
                newton_anchor=orbit.anchors[0][hat_indices(2)],
            )
            results.append(
                CheckResult(
                    name=f"oracle {family.label}", passed=result.agreement < 1e-6,
                    value=result.agreement, threshold="< 1e-6",
                    detail=f"{result.iterations} graph-transform iterations",
                )
            )

    def periods() -> None:
        for family in atlas.families:
            report = period_law(family, lam[0])
            constants[f"period offset band ({family.label})"] = report.band
            results.append(
                CheckResult(
                    name=f"period_law {family.label}", passed=report.bounded,
                    value=report.band,
                    threshold=f"band < {report.band_bound:g}, drift <= {report.drift_tolerance:g}",
                    detail=f"drift {report.drift:.3g}",
                )
            )

    def uniqueness() -> None:
        for family in atlas.families:
            orbit = min(family.orbits, key=lambda o: abs(o.energy))
            report = uniqueness_probe(model, chart, orbit, library, probes, seed)
            results.append(
                CheckResult(
                    name=f"uniqueness {family.label}", passed=report.unique,
                    value=float(report.converged), threshold="one solution",
                    detail=f"{report.flagged} flagged, {report.diverged} diverged",
                )
            )

    suite = {
        "transit_time": transit,
        "hausdorff": hausdorff,
        "floquet_scaling": floquet,
        "eigenvector_alignment": alignment,
        "c1_join": join,
        "vertex": vertex,
        "normal_hyperbolicity": hyperbolicity,
        "expansion_contraction": expansion,
        "mesh_invariance": invariance,
        "symmetry": symmetry,
        "period_law": periods,
        "uniqueness": uniqueness,
        "oracle": oracle,
    }
    for name in checks.enabled():
        if name in suite:
            logger.info(f"Running check '{name}'")
            attempt(name, suite[name])

    report = VerificationReport(
        system=model.name,
        hole_count=atlas.hole_count,
        h=list(atlas.chain.h),
        ell=atlas.chain.ell,
        checks=results,
        fitted_constants=constants,
        caveat=C1_CAVEAT,
        details=details,
    )
    if not report.passed:
        logger.warning(f"Verification failed: {', '.join(report.failed)}")
    return CylinderAtlas(
        positive=atlas.positive,
        negative=atlas.negative,
        skeleton=atlas.skeleton,
        chain=atlas.chain,
        hole_count=atlas.hole_count,
        junctions=atlas.junctions,
        mesh=atlas.mesh,
        verification=report,
    )
