"""
🌀 nhicyl.homoclinics

Contains the shooting method for homoclinic orbits of the saddle, their
s-symmetric partners, the transversality certificate and the search for a
covering torus in which a chain of homoclinics closes up without
self-intersection.
"""

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.spatial import cKDTree

from .common.errors import (
    BlowUp,
    EscapedDomain,
    EventNotReached,
    FlowError,
    HomoclinicError,
    NoConvergence,
    NoCoveringFound,
    TangencyDetected,
    WrongApproachDirection,
)
from .flow import integrate_to_event, integrate_variational, locate_events
from .localframe import approach_direction
from .types.chart import LocalChart
from .types.homoclinic import (
    H2Certificate,
    HomoclinicChain,
    HomoclinicOrbit,
    SectionCrossing,
)
from .types.orbits import EventHit, EventSpec
from .types.system import HamiltonianModel

logger = logging.getLogger(__name__)

__all__ = [
    "find_homoclinics",
    "homoclinic_from_start",
    "pair_by_symmetry",
    "check_H2",
    "transversality_margin",
    "analyze_H3",
    "is_shrinkable",
    "class_label",
]


MAX_NEWTON_STEPS = 30
DEDUPE_TOLERANCE = 1e-6
CURVE_SAMPLES = 2000
RANK_CUTOFF = 1e-4
MATCH_SCAN = 41
MATCH_SPREAD = 20.0
MATCH_CONVERGED = 1e-11
MATCH_TOLERANCE = 1e-6


def class_label(homology_class: Sequence[int]) -> str:
    return "(" + ",".join(str(int(c)) for c in homology_class) + ")"


def is_shrinkable(orbit: HomoclinicOrbit) -> bool:
    """A homoclinic with zero class is contractible on the torus."""
    return not any(orbit.homology_class)


# ------------------------------------------------------------------------------
# SHOOTING
# ------------------------------------------------------------------------------


def _return_event(eps0: float) -> EventSpec:
    return EventSpec(kind="ball", level=eps0, direction="decreasing", chart="uv", label="return")


def _shoot(
    model: HamiltonianModel,
    chart: LocalChart,
    w0: np.ndarray,
    t_max: float,
    tol: float,
    box: float,
    variational: bool = False,
    seed=None,
) -> EventHit:
    eps0 = float(np.linalg.norm(w0))
    try:
        return integrate_to_event(
            model,
            chart.from_local(w0),
            _return_event(eps0),
            t_max,
            tol=tol,
            chart=chart,
            variational=variational,
            bound=box,
        )
    except BlowUp as e:
        raise EscapedDomain(seed, str(e)) from e
    except EventNotReached as e:
        raise NoConvergence(seed, float("inf")) from e


def _crossing(
    model: HamiltonianModel,
    chart: LocalChart,
    hit_list: List[Tuple[float, np.ndarray]],
    kind: str,
    sign: int,
    shift: np.ndarray,
    last: bool,
) -> Optional[SectionCrossing]:
    selected = []
    for t, z in hit_list:
        reduced, cell = model.reduce(z)
        if np.array_equal(cell, shift):
            selected.append((t, chart.to_local(reduced, check=False), cell))
    if not selected:
        return None
    t, w, cell = selected[-1] if last else selected[0]
    return SectionCrossing(kind=kind, sign=sign, t=float(t), w=w, lattice_shift=cell)


def _sign(value: float) -> int:
    return 1 if value >= 0.0 else -1


def _record(
    model: HamiltonianModel,
    chart: LocalChart,
    hit: EventHit,
    w0: np.ndarray,
    seed=None,
) -> HomoclinicOrbit:
    n = model.n
    segment = hit.segment
    homology_class = tuple(int(c) for c in hit.lattice_shift)
    end_w = hit.w_hit
    r = chart.r

    entry_sign = _sign(w0[0])
    exit_sign = _sign(end_w[n])
    entry_event = EventSpec(
        kind="u1",
        level=entry_sign * r,
        direction="increasing" if entry_sign > 0 else "decreasing",
    )
    exit_event = EventSpec(
        kind="v1",
        level=exit_sign * r,
        direction="decreasing" if exit_sign > 0 else "increasing",
    )
    entry = _crossing(
        model, chart, locate_events(model, segment, entry_event, chart),
        "u1", entry_sign, np.zeros(n, dtype=np.int64), last=False,
    )
    exit_ = _crossing(
        model, chart, locate_events(model, segment, exit_event, chart),
        "v1", exit_sign, np.asarray(hit.lattice_shift), last=True,
    )
    if entry is None or exit_ is None:
        raise HomoclinicError(
            f"Homoclinic of class {class_label(homology_class)} misses the sections at r = {r:g}"
        )
    return HomoclinicOrbit(
        segment=segment,
        homology_class=homology_class,
        start_w=np.asarray(w0, dtype=float).copy(),
        end_w=end_w.copy(),
        entry=entry,
        exit=exit_,
        seed=None if seed is None else tuple(float(s) for s in seed),
        mismatch=float(np.linalg.norm(end_w[:n])),
        label=class_label(homology_class),
    )


def homoclinic_from_start(
    model: HamiltonianModel,
    chart: LocalChart,
    w0: np.ndarray,
    t_max: float = 20.0,
    tol: float = 1e-12,
    box: float = 50.0,
    seed=None,
) -> HomoclinicOrbit:
    """
    Integrates from a point of the local unstable manifold until the orbit
    returns to the ball |w| = |w0|, and records it as a homoclinic.
    """
    w0 = np.asarray(w0, dtype=float)
    hit = _shoot(model, chart, w0, t_max, tol, box, seed=seed)
    return _record(model, chart, hit, w0, seed=seed)


def _section_corrected(
    model: HamiltonianModel, chart: LocalChart, hit: EventHit
) -> np.ndarray:
    """Chart-coordinate differential of the hit point with respect to z0."""
    reduced, _ = model.reduce(hit.z_hit)
    D = chart.d_to_local(reduced)
    w = hit.w_hit
    grad = D.T @ (w / np.linalg.norm(w))
    X = model.vector_field(hit.z_hit)
    projector = np.eye(X.shape[0]) - np.outer(X, grad) / float(grad @ X)
    return D @ projector @ hit.fundamental


def _newton(
    model: HamiltonianModel,
    chart: LocalChart,
    omega: np.ndarray,
    eps0: float,
    t_max: float,
    tol: float,
    homoclinic_tol: float,
    box: float,
    seed,
) -> Tuple[np.ndarray, EventHit]:
    """
    Gauss-Newton on the start direction omega so that the first return to
    the ball lands on the local stable manifold {u = 0}.
    """
    n = model.n
    omega = omega / np.linalg.norm(omega)

    def start(direction: np.ndarray) -> np.ndarray:
        return np.concatenate([eps0 * direction, np.zeros(n)])

    hit = _shoot(model, chart, start(omega), t_max, tol, box, variational=n > 1, seed=seed)
    residual = hit.w_hit[:n]
    norm = float(np.linalg.norm(residual))
    if n == 1:
        return omega, hit

    for step in range(MAX_NEWTON_STEPS):
        logger.debug(f"Homoclinic shooting step {step}: mismatch {norm:.3e}")
        if norm < homoclinic_tol:
            return omega, hit
        basis = scipy.linalg.null_space(omega[None, :])
        w0 = start(omega)
        dw0 = np.zeros((2 * n, n - 1))
        dw0[:n] = eps0 * basis
        jac = (_section_corrected(model, chart, hit) @ chart.d_from_local(w0) @ dw0)[:n]
        theta = np.linalg.lstsq(jac, -residual, rcond=None)[0]

        scale = 1.0
        for _ in range(12):
            trial = omega + scale * (basis @ theta)
            trial /= np.linalg.norm(trial)
            try:
                trial_hit = _shoot(
                    model, chart, start(trial), t_max, tol, box, variational=True, seed=seed
                )
                trial_norm = float(np.linalg.norm(trial_hit.w_hit[:n]))
            except (NoConvergence, EscapedDomain):
                trial_norm = float("inf")
            if trial_norm < norm:
                omega, hit, residual, norm = trial, trial_hit, trial_hit.w_hit[:n], trial_norm
                break
            scale *= 0.5
        else:
            raise NoConvergence(seed, norm)

    if norm < homoclinic_tol:
        return omega, hit
    raise NoConvergence(seed, norm)


# ------------------------------------------------------------------------------
# MIDSECTION MATCHING
# ------------------------------------------------------------------------------


def _target_class(chart: LocalChart, omega: np.ndarray) -> np.ndarray:
    """The lattice vector a start direction points at, by its x-part."""
    n = chart.n
    dx = (chart.S[:, :n] @ omega)[:n]
    scale = float(np.max(np.abs(dx)))
    if scale == 0.0:
        return np.zeros(n, dtype=np.int64)
    return np.rint(dx / scale).astype(np.int64)


def _scan_offsets(dim: int) -> np.ndarray:
    """Tangent-plane offsets along each axis, dense near zero."""
    line = MATCH_SPREAD * np.linspace(-1.0, 1.0, MATCH_SCAN) ** 3
    offsets = np.zeros((dim * MATCH_SCAN, dim))
    for k in range(dim):
        offsets[k * MATCH_SCAN : (k + 1) * MATCH_SCAN, k] = line
    return np.unique(offsets, axis=0)


class _Midsection:
    """
    Two legs meeting at {x_i = c_i / 2}: one leaves the origin along W^u,
    the other arrives at the translate c along W^s and is integrated
    backward. Matching the remaining coordinates at the section closes the
    homoclinic of class c.
    """

    def __init__(
        self,
        model: HamiltonianModel,
        chart: LocalChart,
        omega: np.ndarray,
        target: np.ndarray,
        eps0: float,
        horizon: float,
        tol: float,
        box: float,
    ):
        n = model.n
        self.model, self.chart = model, chart
        self.n, self.eps0, self.horizon, self.tol, self.box = n, eps0, horizon, tol, box
        self.target = np.asarray(target, dtype=float)
        i = int(np.argmax(np.abs(target)))
        self.keep = np.array([k for k in range(2 * n) if k not in (i, n + i)])
        self.event = EventSpec(
            kind="x",
            chart="xy",
            index=i,
            level=0.5 * float(target[i]),
            direction="increasing" if target[i] > 0 else "decreasing",
            label="midsection",
        )
        self.base_u = omega / np.linalg.norm(omega)
        toward_origin = -(chart.S[:n, n:].T @ self.target)
        self.base_s = toward_origin / np.linalg.norm(toward_origin)
        self.basis_u = scipy.linalg.null_space(self.base_u[None, :])
        self.basis_s = scipy.linalg.null_space(self.base_s[None, :])

    def direction(self, offset: np.ndarray, stable: bool) -> np.ndarray:
        base, basis = (self.base_s, self.basis_s) if stable else (self.base_u, self.basis_u)
        d = base + basis @ offset
        return d / np.linalg.norm(d)

    def leg(self, offset: np.ndarray, stable: bool) -> np.ndarray:
        n = self.n
        w = np.zeros(2 * n)
        if stable:
            w[n:] = self.eps0 * self.direction(offset, True)
            z0 = self.chart.from_local(w)
            z0[:n] += self.target
            t_max = -self.horizon
        else:
            w[:n] = self.eps0 * self.direction(offset, False)
            z0 = self.chart.from_local(w)
            t_max = self.horizon
        hit = integrate_to_event(self.model, z0, self.event, t_max, tol=self.tol, bound=self.box)
        return hit.z_hit[self.keep]

    def residual(self, params: np.ndarray) -> np.ndarray:
        m = self.n - 1
        return self.leg(params[:m], False) - self.leg(params[m:], True)

    def scan(self) -> Optional[np.ndarray]:
        """Best pair of scanned legs, as a start for the matching Newton."""
        m = self.n - 1
        offsets = _scan_offsets(m)
        legs = {}
        for stable in (False, True):
            points, kept = [], []
            for offset in offsets:
                try:
                    points.append(self.leg(offset, stable))
                    kept.append(offset)
                except FlowError:
                    continue
            legs[stable] = (np.array(kept), np.array(points))
        if not len(legs[False][0]) or not len(legs[True][0]):
            return None
        distance, index = cKDTree(legs[True][1]).query(legs[False][1], k=1)
        best = int(np.argmin(distance))
        logger.debug(f"Midsection scan: closest legs {distance[best]:.3e} apart")
        return np.concatenate([legs[False][0][best], legs[True][0][index[best]]])


def _match_midsection(
    model: HamiltonianModel,
    chart: LocalChart,
    omega: np.ndarray,
    eps0: float,
    t_max: float,
    tol: float,
    box: float,
    seed,
) -> np.ndarray:
    """
    Start direction on the local unstable manifold whose orbit meets the
    backward orbit from the stable manifold of the target translate.

    Raises:
        NoConvergence: no target class, no pair of legs, or the matching
            residual stays above MATCH_TOLERANCE.
    """
    target = _target_class(chart, omega)
    if not np.any(target):
        raise NoConvergence(seed, float("inf"))
    horizon = min(t_max, (np.log(1.0 / eps0) + 8.0) / float(chart.exponents[0]))
    section = _Midsection(model, chart, omega, target, eps0, horizon, tol, box)

    params = section.scan()
    if params is None:
        raise NoConvergence(seed, float("inf"))
    residual = section.residual(params)
    norm = float(np.linalg.norm(residual))
    for step in range(MAX_NEWTON_STEPS):
        logger.debug(f"Midsection matching step {step}: mismatch {norm:.3e}")
        if norm < MATCH_CONVERGED:
            break
        jac = np.empty((residual.size, params.size))
        try:
            for k in range(params.size):
                h = 1e-7 * (1.0 + abs(params[k]))
                shifted = params.copy()
                shifted[k] += h
                jac[:, k] = (section.residual(shifted) - residual) / h
        except FlowError:
            break
        delta = np.linalg.lstsq(jac, -residual, rcond=None)[0]

        scale = 1.0
        for _ in range(12):
            trial = params + scale * delta
            try:
                trial_residual = section.residual(trial)
                trial_norm = float(np.linalg.norm(trial_residual))
            except FlowError:
                trial_norm = float("inf")
            if trial_norm < norm:
                params, residual, norm = trial, trial_residual, trial_norm
                break
            scale *= 0.5
        else:
            break

    if norm > MATCH_TOLERANCE:
        raise NoConvergence(seed, norm)
    logger.debug(f"Midsection matched class {class_label(target)}: mismatch {norm:.3e}")
    return section.direction(params[: model.n - 1], False)


def _solve_seed(
    model: HamiltonianModel,
    chart: LocalChart,
    seed: Sequence[float],
    eps0: float,
    t_max: float,
    tol: float,
    homoclinic_tol: float,
    box: float,
) -> HomoclinicOrbit:
    omega = np.asarray(seed, dtype=float).reshape(model.n)
    if not np.linalg.norm(omega) > 0.0:
        raise NoConvergence(tuple(seed), float("inf"))
    try:
        omega, hit = _newton(
            model, chart, omega, eps0, t_max, tol, homoclinic_tol, box, tuple(seed)
        )
    except (NoConvergence, EscapedDomain) as e:
        if model.n == 1:
            raise
        logger.debug(f"Direct shot from seed {tuple(seed)} failed ({e}); matching at a midsection")
        omega = _match_midsection(model, chart, omega, eps0, t_max, tol, box, tuple(seed))
        omega, hit = _newton(
            model, chart, omega, eps0, t_max, tol, homoclinic_tol, box, tuple(seed)
        )
    w0 = np.concatenate([eps0 * omega, np.zeros(model.n)])
    orbit = _record(model, chart, hit, w0, seed=seed)
    if orbit.mismatch >= homoclinic_tol:
        raise NoConvergence(tuple(seed), orbit.mismatch)
    logger.info(f"Homoclinic {orbit.label} from seed {tuple(seed)}: mismatch {orbit.mismatch:.2e}")
    return orbit


def find_homoclinics(
    model: HamiltonianModel,
    chart: LocalChart,
    seeds: Sequence[Sequence[float]],
    t_max: float = 20.0,
    eps0: Optional[float] = None,
    tol: float = 1e-12,
    homoclinic_tol: float = 1e-8,
    box: float = 50.0,
    jobs: int = 1,
    strict: bool = False,
) -> List[HomoclinicOrbit]:
    """
    Shoots one homoclinic per seed direction on the local unstable manifold.

    Seeds are directions in the u-plane; the start point is eps0 times the
    unit seed (eps0 = r' / 10 by default). Results keep the seed order and
    orbits found twice are reported once.

    Raises:
        NoConvergence, EscapedDomain: only when `strict`; otherwise the seed
            is logged and skipped.
    """
    eps0 = chart.r_prime / 10.0 if eps0 is None else float(eps0)

    def solve(seed):
        try:
            return _solve_seed(model, chart, seed, eps0, t_max, tol, homoclinic_tol, box)
        except (NoConvergence, EscapedDomain, HomoclinicError) as e:
            if strict:
                raise
            logger.warning(f"Seed {tuple(seed)} skipped: {e}")
            return None

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(solve, seeds))

    orbits: List[HomoclinicOrbit] = []
    for orbit in results:
        if orbit is None:
            continue
        duplicate = any(
            np.linalg.norm(orbit.start_w - other.start_w) < DEDUPE_TOLERANCE * eps0
            for other in orbits
        )
        if not duplicate:
            orbits.append(orbit)
    return orbits


def pair_by_symmetry(
    model: HamiltonianModel,
    chart: LocalChart,
    orbit: HomoclinicOrbit,
    t_max: float = 20.0,
    tol: float = 1e-12,
    homoclinic_tol: float = 1e-8,
    box: float = 50.0,
) -> HomoclinicOrbit:
    """
    The partner s z(-t) of a homoclinic: the reflected end point, moved back
    to the cell of the origin, starts the partner on the local unstable
    manifold. The partner is re-integrated and carries the negated class.
    """
    n = model.n
    start = model.reflect(orbit.segment.end)
    start[:n] -= np.asarray(orbit.homology_class, dtype=float)
    w0 = chart.to_local(start)
    w0[n:] = 0.0
    partner = homoclinic_from_start(model, chart, w0, t_max, tol, box)
    if partner.mismatch >= homoclinic_tol:
        omega, hit = _newton(
            model, chart, w0[:n], float(np.linalg.norm(w0)), t_max, tol,
            homoclinic_tol, box, orbit.label,
        )
        partner = _record(model, chart, hit, np.concatenate([np.linalg.norm(w0) * omega, np.zeros(n)]))
    expected = tuple(-int(c) for c in orbit.homology_class)
    if partner.homology_class != expected:
        raise HomoclinicError(
            f"Reflected orbit has class {partner.label}, expected {class_label(expected)}"
        )
    if partner.mismatch >= homoclinic_tol:
        raise NoConvergence(orbit.label, partner.mismatch)
    return partner


# ------------------------------------------------------------------------------
# TRANSVERSALITY
# ------------------------------------------------------------------------------


def _unit_columns(M: np.ndarray) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return M / np.linalg.norm(M, axis=0)


def _basis(M: np.ndarray, cutoff: float = RANK_CUTOFF) -> np.ndarray:
    """Orthonormal basis of the range of M, dropping directions below `cutoff`."""
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    U, s, _ = scipy.linalg.svd(M, full_matrices=False)
    return U[:, s > cutoff]


def transversality_margin(
    unstable: np.ndarray,
    stable: np.ndarray,
    flow: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
) -> float:
    """
    Smallest singular value of the orthonormal bases of two tangent spaces
    placed side by side, after projecting out the flow direction they share.

    Raises:
        TangencyDetected: the margin is below `tol`, when given.
    """
    unstable = _unit_columns(unstable)
    stable = _unit_columns(stable)
    if flow is not None:
        f = np.asarray(flow, dtype=float)
        f = f / np.linalg.norm(f)
        projector = np.eye(f.shape[0]) - np.outer(f, f)
        unstable = projector @ unstable
        stable = projector @ stable
    Bu = _basis(unstable)
    Bs = _basis(stable)
    if Bu.shape[1] == 0 and Bs.shape[1] == 0:
        margin = 1.0
    else:
        combined = np.hstack([Bu, Bs])
        margin = float(np.linalg.svd(combined, compute_uv=False)[-1])
        if combined.shape[1] > combined.shape[0]:
            margin = 0.0
    if tol is not None and margin < tol:
        raise TangencyDetected(margin, tol)
    return margin


def check_H2(
    model: HamiltonianModel,
    chart: LocalChart,
    orbit: HomoclinicOrbit,
    tangency_tol: float = 1e-6,
    angle_tol: float = 1e-3,
    tol: float = 1e-12,
    raise_on_failure: bool = True,
) -> H2Certificate:
    """
    Certifies transversality of W^u and W^s along the homoclinic at the mid
    time of its segment, and that it leaves and returns along Xi_1.

    Tangent spaces are the chart's straightened manifolds at both ends,
    carried to the mid point by forward and backward variational flows.

    Raises:
        TangencyDetected: margin below `tangency_tol`.
        WrongApproachDirection: an approach angle above `angle_tol`.
    """
    n = model.n
    segment = orbit.segment
    t_mid = 0.5 * (segment.t0 + segment.t_end)
    z_start, z_end = segment.start, segment.end

    forward = integrate_variational(model, z_start, (segment.t0, t_mid), tol=tol)
    unstable = forward.final @ chart.d_from_local(orbit.start_w)[:, :n]

    backward = integrate_variational(model, z_end, (segment.t_end, t_mid), tol=tol)
    stable = backward.final @ chart.d_from_local(orbit.end_w)[:, n:]

    flow = model.vector_field(forward.base.end)
    margin = transversality_margin(unstable, stable, flow)

    _, departure = approach_direction(chart, model, orbit.start_w, "unstable")
    _, arrival = approach_direction(chart, model, orbit.end_w, "stable")

    failures = []
    if margin < tangency_tol:
        failures.append(f"tangency: margin {margin:.3e}")
    if departure > angle_tol:
        failures.append(f"departure angle {departure:.3e}")
    if arrival > angle_tol:
        failures.append(f"arrival angle {arrival:.3e}")

    u = orbit.start_w[:n]
    v = orbit.end_w[n:]
    certificate = H2Certificate(
        homology_class=list(orbit.homology_class),
        margin=margin,
        margin_tolerance=tangency_tol,
        departure_angle=departure,
        arrival_angle=arrival,
        angle_tolerance=angle_tol,
        departure_coefficient=float(abs(u[0]) / np.linalg.norm(u)),
        arrival_coefficient=float(abs(v[0]) / np.linalg.norm(v)),
        failures=failures,
    )
    logger.info(
        f"H2 for {orbit.label}: margin {margin:.3e}, angles {departure:.1e} / {arrival:.1e}"
    )
    if raise_on_failure:
        if margin < tangency_tol:
            raise TangencyDetected(margin, tangency_tol)
        if departure > angle_tol:
            raise WrongApproachDirection("departure", departure)
        if arrival > angle_tol:
            raise WrongApproachDirection("arrival", arrival)
    return certificate


# ------------------------------------------------------------------------------
# COVERING SPACE
# ------------------------------------------------------------------------------


def _dense_curve(orbit: HomoclinicOrbit, samples: int = CURVE_SAMPLES) -> np.ndarray:
    segment = orbit.segment
    n = orbit.n
    times = np.linspace(segment.t0, segment.t_end, samples)
    return np.array([segment(t)[:n] for t in times])


def _trimmed(curve: np.ndarray, start: np.ndarray, end: np.ndarray, trim: float) -> np.ndarray:
    keep = (np.linalg.norm(curve - start, axis=1) > trim) & (
        np.linalg.norm(curve - end, axis=1) > trim
    )
    return curve[keep]


def _wrap(points: np.ndarray, h: np.ndarray) -> np.ndarray:
    wrapped = np.mod(points, h)
    return np.where(wrapped >= h, wrapped - h, wrapped)


def _self_separation(curve: np.ndarray, h: np.ndarray, sep_tol: float) -> float:
    """Closest approach of a curve to itself away from its own neighbourhood."""
    if curve.shape[0] < 2:
        return float("inf")
    tree = cKDTree(_wrap(curve, h), boxsize=h)
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(curve, axis=0), axis=1))])
    worst = float("inf")
    for i, j in tree.query_pairs(r=sep_tol):
        if abs(arc[j] - arc[i]) > 4.0 * sep_tol:
            distance = float(np.linalg.norm(curve[i] - curve[j]))
            worst = min(worst, distance)
    return worst


def _candidates(n: int, h_max: int, ell_max: int):
    grid = itertools.product(range(1, h_max + 1), repeat=n)
    pairs = [(np.array(h), ell) for h in grid for ell in range(ell_max + 1)]
    return sorted(pairs, key=lambda p: ((p[1] + 1) * int(np.prod(p[0])), p[1], tuple(p[0])))


def analyze_H3(
    orbits: Sequence[HomoclinicOrbit],
    h_max: int = 4,
    ell_max: int = 3,
    sep_tol: float = 1e-4,
    trim: float = 0.05,
    order: Optional[Sequence[int]] = None,
) -> HomoclinicChain:
    """
    Finds the cheapest covering torus T^n_h = R^n / (h_1 Z x ... x h_n Z)
    and shift count l for which (l + 1) laps of the chain close up, meet
    the lattice at distinct junctions and stay apart from each other.

    Candidates are tried by increasing (l + 1) prod(h), then l, then h.

    Raises:
        NoCoveringFound: no candidate within the bounds.
    """
    if not orbits:
        raise NoCoveringFound(h_max, ell_max)
    k = len(orbits)
    n = orbits[0].n
    order = list(range(k)) if order is None else list(order)
    classes = np.array([o.homology_class for o in orbits], dtype=np.int64)
    total = classes.sum(axis=0)
    curves = [_dense_curve(o) for o in orbits]

    for h, ell in _candidates(n, h_max, ell_max):
        laps = ell + 1
        if np.any(np.mod(laps * total, h) != 0):
            continue
        offsets = []
        position = np.zeros(n, dtype=np.int64)
        for _ in range(laps):
            for c in classes:
                offsets.append(position.copy())
                position = position + c
        junctions = {tuple(np.mod(o, h)) for o in offsets}
        if len(junctions) != len(offsets):
            continue

        box = h.astype(float)
        lifted = []
        for index, offset in enumerate(offsets):
            i = index % k
            start = offset.astype(float)
            end = start + classes[i]
            lifted.append(_trimmed(curves[i] + start, start, end, trim))

        separation = float("inf")
        for a, b in itertools.combinations(range(len(lifted)), 2):
            if lifted[a].shape[0] == 0 or lifted[b].shape[0] == 0:
                continue
            tree = cKDTree(_wrap(lifted[b], box), boxsize=box)
            distance, _ = tree.query(_wrap(lifted[a], box))
            separation = min(separation, float(np.min(distance)))
        for curve in lifted:
            separation = min(separation, _self_separation(curve, box, sep_tol))

        logger.debug(f"Covering h = {h.tolist()}, l = {ell}: separation {separation:.3e}")
        if separation > sep_tol:
            chain = HomoclinicChain(
                order=order,
                classes=classes.tolist(),
                h=h.tolist(),
                ell=ell,
                separation=separation,
                junctions=[list(map(int, np.mod(o, h))) for o in offsets],
                labels=[o.label or class_label(o.homology_class) for o in orbits],
            )
            logger.info(
                f"Chain {chain.labels} closes in T^n_h with h = {chain.h}, l = {ell} "
                f"({chain.hole_count} holes)"
            )
            return chain

    raise NoCoveringFound(h_max, ell_max)
