"""
🌀 nhicyl.localframe

Contains the construction of the local chart at the saddle: the linear
symplectic diagonalization, polynomial expansions of the local invariant
manifolds by the parameterization method, the two generating-function
shears that straighten them, and the cone and approach-direction checks
carried out in the chart.
"""

import logging
import math
from dataclasses import replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize
import sympy as sp
from scipy.integrate import solve_ivp

from .common.cache import cached, make_hashable
from .common.errors import ChartError, ConeViolated, OutOfChart, RadiusTooLarge, SmallDivisor
from .types.chart import (
    CHART_SLACK,
    Branch,
    ConeConstants,
    ConeFamily,
    ConeParams,
    ConeReport,
    LocalChart,
    ManifoldGraph,
)
from .types.orbits import VariationalSegment
from .types.system import HamiltonianModel, SaddleSpectrum, TorusPotential

logger = logging.getLogger(__name__)

__all__ = [
    "build_chart",
    "to_local",
    "from_local",
    "local_jacobians",
    "hamiltonian_in_local",
    "local_vector_field",
    "graph_residual",
    "admissible_alpha",
    "cone_check",
    "approach_direction",
    "chart_to_json",
    "chart_from_json",
    "RESIDUAL_TOLERANCE",
]


RESIDUAL_TOLERANCE = 1e-6
SMALL_DIVISOR = 1e-9
NEAR_RESONANCE = 1e-3
TWO_PI = 2.0 * math.pi

Terms = List[Tuple[Tuple[int, ...], float]]


# ------------------------------------------------------------------------------
# TRUNCATED SERIES
# ------------------------------------------------------------------------------


def _zero(gens: Sequence[sp.Symbol]) -> sp.Poly:
    return sp.Poly(0, *gens, domain="RR")


def _monomial(gens: Sequence[sp.Symbol], exponent: Tuple[int, ...], value: float) -> sp.Poly:
    return sp.Poly.from_dict({tuple(exponent): float(value)}, *gens, domain="RR")


def _truncate(p: sp.Poly, degree: int) -> sp.Poly:
    """Drops every monomial of total degree above `degree`."""
    kept = {m: c for m, c in p.terms() if sum(m) <= degree and c != 0}
    if not kept:
        return _zero(p.gens)
    return sp.Poly.from_dict(kept, *p.gens, domain="RR")


def _homogeneous(p: sp.Poly, degree: int) -> Terms:
    return [(m, float(c)) for m, c in p.terms() if sum(m) == degree and c != 0]


def _combine(coefficients: np.ndarray, polys: Sequence[sp.Poly], gens) -> sp.Poly:
    out = _zero(gens)
    for c, p in zip(coefficients, polys):
        if c != 0.0:
            out = out + p * float(c)
    return out


def _compose(p: sp.Poly, inner: Sequence[sp.Poly], degree: int) -> sp.Poly:
    """p(inner_1, ..., inner_n) truncated at `degree`; inner series have no constant term."""
    gens = inner[0].gens
    powers: Dict[Tuple[int, int], sp.Poly] = {}

    def power(i: int, e: int) -> sp.Poly:
        if (i, e) not in powers:
            powers[(i, e)] = inner[i] if e == 1 else _truncate(power(i, e - 1) * inner[i], degree)
        return powers[(i, e)]

    result = _zero(gens)
    for m, c in p.terms():
        if c == 0 or sum(m) > degree:
            continue
        term = sp.Poly(float(c), *gens, domain="RR")
        for i, e in enumerate(m):
            if e:
                term = _truncate(term * power(i, e), degree)
        result = result + term
    return _truncate(result, degree)


def _force_series(model: HamiltonianModel, x: Sequence[sp.Poly], degree: int) -> List[sp.Poly]:
    """
    Taylor series of grad V(x) - d^2 V(0) x at the origin, with x given as
    series, truncated at `degree`.
    """
    gens = x[0].gens
    n = model.n
    force = [_zero(gens) for _ in range(n)]
    potential = model.potential
    if not isinstance(potential, TorusPotential):
        return force

    one = sp.Poly(1.0, *gens, domain="RR")
    for m, a, b in zip(
        potential.modes, potential.cos_coefficients, potential.sin_coefficients
    ):
        if not m.any():
            continue
        theta = _combine(TWO_PI * m.astype(float), x, gens)
        powers = [one, theta]
        for _ in range(2, degree + 1):
            powers.append(_truncate(powers[-1] * theta, degree))
        # sin(theta) - theta and cos(theta) - 1
        sin_tail = _zero(gens)
        cos_tail = _zero(gens)
        for k in range(2, degree + 1):
            sign = (-1) ** (k // 2)
            if k % 2:
                sin_tail = sin_tail + powers[k] * (sign / math.factorial(k))
            else:
                cos_tail = cos_tail + powers[k] * (sign / math.factorial(k))
        weight = sin_tail * float(-a) + cos_tail * float(b)
        for i in range(n):
            if m[i]:
                force[i] = force[i] + weight * (TWO_PI * float(m[i]))
    return [_truncate(f, degree) for f in force]


def _nonlinear_terms(
    model: HamiltonianModel, S: np.ndarray, S_inv: np.ndarray, w: Sequence[sp.Poly], degree: int
) -> List[sp.Poly]:
    """Nonlinear part of the vector field in linear saddle coordinates."""
    n = model.n
    gens = w[0].gens
    x = [_combine(S[i], w, gens) for i in range(n)]
    force = _force_series(model, x, degree)
    return [_combine(S_inv[c, n:], force, gens) for c in range(2 * n)]


# ------------------------------------------------------------------------------
# PARAMETERIZATION METHOD
# ------------------------------------------------------------------------------


def _parameterize(
    model: HamiltonianModel,
    S: np.ndarray,
    S_inv: np.ndarray,
    exponents: np.ndarray,
    degree: int,
    branch: Branch,
    gens,
) -> List[sp.Poly]:
    """
    Solves the invariance equation of the local manifold order by order:
    (+-<alpha, lambda> - mu_c) K_alpha = N_alpha with mu = (lambda, -lambda).
    """
    n = model.n
    mu = np.concatenate([exponents, -exponents])
    rate = 1.0 if branch == "unstable" else -1.0
    offset = 0 if branch == "unstable" else n

    K = [_zero(gens) for _ in range(2 * n)]
    for i in range(n):
        K[offset + i] = sp.Poly(gens[i], *gens, domain="RR")

    for k in range(2, degree + 1):
        N = _nonlinear_terms(model, S, S_inv, K, k)
        for c in range(2 * n):
            for m, value in _homogeneous(N[c], k):
                divisor = rate * float(np.dot(m, exponents)) - mu[c]
                if abs(divisor) < SMALL_DIVISOR:
                    raise SmallDivisor(m, c, divisor)
                if abs(divisor) < NEAR_RESONANCE:
                    logger.warning(
                        f"Near-resonant divisor {divisor:.3e} at {m}, component {c}"
                    )
                K[c] = K[c] + _monomial(gens, m, value / divisor)
    logger.debug(f"Parameterized {branch} manifold to degree {degree}")
    return K


def _invert(primary: Sequence[sp.Poly], degree: int) -> List[sp.Poly]:
    """Series inverse of a near-identity map s -> primary(s)."""
    gens = primary[0].gens
    identity = [sp.Poly(g, *gens, domain="RR") for g in gens]
    phi = list(identity)
    for _ in range(degree):
        image = [_compose(p, phi, degree) for p in primary]
        phi = [_truncate(identity[i] - (image[i] - phi[i]), degree) for i in range(len(gens))]
    return phi


def _generating_function(graph: Sequence[sp.Poly]) -> Terms:
    """Terms of F with grad F = graph, integrated monomial by monomial."""
    F: Dict[Tuple[int, ...], float] = {}
    for i, g in enumerate(graph):
        for m, c in g.terms():
            if c == 0:
                continue
            key = list(m)
            key[i] += 1
            key = tuple(key)
            # Euler: (j + 1) F_{j+1} = sum_i u_i g_{i,j}
            F[key] = F.get(key, 0.0) + float(c) / (sum(m) + 1)
    return sorted((m, c) for m, c in F.items() if c != 0.0)


def _graph_record(
    branch: Branch, graph: Sequence[sp.Poly], degree: int, radius: float, tail: float
) -> ManifoldGraph:
    monomials = sorted({m for g in graph for m, c in g.terms() if c != 0})
    coefficients = [
        (tuple(int(e) for e in m), [float(dict(g.terms()).get(m, 0.0)) for g in graph])
        for m in monomials
    ]
    return ManifoldGraph(
        branch=branch,
        degree=degree,
        coefficients=coefficients,
        domain_radius=radius,
        tail_residual=tail,
    )


# ------------------------------------------------------------------------------
# ASSEMBLY
# ------------------------------------------------------------------------------


def _lambdify_terms(terms: Terms, n: int):
    gens = sp.symbols(f"s0:{n}")
    expr = sp.Integer(0)
    for m, c in terms:
        expr += sp.Float(c) * sp.Mul(*[g**e for g, e in zip(gens, m)])
    grad = [sp.diff(expr, g) for g in gens]
    hess = [[sp.diff(d, g) for g in gens] for d in grad]
    return (
        sp.lambdify((gens,), grad, "numpy"),
        sp.lambdify((gens,), hess, "numpy"),
    )


def _assemble(
    n: int,
    S: np.ndarray,
    S_inv: np.ndarray,
    exponents: np.ndarray,
    degree: int,
    F_terms: Terms,
    G_terms: Terms,
    unstable_graph: ManifoldGraph,
    stable_graph: ManifoldGraph,
    r_prime: float = 1.0,
    r: float = 0.25,
    delta: float = 0.0625,
    residual: float = 0.0,
    residual_profile: Optional[List[Tuple[float, float]]] = None,
) -> LocalChart:
    grad_F, hess_F = _lambdify_terms(F_terms, n)
    grad_G, hess_G = _lambdify_terms(G_terms, n)
    return LocalChart(
        n=n,
        S=S,
        S_inv=S_inv,
        exponents=np.asarray(exponents, dtype=float),
        degree=degree,
        r_prime=float(r_prime),
        r=float(r),
        delta=float(delta),
        residual=float(residual),
        unstable_graph=unstable_graph,
        stable_graph=stable_graph,
        F_terms=list(F_terms),
        G_terms=list(G_terms),
        residual_profile=list(residual_profile or []),
        grad_F=grad_F,
        hess_F=hess_F,
        grad_G=grad_G,
        hess_G=hess_G,
    )


def _with_radii(chart: LocalChart, **changes: Any) -> LocalChart:
    return replace(chart, **changes)


def _linear_change(model: HamiltonianModel, spectrum: SaddleSpectrum) -> Tuple[np.ndarray, np.ndarray]:
    """
    S = [[P, -P], [R, R]] with P = Q diag(1/sqrt(2 lambda)) and
    R = A^{-1} Q diag(sqrt(lambda / 2)); H_2 becomes sum lambda_i u_i v_i.
    """
    n = model.n
    lam = spectrum.exponents
    P = spectrum.Q / np.sqrt(2.0 * lam)
    R = np.linalg.solve(model.A, spectrum.Q) * np.sqrt(lam / 2.0)
    S = np.block([[P, -P], [R, R]])
    J = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    S_inv = -J @ S.T @ J
    defect = float(np.max(np.abs(S_inv @ S - np.eye(2 * n))))
    if defect > 1e-10:
        raise ChartError(f"Linear change is not symplectic (defect {defect:.3e})")
    return S, S_inv


def _directions(n: int, count: int = 8, seed: int = 0) -> List[np.ndarray]:
    if n == 1:
        return [np.array([1.0]), np.array([-1.0])]
    eye = np.eye(n)
    out = [eye[i] for i in range(n)] + [-eye[i] for i in range(n)]
    rng = np.random.default_rng(seed)
    for _ in range(count):
        d = rng.normal(size=n)
        out.append(d / np.linalg.norm(d))
    return out


def _chart_key(
    model: HamiltonianModel,
    spectrum: SaddleSpectrum,
    degree: int = 5,
    r_prime: Optional[float] = None,
    r: Optional[float] = None,
    delta: Optional[float] = None,
) -> str:
    return make_hashable((model, spectrum.exponents, degree, r_prime, r, delta))


@cached(key_fn=_chart_key)
def build_chart(
    model: HamiltonianModel,
    spectrum: SaddleSpectrum,
    degree: int = 5,
    r_prime: Optional[float] = None,
    r: Optional[float] = None,
    delta: Optional[float] = None,
) -> LocalChart:
    """
    Builds the straightening chart at the saddle.

    The local manifolds are expanded to `degree` by the parameterization
    method and written as graphs v = grad F(u) (unstable) and, after the
    first shear, p = grad G(q) (stable). The chart radius r' is the largest
    dyadic radius <= 1 at which the straightening residual stays below 1e-6,
    unless given.

    Raises:
        SmallDivisor: a divisor of the expansion vanished to 1e-9.
        RadiusTooLarge: the residual at the requested r' exceeds 1e-6.
    """
    if degree < 3:
        raise ChartError(f"Chart degree must be at least 3, got {degree}")
    n = model.n
    lam = np.asarray(spectrum.exponents, dtype=float)
    S, S_inv = _linear_change(model, spectrum)
    gens = sp.symbols(f"s0:{n}")

    unstable = _parameterize(model, S, S_inv, lam, degree, "unstable", gens)
    phi = _invert(unstable[:n], degree)
    g_unstable = [_compose(unstable[n + i], phi, degree) for i in range(n)]
    F_terms = _generating_function(g_unstable)

    F_poly = _zero(gens)
    for m, c in F_terms:
        F_poly = F_poly + _monomial(gens, m, c)
    grad_F_poly = [F_poly.diff(g) for g in gens]

    stable = _parameterize(model, S, S_inv, lam, degree, "stable", gens)
    u_s, v_s = stable[:n], stable[n:]
    q_s = [
        _truncate(v_s[i] - _compose(grad_F_poly[i], u_s, degree), degree) for i in range(n)
    ]
    psi = _invert(q_s, degree)
    g_stable = [_compose(u_s[i], psi, degree) for i in range(n)]
    G_terms = _generating_function(g_stable)

    placeholder = _graph_record("unstable", g_unstable, degree, 1.0, 0.0)
    chart = _assemble(
        n, S, S_inv, lam, degree, F_terms, G_terms, placeholder,
        _graph_record("stable", g_stable, degree, 1.0, 0.0),
    )

    directions = _directions(n)
    if r_prime is None:
        chosen = None
        for k in range(21):
            rho = 2.0**-k
            value = graph_residual(chart, model, rho, directions)
            logger.debug(f"Straightening residual {value:.3e} at radius {rho:g}")
            if value < RESIDUAL_TOLERANCE:
                chosen = rho
                break
        if chosen is None:
            raise RadiusTooLarge(2.0**-20, value, RESIDUAL_TOLERANCE)
        r_prime = chosen
    else:
        value = graph_residual(chart, model, r_prime, directions)
        if value >= RESIDUAL_TOLERANCE:
            raise RadiusTooLarge(r_prime, value, RESIDUAL_TOLERANCE)

    r = r_prime / 4.0 if r is None else float(r)
    delta = r / 4.0 if delta is None else float(delta)
    if not 0.0 < r < r_prime:
        raise ChartError(f"Section radius {r} must lie in (0, {r_prime})")
    if not 0.0 < delta < r:
        raise ChartError(f"Anchor window {delta} must lie in (0, {r})")

    profile = [
        (r_prime / 2.0**j, graph_residual(chart, model, r_prime / 2.0**j, directions))
        for j in range(4)
    ]
    tails = {
        branch: graph_residual(chart, model, r_prime / 2.0, directions, branch=branch)
        for branch in ("unstable", "stable")
    }
    chart = _with_radii(
        chart,
        r_prime=float(r_prime),
        r=r,
        delta=delta,
        residual=profile[0][1],
        residual_profile=profile,
        unstable_graph=_graph_record("unstable", g_unstable, degree, r_prime, tails["unstable"]),
        stable_graph=_graph_record("stable", g_stable, degree, r_prime, tails["stable"]),
    )
    logger.info(
        f"Chart of degree {degree} for {model.name}: r' = {r_prime:g}, r = {r:g}, "
        f"residual {chart.residual:.2e}"
    )
    return chart


# ------------------------------------------------------------------------------
# CHART MAPS
# ------------------------------------------------------------------------------


def to_local(chart: LocalChart, z: np.ndarray, check: bool = True) -> np.ndarray:
    """
    Chart coordinates (u, v) of a reduced phase point.

    Raises:
        OutOfChart: |S^{-1} z| > 1.5 r'.
    """
    return chart.to_local(z, check=check)


def from_local(chart: LocalChart, w: np.ndarray, check: bool = True) -> np.ndarray:
    return chart.from_local(w, check=check)


def local_jacobians(chart: LocalChart, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(D to_local(z), D from_local(to_local(z))) at a reduced phase point."""
    w = chart.to_local(z, check=False)
    return chart.d_to_local(z), chart.d_from_local(w)


def hamiltonian_in_local(chart: LocalChart, model: HamiltonianModel, w: np.ndarray) -> float:
    return model.hamiltonian(chart.from_local(w))


def local_vector_field(chart: LocalChart, model: HamiltonianModel, w: np.ndarray) -> np.ndarray:
    """Pushforward of X_H to chart coordinates."""
    z = chart.from_local(w, check=False)
    return chart.d_to_local(z) @ model.vector_field(z)


def graph_residual(
    chart: LocalChart,
    model: HamiltonianModel,
    rho: float,
    directions: Optional[Sequence[np.ndarray]] = None,
    branch: Optional[Branch] = None,
) -> float:
    """
    Largest straightening defect at radius rho: the transverse component of
    the local field on the axes {v = 0} and {u = 0}, and |H| there.
    """
    n = chart.n
    directions = _directions(n) if directions is None else directions
    branches = ("unstable", "stable") if branch is None else (branch,)
    worst = 0.0
    for d in directions:
        for b in branches:
            w = np.zeros(2 * n)
            if b == "unstable":
                w[:n] = rho * d
            else:
                w[n:] = rho * d
            field = local_vector_field(chart, model, w)
            transverse = field[n:] if b == "unstable" else field[:n]
            energy = abs(model.hamiltonian(chart.from_local(w, check=False)))
            worst = max(worst, float(np.linalg.norm(transverse)), energy)
    return worst


# ------------------------------------------------------------------------------
# CONES
# ------------------------------------------------------------------------------


def _field_derivative(chart: LocalChart, model: HamiltonianModel, w: np.ndarray, h: float = 1e-7) -> np.ndarray:
    dim = w.shape[0]
    out = np.empty((dim, dim))
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = h
        out[:, j] = (
            local_vector_field(chart, model, w + e) - local_vector_field(chart, model, w - e)
        ) / (2.0 * h)
    return out


def admissible_alpha(
    chart: LocalChart,
    model: HamiltonianModel,
    k: int = 0,
    r: Optional[float] = None,
    samples: int = 64,
    seed: int = 0,
) -> float:
    """
    Lower end alpha_r of the cone apertures kept invariant inside B_r.

    c r is measured as the largest deviation of the local Jacobian from
    diag(lambda, -lambda) on the sphere |w| = r. K-_alpha needs
    alpha > c r / (lambda_1 - c r); K-_alpha_k additionally needs
    1/alpha + alpha < (lambda_{k+1} - lambda_k) / (c r) - 2.

    Returns:
        alpha_r, or inf when no aperture is admissible.
    """
    n = chart.n
    r = chart.r if r is None else float(r)
    lam = chart.exponents
    linear = np.diag(np.concatenate([lam, -lam]))
    rng = np.random.default_rng(seed)
    cr = 0.0
    for _ in range(samples):
        w = rng.normal(size=2 * n)
        w *= r / np.linalg.norm(w)
        cr = max(cr, float(np.linalg.norm(_field_derivative(chart, model, w) - linear, 2)))

    if cr == 0.0:
        return 0.0
    if lam[0] <= cr:
        return float("inf")
    bound = cr / (lam[0] - cr)
    if 1 <= k < n:
        beta = (lam[k] - lam[k - 1]) / cr - 2.0
        if beta <= 2.0:
            return float("inf")
        bound = max(bound, 0.5 * (beta - math.sqrt(beta * beta - 4.0)))
    logger.debug(f"Admissible cone range at r = {r:g}: c r = {cr:.3e}, alpha_r = {bound:.3e}")
    return bound


def _cone_blocks(n: int, family: ConeFamily, k: int) -> Tuple[np.ndarray, np.ndarray]:
    everything = np.arange(2 * n)
    if family == "K-_alpha":
        dominant = np.arange(n)
    elif family == "K-_alpha_k":
        if not 0 <= k < n:
            raise ChartError(f"Split index {k} outside [0, {n})")
        dominant = np.arange(k, n)
    else:
        dominant = np.arange(n, 2 * n)
    return dominant, np.setdiff1d(everything, dominant)


def cone_check(
    chart: LocalChart,
    model: HamiltonianModel,
    run: VariationalSegment,
    cone: ConeParams,
    family: ConeFamily = "K-_alpha",
    samples: int = 1000,
    seed: int = 0,
    radius: Optional[float] = None,
) -> ConeReport:
    """
    Checks that boundary vectors of a cone at the start of `run` are mapped
    strictly inside it by the linearized flow in chart coordinates. The
    unstable cones are pushed forward; K+_alpha is pulled back.

    Raises:
        ConeViolated: an image left the closed cone at some t > t0.
        OutOfChart: the base orbit left B_r (with the chart slack).
    """
    n = chart.n
    radius = chart.r if radius is None else float(radius)
    dominant, rest = _cone_blocks(n, family, cone.k)
    alpha = cone.alpha

    rng = np.random.default_rng(seed)
    xi = np.zeros((2 * n, samples))
    a = rng.normal(size=(dominant.size, samples))
    b = rng.normal(size=(rest.size, samples))
    xi[dominant] = a / np.linalg.norm(a, axis=0)
    xi[rest] = alpha * b / np.linalg.norm(b, axis=0)

    base = run.base
    z0, _ = model.reduce(base.states[0])
    w0 = chart.to_local(z0, check=False)
    D0 = chart.d_from_local(w0)

    worst = float("inf")
    for j in range(base.times.shape[0]):
        z, _ = model.reduce(base.states[j])
        w = chart.to_local(z, check=False)
        norm = float(np.linalg.norm(w))
        if norm > CHART_SLACK * radius:
            raise OutOfChart(norm, radius)
        if j == 0:
            continue
        T = chart.d_to_local(z) @ run.fundamental[j] @ D0
        images = T @ xi if family != "K+_alpha" else np.linalg.solve(T, xi)
        margins = (
            alpha * np.linalg.norm(images[dominant], axis=0)
            - np.linalg.norm(images[rest], axis=0)
        ) / np.linalg.norm(images, axis=0)
        index = int(np.argmin(margins))
        if margins[index] <= 0.0:
            raise ConeViolated(float(base.times[j]), xi[:, index].copy(), float(margins[index]))
        worst = min(worst, float(margins[index]))

    return ConeReport(
        family=family,
        alpha=alpha,
        k=cone.k,
        samples=samples,
        times=int(base.times.shape[0]) - 1,
        margin=worst,
        invariant=True,
    )


# ------------------------------------------------------------------------------
# APPROACH DIRECTIONS
# ------------------------------------------------------------------------------


def _angle(a: np.ndarray, b: np.ndarray) -> float:
    """Angle between the lines spanned by a and b."""
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    along = abs(float(a @ b))
    across = float(np.linalg.norm(a - (a @ b) * b))
    return math.atan2(across, along)


def approach_direction(
    chart: LocalChart,
    model: HamiltonianModel,
    w: np.ndarray,
    branch: Branch,
    inner: float = 1e-6,
    target: float = 1e-12,
) -> Tuple[np.ndarray, float]:
    """
    Limit direction at the saddle of an orbit through a point of a local
    invariant manifold.

    The field restricted to the straightened manifold is integrated toward
    the saddle until the radius `inner`, and the linear flow carries the
    point the rest of the way to `target`.

    Returns:
        (unit phase-space direction, angle to the line of Xi_1^{+-})
    """
    n = chart.n
    w = np.asarray(w, dtype=float)
    lam = chart.exponents
    if branch == "unstable":
        p = w[:n].copy()
        sign = -1.0

        def rhs(t, s):
            return local_vector_field(chart, model, np.concatenate([s, np.zeros(n)]))[:n]

    else:
        p = w[n:].copy()
        sign = 1.0

        def rhs(t, s):
            return local_vector_field(chart, model, np.concatenate([np.zeros(n), s]))[n:]

    def shrink(t, s):
        return np.linalg.norm(s) - inner

    shrink.terminal = True

    if np.linalg.norm(p) > inner:
        horizon = sign * (20.0 + math.log(np.linalg.norm(p) / inner)) / lam[0] * 4.0
        solution = solve_ivp(
            rhs, (0.0, horizon), p, method="DOP853", rtol=1e-10, atol=1e-15, events=shrink
        )
        p = solution.y[:, -1]

    size = float(np.linalg.norm(p))
    if size > target:
        rates = -sign * lam

        def log_size(tau: float) -> float:
            return math.log(np.linalg.norm(p * np.exp(rates * tau))) - math.log(target)

        tau_far = sign * math.log(size / target) / lam[0]
        tau = scipy.optimize.brentq(
            log_size, min(0.0, tau_far), max(0.0, tau_far), xtol=1e-14
        )
        p = p * np.exp(rates * tau)

    columns = chart.S[:, :n] if branch == "unstable" else chart.S[:, n:]
    direction = columns @ (p / np.linalg.norm(p))
    direction /= np.linalg.norm(direction)
    return direction, _angle(direction, columns[:, 0])


# ------------------------------------------------------------------------------
# DUMP
# ------------------------------------------------------------------------------


def chart_to_json(chart: LocalChart) -> Dict[str, Any]:
    """Plain-data dump of a chart; `chart_from_json` rebuilds the maps."""
    return {
        "n": chart.n,
        "degree": chart.degree,
        "S": chart.S.tolist(),
        "S_inv": chart.S_inv.tolist(),
        "exponents": chart.exponents.tolist(),
        "r_prime": chart.r_prime,
        "r": chart.r,
        "delta": chart.delta,
        "residual": chart.residual,
        "residual_profile": [list(p) for p in chart.residual_profile],
        "F_terms": [[list(m), c] for m, c in chart.F_terms],
        "G_terms": [[list(m), c] for m, c in chart.G_terms],
        "unstable_graph": chart.unstable_graph.model_dump(mode="json"),
        "stable_graph": chart.stable_graph.model_dump(mode="json"),
        "cone_constants": (
            chart.cone_constants.model_dump(mode="json") if chart.cone_constants else None
        ),
    }


def chart_from_json(data: Mapping[str, Any]) -> LocalChart:
    try:
        chart = _assemble(
            int(data["n"]),
            np.array(data["S"], dtype=float),
            np.array(data["S_inv"], dtype=float),
            np.array(data["exponents"], dtype=float),
            int(data["degree"]),
            [(tuple(int(e) for e in m), float(c)) for m, c in data["F_terms"]],
            [(tuple(int(e) for e in m), float(c)) for m, c in data["G_terms"]],
            ManifoldGraph.model_validate(data["unstable_graph"]),
            ManifoldGraph.model_validate(data["stable_graph"]),
            r_prime=data["r_prime"],
            r=data["r"],
            delta=data["delta"],
            residual=data["residual"],
            residual_profile=[tuple(p) for p in data.get("residual_profile", [])],
        )
        constants = data.get("cone_constants")
        if constants is not None:
            chart = replace(chart, cone_constants=ConeConstants.model_validate(constants))
        return chart
    except (KeyError, TypeError, ValueError) as e:
        raise ChartError(f"Malformed chart dump: {e}") from e
