"""
🌀 tests.test_localframe

Contains tests for the straightening chart at the saddle, its cones and
the approach directions of the local invariant manifolds.
"""

import numpy as np
import pytest

from nhicyl.common.errors import ConeViolated, OutOfChart, RadiusTooLarge
from nhicyl.flow import integrate_variational
from nhicyl.localframe import (
    admissible_alpha,
    approach_direction,
    build_chart,
    chart_from_json,
    chart_to_json,
    cone_check,
    graph_residual,
    hamiltonian_in_local,
    local_vector_field,
)
from nhicyl.model import analyze_saddle, coupled_pendula, linear_saddle, pendulum
from nhicyl.types.chart import ConeParams


@pytest.fixture(scope="module")
def linear():
    model = linear_saddle([1.0, np.sqrt(2.0)])
    return model, build_chart(model, analyze_saddle(model), degree=3)


@pytest.fixture(scope="module")
def pendulum_chart():
    model = pendulum()
    return model, build_chart(model, analyze_saddle(model), degree=5)


def _symplectic_form(n: int) -> np.ndarray:
    return np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])


def test_linear_saddle_chart_is_exact(linear):
    """A quadratic Hamiltonian is straightened by S alone, at every radius"""
    model, chart = linear
    assert chart.r_prime == 1.0
    assert chart.r == pytest.approx(0.25)
    assert chart.delta == pytest.approx(0.0625)
    assert chart.residual < 1e-12

    w = np.array([0.1, -0.05, 0.02, 0.07])
    lam = chart.exponents
    field = local_vector_field(chart, model, w)
    np.testing.assert_allclose(field, np.concatenate([lam * w[:2], -lam * w[2:]]), atol=1e-12)
    assert hamiltonian_in_local(chart, model, w) == pytest.approx(float(lam @ (w[:2] * w[2:])), abs=1e-14)


def test_chart_is_symplectic(pendulum_chart):
    model, chart = pendulum_chart
    J = _symplectic_form(1)
    for w in ([0.3 * chart.r_prime, 0.1 * chart.r_prime], [-0.2 * chart.r_prime, 0.4 * chart.r_prime]):
        D = chart.d_from_local(np.array(w))
        np.testing.assert_allclose(D.T @ J @ D, J, atol=1e-10)


def test_pendulum_unstable_axis_is_the_separatrix(pendulum_chart):
    """{v = 0} maps onto y = 2 sin(pi x), the zero level through the saddle"""
    model, chart = pendulum_chart
    assert chart.residual < 1e-6
    for u in (0.5 * chart.r_prime, -0.5 * chart.r_prime):
        x, y = chart.from_local(np.array([u, 0.0]))
        assert y == pytest.approx(2.0 * np.sin(np.pi * x), abs=1e-6)
        assert abs(model.hamiltonian(np.array([x, y]))) < 1e-6


def test_chart_maps_invert_each_other(pendulum_chart):
    _, chart = pendulum_chart
    w = np.array([0.3, -0.2]) * chart.r_prime
    np.testing.assert_allclose(chart.to_local(chart.from_local(w)), w, atol=1e-14)
    with pytest.raises(OutOfChart):
        chart.from_local(np.array([2.0, 0.0]) * chart.r_prime)


def test_higher_degree_straightens_better():
    model = pendulum()
    spectrum = analyze_saddle(model)
    low = build_chart(model, spectrum, degree=3)
    high = build_chart(model, spectrum, degree=7)
    assert graph_residual(high, model, 0.05) < graph_residual(low, model, 0.05)


def test_radius_too_large():
    model = pendulum()
    with pytest.raises(RadiusTooLarge) as info:
        build_chart(model, analyze_saddle(model), degree=3, r_prime=1.0)
    assert info.value.radius == 1.0


def test_chart_dump_rebuilds_the_maps(pendulum_chart):
    _, chart = pendulum_chart
    rebuilt = chart_from_json(chart_to_json(chart))
    w = np.array([0.2, 0.1]) * chart.r_prime
    np.testing.assert_allclose(rebuilt.from_local(w), chart.from_local(w), atol=1e-14)
    assert rebuilt.r == chart.r and rebuilt.delta == chart.delta


def test_unstable_cone_is_forward_invariant(linear):
    model, chart = linear
    alpha_r = admissible_alpha(chart, model)
    cone = ConeParams(alpha=0.5, alpha_r=alpha_r)
    z0 = chart.from_local(np.array([0.01, 0.01, 0.05, -0.05]))
    run = integrate_variational(model, z0, (0.0, 2.0))
    report = cone_check(chart, model, run, cone, samples=200)
    assert report.invariant
    assert report.margin > 0.0

    split = cone_check(chart, model, run, ConeParams(alpha=0.5, k=1, alpha_r=alpha_r), family="K-_alpha_k", samples=200)
    assert split.invariant

    stable = cone_check(chart, model, run, cone, family="K+_alpha", samples=200)
    assert stable.invariant


def test_unstable_cone_fails_backward(linear):
    """Pulled back in time the unstable directions contract and leave K-"""
    model, chart = linear
    cone = ConeParams(alpha=0.5, alpha_r=admissible_alpha(chart, model))
    z0 = chart.from_local(np.array([0.05, -0.05, 0.01, 0.01]))
    run = integrate_variational(model, z0, (0.0, -2.0))
    with pytest.raises(ConeViolated) as info:
        cone_check(chart, model, run, cone, samples=200)
    assert info.value.t < 0.0
    assert info.value.xi.shape == (4,)


def test_approach_direction_selects_the_slow_exponent(linear):
    """Generic points approach along Xi_1; the fast axis stays orthogonal"""
    model, chart = linear
    _, angle = approach_direction(chart, model, np.array([0.05, 0.05, 0.0, 0.0]), "unstable")
    assert angle < 1e-3
    _, angle = approach_direction(chart, model, np.array([0.0, 0.0, 0.05, 0.05]), "stable")
    assert angle < 1e-3
    _, angle = approach_direction(chart, model, np.array([0.0, 0.1, 0.0, 0.0]), "unstable")
    assert angle == pytest.approx(np.pi / 2.0, abs=1e-6)


def test_coupled_pendula_chart_certifies():
    model = coupled_pendula(0.1)
    chart = build_chart(model, analyze_saddle(model))
    assert chart.residual < 1e-6
    assert 0.0 < chart.delta < chart.r < chart.r_prime
    w = np.array([0.5, 0.0, 0.0, 0.0]) * chart.r_prime
    assert abs(hamiltonian_in_local(chart, model, w)) < 1e-6


if __name__ == "__main__":
    pytest.main(["-v", __file__])
