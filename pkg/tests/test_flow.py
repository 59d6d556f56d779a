"""
🌀 tests.test_flow

Contains tests for the integrators, event location, reflection and the
segment export.
"""

import numpy as np
import pytest
import scipy.linalg

from nhicyl.common.errors import BlowUp, EnergyDriftExceeded, EventNotReached, FlowError
from nhicyl.continuation import pendulum_period
from nhicyl.flow import (
    export_segment_csv,
    integrate,
    integrate_to_event,
    integrate_variational,
    locate_events,
    reflect,
)
from nhicyl.model import linear_saddle, pendulum
from nhicyl.types.orbits import EventSpec


def _libration_start(energy: float) -> np.ndarray:
    """Turning point of the pendulum libration at energy -2 < E < 0."""
    return np.array([np.arccos(1.0 + energy) / (2.0 * np.pi), 0.0])


def test_linear_saddle_matches_closed_form():
    """x(t) = x0 cosh(lambda t) + y0 / lambda sinh(lambda t) for A = I"""
    lam = np.array([1.0, np.sqrt(2.0)])
    model = linear_saddle(lam)
    z0 = np.array([0.1, -0.2, 0.05, 0.3])
    t = 2.0
    segment = integrate(model, z0, (0.0, t))
    x0, y0 = z0[:2], z0[2:]
    x = x0 * np.cosh(lam * t) + y0 / lam * np.sinh(lam * t)
    y = x0 * lam * np.sinh(lam * t) + y0 * np.cosh(lam * t)
    np.testing.assert_allclose(segment.end, np.concatenate([x, y]), rtol=1e-9, atol=1e-12)
    assert segment.t_end == pytest.approx(t)


def test_backward_integration_inverts_forward():
    model = pendulum()
    z0 = np.array([0.2, 0.7])
    forward = integrate(model, z0, (0.0, 1.3))
    back = integrate(model, forward.end, (1.3, 0.0))
    np.testing.assert_allclose(back.end, z0, atol=1e-9)


def test_variational_matches_matrix_exponential():
    """For a linear field the fundamental matrix is expm(M t)"""
    model = linear_saddle([1.0, np.sqrt(2.0)])
    t = 1.5
    var = integrate_variational(model, np.array([0.01, 0.02, -0.01, 0.0]), (0.0, t))
    expected = scipy.linalg.expm(model.jacobian(np.zeros(4)) * t)
    np.testing.assert_allclose(var.final, expected, rtol=1e-9, atol=1e-10)
    np.testing.assert_allclose(var.fundamental[0], np.eye(4))


def test_variational_flow_is_symplectic():
    model = pendulum()
    var = integrate_variational(model, np.array([0.1, 0.9]), (0.0, 1.0))
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    psi = var.final
    np.testing.assert_allclose(psi.T @ J @ psi, J, atol=1e-8)
    np.testing.assert_allclose(var.at(0.0), np.eye(2), atol=1e-12)


def test_energy_is_conserved():
    model = pendulum()
    z0 = np.array([0.3, 1.1])
    segment = integrate(model, z0, (0.0, 10.0))
    drift = max(abs(model.hamiltonian(z) - segment.energy) for z in segment.states)
    assert drift < 1e-10


def test_rotation_period_from_x_event():
    """A rotation orbit reaches x = 1 after one period K(1/s) / (pi sqrt s)"""
    model = pendulum()
    energy = 0.5
    z0 = np.array([0.0, np.sqrt(2.0 * energy)])
    event = EventSpec(kind="x", level=1.0, direction="increasing", chart="xy")
    hit = integrate_to_event(model, z0, event, t_max=5.0)
    assert hit.t_hit == pytest.approx(pendulum_period(energy), rel=1e-9)
    assert hit.z_hit[0] == pytest.approx(1.0, abs=1e-12)
    assert hit.rate > 0.0
    assert hit.segment.t_end == pytest.approx(hit.t_hit)


def test_libration_period_from_y_event():
    """The increasing crossing of y = 0 after the start closes a libration"""
    model = pendulum()
    energy = -0.5
    z0 = _libration_start(energy)
    event = EventSpec(kind="y", level=0.0, direction="increasing", chart="xy")
    hit = integrate_to_event(model, z0, event, t_max=10.0)
    assert hit.t_hit == pytest.approx(pendulum_period(energy), rel=1e-9)
    np.testing.assert_allclose(hit.z_hit, z0, atol=1e-9)


def test_locate_events_finds_every_half_libration():
    model = pendulum()
    energy = -1.0
    period = pendulum_period(energy)
    segment = integrate(model, _libration_start(energy), (0.0, 2.25 * period))
    event = EventSpec(kind="y", level=0.0, chart="xy")
    hits = locate_events(model, segment, event)
    times = np.array([t for t, _ in hits])
    np.testing.assert_allclose(times, period * np.array([0.5, 1.0, 1.5, 2.0]), rtol=1e-8)
    assert all(abs(z[1]) < 1e-10 for _, z in hits)


def test_event_errors():
    model = pendulum()
    z0 = _libration_start(-0.5)
    with pytest.raises(EventNotReached) as info:
        integrate_to_event(model, z0, EventSpec(kind="x", level=1.0, chart="xy"), t_max=3.0)
    assert info.value.t_max == 3.0
    with pytest.raises(FlowError):
        integrate_to_event(model, z0, EventSpec(kind="u1", level=0.1), t_max=3.0)
    with pytest.raises(ValueError):
        EventSpec(kind="x", level=0.0, chart="uv")


def test_blow_up_and_energy_drift():
    model = linear_saddle([1.0])
    with pytest.raises(BlowUp):
        integrate(model, np.array([1.0, 1.0]), (0.0, 50.0), bound=1e3, energy_tol=1.0)
    with pytest.raises(EnergyDriftExceeded):
        integrate(pendulum(), np.array([0.3, 1.1]), (0.0, 10.0), tol=1e-3, energy_tol=1e-15)


def test_reflection_is_an_orbit():
    """s z(T - t) solves the same equations as z"""
    model = pendulum()
    segment = integrate(model, np.array([0.15, 0.8]), (0.0, 1.0))
    reflected = reflect(model, segment)
    np.testing.assert_allclose(reflected.start, model.reflect(segment.end))
    np.testing.assert_allclose(reflected.end, model.reflect(segment.start))
    direct = integrate(model, reflected.start, (0.0, 0.4))
    np.testing.assert_allclose(reflected(0.4), direct.end, atol=1e-9)

    shifted = reflect(model, segment, shift=np.array([1.0]))
    assert shifted.start[0] == pytest.approx(reflected.start[0] + 1.0)


def test_reflection_restarts_the_clock():
    """A segment starting at t0 > 0 reflects onto [0, T - t0]"""
    model = pendulum()
    segment = integrate(model, np.array([0.15, 0.8]), (0.3, 1.0))
    reflected = reflect(model, segment)
    assert reflected.times[0] == 0.0
    assert reflected.times[-1] == pytest.approx(0.7)
    np.testing.assert_allclose(reflected(0.2), model.reflect(segment(0.8)), atol=1e-12)


def test_export_segment_csv(tmp_path):
    model = pendulum()
    segment = integrate(model, np.array([0.0, 1.0]), (0.0, 0.5))
    path = export_segment_csv(model, segment, tmp_path / "orbit" / "segment.csv")
    header = path.read_text().splitlines()[0]
    assert header == "t,x1,y1,H"
    table = np.loadtxt(path, delimiter=",", skiprows=1)
    assert table.shape == (len(segment.times), 4)
    np.testing.assert_allclose(table[:, 3], 0.5, atol=1e-10)
    np.testing.assert_array_equal(table[:, 0], segment.times)


if __name__ == "__main__":
    pytest.main(["-v", __file__])
