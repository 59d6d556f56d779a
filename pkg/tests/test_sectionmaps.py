"""
🌀 tests.test_sectionmaps

Contains tests for the anchor parameterization, the corrected
differentials and the outer and inner section maps.
"""

from dataclasses import replace

import numpy as np
import pytest

from nhicyl.common.errors import (
    LeftTube,
    SectionMapError,
    TangentialExit,
    TransitTimeDeviation,
    WrongEnergySign,
)
from nhicyl.continuation import pendulum_period
from nhicyl.homoclinics import find_homoclinics
from nhicyl.localframe import build_chart, chart_from_json, chart_to_json
from nhicyl.model import analyze_saddle, coupled_pendula, linear_saddle, pendulum
from nhicyl.sectionmaps import (
    correct_jacobian,
    embed_anchor,
    fit_cone_constants,
    hat_indices,
    inner_map,
    inner_transit_time,
    outer_map,
    project_anchor,
    split_inner_map,
    verify_expansion_contraction,
)
from nhicyl.types.chart import ConeConstants


@pytest.fixture(scope="module")
def saddle():
    model = linear_saddle([1.0, np.sqrt(2.0)])
    return model, build_chart(model, analyze_saddle(model), degree=3)


@pytest.fixture(scope="module")
def pendulum_setup():
    model = pendulum()
    chart = build_chart(model, analyze_saddle(model))
    orbits = find_homoclinics(model, chart, [[1.0], [-1.0]])
    return model, chart, orbits


@pytest.fixture(scope="module")
def coupled():
    model = coupled_pendula(0.1)
    return model, build_chart(model, analyze_saddle(model))


def test_hat_indices():
    np.testing.assert_array_equal(hat_indices(3), [1, 2, 4, 5])
    assert hat_indices(1).size == 0
    np.testing.assert_array_equal(project_anchor(np.arange(6.0)), [1.0, 2.0, 4.0, 5.0])


def test_embed_anchor_solves_the_energy(saddle):
    """On {u_1 = r}: lambda_1 r v_1 + lambda_2 u_2 v_2 = E"""
    model, chart = saddle
    lam = chart.exponents
    r, energy = chart.r, 1e-3
    hat = [0.01, -0.02]
    w = embed_anchor(chart, model, "u1", 1, r, hat, energy)
    assert w[0] == r
    np.testing.assert_array_equal(project_anchor(w), hat)
    assert w[2] == pytest.approx((energy - lam[1] * hat[0] * hat[1]) / (lam[0] * r), rel=1e-12)
    assert model.hamiltonian(chart.from_local(w)) == pytest.approx(energy, abs=1e-15)

    w = embed_anchor(chart, model, "diag_plus", 1, r, [0.0, 0.0], energy)
    assert w[0] == pytest.approx(w[2])
    assert w[0] == pytest.approx(np.sqrt(energy / lam[0]), rel=1e-12)


def test_correct_jacobian_moves_columns_into_the_section():
    rng = np.random.default_rng(3)
    jacobian = rng.normal(size=(4, 4))
    field = np.array([0.3, -0.1, 1.5, 0.2])
    corrected = correct_jacobian(jacobian, field, "v1")
    np.testing.assert_allclose(corrected[2], 0.0, atol=1e-14)
    with pytest.raises(TangentialExit):
        correct_jacobian(jacobian, np.array([1.0, 0.0, 1e-12, 0.0]), "v1")


def test_inner_transit_time_closed_form(saddle):
    _, chart = saddle
    assert inner_transit_time(chart, 1e-4) == pytest.approx(np.log(chart.r**2 / 1e-4))
    assert inner_transit_time(chart, -1e-4) == inner_transit_time(chart, 1e-4)


@pytest.mark.parametrize("energy", [1e-3, -1e-3])
def test_inner_map_of_the_linear_saddle(saddle, energy):
    """From {v_1 = r} the orbit leaves through {u_1 = sign(E) r} after the linear transit time"""
    model, chart = saddle
    w = embed_anchor(chart, model, "v1", 1, chart.r, [0.0, 0.0], energy)
    result = inner_map(chart, model, w)
    t = inner_transit_time(chart, energy)
    lam2 = chart.exponents[1]
    assert result.transit_time == pytest.approx(t, rel=1e-8)
    assert result.target.sign == np.sign(energy)
    assert result.image_w[0] == pytest.approx(np.sign(energy) * chart.r, abs=1e-10)
    assert result.energy == pytest.approx(energy, rel=1e-12)

    expected = np.diag([np.exp(lam2 * t), np.exp(-lam2 * t)])
    np.testing.assert_allclose(result.projected, expected, rtol=1e-6, atol=1e-8)
    assert result.symplectic_defect < 1e-6


def test_inner_map_rejects_the_wrong_energy_sign(saddle):
    model, chart = saddle
    w = embed_anchor(chart, model, "v1", 1, chart.r, [0.0, 0.0], 1e-3)
    with pytest.raises(WrongEnergySign):
        inner_map(chart, model, w, energy_sign=-1)


def test_split_inner_map_composes(saddle):
    """The halves through the diagonal compose to the whole passage"""
    model, chart = saddle
    w = embed_anchor(chart, model, "v1", 1, chart.r, [0.01, 0.005], 1e-3)
    split = split_inner_map(chart, model, w)
    assert split.first.target.kind == "diag_plus"
    assert split.composition_defect < 1e-6
    assert split.first.transit_time + split.second.transit_time == pytest.approx(
        split.whole.transit_time, rel=1e-8
    )


def test_inner_passage_expands_and_contracts(saddle):
    """Constants fitted once for the system cover a passage at a new energy"""
    model, chart = saddle
    constants = fit_cone_constants(chart, model, energies=(1e-4, 1e-6, 1e-8))
    assert constants.passages == 6
    fitted = replace(chart, cone_constants=constants)

    w = embed_anchor(chart, model, "v1", 1, chart.r, [0.0, 0.0], 1e-5)
    result = inner_map(chart, model, w)
    report = verify_expansion_contraction(result, fitted)
    assert report.passed, report.violations
    assert report.expansion == pytest.approx(np.exp(chart.exponents[1] * result.transit_time), rel=1e-5)
    assert report.c == constants.c
    assert report.measured_c <= constants.c

    tight = verify_expansion_contraction(result, chart, ConeConstants(c=0.0, c_prime=1e-12))
    assert not tight.passed
    assert any("c'" in v for v in tight.violations)

    missing = verify_expansion_contraction(result, chart)
    assert not missing.passed
    assert any("no cone constants" in v for v in missing.violations)

    rebuilt = chart_from_json(chart_to_json(fitted))
    assert rebuilt.cone_constants == constants


def test_cone_constants_need_two_degrees_of_freedom(pendulum_setup):
    model, chart, _ = pendulum_setup
    with pytest.raises(SectionMapError):
        fit_cone_constants(chart, model)


def test_coupled_passages_stay_within_fitted_cones(coupled):
    """Two pendula: a passage between the fitted energies needs no larger c, c'"""
    model, chart = coupled
    constants = fit_cone_constants(chart, model, energies=(1e-4, -1e-4, 1e-6, -1e-6))
    fitted = replace(chart, cone_constants=constants)
    for energy in (1e-5, -1e-5):
        w = embed_anchor(chart, model, "v1", 1, chart.r, [0.0, 0.0], energy)
        report = verify_expansion_contraction(inner_map(chart, model, w), fitted)
        assert report.passed, report.violations
        assert report.expansion > 1.0
        assert constants.c * chart.r < chart.exponents[1]


def _central_differences(chart, model, kind, sign, hat, energy, section_map, step=1e-7):
    """d image_hat / d hat on the level H = E by central differences."""
    hat = np.asarray(hat, dtype=float)
    columns = []
    for i in range(hat.size):
        e = np.zeros_like(hat)
        e[i] = step
        plus = section_map(embed_anchor(chart, model, kind, sign, chart.r, hat + e, energy))
        minus = section_map(embed_anchor(chart, model, kind, sign, chart.r, hat - e, energy))
        columns.append((plus.image_hat - minus.image_hat) / (2.0 * step))
    return np.column_stack(columns)


def test_coupled_inner_differential_matches_finite_differences(coupled):
    model, chart = coupled
    energy = 1e-4
    w = embed_anchor(chart, model, "v1", 1, chart.r, [0.0, 0.0], energy)
    result = inner_map(chart, model, w)
    fd = _central_differences(
        chart, model, "v1", 1, [0.0, 0.0], energy, lambda w: inner_map(chart, model, w)
    )
    scale = np.max(np.abs(result.projected))
    np.testing.assert_allclose(fd, result.projected, rtol=0.0, atol=1e-4 * scale)


@pytest.mark.slow
def test_coupled_outer_differential_matches_finite_differences(coupled):
    model, chart = coupled
    homoclinic = find_homoclinics(model, chart, [[1.0, 0.0]])[0]
    energy = 1e-4
    sign = homoclinic.departure_sign
    hat = homoclinic.entry.hat
    w = embed_anchor(chart, model, "u1", sign, chart.r, hat, energy)
    result = outer_map(chart, model, w, homoclinic)
    fd = _central_differences(
        chart, model, "u1", sign, hat, energy, lambda w: outer_map(chart, model, w, homoclinic)
    )
    scale = np.max(np.abs(result.projected))
    np.testing.assert_allclose(fd, result.projected, rtol=0.0, atol=1e-4 * scale)


def test_outer_and_inner_legs_close_a_rotation(pendulum_setup):
    """One outer and one inner leg make a full turn of the pendulum"""
    model, chart, orbits = pendulum_setup
    homoclinic = orbits[0]
    energy = 1e-4
    w = embed_anchor(chart, model, "u1", homoclinic.departure_sign, chart.r, [], energy)

    outer = outer_map(chart, model, w, homoclinic)
    assert tuple(outer.lattice_shift) == homoclinic.homology_class
    assert outer.tube_distance < 10.0 * chart.delta
    assert outer.image_w[1] == pytest.approx(homoclinic.arrival_sign * chart.r, abs=1e-10)
    assert outer.transit_time == pytest.approx(homoclinic.outer_time, rel=0.1)

    inner = inner_map(chart, model, outer.image_w)
    np.testing.assert_allclose(inner.image_w, w, atol=1e-9)
    assert outer.transit_time + inner.transit_time == pytest.approx(pendulum_period(energy), rel=1e-8)


def test_outer_map_leaves_a_narrow_tube(pendulum_setup):
    model, chart, orbits = pendulum_setup
    w = embed_anchor(chart, model, "u1", 1, chart.r, [], 1e-2)
    with pytest.raises(LeftTube) as info:
        outer_map(chart, model, w, orbits[0], tube_factor=1e-6)
    assert info.value.radius == pytest.approx(1e-6 * chart.delta)


def test_outer_map_checks_the_transit_time(pendulum_setup):
    """The outer transit stays near the homoclinic's outer time, or the map fails"""
    model, chart, orbits = pendulum_setup
    homoclinic = orbits[0]
    w = embed_anchor(chart, model, "u1", homoclinic.departure_sign, chart.r, [], 1e-4)
    outer = outer_map(chart, model, w, homoclinic)
    assert outer.transit_deviation is not None
    assert outer.transit_deviation < 0.5
    with pytest.raises(TransitTimeDeviation) as info:
        outer_map(chart, model, w, homoclinic, transit_tolerance=1e-9)
    assert info.value.tolerance == 1e-9
    unchecked = outer_map(chart, model, w, homoclinic, transit_tolerance=None)
    assert unchecked.transit_time == pytest.approx(outer.transit_time)


if __name__ == "__main__":
    pytest.main(["-v", __file__])
