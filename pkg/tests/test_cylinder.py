"""
🌀 tests.test_cylinder

Contains tests for the assembled cylinder of the pendulum, its mesh and the
verification suite.
"""

import numpy as np
import pytest

from nhicyl.common.errors import FamiliesTooShort, InsufficientRange, MissingFamily
from nhicyl.continuation import continue_family, energy_grid, negative_spec, positive_spec
from nhicyl.cylinder import (
    alignment_trend,
    assemble,
    build_mesh,
    c1_join_test,
    floquet_scaling_fit,
    hausdorff_convergence,
    hausdorff_distance,
    mesh_invariance,
    normal_hyperbolicity_test,
    skeleton_distance,
    transit_time_fit,
    verify,
    vertex_differentiability_test,
    window_rates,
)
from nhicyl.homoclinics import analyze_H3, find_homoclinics
from nhicyl.localframe import build_chart
from nhicyl.model import analyze_saddle, coupled_pendula, linear_saddle, pendulum
from nhicyl.types.config import Checks
from nhicyl.types.cylinder import HyperbolicityReport


@pytest.fixture(scope="module")
def pendulum_cylinder():
    model = pendulum()
    chart = build_chart(model, analyze_saddle(model))
    library = find_homoclinics(model, chart, [[1.0], [-1.0]])
    chain = analyze_H3([library[0]])
    rotations = continue_family(
        model, chart, positive_spec(library, chain), library,
        energy_grid(1e-3, 1e-8, 0.1), label="rotation",
    )
    librations = continue_family(
        model, chart, negative_spec(library, 0, 1), library,
        energy_grid(1e-3, 1e-8, 0.1, sign=-1), label="libration",
    )
    atlas = assemble([rotations], [librations], library, chain, phases=16)
    return model, chart, library, atlas


def test_hausdorff_distance():
    a = np.array([[0.0, 0.0], [1.0, 0.0]])
    assert hausdorff_distance(a, a.copy()) == 0.0
    assert hausdorff_distance(a, a + [0.0, 0.5]) == pytest.approx(0.5)
    assert hausdorff_distance(a[:1], a) == pytest.approx(1.0)


def test_transit_time_fit_recovers_the_exponent():
    """t = (1 / lambda) ln(lambda r^2 / E) fits with slope 1 / lambda and a flat band"""
    lam, r = 2.0 * np.pi, 0.05
    energies = 10.0 ** -np.arange(2.0, 9.0)
    times = np.log(lam * r**2 / energies) / lam
    fit = transit_time_fit(energies, times, lam)
    assert fit.slope == pytest.approx(1.0 / lam, rel=1e-10)
    assert fit.passed
    assert fit.decades == pytest.approx(6.0)
    assert fit.band[1] - fit.band[0] < 1e-12
    with pytest.raises(InsufficientRange):
        transit_time_fit(energies[:3], times[:3], lam)


def test_transit_band_wider_than_one_fails():
    """An alternating offset leaves the slope alone but widens the c_E band"""
    lam, r = 2.0 * np.pi, 0.05
    energies = 10.0 ** -np.arange(2.0, 9.0)
    wobble = 0.6 * (-1.0) ** np.arange(energies.size)
    times = np.log(lam * r**2 / energies) / lam + wobble
    fit = transit_time_fit(energies, times, lam)
    assert fit.slope == pytest.approx(1.0 / lam, rel=1e-10)
    assert fit.band_width == pytest.approx(1.2)
    assert not fit.passed
    assert transit_time_fit(energies, times, lam, band_bound=None).passed


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_alignment_trend_orders_by_magnitude(sign):
    """Ratios shrinking with |E| pass on either side of E = 0, listed in any order"""
    energies = sign * 10.0 ** -np.arange(2.0, 11.0)
    ratios = 5.0 * np.abs(energies)
    assert alignment_trend(energies[::-1], ratios[::-1]) == []
    assert alignment_trend(energies, ratios) == []

    flat = alignment_trend(energies, np.full(energies.size, 1e-2))
    assert len(flat) == 1 and "not below" in flat[0]

    spiked = ratios.copy()
    spiked[-3] = 1e-4
    failures = alignment_trend(energies, spiked)
    assert len(failures) == 1 and "rises" in failures[0]


def test_alignment_trend_ignores_early_decades():
    """Only the last four decades must be monotone"""
    energies = 10.0 ** -np.arange(2.0, 11.0)
    ratios = 5.0 * energies
    ratios[0] = 1e-4
    assert alignment_trend(energies, ratios) == []
    assert alignment_trend(energies, ratios, decades=9.0) != []


def test_hyperbolicity_report_bounds():
    lam = [2.0 * np.pi, 2.0 * np.pi * 1.39]
    base = dict(
        tangent_rate=0.2, tangent_stderr=0.05, normal_rate=lam[1], normal_stderr=0.01,
        gap=lam[1] - 0.2, sigma=0.05, contracting_rate=lam[1], contracting_stderr=0.01,
        exponents=lam, slack=0.3,
        homoclinic_tangent_rate=lam[0], homoclinic_tangent_stderr=0.01,
        homoclinic_normal_rate=lam[1] * 1.02, homoclinic_normal_stderr=0.01,
    )
    assert HyperbolicityReport(**base).passed

    fast = HyperbolicityReport(**{**base, "tangent_rate": lam[0] + 1.0, "gap": lam[1] - lam[0] - 1.0})
    assert any("tangent rate" in f for f in fast.failures)

    slow = HyperbolicityReport(**{**base, "normal_rate": lam[1] - 1.0})
    assert any(f.startswith("normal rate") for f in slow.failures)

    squeezed = HyperbolicityReport(**{**base, "contracting_rate": lam[1] - 1.0})
    assert any("contracting rate" in f for f in squeezed.failures)

    jump = HyperbolicityReport(**{**base, "homoclinic_normal_rate": lam[1] * 1.2})
    assert any("differs" in f for f in jump.failures)

    closed = HyperbolicityReport(**{**base, "homoclinic_normal_rate": lam[0] + 0.01})
    assert any("homoclinic gap" in f for f in closed.failures)


def test_window_rates_of_a_linear_saddle():
    """Along the slow unstable line the flow grows at lambda_1, its complement at lambda_2"""
    model = linear_saddle([1.0, 2.0])
    z0 = 1e-3 * np.array([1.0, 0.0, 1.0, 0.0])
    rates = window_rates(model, z0, 4.0, [model.vector_field(z0)])
    assert rates.tangent_rate == pytest.approx(1.0, rel=1e-6)
    assert rates.expanding_rate == pytest.approx(2.0, rel=0.05)
    assert rates.contracting_rate == pytest.approx(2.0, rel=0.05)
    assert rates.expanding_rate - rates.tangent_rate > 3.0 * np.hypot(
        rates.tangent_stderr, rates.expanding_stderr
    )


def test_assembled_pendulum_cylinder(pendulum_cylinder):
    _, _, _, atlas = pendulum_cylinder
    assert atlas.hole_count == 1
    assert [len(f) for f in atlas.families] == [6, 6]
    assert np.all(atlas.positive[0].energies > 0.0)
    assert np.all(atlas.negative[0].energies < 0.0)

    mesh = atlas.mesh
    assert mesh.vertices.shape == (12 * 16, 2)
    assert mesh.faces.shape == (2 * 2 * 5 * 16, 3)
    assert mesh.faces.max() < len(mesh.vertices)
    np.testing.assert_array_equal(mesh.phases[:3], [0.0, 1 / 16, 2 / 16])


def test_assemble_needs_both_sides(pendulum_cylinder):
    _, _, library, atlas = pendulum_cylinder
    with pytest.raises(MissingFamily):
        assemble(atlas.positive, [], library, atlas.chain)


def test_build_mesh_single_orbit(pendulum_cylinder):
    """One orbit gives a closed polyline and no faces"""
    _, _, _, atlas = pendulum_cylinder
    family = atlas.positive[0]
    single = type(family)(spec=family.spec, orbits=family.orbits[:1])
    mesh = build_mesh([single], phases=8)
    assert mesh.faces.shape == (0, 3)
    assert mesh.vertices.shape == (8, 2)
    assert mesh.resolution > 0.0


def test_skeleton_distance_shrinks_linearly(pendulum_cylinder):
    """The outer stretches approach the separatrix at a rate |E|"""
    _, _, library, atlas = pendulum_cylinder
    family = atlas.positive[0]
    distances = [skeleton_distance(o, library, samples=100) for o in family.orbits]
    assert distances == sorted(distances)
    fit = hausdorff_convergence(family, library, samples=100)
    assert 0.8 <= fit.slope <= 1.05


def test_one_degree_of_freedom_checks_are_vacuous(pendulum_cylinder):
    model, chart, _, atlas = pendulum_cylinder
    vertex = vertex_differentiability_test(atlas.families, model, chart)
    assert vertex.exact_zero and vertex.passed
    hyperbolicity = normal_hyperbolicity_test(atlas, model, chart)
    assert hyperbolicity.vacuous and hyperbolicity.passed
    assert floquet_scaling_fit(atlas.positive[0], chart.exponents).fits == []


def test_mesh_is_invariant(pendulum_cylinder):
    model, _, _, atlas = pendulum_cylinder
    report = mesh_invariance(atlas, model)
    assert report.passed
    assert report.vertices == len(atlas.mesh.vertices)


def test_c1_join_for_the_pendulum(pendulum_cylinder):
    """Both sides share d v_1 / dE = 1 / (lambda r) at the entry anchor"""
    model, chart, library, atlas = pendulum_cylinder
    positive, negative = atlas.positive[0], atlas.negative[0]
    with pytest.raises(FamiliesTooShort):
        c1_join_test(positive, negative, model, chart, library)

    report = c1_join_test(positive, negative, model, chart, library, required=1e-7)
    assert report.passed
    assert report.derivative_plus[1] == pytest.approx(report.derivative_minus[1], rel=1e-3)
    assert report.leading_v1 == pytest.approx(1.0, rel=0.05)
    for value in report.energy_identity:
        assert value == pytest.approx(1.0, abs=1e-4)


def test_verify_attaches_a_report(pendulum_cylinder):
    model, chart, library, atlas = pendulum_cylinder
    checks = Checks(
        floquet_scaling=False,
        eigenvector_alignment=False,
        hausdorff=False,
        symmetry=False,
        uniqueness=False,
    )
    verified = verify(atlas, model, chart, library, checks=checks, join_energy=1e-7)
    report = verified.verification
    assert report is not None
    assert report.system == "pendulum"
    assert report.hole_count == 1
    assert report.passed, report.failed
    names = [c.name for c in report.checks]
    assert "transit_time E > 0" in names and "transit_time E < 0" in names
    assert "vertex" in names and "mesh_invariance" in names
    assert any(key.startswith("c_E") for key in report.fitted_constants)
    assert "C^1" in report.caveat


@pytest.fixture(scope="module")
def coupled_cylinder():
    model = coupled_pendula(0.1)
    chart = build_chart(model, analyze_saddle(model))
    library = find_homoclinics(model, chart, [[1.0, 0.0], [-1.0, 0.0]], strict=True)
    chain = analyze_H3([library[0]])
    rotations = continue_family(
        model, chart, positive_spec(library, chain), library,
        energy_grid(1e-3, 1e-10, 0.1), label="rotation",
    )
    librations = continue_family(
        model, chart, negative_spec(library, 0, 1), library,
        energy_grid(1e-3, 1e-10, 0.1, sign=-1), label="libration",
    )
    atlas = assemble([rotations], [librations], library, chain, phases=16)
    return model, chart, library, atlas


@pytest.mark.slow
def test_coupled_floquet_multipliers_scale(coupled_cylinder):
    """sigma_2 grows like |E|^(-k lambda_2 / lambda_1) on both sides"""
    _, chart, _, atlas = coupled_cylinder
    lam = chart.exponents
    for family in atlas.families:
        scaling = floquet_scaling_fit(family, lam)
        assert len(scaling.fits) == 1
        fit = scaling.fits[0]
        assert fit.slope == pytest.approx(family.spec.k * lam[1] / lam[0], rel=0.05)
        assert scaling.passed


@pytest.mark.slow
def test_coupled_c1_join(coupled_cylinder):
    """The u^ derivatives of both sides meet at E = 0 along the predicted direction"""
    model, chart, library, atlas = coupled_cylinder
    report = c1_join_test(
        atlas.positive[0], atlas.negative[0], model, chart, library, required=2e-10
    )
    assert report.passed, report.failures
    assert report.alignment_defect is not None
    assert report.hat_u_defect < 1e-3


@pytest.mark.slow
def test_coupled_normal_hyperbolicity(coupled_cylinder):
    """Inner passages and the homoclinic separate tangent from normal growth"""
    model, chart, _, atlas = coupled_cylinder
    report = normal_hyperbolicity_test(atlas, model, chart)
    assert not report.vacuous
    assert report.passed, report.failures
    assert report.homoclinic_normal_rate is not None
    assert abs(report.tangent_rate) <= chart.exponents[0] + report.slack + 3.0 * report.tangent_stderr
    assert report.normal_rate >= chart.exponents[1] - report.slack - 3.0 * report.normal_stderr


if __name__ == "__main__":
    pytest.main(["-v", __file__])
