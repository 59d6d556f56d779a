"""
🌀 tests.test_continuation

Contains tests for the shadowing itineraries, the periodic-orbit solver,
continuation in energy, the Floquet report and the symmetry checks.
"""

from dataclasses import replace

import numpy as np
import pytest

from nhicyl.common.errors import ContinuationError, EnergyOutOfRange, InconsistentChain
from nhicyl.continuation import (
    continue_family,
    energy_grid,
    floquet_analysis,
    graph_transform_oracle,
    initial_guess,
    negative_spec,
    partner_index,
    pendulum_period,
    period_law,
    positive_spec,
    rebuild_periodic,
    reflect_periodic,
    solve_periodic,
    symmetric_crossings,
    uniqueness_probe,
)
from nhicyl.homoclinics import analyze_H3, find_homoclinics
from nhicyl.localframe import build_chart
from nhicyl.model import analyze_saddle, coupled_pendula, pendulum


@pytest.fixture(scope="module")
def pendulum_setup():
    model = pendulum()
    chart = build_chart(model, analyze_saddle(model))
    library = find_homoclinics(model, chart, [[1.0], [-1.0]])
    chain = analyze_H3([library[0]])
    return model, chart, library, chain


@pytest.fixture(scope="module")
def rotation_family(pendulum_setup):
    model, chart, library, chain = pendulum_setup
    spec = positive_spec(library, chain)
    return continue_family(model, chart, spec, library, energy_grid(1e-3, 1e-7, 0.1), e0=1e-3)


@pytest.fixture(scope="module")
def coupled_rotation():
    model = coupled_pendula(0.1)
    chart = build_chart(model, analyze_saddle(model))
    library = find_homoclinics(model, chart, [[1.0, 0.0], [-1.0, 0.0]], strict=True)
    assert [o.homology_class for o in library] == [(1, 0), (-1, 0)]
    return model, chart, library, positive_spec(library, analyze_H3([library[0]]))


def test_pendulum_period_limits():
    """One small libration lasts 1; periods grow without bound at the separatrix"""
    assert pendulum_period(-2.0 + 1e-12) == pytest.approx(1.0, rel=1e-9)
    assert pendulum_period(1e-8) > pendulum_period(1e-4) > pendulum_period(1.0)
    with pytest.raises(ValueError):
        pendulum_period(-3.0)


def test_energy_grid():
    grid = energy_grid(1e-2, 1e-6, 0.1)
    np.testing.assert_allclose(grid, [1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    assert np.all(energy_grid(1e-2, 1e-3, 0.5, sign=-1) < 0.0)
    assert energy_grid(1e-6, 1e-2, 0.5).size == 0


def test_itineraries(pendulum_setup):
    _, _, library, chain = pendulum_setup
    spec = positive_spec(library, chain)
    assert spec.k == 1 and spec.energy_sign == 1
    assert [leg.kind for leg in spec.legs] == ["outer", "inner"]
    assert partner_index(library, 0) == 1

    pair = negative_spec(library, 0, 1)
    assert pair.order == [0, 1] and pair.pair == 0
    assert pair.total_shift == [0]
    assert initial_guess(library, pair).shape == (4, 0)

    with pytest.raises(InconsistentChain):
        negative_spec(library, 0, 0)


def test_rotation_period_matches_the_pendulum(pendulum_setup):
    model, chart, library, chain = pendulum_setup
    spec = positive_spec(library, chain)
    orbit = solve_periodic(model, chart, spec, library, 1e-4)
    assert orbit.period == pytest.approx(pendulum_period(1e-4), rel=1e-8)
    assert orbit.closure < 1e-9
    assert orbit.itinerary == [(1, 1), (1, 0)]
    assert orbit.segment.t_end == pytest.approx(orbit.period)

    rebuilt = rebuild_periodic(model, chart, spec, library, 1e-4, orbit.anchors)
    assert rebuilt.period == pytest.approx(orbit.period, rel=1e-12)


def test_libration_period_matches_the_pendulum(pendulum_setup):
    """The pair (z, s z) closes into the libration inside the separatrix loop"""
    model, chart, library, _ = pendulum_setup
    spec = negative_spec(library, 0, 1)
    orbit = solve_periodic(model, chart, spec, library, -1e-4)
    assert orbit.period == pytest.approx(pendulum_period(-1e-4), rel=1e-8)
    assert len(orbit.legs) == 4

    report = symmetric_crossings(model, orbit)
    assert report.reflection_distance < 1e-6
    assert report.zero_momentum_crossings == 2


def test_solve_periodic_energy_range(pendulum_setup):
    model, chart, library, chain = pendulum_setup
    spec = positive_spec(library, chain)
    for energy in (0.0, -1e-4, 1e-1):
        with pytest.raises(EnergyOutOfRange):
            solve_periodic(model, chart, spec, library, energy, e0=1e-2)


def test_continue_family_and_period_law(rotation_family, pendulum_setup):
    """T(E) - (1 / lambda) ln(1 / E) stays in a narrow band"""
    family = rotation_family
    assert len(family) == 5
    assert np.all(np.diff(family.energies) > 0.0)
    for orbit in family.orbits:
        assert orbit.period == pytest.approx(pendulum_period(orbit.energy), rel=1e-7)

    report = period_law(family, 2.0 * np.pi)
    assert report.inner_passages == 1
    assert report.bounded
    assert report.band < 0.05
    assert np.mean(report.offsets) == pytest.approx(np.log(32.0) / (2.0 * np.pi), abs=0.02)


def test_period_law_flags_an_extra_logarithm(rotation_family):
    """A period growing faster than (1 / lambda) ln(1 / E) drifts out of the law"""
    family = rotation_family
    drifting = replace(
        family,
        orbits=[
            replace(o, period=o.period + 0.05 * np.log(1.0 / o.energy)) for o in family.orbits
        ],
    )
    report = period_law(drifting, 2.0 * np.pi)
    assert report.band < report.band_bound
    assert report.drift == pytest.approx(0.05 * 2.0 * np.pi, rel=0.05)
    assert not report.bounded

    wobble = replace(
        family,
        orbits=[
            replace(o, period=o.period + 0.6 * (-1.0) ** i) for i, o in enumerate(family.orbits)
        ],
    )
    assert not period_law(wobble, 2.0 * np.pi).bounded


def test_floquet_in_one_degree_of_freedom(rotation_family):
    """Only the energy direction is left: sigma_1 = 1 and no transverse pairs"""
    report = floquet_analysis(rotation_family.orbits[0])
    assert report.multipliers == []
    assert report.pairing_defect == 0.0
    assert report.sigma_1 == pytest.approx(1.0, abs=1e-6)


def test_reflect_periodic_turns_the_other_way(pendulum_setup, rotation_family):
    model, chart, library, _ = pendulum_setup
    orbit = rotation_family.orbits[-1]
    partner = reflect_periodic(model, chart, orbit, library)
    assert partner.spec.classes == [[-1]]
    assert partner.period == pytest.approx(orbit.period, rel=1e-8)
    assert symmetric_crossings(model, orbit).zero_momentum_crossings == 0


def test_uniqueness_probe_single_solution(pendulum_setup, rotation_family):
    model, chart, library, _ = pendulum_setup
    report = uniqueness_probe(model, chart, rotation_family.orbits[0], library, n_probes=3)
    assert report.unique
    assert report.converged == report.coincident == 3


def test_graph_transform_oracle_needs_two_degrees(pendulum_setup, rotation_family):
    model, chart, library, _ = pendulum_setup
    with pytest.raises(ContinuationError):
        graph_transform_oracle(model, chart, rotation_family.spec, library, 1e-4)


@pytest.mark.slow
@pytest.mark.parametrize("energy", [1e-4, 1e-6, 1e-8])
def test_coupled_pendula_rotation_family(coupled_rotation, energy):
    """Newton, Floquet pairing and the graph transform agree for two pendula"""
    model, chart, library, spec = coupled_rotation
    orbit = solve_periodic(model, chart, spec, library, energy)
    assert orbit.closure < 1e-8

    report = floquet_analysis(orbit, model=model, chart=chart)
    assert len(report.multipliers) == 1
    assert report.multipliers[0] > 1.0
    assert report.pairing_defect < 1e-4
    assert report.sigma_1 == pytest.approx(1.0, abs=1e-5)
    assert report.factorization_defect < 1e-4

    oracle = graph_transform_oracle(
        model, chart, spec, library, energy, newton_anchor=orbit.unknowns[:2]
    )
    assert oracle.agreement < 1e-6


@pytest.mark.slow
def test_coupled_chain_multiplier_factors_over_passages():
    """Around (1,0) then (0,1) the leading multiplier is the product of the two passages"""
    model = coupled_pendula(0.1)
    chart = build_chart(model, analyze_saddle(model))
    orbits = find_homoclinics(model, chart, [[1.0, 0.0], [0.0, 1.0]], strict=True)
    by_class = {o.homology_class: o for o in orbits}
    library = [by_class[(1, 0)], by_class[(0, 1)]]
    chain = analyze_H3(library)
    spec = positive_spec(library, chain)
    assert spec.k == 2

    orbit = solve_periodic(model, chart, spec, library, 1e-6)
    report = floquet_analysis(orbit, model=model, chart=chart)
    assert len(report.leg_products) == 2
    assert all(p > 1.0 for p in report.leg_products)
    assert report.product_defect is not None
    assert report.product_defect < 0.1
    assert report.factorization_defect < 1e-4


if __name__ == "__main__":
    pytest.main(["-v", __file__])
