"""
🌀 tests.test_homoclinics

Contains tests for homoclinic shooting, the reflected partners, the
transversality certificate and the search for a covering torus.
"""

import numpy as np
import pytest

from nhicyl.common.errors import (
    InconsistentCovering,
    NoCoveringFound,
    TangencyDetected,
)
from nhicyl.cylinder import count_holes
from nhicyl.homoclinics import (
    analyze_H3,
    check_H2,
    class_label,
    find_homoclinics,
    is_shrinkable,
    pair_by_symmetry,
    transversality_margin,
)
from nhicyl.localframe import build_chart
from nhicyl.model import analyze_saddle, coupled_pendula, pendulum
from nhicyl.types.homoclinic import HomoclinicChain


@pytest.fixture(scope="module")
def pendulum_library():
    model = pendulum()
    chart = build_chart(model, analyze_saddle(model))
    orbits = find_homoclinics(model, chart, [[1.0], [-1.0]], jobs=2)
    return model, chart, orbits


def test_class_label_and_shrinkable(pendulum_library):
    _, _, orbits = pendulum_library
    assert class_label((1, -2)) == "(1,-2)"
    assert not any(is_shrinkable(o) for o in orbits)


def test_pendulum_homoclinics_follow_the_separatrix(pendulum_library):
    """Both seeds give the two branches of y = +-2 sin(pi x) on H = 0"""
    model, chart, orbits = pendulum_library
    assert [o.homology_class for o in orbits] == [(1,), (-1,)]
    for orbit in orbits:
        assert orbit.mismatch < 1e-8
        assert abs(orbit.segment.energy) < 1e-9
        states = orbit.segment.states
        sign = orbit.homology_class[0]
        np.testing.assert_allclose(states[:, 1], sign * 2.0 * np.abs(np.sin(np.pi * states[:, 0])), atol=1e-6)
        assert orbit.departure_sign == sign
        assert orbit.arrival_sign == sign
        assert 0.0 < orbit.entry.t < orbit.exit.t


def test_duplicate_seeds_are_reported_once(pendulum_library):
    model, chart, _ = pendulum_library
    orbits = find_homoclinics(model, chart, [[1.0], [2.0], [-1.0]])
    assert len(orbits) == 2


def test_pair_by_symmetry_recovers_the_other_branch(pendulum_library):
    """The reflection of the (1) orbit starts where the (-1) orbit starts"""
    model, chart, orbits = pendulum_library
    partner = pair_by_symmetry(model, chart, orbits[0])
    assert partner.homology_class == (-1,)
    assert partner.mismatch < 1e-8
    np.testing.assert_allclose(partner.entry.w, orbits[1].entry.w, atol=1e-8)


def test_check_H2_for_the_pendulum(pendulum_library):
    """In one degree of freedom both manifolds are the flow line"""
    model, chart, orbits = pendulum_library
    certificate = check_H2(model, chart, orbits[0])
    assert certificate.passed
    assert certificate.margin == 1.0
    assert certificate.departure_angle < 1e-12
    assert certificate.departure_coefficient == pytest.approx(1.0)


def test_transversality_margin():
    eye = np.eye(4)
    assert transversality_margin(eye[:, :2], eye[:, 2:]) == pytest.approx(1.0)

    flow = eye[:, 0]
    unstable = np.column_stack([eye[:, 0], eye[:, 1]])
    stable = np.column_stack([eye[:, 0], eye[:, 2]])
    assert transversality_margin(unstable, stable, flow) == pytest.approx(1.0)

    tangent = np.column_stack([eye[:, 0] + 1e-8 * eye[:, 2], eye[:, 3]])
    assert transversality_margin(eye[:, :2], tangent) < 1e-7
    with pytest.raises(TangencyDetected) as info:
        transversality_margin(eye[:, :2], tangent, tol=1e-6)
    assert info.value.tolerance == 1e-6


def test_analyze_H3_single_orbit_closes_on_the_base_torus(pendulum_library):
    _, _, orbits = pendulum_library
    chain = analyze_H3([orbits[0]])
    assert chain.h == [1]
    assert chain.ell == 0
    assert chain.hole_count == 1
    assert chain.total_class == [1]
    assert count_holes(chain) == 1


def test_analyze_H3_needs_orbits():
    with pytest.raises(NoCoveringFound):
        analyze_H3([])


@pytest.fixture(scope="module")
def coupled_chart():
    model = coupled_pendula(0.1)
    return model, build_chart(model, analyze_saddle(model))


def test_coupled_pendula_rotation_homoclinics(coupled_chart):
    """Seeds along +-u1 close up on the translates +-(1,0) of the saddle"""
    model, chart = coupled_chart
    orbits = find_homoclinics(model, chart, [[1.0, 0.0], [-1.0, 0.0]], jobs=2, strict=True)
    assert [o.homology_class for o in orbits] == [(1, 0), (-1, 0)]
    for orbit in orbits:
        assert orbit.mismatch < 1e-8
        assert abs(orbit.segment.energy) < 1e-9
        assert np.linalg.norm(orbit.segment.end[:2] - np.array(orbit.homology_class)) < chart.r_prime


@pytest.mark.slow
def test_coupled_pendula_chain_covers_the_doubled_torus(coupled_chart):
    """(1,0) then (0,1) closes after two laps on T^2_(2,2) with four holes"""
    model, chart = coupled_chart
    seeds = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
    orbits = find_homoclinics(model, chart, seeds, jobs=4, strict=True)
    assert sorted(o.homology_class for o in orbits) == [(-1, 0), (0, -1), (0, 1), (1, 0)]
    for orbit in orbits:
        assert orbit.mismatch < 1e-8

    by_class = {o.homology_class: o for o in orbits}
    chain = analyze_H3([by_class[(1, 0)], by_class[(0, 1)]])
    assert chain.h == [2, 2]
    assert chain.ell == 1
    assert chain.junctions == [[0, 0], [1, 0], [1, 1], [0, 1]]
    assert count_holes(chain) == 4


def test_count_holes_two_classes_doubled_torus():
    """(1,0) and (0,1) twice around T^2_(2,2) give four distinct lifts"""
    chain = HomoclinicChain(
        order=[0, 1], classes=[[1, 0], [0, 1]], h=[2, 2], ell=1, separation=0.1
    )
    assert chain.hole_count == 4
    assert count_holes(chain) == 4


def test_count_holes_rejects_overlapping_lifts():
    chain = HomoclinicChain(order=[0], classes=[[1, 0]], h=[1, 1], ell=1, separation=0.1)
    with pytest.raises(InconsistentCovering):
        count_holes(chain)


if __name__ == "__main__":
    pytest.main(["-v", __file__])
