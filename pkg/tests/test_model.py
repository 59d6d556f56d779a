"""
🌀 tests.test_model

Contains tests for the Hamiltonian models, the saddle spectrum and the
saddle hypothesis certificate.
"""

import mpmath
import numpy as np
import pytest

from nhicyl.common.errors import (
    HessianNotPositiveDefinite,
    ModelError,
    RepeatedExponent,
    ResonanceDetected,
)
from nhicyl.model import (
    analyze_saddle,
    build_model,
    check_H1,
    check_minimum,
    coupled_pendula,
    evaluate,
    evaluate_mp,
    kappa_min,
    linear_saddle,
    load_system,
    pendulum,
)


def test_pendulum_exponent_is_two_pi():
    """V = 1 - cos 2 pi x has the single exponent 2 pi"""
    spectrum = analyze_saddle(pendulum())
    assert spectrum.exponents.shape == (1,)
    assert spectrum.exponents[0] == pytest.approx(2.0 * np.pi, rel=1e-12)
    assert spectrum.max_residual < 1e-10


def test_coupled_pendula_exponents_match_hessian_eigenvalues():
    """For A = I the exponents are the square roots of the Hessian spectrum"""
    c = 0.1
    model = coupled_pendula(c)
    hessian = 4.0 * np.pi**2 * np.array([[1.0 + c, -c], [-c, 2.0 + c]])
    expected = np.sqrt(np.linalg.eigvalsh(hessian))
    spectrum = analyze_saddle(model)
    np.testing.assert_allclose(spectrum.exponents, expected, rtol=1e-10)
    assert spectrum.exponents[0] < spectrum.exponents[1]
    assert spectrum.max_residual < 1e-9


def test_eigenvectors_span_the_linearization():
    """Xi^+ and Xi^- are eigenvectors of J diag(-d2V, A) for +-lambda"""
    model = linear_saddle([1.0, np.sqrt(3.0)])
    spectrum = analyze_saddle(model)
    M = spectrum.linearization
    for lam, plus, minus in zip(spectrum.exponents, spectrum.eigvec_plus, spectrum.eigvec_minus):
        np.testing.assert_allclose(M @ plus, lam * plus, atol=1e-12)
        np.testing.assert_allclose(M @ minus, -lam * minus, atol=1e-12)
        assert np.linalg.norm(plus) == pytest.approx(1.0)


def test_evaluate_agrees_with_high_precision():
    """The numpy and mpmath evaluations of H agree at a generic point"""
    model = coupled_pendula(0.1)
    z = np.array([0.123, -0.371, 0.9, -1.4])
    H, grad, field = evaluate(model, z)
    assert float(evaluate_mp(model, z, dps=40)) == pytest.approx(H, abs=1e-13)
    n = model.n
    np.testing.assert_allclose(field, np.concatenate([grad[n:], -grad[:n]]), atol=1e-14)


def test_evaluate_mp_returns_mpf():
    value = evaluate_mp(pendulum(), [0.25, 0.0])
    assert isinstance(value, mpmath.mpf)
    assert float(value) == pytest.approx(-1.0, abs=1e-15)


def test_load_system_moves_the_minimum_to_the_origin():
    """V = 1 + cos 2 pi x has its minimum at x = 1/2; the loaded model at 0"""
    model = load_system(
        {"n": 1, "A": [1.0], "modes": [{"m": [0], "a": 1.0}, {"m": [1], "a": 1.0}]}
    )
    assert model.potential.value(np.zeros(1)) == pytest.approx(0.0, abs=1e-14)
    assert np.abs(model.potential.gradient(np.zeros(1))).max() < 1e-10
    assert analyze_saddle(model).exponents[0] == pytest.approx(2.0 * np.pi, rel=1e-10)


def test_load_system_from_yaml(tmp_path):
    path = tmp_path / "quadratic.yaml"
    path.write_text("n: 2\nA: [1.0, 0.0, 0.0, 1.0]\nB: [1.0, 0.0, 0.0, 3.0]\n")
    model = load_system(path)
    assert model.name == "quadratic"
    assert not model.periodic
    np.testing.assert_allclose(analyze_saddle(model).exponents, [1.0, np.sqrt(3.0)])


def test_load_system_rejects_bad_definitions():
    with pytest.raises(ModelError):
        load_system({"n": 2, "A": [1.0, 0.0, 0.0, 1.0], "modes": [{"m": [1], "a": -1.0}]})
    with pytest.raises(ModelError):
        load_system({"n": 1, "A": [1.0]})
    with pytest.raises(ModelError):
        build_model([[1.0]], B=[[1.0]], modes=[([1], -1.0, 0.0)])


def test_saddle_errors():
    """Non-positive Hessian, repeated exponents and low-order resonances raise"""
    with pytest.raises(HessianNotPositiveDefinite):
        analyze_saddle(build_model([[1.0, 0.0], [0.0, 1.0]], B=[[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(RepeatedExponent):
        analyze_saddle(linear_saddle([1.0, 1.0]))
    with pytest.raises(ResonanceDetected) as info:
        analyze_saddle(linear_saddle([1.0, 2.0]))
    k = info.value.k
    assert k[0] == -2 * k[1]


def test_kappa_min():
    assert kappa_min([1.0]) == 3
    assert kappa_min([1.0, 1.5]) == 3
    assert kappa_min([1.0, 2.5]) == 4


def test_check_H1_passes_for_bundled_systems():
    for model in (pendulum(), coupled_pendula(0.1)):
        certificate = check_H1(model, analyze_saddle(model), minimum_grid=32)
        assert certificate.failures == []
        assert certificate.minimum.unique
        assert certificate.smoothness_automatic


def test_check_minimum_flags_a_second_minimum():
    """1 - cos 4 pi x has a second minimum at x = 1/2"""
    model = build_model([[1.0]], modes=[([0], 1.0, 0.0), ([2], -1.0, 0.0)])
    report = check_minimum(model, per_axis=32)
    assert not report.unique
    assert report.heuristic
    assert any(abs(point[0] - 0.5) < 1e-12 for point in report.competitors)
    certificate = check_H1(model, analyze_saddle(model), minimum_grid=32)
    assert any("minimum" in failure for failure in certificate.failures)


if __name__ == "__main__":
    pytest.main(["-v", __file__])
