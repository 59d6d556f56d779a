"""
🌀 tests.test_utils

Contains tests for the artifact converters and the text renderings.
"""

import json

import numpy as np
import pytest

from nhicyl.common.errors import HomoclinicError, StageMissing
from nhicyl.continuation import continue_family, positive_spec
from nhicyl.homoclinics import analyze_H3, find_homoclinics
from nhicyl.localframe import build_chart
from nhicyl.model import analyze_saddle, pendulum
from nhicyl.types.cylinder import CheckResult, VerificationReport
from nhicyl.types.homoclinic import H2Certificate
from nhicyl.types.orbits import OrbitSegment
from nhicyl.utils.converters import (
    convert_family_to_record,
    convert_homoclinic_to_record,
    convert_record_to_family,
    convert_record_to_homoclinic,
    convert_to_plain,
    read_json,
    write_json,
)
from nhicyl.utils.formatting import (
    family_table,
    format_number,
    format_verification,
    homoclinic_table,
    render_text,
)


@pytest.fixture(scope="module")
def pendulum_run():
    model = pendulum()
    chart = build_chart(model, analyze_saddle(model))
    library = find_homoclinics(model, chart, [[1.0], [-1.0]])
    chain = analyze_H3([library[0]])
    family = continue_family(
        model, chart, positive_spec(library, chain), library, [1e-3, 1e-4], label="rotation"
    )
    return model, chart, library, family


def _report(passed: bool) -> VerificationReport:
    return VerificationReport(
        system="pendulum",
        hole_count=1,
        h=[1],
        ell=0,
        checks=[
            CheckResult(name="transit_time E > 0", passed=True, value=0.15915, threshold="+- 2%"),
            CheckResult(name="vertex", passed=passed, detail="exact zero"),
        ],
        fitted_constants={"c_E (E > 0)": 1.5e-3},
    )


def test_convert_to_plain():
    """Arrays, numpy scalars, models and dataclasses become JSON-ready values"""
    certificate = H2Certificate(
        homology_class=[1], margin=1.0, margin_tolerance=1e-6,
        departure_angle=0.0, arrival_angle=0.0, angle_tolerance=1e-3,
    )
    segment = OrbitSegment(times=np.array([0.0, 1.0]), states=np.zeros((2, 2)), energy=0.0)
    plain = convert_to_plain(
        {
            "array": np.arange(3),
            "scalar": np.float64(0.25),
            "count": np.int64(4),
            "flag": np.bool_(True),
            "missing": float("nan"),
            "pair": (1, 2.0),
            "certificate": certificate,
            "segment": segment,
        }
    )
    assert plain["array"] == [0, 1, 2]
    assert type(plain["scalar"]) is float and type(plain["count"]) is int
    assert plain["flag"] is True
    assert plain["missing"] is None
    assert plain["pair"] == [1, 2.0]
    assert plain["certificate"]["homology_class"] == [1]
    assert plain["segment"] == {"times": [0.0, 1.0], "states": [[0.0, 0.0], [0.0, 0.0]], "energy": 0.0}
    json.dumps(plain, allow_nan=False)


def test_write_json_is_deterministic_and_exact(tmp_path):
    value = {"b": [0.1 + 0.2, 1e-300, -2.5e17], "a": np.array([np.pi])}
    first = write_json(tmp_path / "one" / "value.json", value)
    second = write_json(tmp_path / "two" / "value.json", dict(reversed(list(value.items()))))
    assert first.read_bytes() == second.read_bytes()
    loaded = read_json(first)
    assert loaded["b"][0] == 0.1 + 0.2
    assert loaded["b"][1] == 1e-300
    assert loaded["a"] == [np.pi]


def test_read_json_reports_the_missing_stage(tmp_path):
    with pytest.raises(StageMissing) as info:
        read_json(tmp_path / "chart.json", "analyze")
    assert info.value.stage == "analyze"

    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(StageMissing):
        read_json(broken, "homoclinics")


def test_homoclinic_record_is_reintegrated(pendulum_run):
    """A stored start point rebuilds the same orbit; a wrong class is caught"""
    model, chart, library, _ = pendulum_run
    orbit = library[0].with_margin(0.5)
    record = json.loads(json.dumps(convert_to_plain(convert_homoclinic_to_record(orbit, "00.csv"))))
    assert record["csv"] == "00.csv"
    assert record["entry"]["kind"] == "u1"

    rebuilt = convert_record_to_homoclinic(model, chart, record)
    assert rebuilt.homology_class == orbit.homology_class
    assert rebuilt.transversality_margin == 0.5
    np.testing.assert_allclose(rebuilt.segment.end, orbit.segment.end, atol=1e-9)

    record["homology_class"] = [-1]
    with pytest.raises(HomoclinicError):
        convert_record_to_homoclinic(model, chart, record)


def test_family_record_rebuilds_the_orbits(pendulum_run):
    model, chart, library, family = pendulum_run
    record = json.loads(json.dumps(convert_to_plain(convert_family_to_record(family))))
    assert [o["csv"] for o in record["orbits"]] == [None, None]

    rebuilt = convert_record_to_family(model, chart, library, record)
    assert rebuilt.label == "rotation"
    assert rebuilt.spec == family.spec
    for a, b in zip(rebuilt.orbits, family.orbits):
        assert a.energy == b.energy
        assert a.period == pytest.approx(b.period, rel=1e-12)
        np.testing.assert_array_equal(a.anchors, b.anchors)


def test_format_number():
    assert format_number(None) == "-"
    assert format_number(0.000123456) == "0.0001235"
    assert format_number(12345.0, 2) == "1.2e+04"


def test_format_verification_is_plain_text():
    text = format_verification(_report(passed=False))
    assert "\x1b[" not in text
    assert "transit_time E > 0" in text
    assert "FAIL" in text and "pass" in text
    assert "failed: vertex" in text
    assert "c_E (E > 0)" in text
    assert "C^1" in text
    assert "all enabled checks passed" in format_verification(_report(passed=True))


def test_run_tables_render(pendulum_run):
    _, _, library, family = pendulum_run
    text = render_text(homoclinic_table(library), family_table([family]))
    assert "homoclinic library" in text
    assert "(1)" in text and "(-1)" in text
    assert "rotation" in text


if __name__ == "__main__":
    pytest.main(["-v", __file__])
