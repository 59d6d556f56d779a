"""
🌀 tests.test_common

Contains tests for the logger, the cache, the error hierarchy and the run
configuration.
"""

import logging

import numpy as np
import pytest

from nhicyl.common import errors
from nhicyl.common.cache import cached, clear_cache, make_hashable
from nhicyl.common.logger import RichMarkupFilter, setup_logging, verbosity
from nhicyl.types.config import Checks, RunConfig


PENDULUM_SYSTEM = {
    "n": 1,
    "A": [1.0],
    "modes": [{"m": [0], "a": 1.0}, {"m": [1], "a": -1.0}],
}


def test_make_hashable_arrays_by_value():
    """Equal arrays share a key, differing shapes or dtypes do not"""
    a = np.arange(6.0)
    assert make_hashable(a) == make_hashable(a.copy())
    assert make_hashable(a) != make_hashable(a.reshape(2, 3))
    assert make_hashable(a) != make_hashable(a.astype(np.float32))
    assert make_hashable({"x": 1, "y": (2.0, a)}) == make_hashable({"y": (2.0, a.copy()), "x": 1})


def test_cached_memoizes_and_does_not_cache_errors():
    """A cached function runs once per key; raised errors are not stored"""
    clear_cache()
    calls = []

    @cached(lambda x: make_hashable(x))
    def square(x):
        calls.append(x)
        if x < 0:
            raise ValueError("negative")
        return x * x

    assert square(3.0) == 9.0
    assert square(3.0) == 9.0
    assert calls == [3.0]

    for _ in range(2):
        with pytest.raises(ValueError):
            square(-1.0)
    assert calls == [3.0, -1.0, -1.0]
    clear_cache()


def test_verbosity_sets_logger_and_handlers():
    """verbosity() moves the package logger and its rich handler together"""
    logger = setup_logging()
    verbosity("debug")
    assert logger.level == logging.DEBUG
    assert all(h.level == logging.DEBUG for h in logger.handlers)
    verbosity("warning")
    assert logger.level == logging.WARNING
    assert len(logger.handlers) == 1
    assert logger.propagate is False


def test_markup_filter_escapes_the_message():
    """Logged brackets stay literal; the level style wraps the whole message"""
    record = logging.LogRecord(
        "nhicyl.flow", logging.WARNING, __file__, 1, "failures %s", ("[red] drift",), None
    )
    assert RichMarkupFilter().filter(record)
    assert record.msg == "[italic yellow]failures \\[red] drift[/italic yellow]"
    assert record.args is None

    assert RichMarkupFilter().filter(record)
    assert record.msg.count("italic yellow") == 2


def test_error_hierarchy_carries_quantities():
    """Named errors subclass their module base and keep the offending values"""
    e = errors.ResonanceDetected([1, -2], 3e-12)
    assert isinstance(e, errors.ModelError) and isinstance(e, errors.NHICError)
    assert e.k == (1, -2)

    e = errors.EventNotReached(12.5, "u1")
    assert isinstance(e, errors.FlowError)
    assert e.t_max == 12.5

    xi = np.array([1.0, 0.0])
    e = errors.ConeViolated(0.25, xi, -1e-3)
    assert isinstance(e, errors.ChartError)
    assert e.t == 0.25 and e.xi is xi

    assert issubclass(errors.MissingFamily, errors.InconsistentCovering)
    assert issubclass(errors.InconsistentChain, errors.ContinuationError)
    assert issubclass(errors.EnergyDriftExceeded, errors.FlowError)
    for name in ("ConfigInvalid", "StageMissing", "CheckFailed"):
        assert issubclass(getattr(errors, name), errors.CLIError)


def test_run_config_defaults_and_checks():
    """A minimal config validates; the default suite leaves the oracle off"""
    config = RunConfig.model_validate({"system": PENDULUM_SYSTEM})
    assert config.energy.e0 > config.energy.e_min > 0.0
    assert config.tolerances.tube_factor == 10.0
    assert "oracle" not in config.checks.enabled()
    assert "c1_join" in Checks().enabled()


def test_run_config_rejects_inverted_energy_range(tmp_path):
    """e0 < e_min surfaces as ConfigInvalid with the file path"""
    path = tmp_path / "bad.cfg"
    path.write_text(
        "system:\n  n: 1\n  A: [1.0]\n  modes:\n    - {m: [1], a: -1.0}\n"
        "energy:\n  e0: 1.0e-12\n  e_min: 1.0e-2\n"
    )
    with pytest.raises(errors.ConfigInvalid) as info:
        RunConfig.from_file(path)
    assert info.value.path == str(path)


@pytest.mark.parametrize(
    "document",
    [
        "system: {n: 1, A: [1.0], modes: [{m: [1], a: -1.0}]}\nchart: {r_prime: 0.1, r: 0.2}\n",
        "system: {n: 1, A: [1.0], modes: [{m: [1], a: -1.0}]}\nenergy: {ratio: 1.5}\n",
        "system: {n: 1, A: [1.0], modes: [{m: [1], a: -1.0}]}\ntolerances: {newton: -1.0}\n",
        "system_file: pendulum.yaml\nsystem: {n: 1, A: [1.0], modes: [{m: [1], a: -1.0}]}\n",
        "unknown_key: 3\nsystem: {n: 1, A: [1.0], modes: [{m: [1], a: -1.0}]}\n",
        "- just\n- a list\n",
    ],
)
def test_run_config_validators(tmp_path, document):
    """Radii order, ratio range, positive tolerances and one system source"""
    path = tmp_path / "config.cfg"
    path.write_text(document)
    with pytest.raises(errors.ConfigInvalid):
        RunConfig.from_file(path)


def test_run_config_resolves_system_file(tmp_path):
    """A relative system_file is resolved against the config's directory"""
    (tmp_path / "systems").mkdir()
    path = tmp_path / "systems" / "run.cfg"
    path.write_text("system_file: pendulum.yaml\n")
    config = RunConfig.from_file(path)
    assert config.system_file == str((tmp_path / "systems" / "pendulum.yaml").resolve())


if __name__ == "__main__":
    pytest.main(["-v", __file__])
