"""
🌀 tests.test_cli

Contains tests for the `nhicyl` command line and its exit codes.
"""

import json
from pathlib import Path

import pytest
import yaml
from typer.testing import CliRunner

from nhicyl.cli import EXIT_CODES, Pipeline, Stage, app
from nhicyl.common.errors import ConfigInvalid, StageMissing
from nhicyl.types.config import RunConfig

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

runner = CliRunner()


@pytest.fixture
def pendulum_config(tmp_path):
    path = tmp_path / "pendulum.cfg"
    path.write_text((CONFIGS / "pendulum.cfg").read_text())
    return path


def _write_config(tmp_path, **changes) -> Path:
    document = yaml.safe_load((CONFIGS / "pendulum.cfg").read_text())
    for section, values in changes.items():
        document[section].update(values)
    path = tmp_path / "changed.cfg"
    path.write_text(yaml.safe_dump(document))
    return path


def test_shipped_configs_validate():
    for name in ("pendulum.cfg", "coupled_pendula.cfg"):
        config = RunConfig.from_file(CONFIGS / name)
        assert config.energy.e0 > config.energy.e_min


def test_invalid_energy_window_exits_with_config_invalid(tmp_path):
    path = _write_config(tmp_path, energy={"e0": 1e-14})
    with pytest.raises(ConfigInvalid):
        RunConfig.from_file(path)
    result = runner.invoke(app, ["analyze", "--config", str(path), "--out", str(tmp_path / "out")])
    assert result.exit_code == EXIT_CODES["config_invalid"]


def test_missing_config_file_is_invalid(tmp_path):
    result = runner.invoke(app, ["analyze", "--config", str(tmp_path / "none.cfg")])
    assert result.exit_code == EXIT_CODES["config_invalid"]


def test_continue_from_an_empty_directory_is_a_missing_stage(pendulum_config, tmp_path):
    """Reading the chart back fails before anything is computed"""
    out = tmp_path / "empty"
    result = runner.invoke(
        app,
        ["continue", "--config", str(pendulum_config), "--out", str(out), "--stage-from", "continue"],
    )
    assert result.exit_code == EXIT_CODES["stage_missing"]

    pipeline = Pipeline(RunConfig.from_file(pendulum_config), out)
    with pytest.raises(StageMissing) as info:
        pipeline.run(Stage.continue_, Stage.continue_)
    assert info.value.stage == "analyze"


def test_stage_from_after_target_is_invalid(pendulum_config, tmp_path):
    result = runner.invoke(
        app,
        ["analyze", "--config", str(pendulum_config), "--out", str(tmp_path), "--stage-from", "verify"],
    )
    assert result.exit_code == EXIT_CODES["config_invalid"]


def test_analyze_writes_the_spectrum_and_chart(pendulum_config, tmp_path):
    out = tmp_path / "run"
    result = runner.invoke(app, ["analyze", "--config", str(pendulum_config), "--out", str(out)])
    assert result.exit_code == EXIT_CODES["ok"], result.output
    spectrum = json.loads((out / "spectrum.json").read_text())
    assert spectrum is not None
    chart = json.loads((out / "chart.json").read_text())
    assert chart["r"] < chart["r_prime"]


def test_out_directory_from_the_environment(pendulum_config, tmp_path):
    out = tmp_path / "from_env"
    result = runner.invoke(
        app, ["analyze", "--config", str(pendulum_config)], env={"NHICYL_OUT": str(out)}
    )
    assert result.exit_code == EXIT_CODES["ok"], result.output
    assert (out / "chart.json").exists()


def test_homoclinics_stage_reuses_the_chart(pendulum_config, tmp_path):
    out = tmp_path / "run"
    assert runner.invoke(app, ["analyze", "-c", str(pendulum_config), "-o", str(out)]).exit_code == 0
    result = runner.invoke(
        app, ["homoclinics", "-c", str(pendulum_config), "-o", str(out), "--stage-from", "homoclinics"]
    )
    assert result.exit_code == EXIT_CODES["ok"], result.output
    manifest = json.loads((out / "homoclinics" / "manifest.json").read_text())
    assert sorted(o["homology_class"] for o in manifest["orbits"]) == [[-1], [1]]
    chain = json.loads((out / "chain.json").read_text())
    assert chain["h"] == [1] and chain["ell"] == 0
    for record in manifest["orbits"]:
        assert (out / "homoclinics" / record["csv"]).exists()


if __name__ == "__main__":
    pytest.main(["-v", __file__])
