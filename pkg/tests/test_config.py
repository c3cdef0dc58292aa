import json
import os
from pathlib import Path

import pytest

from udn_se_economics.config import (
    OUTPUT_DIR_ENV,
    ExperimentConfig,
    apply_overrides,
    load_config,
    output_dir,
    range_values,
)
from udn_se_economics.errors import ConfigError, UsageError

REPO_CONFIG = Path(__file__).resolve().parents[1] / "config.json"


def _write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "exp.json"
    path.write_text(text, encoding="utf-8")
    return path


def test_defaults_without_file():
    cfg = load_config(None)
    assert cfg == ExperimentConfig()
    assert cfg.axis("montecarlo", "lambda_b") == (0.2,)
    assert cfg.axis("se_sweep", "alpha") == (3.0, 4.0, 6.0)


def test_repository_config_loads():
    cfg = load_config(REPO_CONFIG)
    assert cfg.source == str(REPO_CONFIG)
    assert cfg.axis("montecarlo", "lambda_b") == (0.2,)
    assert len(cfg.axis("se_sweep", "lambda_b")) == 31
    assert cfg.sim.trials == 10_000


def test_log_range_keeps_endpoints():
    values = range_values({"start": 0.5, "stop": 50.0, "points": 3})
    assert values == (0.5, pytest.approx(5.0), 50.0)


def test_linear_range():
    assert range_values({"start": 1.0, "stop": 3.0, "points": 3, "scale": "linear"}) == (1.0, 2.0, 3.0)


def test_single_point_range():
    assert range_values({"start": 2.0, "stop": 2.0, "points": 1}) == (2.0,)


def test_unknown_key_reports_line(tmp_path):
    text = '{\n  "network": {\n    "lambda_b": 0.2,\n    "lamda_u": 0.02\n  }\n}\n'
    with pytest.raises(ConfigError) as ei:
        load_config(_write(tmp_path, text))
    assert ei.value.line == 4
    assert "exp.json:4:" in str(ei.value)


def test_invalid_json_reports_line(tmp_path):
    with pytest.raises(ConfigError) as ei:
        load_config(_write(tmp_path, '{\n  "network": {\n    "alpha": 4.0,\n  }\n}\n'))
    assert ei.value.line == 4


def test_alpha_domain_checked_at_parse_time(tmp_path):
    text = '{\n  "network": {\n    "alpha": 2.0\n  }\n}\n'
    with pytest.raises(ConfigError) as ei:
        load_config(_write(tmp_path, text))
    assert ei.value.line == 3
    assert "alpha" in str(ei.value)


def test_sweep_axis_values_checked(tmp_path):
    text = json.dumps({"sweep": {"se_sweep": {"lambda_b": [0.1, -1.0]}}}, indent=2)
    with pytest.raises(ConfigError) as ei:
        load_config(_write(tmp_path, text))
    assert ei.value.line is not None


def test_empty_sweep_axis_is_usage_error(tmp_path):
    text = json.dumps({"sweep": {"se_sweep": {"alpha": []}}}, indent=2)
    with pytest.raises(UsageError):
        load_config(_write(tmp_path, text))


def test_sim_block_validated(tmp_path):
    text = json.dumps({"sim": {"trials": 0}}, indent=2)
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, text))


@pytest.mark.parametrize(
    "block, bad_key",
    [("sim", "trials"), ("optimizer", "grid_points")],
)
def test_sub_block_error_points_at_failing_key(tmp_path, block, bad_key):
    body = {"sim": {"seed": 1, "trials": 0}, "optimizer": {"multistart": 4, "grid_points": 2}}[block]
    text = json.dumps({block: body}, indent=2)
    with pytest.raises(ConfigError) as ei:
        load_config(_write(tmp_path, text))
    want = next(i for i, line in enumerate(text.splitlines(), 1) if f'"{bad_key}"' in line)
    assert ei.value.line == want


def test_flags_override_file(tmp_path):
    text = json.dumps({"network": {"alpha": 3.0}, "costs": {"c_b": 0.5}, "sim": {"seed": 1}}, indent=2)
    cfg = apply_overrides(
        load_config(_write(tmp_path, text)),
        axes={"alpha": [6.0], "lambda_b": None},
        c_b=0.2,
        seed=99,
        trials=5,
    )
    assert cfg.axis("montecarlo", "alpha") == (6.0,)
    assert cfg.axis("se_sweep", "alpha") == (6.0,)
    assert cfg.c_b == 0.2
    assert cfg.sim.seed == 99
    assert cfg.sim.trials == 5


def test_override_values_validated():
    with pytest.raises(ConfigError) as ei:
        apply_overrides(ExperimentConfig(), axes={"alpha": [1.5]})
    assert "--alpha" in str(ei.value)


def test_zero_threads_means_cpu_count():
    cfg = apply_overrides(ExperimentConfig(), threads=0)
    assert cfg.sim.threads == (os.cpu_count() or 1)
    assert cfg.sweep_threads == cfg.sim.threads


def test_output_dir_precedence(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "env"))
    assert output_dir(None) == tmp_path / "env"
    assert output_dir(tmp_path / "flag") == tmp_path / "flag"
    monkeypatch.delenv(OUTPUT_DIR_ENV)
    assert output_dir(None) == Path("./out")
