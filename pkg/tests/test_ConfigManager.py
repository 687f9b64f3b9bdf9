import json
import os

import numpy as np
import pytest

from ConfigManager import (
    ConfigManager,
    ConfigValidationError,
    ExperimentConfig,
    load_field,
    parse_config,
    validate_config,
)
from kernels import Gaussian, PhiBeta
from numerics.Spectral import Field, Grid
from OutputManager import OutputManager

CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "nlkpp", "configs")


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def stability_payload(**extra):
    payload = {
        "kind": "stability",
        "kernel": {"family": "phi_beta", "beta": 100.0},
        "stability": {"L": 0.4},
    }
    payload.update(extra)
    return payload


class TestValidation:
    def test_minimal_stability_config(self):
        config = validate_config(stability_payload())
        assert config.kernel.to_kernel() == PhiBeta(100.0)
        assert config.stability.k_max == 64
        assert config.output_dir == "out"
        assert config.mu_values() == []

    def test_negative_mu_names_the_key(self):
        with pytest.raises(ConfigValidationError) as info:
            validate_config(stability_payload(mu=-1.0))
        assert any(message.startswith("mu:") for message in info.value.messages)

    def test_grid_size_must_be_power_of_two(self):
        payload = {
            "kind": "evolve",
            "kernel": {"family": "gaussian", "s": 1.0},
            "grid": {"period": 10.0, "n": 100},
            "mu": 1.0,
            "initial": {"kind": "constant", "value": 1.0},
        }
        with pytest.raises(ConfigValidationError, match="grid.n: must be a power of two"):
            validate_config(payload)

    def test_unknown_key(self):
        with pytest.raises(ConfigValidationError, match="colour"):
            validate_config(stability_payload(colour="blue"))

    def test_every_problem_is_reported(self):
        with pytest.raises(ConfigValidationError) as info:
            validate_config(stability_payload(mu=-1.0, bogus=1, stability={"L": -0.4}))
        assert len(info.value.messages) == 3

    def test_counterexample_requires_dirac_pair(self):
        payload = {"kind": "counterexample", "kernel": {"family": "gaussian", "s": 1.0}, "mu": 2.0}
        with pytest.raises(ConfigValidationError, match="counterexample requires 'dirac_pair'"):
            validate_config(payload)

    def test_evolve_requirements(self):
        with pytest.raises(ConfigValidationError) as info:
            validate_config({"kind": "evolve", "kernel": {"family": "gaussian", "s": 1.0}})
        text = str(info.value)
        for key in ("grid", "initial", "mu"):
            assert f"{key}: required for kind 'evolve'" in text

    @pytest.mark.parametrize(
        "kernel, fragment",
        [
            ({"family": "gaussian"}, "missing parameter 's'"),
            ({"family": "gaussian", "s": 1.0, "a": 2.0}, "'a' does not apply"),
            ({"family": "phi_beta", "beta": 0.5}, "must exceed 1"),
            ({"family": "tabulated", "period": 1.0}, "exactly one of"),
            ({"family": "sinc", "s": 1.0}, "kernel.family"),
        ],
    )
    def test_kernel_parameters(self, kernel, fragment):
        with pytest.raises(ConfigValidationError, match=fragment):
            validate_config(stability_payload(kernel=kernel))

    def test_log_mu_range(self):
        config = validate_config(stability_payload(mu_range={"start": 1.0, "stop": 100.0, "points": 3, "spacing": "log"}))
        assert config.mu_values() == pytest.approx([1.0, 10.0, 100.0])

    def test_sweep_needs_range(self):
        with pytest.raises(ConfigValidationError, match="mu_range: required"):
            validate_config(stability_payload(kind="sweep", sweep={"base": "stability"}))

    def test_sweep_base_kind(self):
        config = validate_config(
            stability_payload(kind="sweep", sweep={"base": "stability"}, mu_range={"start": 1.0, "stop": 2.0})
        )
        assert config.base_kind == "stability"
        assert len(config.mu_values()) == 5


class TestParsing:
    def test_shipped_configs_validate(self):
        names = sorted(name for name in os.listdir(CONFIG_DIR) if name.endswith(".json"))
        assert len(names) == 7
        for name in names:
            assert isinstance(parse_config(os.path.join(CONFIG_DIR, name)), ExperimentConfig)

    def test_output_directory_precedence(self, tmp_path, monkeypatch):
        path = write_config(tmp_path, stability_payload(output_dir="from-config"))
        monkeypatch.delenv("NLKPP_OUT", raising=False)
        assert parse_config(path).output_dir == "from-config"
        monkeypatch.setenv("NLKPP_OUT", "from-env")
        assert parse_config(path).output_dir == "from-env"
        assert parse_config(path, {"output_dir": "from-cli"}).output_dir == "from-cli"

    def test_dotted_overrides(self, tmp_path):
        path = write_config(tmp_path, stability_payload())
        config = parse_config(path, {"stability.numeric_n": 64, "mu": 3.0, "integration.T": None})
        assert config.stability.numeric_n == 64
        assert config.stability.L == 0.4
        assert config.mu == 3.0

    def test_unreadable_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigValidationError, match="broken.json"):
            parse_config(str(path))

    def test_initial_field_path_is_relative_to_config(self, tmp_path):
        grid = Grid(10.0, 32)
        field = Field.from_function(grid, lambda x: 1.0 + 0.1 * np.cos(2.0 * np.pi * x / 10.0))
        (tmp_path / "u0.bin").write_bytes(field.to_bytes())
        payload = {
            "kind": "evolve",
            "kernel": {"family": "gaussian", "s": 1.0},
            "grid": {"period": 10.0, "n": 32},
            "mu": 1.0,
            "initial": {"kind": "file", "path": "u0.bin"},
        }
        config = parse_config(write_config(tmp_path, payload))
        assert np.array_equal(config.initial.to_field(grid).values, field.values)

    def test_csv_field(self, tmp_path):
        grid = Grid(4.0, 8)
        path = tmp_path / "u0.csv"
        path.write_text("x,u\n" + "".join(f"{float(x)!r},{2.0 * j!r}\n" for j, x in enumerate(grid.nodes)))
        assert np.array_equal(load_field(str(path), grid).values, 2.0 * np.arange(8))
        with pytest.raises(ValueError):
            load_field(str(path), Grid(4.0, 16))

    def test_csv_written_by_output_manager(self, tmp_path):
        grid = Grid(3.0, 16)
        field = Field.from_function(grid, lambda x: 1.0 + 0.3 * np.cos(2.0 * np.pi * x / 3.0))
        path = OutputManager(str(tmp_path)).write_field_csv("u0.csv", field)
        assert np.array_equal(load_field(path, grid).values, field.values)


class TestConfigManager:
    def test_save_and_reload(self, tmp_path):
        manager = ConfigManager()
        config = manager.load_config(write_config(tmp_path, stability_payload(mu=2.0)))
        assert manager.config is config
        saved = str(tmp_path / "saved.json")
        manager.save_config(config, saved)
        assert parse_config(saved) == config

    def test_tabulated_kernel_from_file(self, tmp_path):
        period, n = 20.0, 64
        nodes = -0.5 * period + period / n * np.arange(n)
        np.savetxt(tmp_path / "kernel.csv", Gaussian(1.0).density(nodes), delimiter=",")
        payload = stability_payload(kernel={"family": "tabulated", "period": period, "file": "kernel.csv"})
        kernel = parse_config(write_config(tmp_path, payload)).kernel.to_kernel()
        assert kernel.fourier(0.0) == pytest.approx(1.0)
