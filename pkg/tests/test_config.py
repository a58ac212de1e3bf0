from pathlib import Path

import pytest

from flexsim import config
from flexsim.core.config_loader import ConfigLoader
from flexsim.core.errors import ConfigError


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in ("FLEXSIM_CONFIG", "FLEXSIM_OP_POINT", "FLEXSIM_DMA_BW", "FLEXSIM_ENERGY_PARAMS"):
        monkeypatch.delenv(name, raising=False)


def test_config_defaults(tmp_path):
    config_file = tmp_path / "config.toml"
    loader = ConfigLoader(config_file=config_file)
    cfg = loader.load()
    assert cfg.knobs == config.DEFAULT_KNOBS
    assert cfg.op_point == "efficiency"
    assert cfg.energy_params is None
    assert cfg.instr_mem_bytes == config.DEFAULT_INSTR_MEM_BYTES
    assert cfg.config_path is None


def test_config_file_values(tmp_path):
    config_file = tmp_path / "config.toml"
    config_file.write_text(
        "\n".join(
            [
                'energy_params = "params.json"',
                "instr_mem_bytes = 8192",
                "[knobs]",
                "prologue_overlap = 0.5",
                'deconv_mode = "NAIVE"',
                "[op_point]",
                'name = "efficiency"',
                "core_freq = 10e6",
            ]
        )
    )
    cfg = ConfigLoader(config_file=config_file).load()
    assert cfg.config_path == config_file
    assert cfg.knobs["prologue_overlap"] == 0.5
    assert cfg.knobs["deconv_mode"] == "naive"
    assert cfg.op_point == "efficiency"
    assert cfg.op_point_overrides == {"core_freq": 10e6}
    assert cfg.energy_params == Path("params.json")
    assert cfg.instr_mem_bytes == 8192


def test_config_env_override(tmp_path, monkeypatch):
    config_file = tmp_path / "config.json"
    config_file.write_text('{"op_point": "efficiency", "knobs": {"dma_bytes_per_cycle": 4}}')
    loader = ConfigLoader(config_file=config_file)
    monkeypatch.setenv("FLEXSIM_OP_POINT", "Throughput")
    monkeypatch.setenv("FLEXSIM_DMA_BW", "16")
    monkeypatch.setenv("FLEXSIM_ENERGY_PARAMS", str(tmp_path / "fitted.json"))
    cfg = loader.load()
    assert cfg.op_point == "throughput"
    assert cfg.knobs["dma_bytes_per_cycle"] == 16
    assert cfg.energy_params == tmp_path / "fitted.json"


def test_explicit_arguments_win(tmp_path, monkeypatch):
    monkeypatch.setenv("FLEXSIM_OP_POINT", "throughput")
    loader = ConfigLoader(config_file=tmp_path / "config.toml")
    cfg = loader.derive(op_point="efficiency", knobs={"l1_resident": "yes"}, output_dir=str(tmp_path / "out"))
    assert cfg.op_point == "efficiency"
    assert cfg.knobs["l1_resident"] is True
    assert cfg.output_dir == tmp_path / "out"


def test_config_path_from_environment(tmp_path, monkeypatch):
    config_file = tmp_path / "custom.json"
    config_file.write_text('{"op_point": "throughput"}')
    monkeypatch.setenv("FLEXSIM_CONFIG", str(config_file))
    assert ConfigLoader().load().op_point == "throughput"


@pytest.mark.parametrize(
    "body",
    [
        '{"colour": "blue"}',
        '{"knobs": {"warp": 9}}',
        '{"knobs": {"prologue_overlap": 2.0}}',
        '{"knobs": {"writeback_overlap": "maybe"}}',
        '{"instr_mem_bytes": 100}',
        '{"op_point": {"core_freq": -1}}',
        '{"op_point": 5}',
        "[1, 2]",
        "{broken",
    ],
)
def test_invalid_configuration(tmp_path, body):
    config_file = tmp_path / "config.json"
    config_file.write_text(body)
    with pytest.raises(ConfigError) as exc:
        ConfigLoader(config_file=config_file)
    assert exc.value.exit_code == 3


def test_unsupported_format(tmp_path):
    config_file = tmp_path / "config.ini"
    config_file.write_text("[knobs]")
    with pytest.raises(ConfigError):
        ConfigLoader(config_file=config_file)


def test_display_rows(tmp_path):
    cfg = ConfigLoader(config_file=tmp_path / "config.toml").load()
    rows = cfg.to_display_dict()
    assert rows["Config file"] == "none"
    assert rows["knob.deconv_mode"] == "skip"
