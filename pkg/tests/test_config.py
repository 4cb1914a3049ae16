import pytest

from dicot.core.config import PRESETS, RunConfig, load_run_config, parse_assignments, read_config_file
from dicot.deps import int_list, run_config
from dicot.exceptions import ConfigError
from dicot.schemas import PositiveMode


def test_defaults():
    cfg = load_run_config()
    assert cfg.tau == 0.07 and cfg.rho == 0.5
    assert cfg.positive_mode == PositiveMode.preceding
    assert cfg.seeds == [1, 2, 3, 4, 5]
    assert cfg.encoder_config(3).projection_hidden is None


def test_file_with_comments(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# desk run\nTAU = 0.2\nchannels = 8,16\nkernel_sizes = 5,3\n")
    cfg = load_run_config(path)
    assert cfg.tau == 0.2
    assert cfg.channels == [8, 16] and cfg.kernel_sizes == [5, 3]


def test_preset_then_file_then_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("preset = ucr\nrho = 0.25\n")
    cfg = load_run_config(path)
    assert cfg.tau == PRESETS["ucr"]["tau"] and cfg.seeds == [1] and cfg.rho == 0.25
    cfg = load_run_config(path, {"tau": "0.5", "rho": None})
    assert cfg.tau == 0.5 and cfg.rho == 0.25


def test_flags_beat_set():
    assert run_config(None, ["tau=0.5"], tau=0.2).tau == 0.2
    assert run_config(None, ["tau=0.5"], tau=None).tau == 0.5


@pytest.mark.parametrize("overrides", [{"nope": "1"}, {"tau": "abc"}, {"preset": "huge"}])
def test_invalid_values(overrides):
    with pytest.raises(ConfigError):
        load_run_config(None, overrides)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        read_config_file(tmp_path / "none.cfg")


def test_parse_assignments():
    assert parse_assignments(["Tau=1", "seeds=1,2"]) == {"tau": "1", "seeds": "1,2"}
    assert parse_assignments(None) == {}
    with pytest.raises(ConfigError):
        parse_assignments(["tau"])


def test_int_list():
    assert int_list("3, 4,5") == [3, 4, 5]
    assert int_list(None) is None
    with pytest.raises(ConfigError):
        int_list(",")
    with pytest.raises(ConfigError):
        int_list("1,x")


def test_single_int_becomes_list():
    assert RunConfig(channels=4, kernel_sizes=3).channels == [4]
