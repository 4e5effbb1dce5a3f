from pathlib import Path

import pytest

from hilbertfc.exceptions import ConfigurationError
from hilbertfc.forms import (
    RunConfigForm,
    assemble_run_config,
    merge_config,
    read_config_file,
    write_config_echo,
)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_read_config_file(tmp_path):
    path = write(tmp_path / "run.txt", "# a comment\nseed=3\n\n  arch = net2  \noffset_x=\n")
    assert read_config_file(path) == {"seed": "3", "arch": "net2", "offset_x": ""}


@pytest.mark.parametrize("text, message", [
    ("seed=3\narch net2\n", "line 2"),
    ("seed=3\n\ncolour=red\n", "line 3: unknown key 'colour'"),
])
def test_read_config_file_errors(tmp_path, text, message):
    with pytest.raises(ConfigurationError, match=message):
        read_config_file(write(tmp_path / "run.txt", text))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError):
        read_config_file(tmp_path / "absent.txt")


def test_command_line_overrides_file_overrides_defaults(settings, tmp_path):
    path = write(tmp_path / "run.txt", "seed=3\narch=net2\n")
    merged = merge_config({"seed": 9, "arch": None, "verbosity": 2}, path)

    assert merged["seed"] == 9
    assert merged["arch"] == "net2"
    assert merged["lr"] == settings.PIPELINE_DEFAULTS["lr"]
    assert "verbosity" not in merged


def test_defaults_are_valid():
    config = assemble_run_config("gradcheck", {})
    assert config.subcommand == "gradcheck"
    assert config.half_length == 100
    assert config.class_pair == ("CN", "AD")
    assert config.offsets is None
    assert config.input is None


@pytest.mark.parametrize("options, field", [
    ({"half_length": 75}, "half_length"),
    ({"order": 11}, "order"),
    ({"class_pair": "CN"}, "class_pair"),
    ({"class_pair": "AD,AD"}, "class_pair"),
    ({"separation": 1.5}, "separation"),
    ({"arch": "net3"}, "arch"),
    ({"offset_x": 3}, "offset_x"),
    ({"protocol": "cn-ad-429", "class_pair": "CN,MCI"}, "protocol"),
    ({"protocol": "cn-ad-999"}, "protocol"),
])
def test_invalid_values(options, field):
    form = RunConfigForm(merge_config(options))
    assert not form.is_valid()
    assert field in form.errors
    assert form.error_text().startswith(field) or f"; {field}:" in form.error_text()


def test_required_paths(tmp_path):
    form = RunConfigForm(merge_config({}), needs=("input", "atlas", "out"))
    assert not form.is_valid()
    assert set(form.errors) == {"input", "atlas", "out"}

    form = RunConfigForm(merge_config({"input": tmp_path / "absent"}), needs=("input",))
    assert not form.is_valid()
    assert "Not a directory" in form.error_text()


def test_atlas_defaults_to_input_directory(tmp_path):
    write(tmp_path / "atlas.txt", "1\tregion_1\t0\t0\t0\n")
    config = assemble_run_config(
        "extract", {"input": tmp_path, "out": tmp_path / "out"}, needs=("input", "atlas", "out"),
    )
    assert config.atlas == tmp_path / "atlas.txt"
    assert config.out == tmp_path / "out"


def test_all_offsets_are_used(tmp_path):
    config = assemble_run_config("extract", {"offset_x": 5, "offset_y": 0, "offset_z": 6})
    assert config.offsets == (5, 0, 6)


def test_echo_roundtrip(tmp_path):
    config = assemble_run_config("extract", {
        "input": tmp_path, "seed": 11, "lr": 3e-4, "reho": True, "class_pair": "CN,MCI",
        "offset_x": 1, "offset_y": 2, "offset_z": 3,
    })
    path = write_config_echo(config.echo(), tmp_path / "config.txt", info={"core_params": 7})

    text = path.read_text()
    assert text.startswith("# core_params=7\n")
    assert "reho=true\n" in text
    assert "atlas=\n" in text

    assert assemble_run_config("extract", {}, config_path=path) == config
    assert isinstance(config.input, Path)
