import pytest
from pydantic import ValidationError

from src.core.exceptions import ConfigError
from src.core.run_config import (
    RunSettings,
    expand_sweep,
    load_dataset_spec,
    load_experiment_config,
    load_train_config,
)
from src.utils.kv_format import dump_kv, parse_kv, read_kv_file


@pytest.mark.pure
def test_parse_kv_comments_and_overrides():
    text = "# dataset\ngrid = bw33\n\ncount=5  # five rows\ncount=6\n"
    values, comments = parse_kv(text, keep_comments=True)
    assert values == {"grid": "bw33", "count": "6"}
    assert comments == ["dataset"]


@pytest.mark.pure
@pytest.mark.parametrize("text", ["no equals sign", "=value"])
def test_parse_kv_rejects_bad_lines(text):
    with pytest.raises(ConfigError) as info:
        parse_kv(text, source="run.cfg")
    assert "run.cfg:1" in str(info.value)


@pytest.mark.pure
def test_dump_kv_round_trip():
    values = {"v[1]": 0.1 + 0.2, "y[4]": 1.0, "name": "bw33"}
    text = dump_kv(values, comments=["omitted: v[2]"])
    parsed, comments = parse_kv(text, keep_comments=True)
    assert float(parsed["v[1]"]) == 0.1 + 0.2
    assert parsed["name"] == "bw33"
    assert comments == ["omitted: v[2]"]


@pytest.mark.pure
def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        read_kv_file(tmp_path / "absent.cfg")


@pytest.mark.pure
def test_expand_sweep():
    combos = expand_sweep({"lambda_h": "10|100", "hidden": "5", "head": "SiPhyR | InSi"})
    assert len(combos) == 4
    assert combos[0] == {"lambda_h": "10", "hidden": "5", "head": "SiPhyR"}
    assert combos[-1] == {"lambda_h": "100", "hidden": "5", "head": "InSi"}


@pytest.mark.pure
def test_run_settings_from_env(monkeypatch):
    monkeypatch.setenv("RECONFIG_SEED", "7")
    monkeypatch.setenv("RECONFIG_EPS", "1e-4")
    monkeypatch.setenv("RECONFIG_NO_EXPORT", "true")
    monkeypatch.setenv("RECONFIG_CHECKPOINT", "")
    settings = RunSettings.from_env()
    assert settings.seed == 7
    assert settings.eps == 1e-4
    assert settings.no_export is True
    assert settings.checkpoint is None


@pytest.mark.pure
def test_run_settings_reject_bad_values(monkeypatch):
    monkeypatch.setenv("RECONFIG_EPS", "-1")
    with pytest.raises(ValidationError):
        RunSettings.from_env()


@pytest.mark.pure
def test_load_dataset_and_train_configs(tmp_path):
    data_file = tmp_path / "data.cfg"
    data_file.write_text("grid=tpc94\nload_mode=residential\nsolar_layout=S1\ncount=24\n")
    spec = load_dataset_spec(data_file, seed=3)
    assert spec.grid == "tpc94" and spec.count == 24 and spec.seed == 3

    train_file = tmp_path / "train.cfg"
    train_file.write_text("head=InSi\nepochs=20\nno_export=true\n")
    config = load_train_config(train_file, epochs=None)
    assert config.head == "InSi" and config.epochs == 20 and config.no_export


@pytest.mark.pure
def test_experiment_config_sweep(tmp_path):
    path = tmp_path / "experiment.cfg"
    path.write_text(
        "train_dir=data/bw33\n"
        "test_dirs=data/a, data/b\n"
        "variants=SiPhyR,InSi2R\n"
        "split=0.6,0.2,0.2\n"
        "lambda_h=10|100\n"
        "hidden=5|10\n"
        "epochs=3\n"
    )
    config = load_experiment_config(path)
    assert config.test_dirs == ["data/a", "data/b"]
    assert config.variants == ["SiPhyR", "InSi2R"]
    assert config.split == (0.6, 0.2, 0.2)
    assert len(config.train_configs()) == 4
    assert {(c.lambda_h, c.hidden) for c in config.sweep} == {(10, 5), (10, 10), (100, 5), (100, 10)}
    assert all(c.epochs == 3 for c in config.sweep)


@pytest.mark.pure
def test_experiment_config_validation(tmp_path):
    path = tmp_path / "experiment.cfg"
    path.write_text("train_dir=data\nsplit=0.5,0.2,0.2\n")
    with pytest.raises(ValidationError):
        load_experiment_config(path)
    path.write_text("train_dir=data\nhead=Unknown\n")
    with pytest.raises(ValidationError):
        load_experiment_config(path)
