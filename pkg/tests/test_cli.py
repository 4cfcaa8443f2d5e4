import pandas as pd
import pytest

from src.cli import main
from src.utils.kv_format import parse_kv


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("RECONFIG_SEED", "RECONFIG_EPS", "RECONFIG_BIG_M", "RECONFIG_NO_EXPORT", "RECONFIG_CHECKPOINT"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def dataset(tmp_path):
    out = tmp_path / "bw33"
    code = main(["--seed", "4", "generate", str(out), "--grid", "bw33", "--count", "4", "--solar-layout", "none"])
    assert code == 0
    return out


@pytest.mark.pure
def test_generate_writes_scenarios(dataset):
    frame = pd.read_csv(dataset / "scenarios.csv")
    assert list(frame["index"]) == [0, 1, 2, 3]
    assert "P_32" in frame.columns and "QGMAX_0" in frame.columns


@pytest.mark.pure
def test_label_and_report(dataset, tmp_path):
    assert main(["label", str(dataset)]) == 0
    labels = pd.read_csv(dataset / "labels.csv")
    assert len(labels) == 4

    out = tmp_path / "report"
    assert main(["report", str(dataset), "--modes", "none,dynamic", "--out", str(out)]) == 0
    report = pd.read_csv(out / "report.csv")
    assert list(report["mode"]) == ["none", "dynamic"]


@pytest.mark.pure
def test_train_then_warmstart(dataset, tmp_path):
    run = tmp_path / "run"
    assert main(["train", str(dataset), "--epochs", "1", "--committee", "1", "--out", str(run)]) == 0
    assert (run / "checkpoint.npz").exists()
    assert (run / "curves.csv").exists()

    record = tmp_path / "warm.txt"
    code = main(["warmstart", str(dataset), "--checkpoint", str(run / "checkpoint.npz"), "--out", str(record)])
    assert code == 0
    values = parse_kv(record.read_text())
    assert all(name.split("[")[0] in {"P_G", "Q_G", "v", "y", "z"} for name in values)

    metrics_dir = tmp_path / "eval"
    code = main(["eval", str(dataset), "--checkpoint", str(run / "checkpoint.npz"), "--out", str(metrics_dir)])
    assert code == 0
    assert len(pd.read_csv(metrics_dir / "metrics.csv")) == 1


@pytest.mark.pure
def test_invalid_values_exit_with_two(tmp_path, monkeypatch):
    assert main(["generate", str(tmp_path / "d"), "--count", "-1"]) == 2
    monkeypatch.setenv("RECONFIG_EPS", "-1")
    assert main(["report", str(tmp_path / "d")]) == 2


@pytest.mark.pure
def test_domain_errors_exit_with_one(tmp_path):
    assert main(["report", str(tmp_path / "missing")]) == 1
    assert main(["eval", str(tmp_path / "missing")]) == 1
    assert main(["generate", str(tmp_path / "d"), "--grid", "bw33", "--count", "2", "--solar-layout", "S1"]) == 1
    assert main(["generate", str(tmp_path / "d"), "--count", "0"]) == 1


@pytest.mark.pure
def test_reruns_are_byte_identical(tmp_path):
    """Same config and seed give the same CSV bytes at every stage."""
    outputs = []
    for attempt in ("a", "b"):
        root = tmp_path / attempt
        data, run = root / "data", root / "run"
        assert main(["--seed", "2", "generate", str(data), "--count", "5", "--solar-layout", "none"]) == 0
        assert main(["label", str(data)]) == 0
        assert main(["train", str(data), "--epochs", "2", "--committee", "1", "--out", str(run)]) == 0
        assert main(["eval", str(data), "--checkpoint", str(run / "checkpoint.npz"), "--out", str(run)]) == 0
        files = [data / "scenarios.csv", data / "labels.csv", run / "curves.csv", run / "metrics.csv"]
        outputs.append([f.read_bytes() for f in files])
    assert outputs[0] == outputs[1]
