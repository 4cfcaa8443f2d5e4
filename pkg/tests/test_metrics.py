from dataclasses import fields, replace

import numpy as np
import pytest

from src.core.exceptions import MissingLabels
from src.core.labels import label_dataset, labels_from_solutions
from src.core.metrics import disp_err, eval_metrics, pv_utilization, top_err, volt_err
from src.models.decision import DecisionBatch
from src.models.scenario import ScenarioBatch
from tests.conftest import six_scenarios


def _blank(rows, switches, nodes=3, lines=2):
    widths = {"y": switches, "z_ij": lines, "z_ji": lines, "p_ij": lines, "p_ji": lines,
              "q_ij": lines, "q_ji": lines, "v": nodes, "p_gen": nodes, "q_gen": nodes,
              "p_load": nodes, "q_load": nodes}
    return DecisionBatch(**{f.name: np.zeros((rows, widths[f.name])) for f in fields(DecisionBatch)})


@pytest.fixture
def oracle_labels(six_node, six_instances):
    instances = six_instances[:4]
    scenarios = ScenarioBatch.from_instances(instances)
    return scenarios, labels_from_solutions(six_node, scenarios, label_dataset(six_node, instances))


@pytest.mark.pure
def test_top_err_one_wrong_switch_of_eight():
    labels = replace(_blank(1, 8), y=np.array([[1, 1, 1, 0, 0, 0, 0, 0.0]]))
    pred = replace(labels, y=np.array([[1, 1, 0, 0, 0, 0, 0, 0.0]]))
    assert top_err(pred, labels)[0] == pytest.approx(0.125)


@pytest.mark.pure
def test_top_err_clips_recovered_switch():
    labels = replace(_blank(1, 2), y=np.array([[1.0, 0.0]]))
    pred = replace(labels, y=np.array([[1.0, -0.5]]))
    assert top_err(pred, labels)[0] == 0.0


@pytest.mark.pure
def test_dispatch_and_voltage_errors_by_hand():
    labels = replace(_blank(1, 1), v=np.ones((1, 3)))
    pred = replace(
        labels,
        p_gen=np.array([[0.3, 0.0, 0.0]]),
        q_gen=np.array([[0.0, 0.3, 0.0]]),
        v=np.array([[1.0, 0.81, 1.0]]),
    )
    assert disp_err(pred, labels)[0] == pytest.approx(0.18 / 3)
    assert volt_err(pred, labels)[0] == pytest.approx(0.01 / 3)


@pytest.mark.pure
def test_oracle_prediction_scores_zero(six_node, oracle_labels):
    scenarios, labels = oracle_labels
    record = eval_metrics(six_node, scenarios, labels.batch, labels.batch, eps=1e-3)
    assert record.disp_err == 0.0
    assert record.volt_err == 0.0
    assert record.top_err == 0.0
    assert record.num_ineq == 0.0
    assert record.max_ineq < 1e-6
    assert record.instances == 4
    assert 0.0 < record.avg_voltage <= 1.1


@pytest.mark.pure
def test_best_member_is_reported(six_node, oracle_labels):
    scenarios, labels = oracle_labels
    wrong = replace(labels.batch, y=1.0 - labels.batch.y)
    record = eval_metrics(six_node, scenarios, wrong, labels.batch, members=[wrong, labels.batch])
    assert record.top_err == pytest.approx(1.0)
    assert record.top_err_best == 0.0
    assert record.disp_err_best == 0.0


@pytest.mark.pure
def test_missing_and_misaligned_labels(six_node, oracle_labels):
    scenarios, labels = oracle_labels
    record = eval_metrics(six_node, scenarios, labels.batch, None)
    assert record.disp_err is None and record.top_err is None and record.top_err_best is None
    with pytest.raises(MissingLabels):
        eval_metrics(six_node, scenarios, labels.batch, labels.batch.take(np.arange(2)))


@pytest.mark.pure
def test_infeasible_label_rows_are_skipped(six_node, oracle_labels):
    scenarios, labels = oracle_labels
    v = labels.batch.v.copy()
    v[0] = np.nan
    partial = replace(labels.batch, v=v)
    pred = replace(labels.batch, p_gen=labels.batch.p_gen.copy())
    pred.p_gen[0] += 1.0
    record = eval_metrics(six_node, scenarios, pred, partial)
    assert record.disp_err == 0.0


@pytest.mark.pure
def test_pv_utilization(six_node):
    scenarios = ScenarioBatch.from_instances(six_scenarios(six_node, 5, seed=3))
    half = replace(_blank(5, 3, nodes=6, lines=6), p_gen=0.5 * scenarios.solar_cap)
    assert pv_utilization(scenarios, half) == pytest.approx(0.5)
    dark = ScenarioBatch.from_instances(six_scenarios(six_node, 2, solar=False))
    assert pv_utilization(dark, _blank(2, 3, nodes=6, lines=6)) is None
