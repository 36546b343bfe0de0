import pytest

from app.errors import ConfigError
from app.metrics import read_metrics, render_rows, write_metrics
from app.schemas import MetricPhase, PhaseRecord, StageKind, StageRecord


def test_rows_have_fixed_columns():
    rows = [
        PhaseRecord(phase=MetricPhase.ADMM, step=1, objective=0.5, loss=0.25, mean_rel_residual=0.1),
        PhaseRecord(phase=MetricPhase.RETRAIN, step=0, objective=0.2, loss=0.2, val_acc=0.9),
    ]
    lines = render_rows(rows, PhaseRecord).splitlines()
    assert lines[0] == "schema_version,phase,step,objective,loss,mean_rel_residual,val_acc"
    assert lines[1] == "1,admm,1,0.5,0.25,0.1,"
    assert lines[2] == "1,retrain,0,0.2,0.2,,0.9"


def test_floats_round_trip_exactly(tmp_path):
    row = StageRecord(stage_index=0, stage_kind=StageKind.SEED, parent_rate=1.0, target_rate=5.0,
                      epochs_used=3, final_loss=0.1 + 0.2, val_accuracy=1 / 3)
    path = write_metrics(tmp_path / "history.csv", [row], StageRecord)
    (read,) = read_metrics(path)
    assert float(read["final_loss"]) == 0.1 + 0.2
    assert float(read["val_accuracy"]) == 1 / 3
    assert read["test_accuracy"] == ""


def test_other_schema_version_is_rejected(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("schema_version,epoch\n99,1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_metrics(path)
