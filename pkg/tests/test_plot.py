import json

import pytest

from biascope.errors import UserError
from biascope.plot import plot_file, series_from_metrics, series_from_report
from biascope.training.metrics import write_metrics


@pytest.fixture
def metrics(tmp_path):
    path = tmp_path / "metrics.csv"
    write_metrics(path, [(e, "train", "loss", 4.0 - e / 10) for e in range(1, 4)], {"train"})
    write_metrics(path, [(e, "bias", "bias", 0.3 + e / 100) for e in range(1, 4)], {"bias"})
    return path


def test_series_grouping(metrics):
    s = series_from_metrics(metrics)
    assert set(s) == {"train/loss", "bias/bias"}
    assert s["bias/bias"][0] == (1.0, pytest.approx(0.31))
    assert set(series_from_metrics(metrics, "loss")) == {"train/loss"}


def test_svg_is_deterministic_with_axis_labels(metrics, tmp_path):
    a = plot_file(metrics, tmp_path / "a.svg").read_bytes()
    b = plot_file(metrics, tmp_path / "b.svg").read_bytes()
    assert a == b
    text = a.decode()
    assert text.startswith("<?xml") and "<svg" in text
    assert "shape bias" in text and "epoch" in text
    assert "line2d" in text


def test_report_series(tmp_path):
    p = tmp_path / "r.json"
    p.write_text(json.dumps({"fractions": [0.05, 1.0], "converged_bias": [0.3, None]}))
    assert series_from_report(p) == {"converged bias": [(0.05, 0.3)]}
    q = tmp_path / "bad.json"
    q.write_text("{}")
    with pytest.raises(UserError):
        series_from_report(q)


def test_empty_input_rejected(tmp_path):
    empty = tmp_path / "metrics.csv"
    write_metrics(empty, [], {"train"})
    with pytest.raises(UserError):
        plot_file(empty, tmp_path / "x.svg")
    with pytest.raises(UserError):
        plot_file(tmp_path / "missing.csv", tmp_path / "x.svg")
