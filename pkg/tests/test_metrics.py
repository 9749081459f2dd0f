from biascope.training.metrics import HEADER, read_metrics, write_metrics


def test_header_and_upsert(tmp_path):
    path = tmp_path / "metrics.csv"
    write_metrics(path, [(1, "train", "loss", 0.5), (2, "train", "loss", 0.25)], {"train"})
    write_metrics(path, [(2, "probe", "accuracy", 0.75)], {"probe"})
    assert path.read_text().splitlines()[0] == ",".join(HEADER)
    first = path.read_bytes()
    write_metrics(path, [(2, "probe", "accuracy", 0.75)], {"probe"})
    assert path.read_bytes() == first
    rows = read_metrics(path)
    assert [(r["phase"], r["metric"]) for r in rows] == [("train", "loss")] * 2 + [("probe", "accuracy")]
    write_metrics(path, [(1, "train", "loss", 0.1)], {"train"})
    assert [r["value"] for r in read_metrics(path) if r["phase"] == "train"] == ["0.1"]


def test_float_repr_roundtrips(tmp_path):
    v = 0.1 + 0.2
    write_metrics(tmp_path / "m.csv", [(1, "train", "loss", v)], {"train"})
    assert float(read_metrics(tmp_path / "m.csv")[0]["value"]) == v
