import json
import math
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from biascope.diversity import (
    DEFAULT_FRACTIONS,
    DiversityReport,
    SweepConfig,
    diversity_score,
    is_flat,
    run_sweep,
    subsample_dataset,
)
from biascope.encoders.models import StubConfig
from biascope.errors import EmptyResult
from biascope.synthgen.dataset import DatasetManifest, ManifestEntry
from biascope.training.loop import TrainConfig


def manifest(n, n_classes=None):
    entries = [
        ManifestEntry(f"{i:05d}", f"{i:05d}.png", "IFS", i, None if n_classes is None else i % n_classes)
        for i in range(n)
    ]
    return DatasetManifest(entries)


def ids(m):
    return {e.id for e in m.entries}


def test_full_fraction_is_identity():
    m = manifest(123, 4)
    assert ids(subsample_dataset(m, 1.0, 9)) == ids(m)


def test_five_percent_of_thousand():
    assert len(subsample_dataset(manifest(1000), 0.05, 0)) == 50
    assert len(subsample_dataset(manifest(1000, 8), 0.05, 0)) == 50


def test_empty_and_invalid():
    with pytest.raises(EmptyResult):
        subsample_dataset(manifest(0), 0.5, 0)
    with pytest.raises(ValueError):
        subsample_dataset(manifest(10), 0.0, 0)


@given(
    st.integers(1, 400),
    st.one_of(st.none(), st.integers(1, 9)),
    st.integers(0, 2**32),
    st.lists(st.floats(0.01, 1.0), min_size=2, max_size=5),
)
def test_nested_sized_and_stratified(n, n_classes, seed, fracs):
    m = manifest(n, n_classes)
    prev = set()
    for f in sorted(fracs):
        sub = subsample_dataset(m, f, seed)
        assert len(sub) == math.ceil(round(f * n, 9))
        assert prev <= ids(sub)
        prev = ids(sub)
        if n_classes:
            got = Counter(e.class_label for e in sub.entries)
            total = Counter(e.class_label for e in m.entries)
            for c in total:
                # never more than the per-class ceiling, never far below the proportional share
                assert got[c] <= math.ceil(round(f * total[c], 9))
                assert got[c] >= math.floor(f * total[c]) - 1


def test_seed_changes_selection():
    m = manifest(500, 5)
    assert ids(subsample_dataset(m, 0.25, 1)) != ids(subsample_dataset(m, 0.25, 2))
    assert ids(subsample_dataset(m, 0.25, 1)) == ids(subsample_dataset(m, 0.25, 1))


def test_score_examples():
    assert diversity_score({0.05: 0.30, 1.0: 0.30}) == 0
    assert is_flat(0.0)
    s = diversity_score({0.05: 0.28, 0.5: 0.1, 1.0: 0.40})
    assert s == pytest.approx(0.12)
    assert not is_flat(s)
    assert diversity_score({0.05: 0.40, 1.0: 0.28}) == pytest.approx(-s)


def test_small_published_deltas_are_flat():
    assert is_flat(0.005) and is_flat(0.011)


def test_sweep_config_invariants():
    assert SweepConfig().fractions == DEFAULT_FRACTIONS
    with pytest.raises(ValueError):
        SweepConfig(fractions=(0.5, 0.25, 1.0))
    with pytest.raises(ValueError):
        SweepConfig(fractions=(0.25, 0.5))
    with pytest.raises(ValueError):
        SweepConfig(convergence_start=9, train=TrainConfig(epochs=4))
    assert SweepConfig(train=TrainConfig(epochs=6)).start_epoch == 3


def test_stub_sweep_is_flat(tmp_path, cue_bench):
    cfg = SweepConfig(train=TrainConfig(epochs=2, batch_size=16), seed=4)
    rep = run_sweep(cfg, StubConfig(), cue_bench, cue_bench, tmp_path)
    assert rep.fractions == [0.05, 0.25, 0.5, 0.75, 1.0]
    assert len(set(rep.converged_bias)) == 1
    assert rep.diversity_score == 0 and rep.flat
    saved = json.loads((tmp_path / "sweep_report.json").read_text())
    assert saved == rep.to_json()
    assert "sweep" in (tmp_path / "metrics.csv").read_text()
    again = run_sweep(cfg, StubConfig(), cue_bench, cue_bench, tmp_path / "b")
    assert (tmp_path / "b" / "sweep_report.json").read_bytes() == (tmp_path / "sweep_report.json").read_bytes()
    assert isinstance(again, DiversityReport)
