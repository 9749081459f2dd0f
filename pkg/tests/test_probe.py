import hashlib

import numpy as np
import pytest
import torch

from biascope.encoders.models import VIT_DESK, VitConfig
from biascope.errors import MissingLabels
from biascope.synthgen.dataset import DatasetManifest, build_dataset, load_images
from biascope.training.loop import Checkpoint, TrainConfig, checkpoint_name
from biascope.training.optim import OptimizerState
from biascope.training.probe import PROBE_EPOCHS, is_held_out, linear_probe


def random_checkpoint(cfg, seed=0):
    enc = cfg.init(seed)
    return Checkpoint(0, enc, {}, OptimizerState.zeros_like(enc), cfg, TrainConfig(seed=seed))


@pytest.fixture(scope="module")
def no_signal(tmp_path_factory):
    root = tmp_path_factory.mktemp("nosig")
    m = build_dataset("RandomSmooth", 800, 64, root, seed=6)
    labelled = DatasetManifest(
        [type(e)(**{**vars(e), "class_label": i % 8}) for i, e in enumerate(m.entries)], m.root
    )
    return labelled, load_images(labelled, 3)


def test_split_is_deterministic_and_about_one_fifth():
    ids = [f"x-{i:06d}" for i in range(5000)]
    held = [is_held_out(i) for i in ids]
    assert held == [is_held_out(i) for i in ids]
    assert 0.18 < np.mean(held) < 0.22
    digest = hashlib.sha256(b"x-000000").digest()
    assert held[0] == (int.from_bytes(digest[:8], "little") % 5 == 0)


def test_default_epochs():
    assert PROBE_EPOCHS == 2


def test_random_encoder_probes_at_chance(no_signal):
    manifest, images = no_signal
    res = linear_probe(random_checkpoint(VIT_DESK), manifest, images=images)
    assert abs(res.accuracy - 1 / 8) <= 0.1
    assert res.n_train + res.n_test == 800 and len(res.epoch_losses) == 2


def test_encoder_bytes_unchanged(no_signal, tmp_path):
    manifest, images = no_signal
    ckpt = random_checkpoint(VIT_DESK, seed=3)
    path = ckpt.save(tmp_path / checkpoint_name(0))
    before = path.read_bytes()
    snapshot = {k: v.clone() for k, v in ckpt.encoder.items()}
    linear_probe(path, manifest, images=images)
    linear_probe(ckpt, manifest, images=images)
    assert path.read_bytes() == before
    assert all(torch.equal(snapshot[k], ckpt.encoder[k]) for k in snapshot)


def test_probe_is_deterministic(no_signal):
    manifest, images = no_signal
    a = linear_probe(random_checkpoint(VIT_DESK), manifest, images=images)
    b = linear_probe(random_checkpoint(VIT_DESK), manifest, images=images)
    assert a == b


def test_missing_labels(tmp_path):
    m = build_dataset("Sparse", 10, 64, tmp_path, seed=0)
    with pytest.raises(MissingLabels):
        linear_probe(random_checkpoint(VIT_DESK), m)


def test_probe_learns_a_separable_signal(tmp_path):
    # two families separate even through random features; 2 epochs at lr 1e-4 is only ~8 steps
    a = build_dataset("RandomSmooth", 150, 64, tmp_path / "a", seed=1)
    b = build_dataset("HighFreq", 150, 64, tmp_path / "b", seed=1)
    entries = [type(e)(**{**vars(e), "class_label": 0}) for e in a.entries]
    entries += [type(e)(**{**vars(e), "class_label": 1}) for e in b.entries]
    images = np.concatenate([load_images(a, 3), load_images(b, 3)])
    res = linear_probe(random_checkpoint(VIT_DESK), DatasetManifest(entries), epochs=2, images=images)
    assert res.accuracy > 0.65


@pytest.mark.xfail(
    strict=True,
    reason="desk-scale features carry too little linearly decodable shape signal for a 2-epoch probe; "
    "see the probe entry in the decisions ledger",
)
def test_contrastive_encoder_probes_above_twice_chance(tmp_path):
    from biascope.encoders.models import CNN_DESK
    from biascope.training.loop import train

    pretrain = build_dataset("CueConflict", 800, 64, tmp_path / "pre", seed=71)
    probe_set = build_dataset("CueConflict", 1200, 64, tmp_path / "probe", seed=72)
    ckpt = train(TrainConfig(epochs=15), CNN_DESK, pretrain)[-1]
    res = linear_probe(ckpt, probe_set)
    assert res.accuracy > 2 / 8
