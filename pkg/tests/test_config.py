import numpy as np
import pytest

from arae.config import PRESETS, ExperimentConfig, build_split, load_dataset, preset
from arae.errors import ConfigurationError


def test_presets_exist_and_are_copies():
    assert set(PRESETS) == {"bars", "mnist8-mini", "mnist8-full"}
    a = preset("bars")
    a.train.epochs = 1
    assert preset("bars").train.epochs == 30
    mini = preset("mnist8-mini")
    assert mini.dataset.downscale == 2 and mini.train.epochs == 20
    assert mini.protocol.normal_classes == (8,)
    full = preset("mnist8-full")
    assert full.train.hidden == (512, 256, 128) and full.train.gamma == 0.1 and full.train.epsilon == 0.2
    with pytest.raises(ConfigurationError):
        preset("cifar")


def test_json_roundtrip(tmp_path):
    cfg = preset("mnist8-mini")
    cfg.protocol.normal_classes = (4, 5)
    cfg.save(tmp_path / "c.json")
    back = ExperimentConfig.load(tmp_path / "c.json")
    assert back.to_dict() == cfg.to_dict()
    (tmp_path / "bad.json").write_text('{"nope": 1}')
    with pytest.raises(ConfigurationError):
        ExperimentConfig.load(tmp_path / "bad.json")


def test_seed_drives_everything():
    cfg = ExperimentConfig(seed=5)
    assert cfg.train.seed == 5
    a = cfg.rng("data").random()
    assert a == ExperimentConfig(seed=5).rng("data").random()
    assert a != cfg.rng("protocol").random()


def test_bars_split_and_protocol1():
    cfg = preset("bars")
    sp = build_split(cfg)
    assert len(sp.train_normals) == 100 and len(sp.test_samples) == 200
    cfg.protocol.kind, cfg.protocol.tau = "p1", 0.5
    sp1 = build_split(cfg)
    assert len(sp1.train_normals) == 160 and sp1.test_anomalous.sum() == 40
    np.testing.assert_array_equal(build_split(cfg).test_samples.ids, sp1.test_samples.ids)


def test_dataset_errors():
    cfg = preset("mnist8-mini")
    cfg.dataset.data_dir = None
    with pytest.raises(ConfigurationError):
        load_dataset(cfg)
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"protocol": {"kind": "p3"}})
