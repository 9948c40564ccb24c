import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arae import nn
from arae.errors import ConfigurationError
from arae.model import (Autoencoder, Sample, SampleSet, anomaly_score, dae_corrupt, decode, encode,
                        latent_loss, rec_loss, reconstruct)
from oracles import tiny_autoencoder


def identity_ae(d):
    # sigmoid-free linear identity
    enc = [nn.DenseLayer(np.eye(d), np.zeros(d), "identity")]
    dec = [nn.DenseLayer(np.eye(d), np.zeros(d), "identity")]
    return Autoencoder(enc, dec)


def test_create_shapes_and_default_hidden():
    ae = Autoencoder.create(784, rng=np.random.default_rng(0))
    assert [l.weights.shape for l in ae.layers] == [
        (512, 784), (256, 512), (128, 256), (256, 128), (512, 256), (784, 512)]
    assert ae.latent_dim == 128
    assert all(l.activation == "sigmoid" for l in ae.layers)


def test_decoder_must_mirror_encoder():
    enc = [nn.DenseLayer(np.zeros((3, 4)), np.zeros(3))]
    dec = [nn.DenseLayer(np.zeros((5, 3)), np.zeros(5))]
    with pytest.raises(ConfigurationError, match="mirror"):
        Autoencoder(enc, dec)


def test_identity_ae_scores_zero():
    x = np.random.default_rng(0).uniform(size=(4, 6))
    ae = identity_ae(6)
    assert np.all(anomaly_score(ae, x) == 0)
    assert np.all(latent_loss(ae, x, x) == 0)


def test_rec_loss_targets_clean_input():
    ae = identity_ae(3)
    x = np.array([0.2, 0.4, 0.6])
    x_adv = x + np.array([0.1, 0.0, -0.1])
    assert rec_loss(ae, x, x_adv) == pytest.approx(0.02)
    assert latent_loss(ae, x, x_adv) == pytest.approx(0.02)


def test_batch_matches_rows():
    rng = np.random.default_rng(2)
    ae = Autoencoder.create(5, (4, 2), rng)
    x = rng.uniform(size=(3, 5))
    s = anomaly_score(ae, x)
    for i in range(3):
        assert anomaly_score(ae, x[i]) == pytest.approx(s[i], abs=1e-15)
    np.testing.assert_array_equal(reconstruct(ae, x), decode(ae, encode(ae, x)))


def test_sample_and_sampleset():
    ss = SampleSet(np.zeros((3, 4)), [0, 1, 2], 2, 2)
    assert len(ss) == 3 and ss.shape == (2, 2)
    s = ss[1]
    assert isinstance(s, Sample) and s.label == 1
    sub = ss.subset([2, 0])
    assert sub.ids.tolist() == [2, 0]
    with pytest.raises(ConfigurationError):
        SampleSet(np.zeros((3, 5)), [0, 1, 2], 2, 2)
    ae = identity_ae(4)
    assert anomaly_score(ae, s) == 0.0


def test_dae_corrupt_range_and_zero_amplitude():
    rng = np.random.default_rng(0)
    x = rng.uniform(size=(50, 10))
    y = dae_corrupt(x, rng)
    assert np.all(y >= x) and np.all(y <= np.minimum(x + 0.1, 1.0))
    np.testing.assert_array_equal(dae_corrupt(x, rng, 0.0), x)


def test_copy_is_deep():
    ae = Autoencoder.create(4, (3,), np.random.default_rng(0))
    c = ae.copy()
    c.encoder[0].weights[0, 0] += 1
    assert c.encoder[0].weights[0, 0] != ae.encoder[0].weights[0, 0]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_scores_nonnegative_and_zero_latent_for_same_input(seed):
    rng = np.random.default_rng(seed)
    ae = tiny_autoencoder(rng, d=3, k=2)
    x = rng.uniform(size=(4, 3))
    assert np.all(anomaly_score(ae, x) >= 0)
    assert np.all(latent_loss(ae, x, x) == 0)
    np.testing.assert_array_equal(rec_loss(ae, x, x), anomaly_score(ae, x))
