import math

import mpmath
import numpy as np
import pytest

from vos_lab import losses, network
from vos_lab.mathkit import inverse_softplus, make_rng
from vos_lab.network import Network, energy_from_logits, softmax_posterior

import gradcheck


def small_net(seed, extra_class=False, cls_bias=False):
    return Network([2, 6, 5, 4], 3, phi_hidden=7, extra_class=extra_class,
                   cls_bias=cls_bias, rng=make_rng(seed))


def loop_forward(net, x):
    """Independent scalar-loop forward pass used as an oracle."""
    a = list(x)
    for i in range(net.num_layers):
        W, b = net.params[f"backbone.W{i}"], net.params[f"backbone.b{i}"]
        z = [b[j] + sum(a[r] * W[r, j] for r in range(len(a))) for j in range(W.shape[1])]
        a = [max(v, 0.0) for v in z] if i < net.num_layers - 1 else z
    return np.array(a)


def test_zero_network_gives_zero_features():
    net = Network([3, 4, 2], 2, phi_hidden=3)
    np.testing.assert_array_equal(net.features([1.0, -2.0, 3.0]), [0.0, 0.0])


def test_identity_layer():
    net = Network([3, 3], 3, phi_hidden=3)
    net.params["backbone.W0"][...] = np.eye(3)
    x = np.array([0.5, -1.5, 2.0])
    np.testing.assert_array_equal(net.features(x), x)


def test_forward_matches_loop_oracle():
    r = np.random.default_rng(0)
    net = Network([3, 8, 6, 5], 4, phi_hidden=5, rng=make_rng(1))
    for x in r.standard_normal((10, 3)):
        np.testing.assert_allclose(net.features(x), loop_forward(net, x), atol=1e-12, rtol=0)


def test_features_dimension_check():
    with pytest.raises(ValueError):
        small_net(0).features([1.0, 2.0, 3.0])


def test_logits_cases():
    net = Network([2, 3], 3, phi_hidden=2)
    h = np.array([1.0, -2.0, 0.5])
    np.testing.assert_array_equal(net.logits(h), np.zeros(3))
    net.params["head.W_cls"][...] = np.eye(3)
    np.testing.assert_array_equal(net.logits(h), h)
    W = np.random.default_rng(3).standard_normal((3, 3))
    net.params["head.W_cls"][...] = W
    np.testing.assert_allclose(net.logits(h), [sum(W[i, k] * h[i] for i in range(3)) for k in range(3)],
                               atol=1e-12)
    with pytest.raises(ValueError):
        net.logits([1.0, 2.0])


def test_energy_examples():
    net = Network([2, 3], 3, phi_hidden=2)
    np.testing.assert_allclose(net.energy_weights, 1.0, atol=1e-15)
    assert net.energy(np.zeros(3)) == pytest.approx(-math.log(3), abs=1e-15)
    oracle = -float(mpmath.log(sum(mpmath.e ** k for k in (1, 2, 3))))
    assert net.energy(np.array([1.0, 2.0, 3.0])) == pytest.approx(oracle, abs=1e-14)


def test_constant_w_matches_learnable_at_init():
    net = small_net(0)
    F = np.random.default_rng(1).standard_normal((20, 3)) * 4
    np.testing.assert_array_equal(net.energy(F), energy_from_logits(F, np.ones(3)))
    assert net.params["head.w_raw"][0] == float(inverse_softplus(1.0))


def test_energy_shift_covariance_and_positive_weights():
    r = np.random.default_rng(2)
    net = small_net(1)
    net.params["head.w_raw"][...] = [-30.0, 0.0, 30.0]
    assert np.all(net.energy_weights > 0)
    F = r.standard_normal((50, 3)) * 10
    for c in (-100.0, 3.5, 250.0):
        np.testing.assert_allclose(net.energy(F + c), net.energy(F) - c, atol=1e-10, rtol=0)


def test_softmax_examples():
    np.testing.assert_array_equal(softmax_posterior([0.0, 0.0]), [0.5, 0.5])
    p = softmax_posterior([1000.0, 0.0])
    assert p[0] == pytest.approx(1.0) and p[1] >= 0 and np.all(np.isfinite(p))
    np.testing.assert_allclose(softmax_posterior([1.0, 2.0, 3.0]), [0.09003, 0.24473, 0.66524], atol=1e-4)
    F = np.random.default_rng(0).standard_normal((30, 5)) * 20
    P = softmax_posterior(F)
    assert np.all(P > 0)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(softmax_posterior(F + 7.0), P, atol=1e-12)


def test_energy_grad_closed_form():
    r = np.random.default_rng(4)
    for _ in range(20):
        f, w = r.standard_normal(4) * 3, r.uniform(0.1, 3.0, 4)
        closed = -w * np.exp(f) / np.sum(w * np.exp(f))
        np.testing.assert_allclose(network.energy_grad_logits(f, w), closed, atol=1e-14)
        fd = np.array([(energy_from_logits(f + 1e-6 * e, w) - energy_from_logits(f - 1e-6 * e, w)) / 2e-6
                       for e in np.eye(4)])
        np.testing.assert_allclose(fd, closed, atol=1e-8)


def test_backward_before_forward():
    with pytest.raises(RuntimeError):
        small_net(0).backward(dF=np.zeros((1, 3)))


def test_zero_weight_group_has_zero_gradient():
    net = small_net(3)
    X = np.random.default_rng(0).standard_normal((5, 2))
    _, grads = losses.total_loss(net, X, np.array([0, 1, 2, 0, 1]), None, beta=0.0)
    for name in ("phi.W1", "phi.b1", "phi.W2", "phi.b2", "head.w_raw"):
        assert not np.any(grads[name]), name


def test_checkpoint_roundtrip(tmp_path):
    for net in (small_net(5), small_net(6, extra_class=True, cls_bias=True)):
        path = tmp_path / "net.ckpt"
        network.save_checkpoint(net, path)
        back = network.load_checkpoint(path)
        assert back.layer_sizes == net.layer_sizes
        assert (back.num_outputs, back.cls_bias, back.phi_hidden) == (net.num_outputs, net.cls_bias, net.phi_hidden)
        for k in net.params:
            assert back.params[k].tobytes() == net.params[k].tobytes()
        assert network.checkpoint_bytes(back) == path.read_bytes()


def test_checkpoint_layout(tmp_path):
    net = Network([2, 3], 2, phi_hidden=1, score_kind=network.SCORE_ENERGY, energy_center=-16.0)
    blob = network.checkpoint_bytes(net)
    assert blob[:8] == b"VOSCKPT1"
    assert blob[8:12] == (2).to_bytes(4, "little")
    n_params = sum(p.size for p in net.params.values())
    assert len(blob) == 8 + 4 + 2 * 4 + 6 * 4 + 8 + 8 * n_params
    back = network.checkpoint_from_bytes(blob)
    assert back.score_kind == network.SCORE_ENERGY and back.energy_center == -16.0


def test_checkpoint_rejects_garbage():
    with pytest.raises(ValueError):
        network.checkpoint_from_bytes(b"NOTACKPT" + bytes(40))
    blob = network.checkpoint_bytes(small_net(0))
    with pytest.raises(ValueError):
        network.checkpoint_from_bytes(blob[:-8])
