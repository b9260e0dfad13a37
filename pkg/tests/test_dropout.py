import numpy as np
import pytest

from mhdropout.autodiff import Tensor
from mhdropout.dropout import (
    DropoutSpec,
    MHDropoutNetwork,
    all_bits,
    enumerate_masks,
    forward_masked,
    hypotheses,
    mc_dropout_inference,
    predictive_mean,
    predictive_variance,
    sample_masks,
)
from mhdropout.errors import CapacityError, DegenerateSampleError, DimensionError, ValidationError
from oracles import index_to_gates, masked_forward_loops, population_var


def net_242(seed=0, **kw):
    return MHDropoutNetwork([2, 4, 2], ["tanh", "sigmoid"], np.random.default_rng(seed), **kw)


def test_spec_validation():
    with pytest.raises(ValidationError):
        DropoutSpec((4,), (1.0,))
    with pytest.raises(ValidationError):
        DropoutSpec((4,), (0.0,))
    with pytest.raises(ValidationError):
        DropoutSpec((4, 2), (0.5,))
    assert DropoutSpec.full([4, 3]).total_units == 7


def test_subset_size_bounds():
    with pytest.raises(ValidationError):
        net_242(subset_size=0)
    with pytest.raises(ValidationError):
        net_242(subset_size=17)
    assert net_242(subset_size=16).n_subnetworks == 16


def test_parameter_count_of_the_small_net():
    assert net_242().num_parameters() == 22


def test_sample_masks_near_one_keep_probability():
    net = net_242(p=1 - 1e-9)
    masks = sample_masks(net, 200, np.random.default_rng(0))
    assert all(m.index == 15 for m in masks)


def test_sample_masks_deterministic():
    net = net_242()
    a = sample_masks(net, 30, np.random.default_rng(5))
    b = sample_masks(net, 30, np.random.default_rng(5))
    assert [m.index for m in a] == [m.index for m in b]
    with pytest.raises(ValidationError):
        sample_masks(net, 0, np.random.default_rng(0))


def test_sample_masks_keep_rate():
    net = net_242()
    bits = np.array([m.bits for m in sample_masks(net, 100_000, np.random.default_rng(1))])
    # 0.01 is > 6 binomial standard errors at n = 1e5.
    assert np.all(np.abs(bits.mean(axis=0) - 0.5) < 0.01)


def test_enumerate_small_cases():
    net1 = MHDropoutNetwork([1, 1, 1], ["tanh", "linear"])
    masks = enumerate_masks(net1)
    assert [m.index for m in masks] == [0, 1]
    assert [m.layers[0].tolist() for m in masks] == [[0.0], [1.0]]
    masks = enumerate_masks(net_242())
    assert len(masks) == 16 and len({tuple(m.bits) for m in masks}) == 16
    assert [m.index for m in masks] == list(range(16))


def test_enumerate_membership_of_samples():
    net = MHDropoutNetwork([2, 3, 1], ["relu", "linear"])
    members = {tuple(m.bits) for m in enumerate_masks(net)}
    assert len(members) == 8
    for m in sample_masks(net, 200, np.random.default_rng(2)):
        assert tuple(m.bits) in members
        assert net.mask_from_index(m.index).layers[0].tolist() == m.layers[0].tolist()


def test_enumerate_capacity_guard():
    net = MHDropoutNetwork([1, 21, 1], ["tanh", "linear"])
    with pytest.raises(CapacityError):
        enumerate_masks(net)
    with pytest.raises(CapacityError):
        all_bits(net)


def test_index_decoding_round_trip():
    net = MHDropoutNetwork([2, 3, 2, 1], ["tanh", "tanh", "linear"])
    for m in range(net.n_subnetworks):
        mask = net.mask_from_index(m)
        assert net.mask_from_bits(mask.bits).index == m
        flat = np.concatenate(mask.layers)
        assert flat.tolist() == index_to_gates(m, 5)
    with pytest.raises(ValidationError):
        net.mask_from_index(32)


def test_forward_all_ones_equals_plain():
    net = net_242(3)
    x = Tensor([0.3, -1.1])
    assert np.array_equal(forward_masked(net, x, net.mask_from_index(15)).data, net(x).data)


def test_forward_all_zeros_is_bias_path():
    net = net_242(3)
    out = forward_masked(net, Tensor([0.3, -1.1]), net.mask_from_index(0)).data
    expected = 1 / (1 + np.exp(-net.biases[1].data))
    assert np.allclose(out, expected, rtol=0, atol=1e-15)


def test_forward_mask_five_hand_trace():
    net = net_242(4)
    x = np.array([0.8, -0.2])
    W0, b0, W1, b1 = (p.data for p in net.parameters())
    h = np.tanh(W0 @ x + b0) * np.array([1, 0, 1, 0])
    expected = 1 / (1 + np.exp(-(W1 @ h + b1)))
    got = forward_masked(net, Tensor(x), net.mask_from_index(5)).data
    assert np.allclose(got, expected, rtol=1e-14, atol=0)


def test_forward_mask_shape_mismatch():
    net = net_242()
    other = MHDropoutNetwork([2, 3, 2], ["tanh", "sigmoid"])
    with pytest.raises(DimensionError):
        forward_masked(net, Tensor([0.0, 0.0]), other.mask_from_index(1))


def test_hypotheses_cases():
    net = net_242(1)
    x = Tensor([0.4, 0.9])
    m = net.mask_from_index(9)
    single = hypotheses(net, x, [m])
    assert len(single) == 1 and np.allclose(single[0].data, forward_masked(net, x, m).data, rtol=1e-15, atol=0)
    same = hypotheses(net, x, [m] * 4)
    assert all(np.array_equal(h.data, same[0].data) for h in same)
    with pytest.raises(ValidationError):
        hypotheses(net, x, [])


def test_hypotheses_enumeration_matches_loop_oracle():
    net = net_242(2)
    x = np.array([-0.5, 1.5])
    W = [w.data for w in net.weights]
    b = [bb.data for bb in net.biases]
    outs = hypotheses(net, Tensor(x), enumerate_masks(net))
    for m, h in enumerate(outs):
        ref = masked_forward_loops(W, b, net.activations, x, [index_to_gates(m, 4)])
        assert np.allclose(h.data, ref, rtol=1e-13, atol=0)


def test_predictive_mean_and_variance_examples():
    assert np.array_equal(predictive_mean([Tensor([0.0, 0.0]), Tensor([2.0, 2.0])]).data, [1.0, 1.0])
    assert np.array_equal(predictive_mean([Tensor([0.3, 0.1])]).data, [0.3, 0.1])
    assert np.array_equal(predictive_variance([Tensor([4.0])] * 3).data, [0.0])
    assert np.array_equal(predictive_variance([Tensor([0.0]), Tensor([2.0])]).data, [1.0])
    with pytest.raises(DegenerateSampleError):
        predictive_mean([])
    with pytest.raises(DegenerateSampleError):
        predictive_variance([Tensor([1.0])])


def test_predictive_moments_match_enumeration_oracle():
    net = net_242(6)
    x = np.array([0.1, -0.7])
    outs = hypotheses(net, Tensor(x), enumerate_masks(net))
    rows = [o.data.tolist() for o in outs]
    mean = [sum(c) / 16 for c in zip(*rows)]
    assert np.allclose(predictive_mean(outs).data, mean, rtol=1e-14, atol=0)
    assert np.allclose(predictive_variance(outs).data, population_var(rows), rtol=1e-12, atol=1e-15)


def test_mc_dropout_limits():
    net = net_242(2, p=1 - 1e-12)
    x = Tensor([0.2, 0.3])
    assert np.allclose(mc_dropout_inference(net, x).data, net(x).data, rtol=1e-10, atol=0)


def test_mc_dropout_linear_net_closed_form():
    net = MHDropoutNetwork([2, 3, 1], ["linear", "linear"], np.random.default_rng(0), p=0.5)
    x = np.array([1.0, -2.0])
    W0, b0, W1, b1 = (p.data for p in net.parameters())
    h = W0 @ x + b0
    assert np.allclose(mc_dropout_inference(net, Tensor(x)).data, W1 @ (0.5 * h) + b1, rtol=1e-14, atol=0)
    # On a linear net weight scaling equals the arithmetic mean over all subnetworks.
    mean = predictive_mean(hypotheses(net, Tensor(x), enumerate_masks(net))).data
    assert np.allclose(mc_dropout_inference(net, Tensor(x)).data, mean, rtol=0.05)
