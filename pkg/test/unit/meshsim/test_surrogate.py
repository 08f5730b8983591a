import math

import numpy
import pytest
from numpy.testing import assert_allclose
from scipy.special import erf

from surfeat.exceptions import InvalidArgumentError, InvalidDataError
from surfeat.meshsim.graph import adjacency_from_edges, augment_adjacency
from surfeat.meshsim.surrogate import GraphSurrogate, SurrogateConfig
from surfeat.nncore.autograd import Tensor, default_dtype
from surfeat.nncore.gradcheck import check_module

EDGES = [[0, 1], [1, 2], [2, 3], [3, 4], [0, 4], [1, 3]]


def _model(mask_mode="additive", in_channels=4, seed=0):
    config = SurrogateConfig(
        latent_dim=8, blocks=2, heads=2, size_class="custom", mask_mode=mask_mode
    )
    with default_dtype(numpy.float64):
        return GraphSurrogate(config, in_channels, 1).reset_parameters(seed)


def _softmax(row):
    shifted = numpy.exp(row - row.max())
    return shifted / shifted.sum()


def _loop_attention(attention, latents, adjacency, mask_mode):
    heads, width = 2, latents.shape[1]
    head_dim = width // heads
    query = latents @ attention.query.weight.data + attention.query.bias.data
    key = latents @ attention.key.weight.data + attention.key.bias.data
    value = latents @ attention.value.weight.data + attention.value.bias.data
    mixed = numpy.zeros_like(latents)
    for head in range(heads):
        part = slice(head * head_dim, (head + 1) * head_dim)
        for i in range(latents.shape[0]):
            scores = numpy.array(
                [
                    query[i, part] @ key[j, part] / math.sqrt(head_dim)
                    for j in range(latents.shape[0])
                ]
            )
            if mask_mode == "additive":
                allowed = numpy.flatnonzero(adjacency[i])
                weights = numpy.zeros(latents.shape[0])
                weights[allowed] = _softmax(scores[allowed])
            else:
                weights = _softmax(scores * adjacency[i])
            mixed[i, part] = weights @ value[:, part]
    return mixed @ attention.output.weight.data + attention.output.bias.data


@pytest.mark.parametrize("mask_mode", ["additive", "literal"])
def test_masked_attention_block__matches_loop(mask_mode):
    model = _model(mask_mode)
    adjacency = adjacency_from_edges(5, EDGES)
    latents = numpy.random.default_rng(1).standard_normal((5, 8))
    out = model.masked_attention_block(latents, adjacency).numpy()
    expected = _loop_attention(model.block0.attention, latents, adjacency, mask_mode)
    assert_allclose(out, expected, rtol=1e-10, atol=1e-12)


def test_masked_attention_block__isolated_node_attends_to_itself():
    model = _model()
    adjacency = adjacency_from_edges(3, [[0, 1]])
    latents = numpy.random.default_rng(2).standard_normal((3, 8))
    weights = model.block0.attention.weights(Tensor(latents[None]), adjacency).numpy()
    assert_allclose(weights[0, :, 2], [[0, 0, 1]] * 2)


@pytest.mark.parametrize("trial", range(50))
def test_masked_attention__no_weight_outside_mask(trial):
    rng = numpy.random.default_rng(trial)
    nodes = int(rng.integers(3, 25))
    chain = [[node, node + 1] for node in range(nodes - 1)]
    extra = rng.integers(0, nodes, size=(int(rng.integers(0, nodes)), 2))
    adjacency = adjacency_from_edges(nodes, numpy.concatenate([chain, extra]))
    mask = augment_adjacency(
        adjacency,
        k=int(rng.integers(1, 3)),
        r=int(rng.integers(0, 4)),
        global_nodes=[int(rng.integers(nodes))] if trial % 2 else None,
        seed=trial,
    )
    model = _model(seed=trial)
    latents = rng.standard_normal((2, nodes, 8))
    weights = model.block0.attention.weights(Tensor(latents), mask).numpy()
    assert weights.shape == (2, 2, nodes, nodes)
    assert numpy.all(weights[..., ~mask] == 0.0)
    assert numpy.abs(weights.sum(axis=-1) - 1.0).max() <= 1e-6


def test_gated_mlp__formula():
    model = _model()
    mlp = model.block1.mlp
    latents = numpy.random.default_rng(3).standard_normal((4, 8))

    def gelu(value):
        return value * 0.5 * (1.0 + erf(value / math.sqrt(2.0)))

    left = latents @ mlp.left.weight.data + mlp.left.bias.data
    right = latents @ mlp.right.weight.data + mlp.right.bias.data
    expected = (gelu(left) * right) @ mlp.final.weight.data + mlp.final.bias.data
    assert_allclose(model.gated_mlp(latents, block=1).numpy(), expected, rtol=1e-10)


def test_transformer_block__rms_normalized_output():
    model = _model()
    adjacency = adjacency_from_edges(5, EDGES)
    latents = numpy.random.default_rng(4).standard_normal((5, 8))
    out = model.transformer_block(latents, adjacency).numpy()
    assert_allclose(numpy.sqrt((out**2).mean(axis=1)), 1.0, rtol=1e-5)


def test_forward__permutation_equivariant():
    model = _model()
    adjacency = adjacency_from_edges(5, EDGES)
    inputs = numpy.random.default_rng(5).standard_normal((5, 4))
    order = numpy.array([3, 0, 4, 1, 2])
    out = model(inputs, adjacency).numpy()
    permuted = model(inputs[order], adjacency[numpy.ix_(order, order)]).numpy()
    assert_allclose(permuted, out[order], rtol=1e-9, atol=1e-12)


def test_forward__batched_matches_single():
    model = _model()
    adjacency = adjacency_from_edges(5, EDGES)
    inputs = numpy.random.default_rng(6).standard_normal((2, 5, 4))
    batched = model(inputs, adjacency).numpy()
    for index in range(2):
        assert_allclose(batched[index], model(inputs[index], adjacency).numpy(), rtol=1e-10)


def test_encode_decode__shapes():
    model = _model()
    latents = model.encode(numpy.zeros((5, 4)))
    assert latents.shape == (5, 8)
    assert model.decode(latents).shape == (5, 1)
    with pytest.raises(InvalidArgumentError):
        model.encode(numpy.zeros((5, 3)))


def test_forward__adjacency_checks():
    model = _model()
    with pytest.raises(InvalidArgumentError):
        model(numpy.zeros((5, 4)), numpy.eye(4, dtype=bool))
    with pytest.raises(InvalidDataError):
        model(numpy.zeros((5, 4)), numpy.zeros((5, 5), dtype=bool))


def test_gradient_check__surrogate():
    model = _model()
    adjacency = adjacency_from_edges(5, EDGES)
    inputs = Tensor(numpy.random.default_rng(7).standard_normal((5, 4)), requires_grad=True)
    report = check_module(model, [inputs, adjacency], sample=6)
    assert report.passed, report.per_tensor


def test_config__size_classes():
    small = SurrogateConfig.from_size_class("S")
    large = SurrogateConfig.from_size_class("L")
    assert (small.latent_dim, small.blocks, small.heads) == (64, 4, 4)
    assert (large.latent_dim, large.blocks, large.heads) == (128, 8, 8)
    assert large.head_dim == 16
    with pytest.raises(InvalidArgumentError):
        SurrogateConfig(latent_dim=10, heads=4)


def test_config__attention_mask_widens_adjacency():
    adjacency = adjacency_from_edges(5, [[0, 1], [1, 2], [2, 3], [3, 4]])
    mask = SurrogateConfig(hops=1, random_edges=0, global_node=True).attention_mask(adjacency)
    assert mask[1].all() or mask[2].all() or mask[3].all()
    assert (mask >= adjacency).all()
