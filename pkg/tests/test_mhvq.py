import numpy as np
import pytest

from mhdropout.autodiff import Parameter, Tensor, backward, total
from mhdropout.errors import DimensionError, ValidationError
from mhdropout.mhvq import (
    Codebook,
    MHVQConfig,
    MHVQModel,
    PosteriorTable,
    VQConfig,
    VQModel,
    codebook_loss,
    fit_categorical_posterior,
    generate,
    mhvq_losses,
    mhvq_train_step,
    offset_outputs,
    quantize,
    sample_latents,
    vq_train_step,
)
from mhdropout.dropout import all_bits
from mhdropout.harness.datasets import gen_clusters
from oracles import nearest_loops


def test_quantize_examples(rng):
    cb = Codebook(5, 2, rng)
    idx, e = quantize(cb, Tensor(cb.embeddings.data[3]))
    assert idx == 3 and np.array_equal(e.data, cb.embeddings.data[3])
    single = Codebook(1, 2, rng)
    assert all(quantize(single, Tensor(v))[0] == 0 for v in rng.normal(size=(10, 2)))
    cb4 = Codebook(4, 2, rng)
    for y in rng.normal(size=(100, 2)):
        assert quantize(cb4, Tensor(y))[0] == nearest_loops(cb4.embeddings.data.tolist(), y.tolist())


def test_quantize_ties_and_errors():
    cb = Codebook(3, 1)
    cb.embeddings.data = np.array([[1.0], [-1.0], [1.0]])
    assert quantize(cb, Tensor([0.0]))[0] == 0
    with pytest.raises(DimensionError):
        quantize(cb, Tensor([0.0, 1.0]))
    with pytest.raises(ValidationError):
        Codebook(0, 2)


def test_quantize_rows_match_vectors(rng):
    cb = Codebook(6, 3, rng)
    Y = rng.normal(size=(20, 3))
    idx, E = quantize(cb, Tensor(Y))
    assert list(idx) == [quantize(cb, Tensor(y))[0] for y in Y]
    assert np.array_equal(E.data, cb.embeddings.data[idx])


def test_codebook_loss_examples():
    assert codebook_loss(Tensor([0.2, 0.3]), Tensor([0.2, 0.3])).item() == 0.0
    assert codebook_loss(Tensor([1.0, 0.0]), Tensor([0.0, 0.0]), 0.25).item() == pytest.approx(1.25, rel=1e-15)


def test_codebook_loss_gradient_targets():
    y, e = Parameter([1.0, -0.5]), Parameter([0.2, 0.4])
    backward(codebook_loss(y, e, 0.25))
    # First term pulls the embedding, second commits the encoder with weight beta.
    assert np.allclose(e.grad, 2 * (e.data - y.data), rtol=1e-15)
    assert np.allclose(y.grad, 0.25 * 2 * (y.data - e.data), rtol=1e-15)


def test_straight_through_embedding_gets_nothing_from_decoder_path(rng):
    cb = Codebook(3, 2, rng)
    y = Parameter(rng.normal(size=2))
    from mhdropout.autodiff import straight_through

    _, e = quantize(cb, y)
    out = straight_through(y, e)
    backward(total(out))
    assert np.array_equal(y.grad, [1.0, 1.0])
    assert not cb.embeddings.grad.any()


def vq_pair(seed=0, **kw):
    vq = VQModel(VQConfig(2, n_codes=4), np.random.default_rng(seed))
    mh = MHVQModel(MHVQConfig(2, n_codes=4, **kw), np.random.default_rng(seed))
    return vq, mh


def test_primary_initialisation_matches_plain_vq():
    vq, mh = vq_pair()
    for a, b in zip(vq.primary_parameters(), mh.primary_parameters()):
        assert np.array_equal(a.data, b.data)


def test_zero_offset_reduces_to_plain_vq():
    vq, mh = vq_pair(subset_size=3)
    for p in mh.offset.parameters():
        p.data[...] = 0.0
    mh.freeze_offset = True
    X, _ = gen_clusters(np.random.default_rng(0), 64)
    rng = np.random.default_rng(1)
    for step in range(20):
        batch = X[step * 3 : step * 3 + 3]
        a = vq_train_step(vq, batch, 0.1)
        b = mhvq_train_step(mh, batch, 0.1, rng)
        assert a.reconstruction == b.reconstruction and a.codebook == b.codebook
    for a, b in zip(vq.primary_parameters(), mh.primary_parameters()):
        assert np.array_equal(a.data, b.data)


def test_single_subnetwork_has_no_selection():
    _, mh = vq_pair(subset_size=1)
    x = np.array([[0.3, 0.7]])
    bits = mh.sample_bits(1, np.random.default_rng(0))
    *_, lat, winners = mhvq_losses(mh, x, bits)
    assert bits.shape[1] == 1 and winners.tolist() == [0]


def test_winner_replay_oracle():
    _, mh = vq_pair(subset_size=5)
    x = np.array([0.25, 0.6])
    bits = mh.sample_bits(1, np.random.default_rng(3))
    *_, winners = mhvq_losses(mh, x, bits)
    y = mh.encoder(Tensor(x)).data
    e = mh.codebook.embeddings.data[mh.codebook.nearest(y)]
    z2 = mh.secondary_codebook.nearest(mh.secondary_encoder(Tensor(x)).data)
    hyps = e + offset_outputs(mh, z2, bits[0])
    assert winners[0] == int(np.argmin(((hyps - y) ** 2).sum(axis=1)))


def test_vq_single_code_floor():
    vq = VQModel(VQConfig(2, n_codes=1), np.random.default_rng(0))
    X, _ = gen_clusters(np.random.default_rng(0), 400)
    rng = np.random.default_rng(1)
    for _ in range(1500):
        vq_train_step(vq, X[rng.integers(0, 400, 32)], 0.1)
    assert set(vq.tokens(X)) == {0}
    # One code decodes to one point, so the error cannot beat the data variance.
    mse = ((vq.reconstruct(X) - X) ** 2).sum(axis=1).mean()
    assert mse >= X.var(axis=0).sum() - 1e-12


def test_vq_commitment_zero_on_codebook_point():
    vq = VQModel(VQConfig(2, n_codes=3), np.random.default_rng(0))
    y = vq.codebook.embeddings.data[1]
    assert codebook_loss(Tensor(y), Tensor(y)).item() == 0.0


def test_vq_loss_decreases_on_clusters():
    vq = VQModel(VQConfig(2, n_codes=4), np.random.default_rng(0))
    X, _ = gen_clusters(np.random.default_rng(0), 400)
    rng = np.random.default_rng(1)
    first = [vq_train_step(vq, X[rng.integers(0, 400, 32)], 0.01) for _ in range(50)]
    for _ in range(400):
        vq_train_step(vq, X[rng.integers(0, 400, 32)], 0.01)
    last = [vq_train_step(vq, X[rng.integers(0, 400, 32)], 0.01) for _ in range(50)]
    mean = lambda s: np.mean([v.reconstruction + v.codebook for v in s])  # noqa: E731
    assert mean(last) < mean(first)


def test_posterior_table_cases():
    _, mh = vq_pair()
    t = fit_categorical_posterior(mh, np.array([[0.1, 0.2]]))
    assert t.probs.sum() == 1.0 and np.count_nonzero(t.probs) == 1
    X, _ = gen_clusters(np.random.default_rng(0), 500)
    t = fit_categorical_posterior(mh, X)
    z, _ = mh.token_pairs(X)
    assert abs(t.probs.sum() - 1) < 1e-12
    assert np.allclose(t.marginal_primary(), np.bincount(z, minlength=4) / len(X), rtol=0, atol=1e-15)
    with pytest.raises(ValidationError):
        fit_categorical_posterior(mh, np.zeros((0, 2)))


def test_posterior_sampling_uniform():
    table = PosteriorTable(np.full((2, 2), 0.25))
    z, z2 = table.sample(np.random.default_rng(0), 40_000)
    freq = np.bincount(z * 2 + z2, minlength=4) / 40_000
    assert np.all(np.abs(freq - 0.25) < 0.01)


def test_generate_zero_variance_and_one_hot():
    _, mh = vq_pair()
    for p in mh.offset.parameters():
        p.data[...] = 0.0
    probs = np.zeros((4, 4))
    probs[2, 1] = 1.0
    table = PosteriorTable(probs)
    d = sample_latents(mh, table, np.random.default_rng(0), 50)
    assert set(d.primary) == {2} and set(d.secondary) == {1}
    assert np.array_equal(d.latents, np.broadcast_to(mh.codebook.embeddings.data[2], d.latents.shape))
    outs = generate(mh, table, np.random.default_rng(0), 5)
    ref = mh.decoder(Tensor(mh.codebook.embeddings.data[2])).data
    assert all(np.allclose(o.data, ref, rtol=1e-14, atol=1e-15) for o in outs)


def test_generated_latent_variance_matches_estimate():
    _, mh = vq_pair(subset_size=8)
    probs = np.zeros((4, 4))
    probs[1, 3] = 1.0
    d = sample_latents(mh, PosteriorTable(probs), np.random.default_rng(0), 10_000)
    ratio = d.latents.var(axis=0) / d.variances.mean(axis=0)
    assert np.all(np.abs(ratio - 1) < 0.1)
    full = offset_outputs(mh, 3, all_bits(mh.offset)).var(axis=0)
    # Subsets of T draws underestimate the population variance by (T - 1) / T on average.
    assert np.allclose(d.variances.mean(axis=0), full * 7 / 8, rtol=0.1)


def test_plain_vq_generation_has_no_spread():
    vq, _ = vq_pair()
    X, _ = gen_clusters(np.random.default_rng(0), 300)
    d = sample_latents(vq, fit_categorical_posterior(vq, X), np.random.default_rng(0), 1000)
    assert not d.variances.any()
    for tok in np.unique(d.primary):
        assert np.all(d.latents[d.primary == tok] == vq.codebook.embeddings.data[tok])
