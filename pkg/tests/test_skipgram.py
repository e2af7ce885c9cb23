import math

import numpy as np
import pytest

from graphprobe.embedding import EUCLIDEAN, POINCARE
from graphprobe.graph import from_edges
from graphprobe.skipgram import (
    SkipGramConfig,
    SkipGramModel,
    TrainingDivergedError,
    _apply_exact_softmax_pair,
    _sgd_euclidean,
    _sgd_poincare,
    full_softmax_prob,
    init_model,
    make_method,
    method_settings,
    pair_loss_and_grads,
    similarity,
    train,
)
from graphprobe.walks import generate_corpus
from oracles import finite_difference, relative_error


def random_model(vocab, dim, geometry, seed=0):
    rng = np.random.default_rng(seed)
    if geometry == EUCLIDEAN:
        w_in = rng.normal(0, 0.5, (vocab, dim))
        w_out = rng.normal(0, 0.5, (vocab, dim))
    else:
        w_in = np.column_stack(
            [rng.uniform(0.05, 0.6, vocab), rng.uniform(0, 2 * np.pi, vocab)]
        )
        w_out = np.column_stack(
            [rng.uniform(0.05, 0.6, vocab), rng.uniform(0, 2 * np.pi, vocab)]
        )
    return SkipGramModel(w_in=w_in, w_out=w_out, geometry=geometry)


# --- init ------------------------------------------------------------------


def test_init_deterministic():
    m1 = init_model(34, 16, EUCLIDEAN, seed=4)
    m2 = init_model(34, 16, EUCLIDEAN, seed=4)
    assert np.array_equal(m1.w_in, m2.w_in) and np.array_equal(m1.w_out, m2.w_out)
    m3 = init_model(34, 16, EUCLIDEAN, seed=5)
    assert not np.array_equal(m1.w_in, m3.w_in)


def test_init_shapes_and_ranges():
    m = init_model(34, 128, EUCLIDEAN, seed=0)
    assert m.w_in.shape == (34, 128) and m.w_out.shape == (34, 128)
    assert np.all(np.abs(m.w_in) <= 0.5 / 128)


def test_init_poincare_radii():
    m = init_model(20, 2, POINCARE, seed=1)
    for w in (m.w_in, m.w_out):
        assert np.all(w[:, 0] > 0.0) and np.all(w[:, 0] <= 0.1)
        assert np.all((w[:, 1] >= 0) & (w[:, 1] < 2 * np.pi))


def test_init_poincare_requires_dim2():
    with pytest.raises(ValueError):
        init_model(10, 3, POINCARE, seed=0)


# --- similarity ------------------------------------------------------------


def test_similarity_euclidean_unit_dot():
    m = random_model(4, 3, EUCLIDEAN)
    m.w_in[0] = [1.0, 0.0, 0.0]
    m.w_out[1] = [1.0, 0.0, 0.0]
    assert similarity(m, 0, 1) == pytest.approx(1.0)


def test_similarity_poincare_hand_value():
    m = random_model(3, 2, POINCARE)
    m.w_in[0] = [0.5, 1.0]
    m.w_out[1] = [0.5, 1.0]
    expected = 4.0 * math.atanh(0.5) ** 2
    assert similarity(m, 0, 1) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(1.20695, abs=1e-5)


def test_similarity_poincare_orthogonal_angles():
    m = random_model(3, 2, POINCARE)
    m.w_in[0] = [0.7, 0.3]
    m.w_out[1] = [0.2, 0.3 + math.pi / 2]
    assert similarity(m, 0, 1) == pytest.approx(0.0, abs=1e-12)


def test_similarity_poincare_symmetric():
    m = random_model(6, 2, POINCARE, seed=3)
    for u, v in [(0, 1), (2, 5), (3, 4)]:
        assert similarity(m, u, v, use_output_side=False) == pytest.approx(
            similarity(m, v, u, use_output_side=False), abs=0.0
        )


def test_similarity_poincare_domain_error():
    m = random_model(3, 2, POINCARE)
    m.w_in[0, 0] = 1.0
    with pytest.raises(ValueError):
        similarity(m, 0, 1)


# --- pair loss and gradients ------------------------------------------------


def test_pair_loss_zero_similarity():
    m = random_model(5, 4, EUCLIDEAN)
    m.w_in[:] = 0.0
    m.w_out[:] = 0.0
    loss, _, _ = pair_loss_and_grads(m, 0, 1, [2, 3, 4])
    assert loss == pytest.approx(4 * math.log(2), abs=1e-12)


def test_pair_loss_rejects_context_in_negatives():
    m = random_model(5, 4, EUCLIDEAN)
    with pytest.raises(ValueError):
        pair_loss_and_grads(m, 0, 1, [1, 2])


def test_pair_loss_nonfinite_error():
    m = random_model(5, 4, EUCLIDEAN)
    m.w_in[0] = np.inf
    with np.errstate(invalid="ignore"), pytest.raises(TrainingDivergedError):
        pair_loss_and_grads(m, 0, 1, [2])


def _flatten(model):
    return np.concatenate([model.w_in.ravel(), model.w_out.ravel()])


def _rebuild(model, params):
    k = model.w_in.size
    m = SkipGramModel(
        w_in=params[:k].reshape(model.w_in.shape).copy(),
        w_out=params[k:].reshape(model.w_out.shape).copy(),
        geometry=model.geometry,
    )
    return m


@pytest.mark.parametrize("geometry", [EUCLIDEAN, POINCARE])
def test_pair_gradients_match_finite_differences(geometry):
    dim = 4 if geometry == EUCLIDEAN else 2
    model = random_model(8, dim, geometry, seed=9)
    center, context, negatives = 1, 3, [0, 5, 5]

    def loss_of(params):
        m = _rebuild(model, params)
        return pair_loss_and_grads(m, center, context, negatives)[0]

    loss, grad_in, grad_out = pair_loss_and_grads(model, center, context, negatives)
    analytic = np.zeros(model.w_in.size + model.w_out.size)
    for row, grad in grad_in.items():
        analytic[row * dim:(row + 1) * dim] += grad
    for row, grad in grad_out.items():
        offset = model.w_in.size
        analytic[offset + row * dim:offset + (row + 1) * dim] += grad
    numeric = finite_difference(loss_of, _flatten(model), h=1e-5)
    assert relative_error(analytic, numeric) < 1e-4


def test_symmetric_gradients_for_matched_positive_negative():
    # positive and negative targets with equal (zero) similarity pull the
    # output rows with equal magnitude in opposite directions
    m = random_model(4, 3, EUCLIDEAN)
    m.w_in[0] = [1.0, 0.0, 0.0]
    m.w_out[1] = [0.0, 1.0, 0.0]
    m.w_out[2] = [0.0, 0.0, 1.0]
    _, _, grad_out = pair_loss_and_grads(m, 0, 1, [2])
    assert np.linalg.norm(grad_out[1]) == pytest.approx(np.linalg.norm(grad_out[2]), abs=1e-12)
    assert np.allclose(grad_out[1], -grad_out[2])


@pytest.mark.parametrize("geometry", [EUCLIDEAN, POINCARE])
def test_exact_softmax_step_is_gradient_descent(geometry):
    dim = 4 if geometry == EUCLIDEAN else 2
    model = random_model(6, dim, geometry, seed=2)
    center, context = 0, 4
    lr = 1e-3

    def loss_of(params):
        m = _rebuild(model, params)
        return -math.log(full_softmax_prob(m, center, context))

    before = _flatten(model)
    stepped = _rebuild(model, before)
    _apply_exact_softmax_pair(stepped, center, context, lr)
    implied = (before - _flatten(stepped)) / lr
    numeric = finite_difference(loss_of, before, h=1e-5)
    assert relative_error(implied, numeric) < 1e-4


# --- full softmax ------------------------------------------------------------


def test_full_softmax_uniform_for_zero_weights():
    m = random_model(7, 3, EUCLIDEAN)
    m.w_in[:] = 0.0
    m.w_out[:] = 0.0
    for t in range(7):
        assert full_softmax_prob(m, 2, t) == pytest.approx(1 / 7)


def test_full_softmax_hand_values():
    m = random_model(3, 3, EUCLIDEAN)
    m.w_in[0] = [1.0, 0.0, 0.0]
    m.w_out[0] = [1.0, 0.0, 0.0]
    m.w_out[1] = [0.0, 0.0, 0.0]
    m.w_out[2] = [0.0, 0.0, 0.0]
    e = math.e
    assert full_softmax_prob(m, 0, 0) == pytest.approx(e / (e + 2), abs=1e-12)
    assert full_softmax_prob(m, 0, 1) == pytest.approx(1 / (e + 2), abs=1e-12)


def test_full_softmax_normalizes():
    for geometry in (EUCLIDEAN, POINCARE):
        m = random_model(9, 4 if geometry == EUCLIDEAN else 2, geometry, seed=5)
        total = sum(full_softmax_prob(m, 3, t) for t in range(9))
        assert total == pytest.approx(1.0, abs=1e-9)


# --- kernels agree with the reference gradients -----------------------------


@pytest.mark.parametrize("geometry", [EUCLIDEAN, POINCARE])
def test_sgd_kernel_matches_reference_step(geometry):
    dim = 4 if geometry == EUCLIDEAN else 2
    model = random_model(8, dim, geometry, seed=13)
    reference = _rebuild(model, _flatten(model))
    center, context, negs = 2, 6, [1, 4, 4]
    lr = 0.05

    kernel = _sgd_euclidean if geometry == EUCLIDEAN else _sgd_poincare
    kernel(
        model.w_in,
        model.w_out,
        np.array([center], np.int32),
        np.array([context], np.int32),
        np.array([negs], np.int32),
        np.array([lr]),
    )

    _, grad_in, grad_out = pair_loss_and_grads(reference, center, context, negs)
    for row, grad in grad_in.items():
        reference.w_in[row] -= lr * grad
    for row, grad in grad_out.items():
        reference.w_out[row] -= lr * grad
    if geometry == POINCARE:
        for w in (reference.w_in, reference.w_out):
            np.clip(w[:, 0], 1e-5, 1 - 1e-5, out=w[:, 0])
            np.mod(w[:, 1], 2 * np.pi, out=w[:, 1])
    assert np.allclose(model.w_in, reference.w_in, atol=1e-12)
    assert np.allclose(model.w_out, reference.w_out, atol=1e-12)


# --- training ----------------------------------------------------------------


def test_train_deterministic(karate):
    corpus = generate_corpus(karate, 2, 20, seed=0)
    cfg = SkipGramConfig(dim=16, epochs=2, seed=3)
    r1 = train(karate, corpus, cfg)
    r2 = train(karate, corpus, cfg)
    assert r1.embedding.matrix.tobytes() == r2.embedding.matrix.tobytes()
    assert r1.epoch_losses == r2.epoch_losses


def test_train_loss_decreases_karate(karate):
    corpus = generate_corpus(karate, 10, 40, seed=0)
    cfg = SkipGramConfig(dim=32, epochs=15, seed=0, window=5)
    losses = train(karate, corpus, cfg).epoch_losses
    upticks = [
        (b - a) / a for a, b in zip(losses[:-1], losses[1:]) if b > a
    ]
    assert len(upticks) <= 2
    assert all(u < 0.01 for u in upticks)


def test_train_poincare_radius_domain(karate):
    corpus = generate_corpus(karate, 4, 30, seed=1)
    cfg = SkipGramConfig(dim=2, geometry=POINCARE, epochs=3, seed=0, window=5)
    emb = train(karate, corpus, cfg).embedding
    assert np.all(emb.matrix[:, 0] >= 1e-5)
    assert np.all(emb.matrix[:, 0] <= 1 - 1e-5)
    assert np.all((emb.matrix[:, 1] >= 0) & (emb.matrix[:, 1] < 2 * np.pi))


def test_train_divergence_raises(triangle):
    corpus = generate_corpus(triangle, 4, 10, seed=0)
    cfg = SkipGramConfig(dim=8, epochs=2, lr=1e12, seed=0, window=2)
    with pytest.raises(TrainingDivergedError) as err:
        train(triangle, corpus, cfg)
    assert err.value.epoch >= 0


def twin_graph():
    # vertices 4 and 5 share the neighborhood {0, 1, 2} and are not adjacent
    return from_edges(
        [(0, 1), (1, 2), (0, 2), (0, 3), (4, 0), (4, 1), (4, 2), (5, 0), (5, 1), (5, 2)]
    )


def test_twin_vertices_end_close_euclidean():
    g = twin_graph()
    wins = 0
    for seed in range(5):
        corpus = generate_corpus(g, 30, 20, seed=seed)
        cfg = SkipGramConfig(dim=16, epochs=8, seed=seed, window=4)
        mat = train(g, corpus, cfg).embedding.matrix
        twin_dist = np.linalg.norm(mat[4] - mat[5])
        dists = [
            np.linalg.norm(mat[i] - mat[j])
            for i in range(6)
            for j in range(i + 1, 6)
        ]
        if twin_dist < np.mean(dists):
            wins += 1
    assert wins >= 4


def test_twin_vertices_similar_poincare():
    g = twin_graph()
    wins = 0
    for seed in range(5):
        corpus = generate_corpus(g, 30, 20, seed=seed)
        cfg = SkipGramConfig(dim=2, geometry=POINCARE, epochs=8, seed=seed, window=4)
        emb = train(g, corpus, cfg).embedding
        model = SkipGramModel(emb.matrix, emb.matrix, POINCARE)
        sims = {
            (i, j): similarity(model, i, j, use_output_side=False)
            for i in range(6)
            for j in range(i + 1, 6)
        }
        if sims[(4, 5)] > np.mean(list(sims.values())):
            wins += 1
    assert wins >= 4


def test_exact_softmax_trains(karate):
    corpus = generate_corpus(karate, 1, 10, seed=0)
    cfg = SkipGramConfig(dim=8, epochs=3, mode="exact_softmax", seed=1, window=3)
    losses = train(karate, corpus, cfg).epoch_losses
    assert losses[-1] < losses[0]


def test_exact_softmax_vocab_guard():
    big = from_edges([(i, i + 1) for i in range(5100)])
    corpus = generate_corpus(big, 1, 2, seed=0)
    with pytest.raises(ValueError):
        train(big, corpus, SkipGramConfig(dim=4, epochs=1, mode="exact_softmax"))


# --- method presets ----------------------------------------------------------


def test_make_method_deepwalk_shape(karate):
    emb = make_method(
        "deepwalk", karate, seed=0,
        walks_per_vertex=2, walk_length=10, epochs=1, dim=32, window=3,
    )
    assert emb.matrix.shape == (34, 32)
    assert emb.geometry == EUCLIDEAN
    assert emb.method_tag == "deepwalk"


def test_make_method_poincare(karate):
    emb = make_method(
        "poincare", karate, seed=0, walks_per_vertex=2, walk_length=10, epochs=1, window=3
    )
    assert emb.matrix.shape == (34, 2)
    assert emb.geometry == POINCARE
    assert np.all(emb.matrix[:, 0] < 1.0)


def test_node2vec_variants_differ_only_in_pq():
    strat_h, cfg_h, walks_h = method_settings("node2vec_h")
    strat_s, cfg_s, walks_s = method_settings("node2vec_s")
    assert (strat_h.p, strat_h.q) == (1.0, 0.5)
    assert (strat_s.p, strat_s.q) == (0.5, 2.0)
    assert cfg_h == cfg_s
    assert walks_h == walks_s


def test_method_settings_rejects_unknown():
    with pytest.raises(ValueError):
        method_settings("node2horse")
    with pytest.raises(ValueError):
        method_settings("deepwalk", p=2.0)   # uniform walks take no p
    with pytest.raises(ValueError):
        method_settings("deepwalk", warp=1)
