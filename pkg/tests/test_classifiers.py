import numpy as np
import pytest

from graphprobe.classifiers import (
    PROBE_KINDS,
    ProbeConfig,
    logreg_loss_and_grad,
    predict,
    train_probe,
)
from graphprobe.probe import class_weights
from oracles import finite_difference, relative_error


def separable_blobs(n_per=60, seed=0, margin=5.0, dim=4):
    rng = np.random.default_rng(seed)
    x0 = rng.normal(0.0, 1.0, (n_per, dim))
    x1 = rng.normal(margin, 1.0, (n_per, dim))
    x = np.vstack([x0, x1])
    y = np.repeat([0, 1], n_per)
    return x, y


@pytest.mark.parametrize("kind", PROBE_KINDS)
def test_separable_blobs_fit_perfectly(kind):
    x, y = separable_blobs()
    w = class_weights(y, 2)
    model = train_probe(kind, x, y, w, ProbeConfig(seed=0))
    assert np.mean(predict(model, x) == y) == 1.0


def test_logreg_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    n, d, c = 30, 5, 4
    x = rng.normal(size=(n, d))
    y = rng.integers(0, c, n)
    sample_w = class_weights(y, c)[y]
    w0 = rng.normal(0, 0.3, size=(d, c))
    b0 = rng.normal(0, 0.3, size=c)

    def loss_of(params):
        w = params[: d * c].reshape(d, c)
        b = params[d * c:]
        return logreg_loss_and_grad(w, b, x, y, sample_w)[0]

    _, gw, gb = logreg_loss_and_grad(w0, b0, x, y, sample_w)
    analytic = np.concatenate([gw.ravel(), gb])
    numeric = finite_difference(loss_of, np.concatenate([w0.ravel(), b0]), h=1e-5)
    assert relative_error(analytic, numeric) < 1e-4


def test_weighting_raises_minority_recall():
    rng = np.random.default_rng(4)
    # 9:1 imbalance with overlapping classes, so the unweighted fit can
    # afford to ignore the minority
    n_major, n_minor = 450, 50
    x = np.vstack(
        [rng.normal(0.0, 1.0, (n_major, 2)), rng.normal(1.2, 1.0, (n_minor, 2))]
    )
    y = np.repeat([0, 1], [n_major, n_minor])
    holdout = rng.permutation(len(y))
    train_ids, test_ids = holdout[:350], holdout[350:]
    weighted = train_probe(
        "logreg", x[train_ids], y[train_ids], class_weights(y[train_ids], 2), ProbeConfig(seed=0)
    )
    unweighted = train_probe(
        "logreg", x[train_ids], y[train_ids], np.ones(2), ProbeConfig(seed=0)
    )

    def minority_recall(model):
        preds = predict(model, x[test_ids])
        mask = y[test_ids] == 1
        return np.mean(preds[mask] == 1)

    assert minority_recall(weighted) > minority_recall(unweighted)


def test_single_class_constant_predictor():
    x = np.random.default_rng(0).normal(size=(10, 3))
    y = np.full(10, 2)
    model = train_probe("mlp1", x, y, class_weights(y, 4), ProbeConfig(seed=0))
    assert model.warning is not None
    assert np.all(predict(model, x) == 2)


def test_tie_breaks_toward_lower_index():
    x = np.random.default_rng(1).normal(size=(6, 3))
    y = np.full(6, 1)
    model = train_probe("logreg", x, y, class_weights(y, 3), ProbeConfig(seed=0))
    # constant predictor scores are one-hot; degenerate two-way tie below
    model.constant_class = None
    model.layers = [(np.zeros((3, 3)), np.zeros(3))]
    assert np.all(predict(model, x) == 0)


def test_dimension_mismatch_rejected():
    x, y = separable_blobs(dim=4)
    model = train_probe("logreg", x, y, class_weights(y, 2), ProbeConfig(seed=0))
    with pytest.raises(ValueError):
        predict(model, np.zeros((3, 5)))


def test_probe_deterministic_per_seed():
    x, y = separable_blobs(seed=3)
    w = class_weights(y, 2)
    m1 = train_probe("mlp1", x, y, w, ProbeConfig(seed=8))
    m2 = train_probe("mlp1", x, y, w, ProbeConfig(seed=8))
    for (w1, b1), (w2, b2) in zip(m1.layers, m2.layers):
        assert np.array_equal(w1, w2) and np.array_equal(b1, b2)
    m3 = train_probe("mlp1", x, y, w, ProbeConfig(seed=9))
    assert not np.array_equal(m1.layers[0][0], m3.layers[0][0])


def test_standardization_uses_train_statistics_only():
    x, y = separable_blobs(seed=5)
    w = class_weights(y, 2)
    model = train_probe("logreg", x, y, w, ProbeConfig(seed=0))
    assert np.allclose(model.mean, x.mean(axis=0))
    assert np.allclose(model.std, x.std(axis=0))
    # canary: an extreme-valued test point must not perturb the model
    extreme = np.full((1, x.shape[1]), 1e9)
    before = model.layers[0][0].copy()
    predict(model, extreme)
    assert np.array_equal(model.layers[0][0], before)


def test_unknown_kind_rejected():
    x, y = separable_blobs()
    with pytest.raises(ValueError):
        train_probe("forest", x, y, class_weights(y, 2))
