"""Probe classifiers trained on embedding rows.

Four kinds: multinomial logistic regression, one-vs-rest linear SVM, and
one- or two-hidden-layer rectifier networks with a softmax head. All use
per-class loss weights for the imbalanced bins, standardize inputs with
statistics taken from the training split only, and are deterministic for a
fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .seeding import rng_for

PROBE_KINDS = ("logreg", "linear_svm", "mlp1", "mlp2")

_HIDDEN = {"mlp1": (100,), "mlp2": (256, 256)}
_DEFAULT_EPOCHS = {"logreg": 300, "linear_svm": 300, "mlp1": 150, "mlp2": 150}
_DEFAULT_LR = {"logreg": 0.5, "linear_svm": 0.5, "mlp1": 1e-3, "mlp2": 1e-3}
_SVM_L2 = 1e-4
_MLP_L2 = 0.1   # weight decay; without it the nets memorize directions
_MLP_BATCH = 32


@dataclass(frozen=True)
class ProbeConfig:
    seed: int = 0
    epochs: int | None = None
    lr: float | None = None


@dataclass
class ProbeModel:
    kind: str
    n_classes: int
    mean: np.ndarray
    std: np.ndarray
    layers: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    class_weights: np.ndarray | None = None
    constant_class: int | None = None
    warning: str | None = None

    @property
    def input_dim(self) -> int:
        return len(self.mean)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _standardize_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return mean, std


def logreg_loss_and_grad(
    w: np.ndarray, b: np.ndarray, x: np.ndarray, y: np.ndarray, sample_w: np.ndarray
):
    """Weighted multinomial cross-entropy and its gradient; exposed so the
    gradient can be checked against finite differences."""
    n = len(y)
    p = _softmax(x @ w + b)
    w_total = sample_w.sum()
    loss = float(-(sample_w * np.log(p[np.arange(n), y] + 1e-300)).sum() / w_total)
    delta = p.copy()
    delta[np.arange(n), y] -= 1.0
    delta *= (sample_w / w_total)[:, None]
    return loss, x.T @ delta, delta.sum(axis=0)


def _train_logreg(x, y, sample_w, n_classes, epochs, lr):
    w = np.zeros((x.shape[1], n_classes))
    b = np.zeros(n_classes)
    for _ in range(epochs):
        _, gw, gb = logreg_loss_and_grad(w, b, x, y, sample_w)
        w -= lr * gw
        b -= lr * gb
    return [(w, b)]


def _train_linear_svm(x, y, sample_w, n_classes, epochs, lr):
    # one-vs-rest weighted hinge with L2 regularization, subgradient descent
    w = np.zeros((x.shape[1], n_classes))
    b = np.zeros(n_classes)
    targets = np.where(y[:, None] == np.arange(n_classes)[None, :], 1.0, -1.0)
    w_total = sample_w.sum()
    for _ in range(epochs):
        scores = x @ w + b
        active = (1.0 - targets * scores) > 0.0
        coef = -(targets * active) * sample_w[:, None] / w_total
        gw = x.T @ coef + 2.0 * _SVM_L2 * w
        gb = coef.sum(axis=0)
        w -= lr * gw
        b -= lr * gb
    return [(w, b)]


def _init_mlp(rng, dims):
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        scale = np.sqrt(2.0 / fan_in)
        layers.append((rng.normal(0.0, scale, size=(fan_in, fan_out)), np.zeros(fan_out)))
    return layers


def _mlp_forward(layers, x):
    acts = [x]
    h = x
    for w, b in layers[:-1]:
        h = np.maximum(h @ w + b, 0.0)
        acts.append(h)
    w, b = layers[-1]
    acts.append(h @ w + b)
    return acts


def _train_mlp(x, y, sample_w, n_classes, hidden, epochs, lr, seed):
    rng = rng_for(seed, "mlp-init")
    layers = _init_mlp(rng, (x.shape[1], *hidden, n_classes))
    n = len(y)
    w_norm = sample_w / sample_w.sum() * n   # mean weight 1 keeps lr scale stable
    adam_m = [(np.zeros_like(w), np.zeros_like(b)) for w, b in layers]
    adam_v = [(np.zeros_like(w), np.zeros_like(b)) for w, b in layers]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    shuffle_rng = rng_for(seed, "mlp-shuffle")
    for _ in range(epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, _MLP_BATCH):
            idx = order[start:start + _MLP_BATCH]
            xb, yb, wb = x[idx], y[idx], w_norm[idx]
            acts = _mlp_forward(layers, xb)
            p = _softmax(acts[-1])
            delta = p
            delta[np.arange(len(yb)), yb] -= 1.0
            delta *= (wb / len(yb))[:, None]
            step += 1
            grads = []
            for li in range(len(layers) - 1, -1, -1):
                w, b = layers[li]
                gw = acts[li].T @ delta + _MLP_L2 * w
                gb = delta.sum(axis=0)
                grads.append((gw, gb))
                if li > 0:
                    delta = (delta @ w.T) * (acts[li] > 0.0)
            grads.reverse()
            for li, ((gw, gb), (w, b)) in enumerate(zip(grads, layers)):
                mw, mb = adam_m[li]
                vw, vb = adam_v[li]
                mw[:] = beta1 * mw + (1 - beta1) * gw
                mb[:] = beta1 * mb + (1 - beta1) * gb
                vw[:] = beta2 * vw + (1 - beta2) * gw * gw
                vb[:] = beta2 * vb + (1 - beta2) * gb * gb
                corr1 = 1 - beta1**step
                corr2 = 1 - beta2**step
                w -= lr * (mw / corr1) / (np.sqrt(vw / corr2) + eps)
                b -= lr * (mb / corr1) / (np.sqrt(vb / corr2) + eps)
    return layers


def train_probe(
    kind: str,
    x: np.ndarray,
    y: np.ndarray,
    class_weights: np.ndarray,
    config: ProbeConfig = ProbeConfig(),
) -> ProbeModel:
    """Fit a probe of the given kind; inputs are standardized with
    statistics from this training split only. A single-class training set
    yields a constant predictor with a warning flag instead of an error."""
    if kind not in PROBE_KINDS:
        raise ValueError(f"unknown probe kind {kind!r}; expected one of {PROBE_KINDS}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(x) != len(y) or len(y) == 0:
        raise ValueError("x and y must be nonempty and the same length")
    n_classes = len(class_weights)
    mean, std = _standardize_stats(x)
    xs = (x - mean) / std

    present = np.unique(y)
    if len(present) == 1:
        return ProbeModel(
            kind=kind,
            n_classes=n_classes,
            mean=mean,
            std=std,
            constant_class=int(present[0]),
            warning="single-class training set; constant predictor",
        )

    epochs = config.epochs if config.epochs is not None else _DEFAULT_EPOCHS[kind]
    lr = config.lr if config.lr is not None else _DEFAULT_LR[kind]
    sample_w = np.asarray(class_weights, dtype=np.float64)[y]
    if kind == "logreg":
        layers = _train_logreg(xs, y, sample_w, n_classes, epochs, lr)
    elif kind == "linear_svm":
        layers = _train_linear_svm(xs, y, sample_w, n_classes, epochs, lr)
    else:
        # the rectifier-network probes train on the plain cross-entropy;
        # class weighting applies to the linear kinds only
        layers = _train_mlp(xs, y, np.ones(len(y)), n_classes, _HIDDEN[kind], epochs, lr, config.seed)
    return ProbeModel(
        kind=kind,
        n_classes=n_classes,
        mean=mean,
        std=std,
        layers=layers,
        class_weights=np.asarray(class_weights, dtype=np.float64),
    )


def decision_scores(model: ProbeModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != model.input_dim:
        raise ValueError(
            f"feature dimension {x.shape[1]} does not match model input {model.input_dim}"
        )
    if model.constant_class is not None:
        scores = np.zeros((len(x), model.n_classes))
        scores[:, model.constant_class] = 1.0
        return scores
    xs = (x - model.mean) / model.std
    if model.kind in ("logreg", "linear_svm"):
        w, b = model.layers[0]
        return xs @ w + b
    return _mlp_forward(model.layers, xs)[-1]


def predict(model: ProbeModel, x: np.ndarray) -> np.ndarray:
    """Argmax class per row; ties break toward the lower class index."""
    return np.argmax(decision_scores(model, x), axis=1)
