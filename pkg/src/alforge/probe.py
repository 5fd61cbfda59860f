"""Linear softmax probe trained on the labeled pool.

The probe is multinomial logistic regression over frozen embeddings.  Its
objective on n examples with inverse regularization strength c is

    L(W, b) = -(1/n) * sum_i log softmax(W x_i + b)[y_i]
              + ||W||^2 / (2 * c * n)

i.e. mean cross-entropy plus an L2 penalty on the weights only (the bias is
unpenalized).  Training minimizes L with a limited-memory quasi-Newton
method (history 10, strong-Wolfe line search) from zero initialization, so
fits are deterministic: the objective is convex and all randomness in an
experiment comes from pool selection, never from the probe.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .dataset import decode_embeddings, encode_embeddings
from .errors import NumericError, ValidationError


@dataclass(frozen=True)
class FitConfig:
    """Training budget and regularization for the probe."""

    l2_inverse_strength: float = 1.0
    max_iterations: int = 1000
    gradient_tolerance: float = 1e-6

    def validate(self) -> None:
        if not self.l2_inverse_strength > 0:
            raise ValidationError("l2_inverse_strength must be positive")
        if not self.max_iterations > 0:
            raise ValidationError("max_iterations must be positive")
        if not self.gradient_tolerance > 0:
            raise ValidationError("gradient_tolerance must be positive")


@dataclass(frozen=True)
class ProbeParams:
    """Weights (num_classes x dim) and bias (num_classes,) of the probe."""

    weights: np.ndarray
    bias: np.ndarray
    n_iter: int = field(default=0, compare=False)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def _check_features(params: ProbeParams, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features)
    if features.ndim != 2 or features.shape[1] != params.dim:
        raise ValidationError(
            f"feature dim mismatch: probe expects {params.dim}, "
            f"got shape {features.shape}"
        )
    return features


def predict_proba(params: ProbeParams, features) -> np.ndarray:
    """Class probabilities, softmax with max-subtraction for stability."""
    features = _check_features(params, features)
    logits = features @ params.weights.T + params.bias
    logits -= logits.max(axis=1, keepdims=True)
    np.exp(logits, out=logits)
    logits /= logits.sum(axis=1, keepdims=True)
    return logits


def loss_and_grad(params: ProbeParams, features, labels, cfg: FitConfig):
    """Regularized mean cross-entropy and its exact analytic gradient.

    Returns (loss, grad_weights, grad_bias).
    """
    features = _check_features(params, features)
    labels = np.asarray(labels).astype(np.int64, copy=False)
    n = features.shape[0]
    if labels.shape != (n,):
        raise ValidationError(
            f"labels shape {labels.shape} does not match {n} feature rows"
        )

    logits = features @ params.weights.T + params.bias
    logits -= logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(logits).sum(axis=1))
    rows = np.arange(n)
    cross_entropy = (log_norm - logits[rows, labels]).mean()

    c = cfg.l2_inverse_strength
    reg = (params.weights**2).sum() / (2.0 * c * n)
    loss = cross_entropy + reg

    probs = np.exp(logits - log_norm[:, None])
    probs[rows, labels] -= 1.0
    probs /= n
    grad_w = probs.T @ features + params.weights / (c * n)
    grad_b = probs.sum(axis=0)
    return loss, grad_w, grad_b


def fit(
    features,
    labels,
    num_classes: int,
    cfg: FitConfig = FitConfig(),
    warm: ProbeParams | None = None,
) -> ProbeParams:
    """Train the probe from scratch on the given labeled examples.

    ``warm`` overrides the zero initialization; the objective is convex so
    the solution is the same, and the experiment loop never passes it.
    """
    cfg.validate()
    features = np.asarray(features)
    labels = np.asarray(labels)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ValidationError("fit requires at least one labeled example")
    if labels.shape != (features.shape[0],):
        raise ValidationError("labels must be one class index per feature row")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValidationError(f"label out of range: expected [0, {num_classes})")

    dim = features.shape[1]
    if warm is None:
        x0 = np.zeros(num_classes * dim + num_classes)
    else:
        x0 = np.concatenate([warm.weights.ravel(), warm.bias]).astype(np.float64)

    def objective(theta):
        p = _unpack(theta, num_classes, dim)
        loss, gw, gb = loss_and_grad(p, features, labels, cfg)
        if not np.isfinite(loss):
            raise NumericError("non-finite loss during probe optimization")
        return loss, np.concatenate([gw.ravel(), gb])

    result = minimize(
        objective,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={
            "maxiter": cfg.max_iterations,
            "maxcor": 10,
            "gtol": cfg.gradient_tolerance,
            "ftol": 1e-32,
            "maxfun": max(15000, 50 * cfg.max_iterations),
        },
    )
    if not np.isfinite(result.x).all():
        raise NumericError("probe optimization produced non-finite parameters")
    params = _unpack(result.x, num_classes, dim)
    return ProbeParams(params.weights, params.bias, n_iter=int(result.nit))


def _unpack(theta: np.ndarray, num_classes: int, dim: int) -> ProbeParams:
    weights = theta[: num_classes * dim].reshape(num_classes, dim)
    bias = theta[num_classes * dim :]
    return ProbeParams(weights, bias)


def dump_params(params: ProbeParams, directory) -> None:
    """Debug dump: weights and bias in the float container format plus a
    small JSON with the shape keys."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "weights.emb").write_bytes(
        encode_embeddings(params.weights.astype(np.float32))
    )
    (out / "bias.emb").write_bytes(
        encode_embeddings(params.bias.astype(np.float32)[None, :])
    )
    (out / "params.json").write_text(
        json.dumps(
            {"num_classes": params.num_classes, "embedding_dim": params.dim},
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )


def load_params(directory) -> ProbeParams:
    """Reload a dump_params directory."""
    src = Path(directory)
    shape = json.loads((src / "params.json").read_text(encoding="utf-8"))
    weights = decode_embeddings((src / "weights.emb").read_bytes(), "weights.emb")
    bias = decode_embeddings((src / "bias.emb").read_bytes(), "bias.emb")[0]
    if weights.shape != (shape["num_classes"], shape["embedding_dim"]):
        raise ValidationError("weights.emb shape does not match params.json")
    return ProbeParams(np.asarray(weights, dtype=np.float64),
                       np.asarray(bias, dtype=np.float64))


def evaluate_accuracy(params: ProbeParams, features, labels) -> float:
    """Fraction of argmax predictions matching labels, ties to lowest class."""
    features = _check_features(params, features)
    labels = np.asarray(labels)
    if features.shape[0] == 0:
        raise ValidationError("empty test set")
    if labels.shape != (features.shape[0],):
        raise ValidationError("labels must match feature rows")
    preds = np.argmax(predict_proba(params, features), axis=1)
    return float(np.mean(preds == labels))
