"""Feed-forward neural network with sigmoid units throughout.

Training minimizes the regularized cross-entropy cost by full-batch gradient
descent with step-halving backtracking, so the accepted-epoch cost sequence
is non-increasing by construction. The decision rule is output > 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .datakit import Dataset, Scaler, feature_vector, scaler_fit, FEATURE_ARITY
from .errors import DataError, TrainingError

LOG_CLAMP = 1e-12
MAX_HALVINGS = 20


@dataclass(frozen=True)
class NetArchitecture:
    """Layer sizes from input (4 features) to the single output unit."""

    layer_sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 3:
            raise DataError("need at least one hidden layer")
        if sizes[0] != FEATURE_ARITY:
            raise DataError(f"input layer must have {FEATURE_ARITY} units")
        if sizes[-1] != 1:
            raise DataError("output layer must have 1 unit")
        if any(s < 1 for s in sizes):
            raise DataError("layer sizes must be >= 1")

    @classmethod
    def with_hidden(cls, hidden) -> "NetArchitecture":
        return cls((FEATURE_ARITY, *hidden, 1))


@dataclass(frozen=True)
class NnHyperparams:
    """lam is the weight-decay factor applied to non-bias weights."""

    lam: float = 0.01
    learning_rate: float = 3.0
    max_epochs: int = 6000
    tolerance: float = 1e-9
    init_seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise DataError("lam must be >= 0")
        if not self.learning_rate > 0:
            raise DataError("learning_rate must be > 0")
        if self.max_epochs < 1:
            raise DataError("max_epochs must be >= 1")
        if not self.tolerance > 0:
            raise DataError("tolerance must be > 0")


@dataclass
class NeuralNet:
    """Weight matrices (fan_out, fan_in + 1); column 0 is the bias."""

    weights: list
    arch: NetArchitecture
    scaler: Scaler | None = None
    training_costs: tuple = ()
    hyperparams: NnHyperparams | None = None

    threshold = 0.5

    def __post_init__(self):
        sizes = self.arch.layer_sizes
        if len(self.weights) != len(sizes) - 1:
            raise DataError("one weight matrix per layer transition required")
        for l, w in enumerate(self.weights):
            if w.shape != (sizes[l + 1], sizes[l] + 1):
                raise DataError(
                    f"layer {l} weights must be {(sizes[l + 1], sizes[l] + 1)}, got {w.shape}"
                )
            if not np.all(np.isfinite(w)):
                raise DataError("weights must be finite")

    def _scaled(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self.scaler.transform(X) if self.scaler is not None else X

    def scores(self, X: np.ndarray) -> np.ndarray:
        """Output activations h in (0, 1) for raw feature rows."""
        return _forward(self.weights, self._scaled(X))[-1][:, 0]

    def predicts(self, X: np.ndarray) -> np.ndarray:
        return (self.scores(X) > 0.5).astype(np.uint8)

    def score(self, sample) -> float:
        return float(self.scores(feature_vector(sample)[None, :])[0])

    def predict(self, sample) -> int:
        return int(self.predicts(feature_vector(sample)[None, :])[0])

    def describe(self) -> str:
        hidden = ",".join(str(s) for s in self.arch.layer_sizes[1:-1])
        return f"nn(hidden={hidden})"

    def to_dict(self) -> dict:
        hp = self.hyperparams or NnHyperparams()
        return {
            "schema_version": 1,
            "family": "nn",
            "layer_sizes": list(self.arch.layer_sizes),
            "weights": [w.tolist() for w in self.weights],
            "hyperparams": {
                "lam": hp.lam,
                "learning_rate": hp.learning_rate,
                "max_epochs": hp.max_epochs,
                "tolerance": hp.tolerance,
                "init_seed": hp.init_seed,
            },
            "scaler": self.scaler.to_dict() if self.scaler is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NeuralNet":
        return cls(
            weights=[np.asarray(w, np.float64) for w in d["weights"]],
            arch=NetArchitecture(tuple(d["layer_sizes"])),
            scaler=Scaler.from_dict(d["scaler"]) if d.get("scaler") else None,
            hyperparams=NnHyperparams(**d["hyperparams"]) if d.get("hyperparams") else None,
        )


def _forward(weights, X: np.ndarray):
    """Activations per layer; the input row block is activation 0."""
    acts = [X]
    a = X
    for w in weights:
        z = np.hstack([np.ones((a.shape[0], 1)), a]) @ w.T
        a = expit(z)
        acts.append(a)
    return acts


def forward(net: NeuralNet, x) -> tuple:
    """Run one already-scaled input through the net.

    Returns (activations, h): the per-layer activation vectors and the final
    output in (0, 1).
    """
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if X.shape[1] != net.arch.layer_sizes[0]:
        raise DataError(f"input arity must be {net.arch.layer_sizes[0]}")
    acts = _forward(net.weights, X)
    return acts, float(acts[-1][0, 0])


def _cost_arrays(weights, X: np.ndarray, y: np.ndarray, lam: float) -> float:
    m = X.shape[0]
    h = _forward(weights, X)[-1][:, 0]
    h = np.clip(h, LOG_CLAMP, 1.0 - LOG_CLAMP)
    ce = -np.mean(y * np.log(h) + (1.0 - y) * np.log(1.0 - h))
    reg = sum(float((w[:, 1:] ** 2).sum()) for w in weights)
    return float(ce + lam / (2.0 * m) * reg)


def _grad_arrays(weights, X: np.ndarray, y: np.ndarray, lam: float):
    m = X.shape[0]
    acts = _forward(weights, X)
    delta = (acts[-1] - y[:, None]) / m
    grads = [None] * len(weights)
    for l in range(len(weights) - 1, -1, -1):
        a_prev = np.hstack([np.ones((m, 1)), acts[l]])
        g = delta.T @ a_prev
        g[:, 1:] += (lam / m) * weights[l][:, 1:]
        grads[l] = g
        if l > 0:
            delta = (delta @ weights[l][:, 1:]) * acts[l] * (1.0 - acts[l])
    return grads


def cost(net: NeuralNet, d: Dataset, lam: float) -> float:
    """Mean cross-entropy plus (lam / 2m) * sum of squared non-bias weights."""
    X = net._scaled(d.features)
    return _cost_arrays(net.weights, X, d.labels.astype(np.float64), lam)


def backprop_gradients(net: NeuralNet, d: Dataset, lam: float):
    """Exact gradient of cost() with respect to each weight matrix."""
    X = net._scaled(d.features)
    return _grad_arrays(net.weights, X, d.labels.astype(np.float64), lam)


def init_weights(arch: NetArchitecture, seed: int) -> list:
    """Uniform init in [-eps, eps], eps = sqrt(6 / (fan_in + fan_out))."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    weights = []
    sizes = arch.layer_sizes
    for l in range(len(sizes) - 1):
        eps = np.sqrt(6.0 / (sizes[l] + sizes[l + 1]))
        weights.append(rng.uniform(-eps, eps, size=(sizes[l + 1], sizes[l] + 1)))
    return weights


def fit_nn(train: Dataset, arch: NetArchitecture, hp: NnHyperparams | None = None) -> NeuralNet:
    """Full-batch gradient descent with step halving on cost increase.

    Raises TrainingError if an epoch cannot find a non-increasing step after
    MAX_HALVINGS halvings.
    """
    hp = hp or NnHyperparams()
    scaler = scaler_fit(train)
    X = scaler.transform(train.features)
    y = train.labels.astype(np.float64)
    weights = init_weights(arch, hp.init_seed)

    current = _cost_arrays(weights, X, y, hp.lam)
    costs = [current]
    for epoch in range(hp.max_epochs):
        grads = _grad_arrays(weights, X, y, hp.lam)
        step = hp.learning_rate
        accepted = None
        for _ in range(MAX_HALVINGS + 1):
            trial = [w - step * g for w, g in zip(weights, grads)]
            c = _cost_arrays(trial, X, y, hp.lam)
            if c <= current:
                accepted = (trial, c)
                break
            step *= 0.5
        if accepted is None:
            raise TrainingError(
                f"gradient descent diverged at epoch {epoch + 1}: "
                f"{MAX_HALVINGS} step halvings exhausted"
            )
        weights, c = accepted
        costs.append(c)
        if current - c < hp.tolerance:
            break
        current = c

    return NeuralNet(weights=weights, arch=arch, scaler=scaler,
                     training_costs=tuple(costs), hyperparams=hp)


def nn_predict(net: NeuralNet, x) -> int:
    """Class 1 only when the output strictly exceeds 0.5."""
    return net.predict(x)
