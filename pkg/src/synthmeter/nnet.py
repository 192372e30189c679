"""Minimal feed-forward network engine.

Backs the membership-inference discriminator, the season classifier and
the intraday forecasters. Deliberately small: ReLU hidden layers, a
sigmoid or linear head, mini-batch gradient descent with momentum 0.9,
and bit-reproducible training for a fixed seed and data order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonFiniteLoss

SIGMOID = "sigmoid"
LINEAR = "linear"

BCE = "bce"
MSE = "mse"
PINBALL = "pinball"

MOMENTUM = 0.9


@dataclass(frozen=True)
class TrainConfig:
    loss: str = BCE
    learning_rate: float = 0.05
    batch_size: int = 64
    epochs: int = 50
    seed: int = 0
    pinball_q: float = 0.95

    def __post_init__(self):
        if self.loss not in (BCE, MSE, PINBALL):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("learning_rate, batch_size and epochs must be positive")
        if not (0.0 < self.pinball_q < 1.0):
            raise ValueError("pinball_q must be in (0, 1)")


@dataclass
class MlpModel:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head: str = SIGMOID
    # per-dimension input standardisation, stored with the model
    norm_mean: np.ndarray | None = None
    norm_std: np.ndarray | None = None

    def n_parameters(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def copy(self) -> "MlpModel":
        return MlpModel(
            layer_sizes=list(self.layer_sizes),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            head=self.head,
            norm_mean=None if self.norm_mean is None else self.norm_mean.copy(),
            norm_std=None if self.norm_std is None else self.norm_std.copy(),
        )


def init_model(layer_sizes: list[int], head: str = SIGMOID, seed: int = 0) -> MlpModel:
    """He-style initialisation scaled to fan-in; biases start at zero."""
    if len(layer_sizes) < 2:
        raise ValueError("need at least an input and an output layer")
    if head not in (SIGMOID, LINEAR):
        raise ValueError(f"unknown head {head!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_sizes=list(layer_sizes), weights=weights, biases=biases, head=head)


def _normalise(model: MlpModel, x: np.ndarray) -> np.ndarray:
    if model.norm_mean is None:
        return x
    return (x - model.norm_mean) / model.norm_std


def _forward_pass(model: MlpModel, x: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Returns hidden activations (post-ReLU, starting with the input) and logits."""
    activations = [x]
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        if i < last:
            h = np.maximum(z, 0.0)
            activations.append(h)
        else:
            return activations, z
    raise AssertionError("unreachable")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(model: MlpModel, inputs) -> np.ndarray:
    """Deterministic forward pass; sigmoid heads yield probabilities in (0, 1)."""
    x = np.asarray(inputs, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != model.layer_sizes[0]:
        raise DimensionMismatch(f"expected input width {model.layer_sizes[0]}, got {x.shape[1]}")
    _, logits = _forward_pass(model, _normalise(model, x))
    out = _sigmoid(logits) if model.head == SIGMOID else logits
    out = out[:, 0] if out.shape[1] == 1 else out
    return out[0] if squeeze else out


def logits(model: MlpModel, inputs) -> np.ndarray:
    """Raw pre-head outputs; useful for ranking beyond sigmoid saturation."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.layer_sizes[0]:
        raise DimensionMismatch(f"expected input width {model.layer_sizes[0]}, got {x.shape[1]}")
    _, z = _forward_pass(model, _normalise(model, x))
    return z[:, 0] if z.shape[1] == 1 else z


def pinball_loss(y, y_hat, q: float) -> np.ndarray:
    """Quantile loss: u = y - y_hat; q*u if u >= 0 else (q - 1)*u."""
    if not (0.0 < q < 1.0):
        raise ValueError("q must be in (0, 1)")
    u = np.asarray(y, dtype=np.float64) - np.asarray(y_hat, dtype=np.float64)
    return np.where(u >= 0, q * u, (q - 1.0) * u)


def _check_head_loss(model: MlpModel, config: TrainConfig) -> None:
    if config.loss == BCE and model.head != SIGMOID:
        raise ValueError("binary cross-entropy requires a sigmoid head")
    if config.loss in (MSE, PINBALL) and model.head != LINEAR:
        raise ValueError(f"{config.loss} requires a linear head")


def _loss_and_grad(config: TrainConfig, logits_z: np.ndarray, targets: np.ndarray):
    """Mean loss over the batch and its gradient w.r.t. the logits."""
    y = targets
    n = len(y)
    if config.loss == BCE:
        # stable form on logits: max(z,0) - z*y + log(1 + exp(-|z|))
        z = logits_z
        loss = float(np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))
        grad = (_sigmoid(z) - y) / n
    elif config.loss == MSE:
        diff = logits_z - y
        loss = float(np.mean(diff * diff))
        grad = 2.0 * diff / n
    else:  # pinball
        u = y - logits_z
        q = config.pinball_q
        loss = float(np.mean(np.where(u >= 0, q * u, (q - 1.0) * u)))
        grad = np.where(u >= 0, -q, 1.0 - q) / n
    return loss, grad


def _backward(model: MlpModel, activations: list[np.ndarray], grad_logits: np.ndarray):
    grads_w = [np.empty(0)] * len(model.weights)
    grads_b = [np.empty(0)] * len(model.biases)
    delta = grad_logits
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = activations[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (activations[i] > 0)
    return grads_w, grads_b


@dataclass
class TrainResult:
    model: MlpModel
    loss_trace: list[float] = field(default_factory=list)


def train(
    model: MlpModel,
    inputs,
    targets,
    config: TrainConfig,
    standardize: bool = True,
    epoch_callback=None,
) -> TrainResult:
    """Mini-batch gradient descent with momentum 0.9 on a copy of the model.

    The input standardisation constants are computed from this training
    set and stored in the returned model. ``epoch_callback(model, epoch)``
    runs after each epoch, e.g. to record evaluation traces. The loss
    trace holds the mean batch loss per epoch. NaN or infinite loss
    aborts with NonFiniteLoss.
    """
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).reshape(len(x), -1)
    if x.ndim != 2 or x.shape[1] != model.layer_sizes[0]:
        raise DimensionMismatch(f"expected input width {model.layer_sizes[0]}")
    if y.shape[1] != model.layer_sizes[-1]:
        raise DimensionMismatch(f"expected target width {model.layer_sizes[-1]}")
    if config.batch_size > len(x):
        raise ValueError(f"batch_size {config.batch_size} exceeds {len(x)} samples")
    _check_head_loss(model, config)

    out = model.copy()
    if standardize:
        out.norm_mean = x.mean(axis=0)
        std = x.std(axis=0)
        out.norm_std = np.where(std > 0, std, 1.0)
    x_n = _normalise(out, x)

    rng = np.random.default_rng(config.seed)
    vel_w = [np.zeros_like(w) for w in out.weights]
    vel_b = [np.zeros_like(b) for b in out.biases]
    trace: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(x_n))
        epoch_losses: list[float] = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            # divergence surfaces as NonFiniteLoss, not as numpy warnings
            with np.errstate(over="ignore", invalid="ignore"):
                activations, z = _forward_pass(out, x_n[batch])
                loss, grad_z = _loss_and_grad(config, z, y[batch])
                if not np.isfinite(loss):
                    raise NonFiniteLoss(f"loss became {loss} at epoch {epoch}")
                epoch_losses.append(loss)
                grads_w, grads_b = _backward(out, activations, grad_z)
                for i in range(len(out.weights)):
                    vel_w[i] = MOMENTUM * vel_w[i] - config.learning_rate * grads_w[i]
                    vel_b[i] = MOMENTUM * vel_b[i] - config.learning_rate * grads_b[i]
                    out.weights[i] += vel_w[i]
                    out.biases[i] += vel_b[i]
        trace.append(float(np.mean(epoch_losses)))
        if epoch_callback is not None:
            epoch_callback(out, epoch)
    return TrainResult(model=out, loss_trace=trace)


def gradient_check(model: MlpModel, config: TrainConfig, inputs, targets) -> float:
    """Max relative error between analytic and central finite-difference gradients.

    Step 1e-5, double precision. Intended for small models only.
    """
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).reshape(len(x), -1)
    if model.n_parameters() > 10_000:
        raise ValueError("gradient_check is for small models (<= 1e4 parameters)")
    _check_head_loss(model, config)
    work = model.copy()
    x_n = _normalise(work, x)

    activations, z = _forward_pass(work, x_n)
    _, grad_z = _loss_and_grad(config, z, y)
    grads_w, grads_b = _backward(work, activations, grad_z)

    step = 1e-5

    def loss_at() -> float:
        _, z_now = _forward_pass(work, x_n)
        loss, _ = _loss_and_grad(config, z_now, y)
        return loss

    max_rel = 0.0
    for params, grads in ((work.weights, grads_w), (work.biases, grads_b)):
        for arr, grad in zip(params, grads):
            flat = arr.ravel()
            gflat = grad.ravel()
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + step
                hi = loss_at()
                flat[j] = orig - step
                lo = loss_at()
                flat[j] = orig
                numeric = (hi - lo) / (2.0 * step)
                denom = max(abs(numeric) + abs(gflat[j]), 1e-8)
                max_rel = max(max_rel, abs(numeric - gflat[j]) / denom)
    return max_rel


def save(model: MlpModel, path) -> None:
    payload = {
        "kind": "synthmeter-mlp",
        "layer_sizes": model.layer_sizes,
        "head": model.head,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "norm_mean": None if model.norm_mean is None else model.norm_mean.tolist(),
        "norm_std": None if model.norm_std is None else model.norm_std.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def load(path) -> MlpModel:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("kind") != "synthmeter-mlp":
        raise ValueError(f"{path} is not a saved network")
    return MlpModel(
        layer_sizes=list(payload["layer_sizes"]),
        weights=[np.array(w) for w in payload["weights"]],
        biases=[np.array(b) for b in payload["biases"]],
        head=payload["head"],
        norm_mean=None if payload["norm_mean"] is None else np.array(payload["norm_mean"]),
        norm_std=None if payload["norm_std"] is None else np.array(payload["norm_std"]),
    )
