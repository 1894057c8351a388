"""Two-hidden-layer tansig network trained by full-batch gradient descent.

Layer sizes follow the closed-form rule

    k1 = sqrt(m (p + 2)) + 2 sqrt(p / (p + 2))
    k2 = p sqrt(m / (p + 2))

for m inputs and p outputs. Every layer, the output layer included, applies
tansig; the sign threshold that turns outputs into a target code is kept
outside the network.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DimensionError, DivergenceError, IncompatibleModelError, InvalidInputError, ParseError
from .labeling import ClassBounds, PowerClass, TargetCode, decode
from .spectral import BandSpec, Scaler

FORMAT_NAME = "acoustic-power-mlp"
FORMAT_VERSION = 1
N_OUTPUTS = 2


def hidden_sizes(m: int, p: int = N_OUTPUTS) -> tuple[int, int]:
    if m < 1 or p < 1:
        raise InvalidInputError("input and output counts must be positive")
    k1 = math.sqrt(m * (p + 2)) + 2 * math.sqrt(p / (p + 2))
    k2 = p * math.sqrt(m / (p + 2))
    # round half up; Python's round() would send 2.5 to 2
    return max(1, math.floor(k1 + 0.5)), max(1, math.floor(k2 + 0.5))


def tansig(x):
    """2 / (1 + exp(-2x)) - 1, evaluated as tanh to avoid overflow."""
    return np.tanh(x)


def threshold(output) -> TargetCode:
    a, b = (float(v) for v in output)
    return (1 if a >= 0 else -1, 1 if b >= 0 else -1)


@dataclass(frozen=True)
class NetworkShape:
    m: int
    k1: int
    k2: int
    p: int = N_OUTPUTS

    @classmethod
    def for_inputs(cls, m: int, p: int = N_OUTPUTS) -> "NetworkShape":
        k1, k2 = hidden_sizes(m, p)
        return cls(m, k1, k2, p)

    @property
    def layer_sizes(self) -> tuple[int, int, int, int]:
        return (self.m, self.k1, self.k2, self.p)


class Network:
    """Weights are stored (fan_out, fan_in), so a layer computes W @ x + b."""

    def __init__(self, shape: NetworkShape, weights: list[np.ndarray], biases: list[np.ndarray]):
        sizes = shape.layer_sizes
        if len(weights) != 3 or len(biases) != 3:
            raise DimensionError("network needs exactly three weight layers")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (sizes[i + 1], sizes[i]) or b.shape != (sizes[i + 1],):
                raise DimensionError(
                    f"layer {i + 1}: expected weights {(sizes[i + 1], sizes[i])} and biases "
                    f"{(sizes[i + 1],)}, got {w.shape} and {b.shape}"
                )
        self.shape = shape
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]

    @classmethod
    def initialize(cls, shape: NetworkShape, seed: int, init_range: float = 0.5) -> "Network":
        rng = np.random.default_rng(seed)
        sizes = shape.layer_sizes
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(rng.uniform(-init_range, init_range, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-init_range, init_range, size=fan_out))
        return cls(shape, weights, biases)

    @classmethod
    def zeros(cls, shape: NetworkShape) -> "Network":
        sizes = shape.layer_sizes
        return cls(shape,
                   [np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(o) for o in sizes[1:]])

    def copy(self) -> "Network":
        return Network(self.shape, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def parameters(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return self.shape == other.shape and all(
            np.array_equal(a, b) for a, b in zip(self.parameters(), other.parameters())
        )

    def _activations(self, x: np.ndarray) -> list[np.ndarray]:
        acts = [x]
        for w, b in zip(self.weights, self.biases):
            acts.append(tansig(acts[-1] @ w.T + b))
        return acts

    def forward(self, features) -> np.ndarray:
        """Outputs in (-1, 1); accepts one feature vector or a (batch, m) matrix."""
        x = np.asarray(features, dtype=np.float64)
        if x.shape[-1] != self.shape.m:
            raise DimensionError(f"network expects {self.shape.m} inputs, got {x.shape[-1]}")
        return self._activations(x)[-1]

    def loss_and_gradients(self, x: np.ndarray, targets: np.ndarray) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
        """Mean squared error over every sample and output, and its gradients."""
        acts = self._activations(x)
        err = acts[-1] - targets
        loss = float(np.mean(err * err))
        grad_w: list[np.ndarray] = [None] * 3  # type: ignore[list-item]
        grad_b: list[np.ndarray] = [None] * 3  # type: ignore[list-item]
        delta = (2.0 / err.size) * err * (1.0 - acts[-1] ** 2)
        for layer in (2, 1, 0):
            grad_w[layer] = delta.T @ acts[layer]
            grad_b[layer] = delta.sum(axis=0)
            if layer:
                delta = (delta @ self.weights[layer]) * (1.0 - acts[layer] ** 2)
        return loss, grad_w, grad_b


def forward(network: Network, features) -> np.ndarray:
    return network.forward(features)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 1000
    goal_error: float = 1e-4
    learning_rate: float = 0.01
    seed: int = 0
    init_range: float = 0.5

    def __post_init__(self):
        if self.max_epochs < 1:
            raise InvalidInputError("max_epochs must be at least 1")
        if self.goal_error <= 0 or self.init_range <= 0:
            raise InvalidInputError("goal_error and init_range must be positive")
        if self.learning_rate < 0:
            raise InvalidInputError("learning_rate must be nonnegative")


def train(features, targets, config: TrainConfig = TrainConfig(),
          network: Network | None = None,
          shape: NetworkShape | None = None) -> tuple[Network, list[float]]:
    """Full-batch gradient descent on mean squared error.

    `features` must already be scaled. Stops after `max_epochs` or as soon as
    the epoch's MSE is at or below `goal_error`. The returned history holds
    the MSE measured at the start of each epoch.

    The network is sized by `hidden_sizes` unless `shape` is given, and is
    freshly initialized from the seed unless a starting `network` is passed.
    """
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    t = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if x.shape[0] == 0:
        raise InvalidInputError("training set is empty")
    if t.shape != (x.shape[0], N_OUTPUTS):
        raise DimensionError(f"targets must be ({x.shape[0]}, {N_OUTPUTS}), got {t.shape}")
    if network is None:
        shape = shape or NetworkShape.for_inputs(x.shape[1])
        network = Network.initialize(shape, config.seed, config.init_range)
    else:
        network = network.copy()
    if network.shape.m != x.shape[1]:
        raise DimensionError(f"network expects {network.shape.m} inputs, got {x.shape[1]}")

    history: list[float] = []
    lr = config.learning_rate
    for epoch in range(1, config.max_epochs + 1):
        loss, grad_w, grad_b = network.loss_and_gradients(x, t)
        if not math.isfinite(loss):
            raise DivergenceError(epoch)
        history.append(loss)
        if loss <= config.goal_error:
            break
        for w, g in zip(network.weights, grad_w):
            w -= lr * g
        for b, g in zip(network.biases, grad_b):
            b -= lr * g
    return network, history


# --------------------------------------------------------------------------
# complete model: network plus everything needed to go from raw features to a class

@dataclass(eq=False)
class MlpModel:
    network: Network
    scaler: Scaler
    bounds: ClassBounds
    band: BandSpec
    approach: str
    sample_rate_hz: int
    segment_s: float
    taper: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def shape(self) -> NetworkShape:
        return self.network.shape

    def __eq__(self, other):
        if not isinstance(other, MlpModel):
            return NotImplemented
        return (self.network == other.network and self.scaler == other.scaler
                and self.bounds == other.bounds and self.band == other.band
                and self.approach == other.approach and self.sample_rate_hz == other.sample_rate_hz
                and self.segment_s == other.segment_s and self.taper == other.taper
                and self.metadata == other.metadata)

    def outputs(self, raw_features) -> np.ndarray:
        x = np.asarray(raw_features, dtype=np.float64)
        if x.shape[-1] != self.shape.m:
            raise DimensionError(
                f"model ({self.approach} features) expects {self.shape.m} inputs, got {x.shape[-1]}"
            )
        return self.network.forward(self.scaler.apply(x))

    def predict(self, raw_features) -> PowerClass:
        return decode(threshold(self.outputs(raw_features)))

    def predict_many(self, raw_features) -> np.ndarray:
        out = np.atleast_2d(self.outputs(raw_features))
        return np.array([int(decode(threshold(o))) for o in out], dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "format_version": FORMAT_VERSION,
            "approach": self.approach,
            "band": asdict(self.band),
            "taper": self.taper,
            "segment": {"sample_rate_hz": self.sample_rate_hz, "duration_s": self.segment_s},
            "shape": asdict(self.shape),
            "layers": [
                {"weights": w.tolist(), "biases": b.tolist()}
                for w, b in zip(self.network.weights, self.network.biases)
            ],
            "scaler": {"min": self.scaler.minimum.tolist(), "max": self.scaler.maximum.tolist()},
            "bounds": self.bounds.to_dict(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        if d.get("format") != FORMAT_NAME:
            raise IncompatibleModelError(f"not a {FORMAT_NAME} document")
        if d.get("format_version") != FORMAT_VERSION:
            raise IncompatibleModelError(
                f"model format version {d.get('format_version')!r} is not supported "
                f"(expected {FORMAT_VERSION})"
            )
        try:
            shape = NetworkShape(**d["shape"])
            network = Network(
                shape,
                [np.array(layer["weights"], dtype=np.float64).reshape(o, i) for layer, i, o in
                 zip(d["layers"], shape.layer_sizes[:-1], shape.layer_sizes[1:])],
                [np.array(layer["biases"], dtype=np.float64) for layer in d["layers"]],
            )
            return cls(
                network=network,
                scaler=Scaler(d["scaler"]["min"], d["scaler"]["max"]),
                bounds=ClassBounds.from_dict(d["bounds"]),
                band=BandSpec(**d["band"]),
                approach=d["approach"],
                sample_rate_hz=int(d["segment"]["sample_rate_hz"]),
                segment_s=float(d["segment"]["duration_s"]),
                taper=bool(d.get("taper", False)),
                metadata=d.get("metadata", {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed model document: {exc}") from None


def save_model(model: MlpModel, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=1)
        fh.write("\n")


def load_model(path: str | os.PathLike) -> MlpModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: not a valid model file ({exc})") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: model file must hold an object")
    return MlpModel.from_dict(doc)


def predict(model: MlpModel, raw_features) -> PowerClass:
    return model.predict(raw_features)
