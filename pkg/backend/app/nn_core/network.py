"""
Feed-forward network with a softmax cross-entropy head
"""

import copy
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import get_settings
from ..errors import ConfigError, ShapeMismatchError, StaleCacheError
from ..schemas import ArchitectureSpec, LayerKind, LayerSpec
from ..utils import derive_seed
from .layers import Layer, Shape, build_layer

settings = get_settings()
logger = logging.getLogger(__name__)

Params = Dict[str, np.ndarray]


@dataclass
class ForwardCache:
    """Everything backward needs, stamped with the network version it came from"""
    version: int
    layer_caches: List[Any]
    probs: np.ndarray
    labels: np.ndarray


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and the softmax probabilities"""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(total)
    loss = -float(np.mean(log_probs[np.arange(len(labels)), labels]))
    return loss, exp / total


class Network:
    """
    Ordered layers plus a softmax cross-entropy head over `num_classes` classes.

    Parameters are addressed by name: "<layer index>.weight" and
    "<layer index>.bias". Prunable layers are exactly those with weights.
    Any parameter change goes through `set_parameters`, which bumps the
    version so that stale forward caches are detected.
    """

    def __init__(self, layers: Sequence[Layer], input_shape: Sequence[int], num_classes: int):
        self.layers: List[Layer] = list(layers)
        self.input_shape: Shape = tuple(int(d) for d in input_shape)
        self.num_classes = int(num_classes)
        self._version = 0
        self._check_composition()

    # ------------------------------------------------------------------ build

    @classmethod
    def from_specs(cls, specs: Sequence[LayerSpec], input_shape: Sequence[int], num_classes: int,
                   seed: Optional[int] = None) -> "Network":
        if not settings.ENABLE_CONV and any(s.kind == LayerKind.CONV2D for s in specs):
            raise ConfigError("conv2d layers are disabled (ENABLE_CONV=false)")
        net = cls([build_layer(s) for s in specs], input_shape, num_classes)
        if seed is not None:
            net.initialize(seed)
        return net

    def initialize(self, seed: int):
        for index, layer in enumerate(self.layers):
            layer.initialize(derive_seed(seed, "layer", index))
        self._version += 1

    def _check_composition(self):
        shape = self.input_shape
        for index, layer in enumerate(self.layers):
            try:
                shape = layer.output_shape(shape)
            except ShapeMismatchError as e:
                raise ShapeMismatchError(f"layer {index}: {e}") from None
        if shape != (self.num_classes,):
            raise ShapeMismatchError(
                f"layer {len(self.layers) - 1}: network output {shape} does not match {self.num_classes} classes"
            )

    def specs(self) -> List[LayerSpec]:
        return [layer.spec() for layer in self.layers]

    def copy(self) -> "Network":
        return copy.deepcopy(self)

    # ------------------------------------------------------------- parameters

    @property
    def version(self) -> int:
        return self._version

    def prunable_indices(self) -> List[int]:
        return [i for i, layer in enumerate(self.layers) if layer.prunable]

    def weight_names(self) -> List[str]:
        return [f"{i}.weight" for i in self.prunable_indices()]

    def parameters(self) -> Params:
        params: Params = {}
        for i in self.prunable_indices():
            params[f"{i}.weight"] = self.layers[i].weight
            params[f"{i}.bias"] = self.layers[i].bias
        return params

    def weights(self) -> Params:
        return {f"{i}.weight": self.layers[i].weight for i in self.prunable_indices()}

    def set_parameters(self, params: Params):
        """Replace parameters by name; shapes must not change"""
        for name, value in params.items():
            index, attr = self._resolve(name)
            current = getattr(self.layers[index], attr)
            value = np.asarray(value, dtype=np.float64)
            if value.shape != current.shape:
                raise ShapeMismatchError(
                    f"layer {index} ({self.layers[index].describe()}): {attr} shape "
                    f"{value.shape} != {current.shape}"
                )
            setattr(self.layers[index], attr, value)
        self._version += 1

    def _resolve(self, name: str) -> Tuple[int, str]:
        try:
            index_text, attr = name.split(".")
            index = int(index_text)
        except ValueError:
            raise KeyError(f"bad parameter name {name!r}") from None
        if attr not in ("weight", "bias") or not 0 <= index < len(self.layers) or not self.layers[index].prunable:
            raise KeyError(f"unknown parameter {name!r}")
        return index, attr

    def weight_count(self) -> int:
        return int(sum(w.size for w in self.weights().values()))

    def nonzero_count(self) -> int:
        return int(sum(np.count_nonzero(w) for w in self.weights().values()))

    # ------------------------------------------------------------ evaluation

    def _check_batch(self, inputs: np.ndarray, labels: Optional[np.ndarray] = None):
        if inputs.ndim < 1 or tuple(inputs.shape[1:]) != self.input_shape:
            first = self.layers[0].describe() if self.layers else "head"
            raise ShapeMismatchError(
                f"layer 0 ({first}): batch sample shape {tuple(inputs.shape[1:])} != {self.input_shape}"
            )
        if labels is not None:
            if labels.shape != (inputs.shape[0],):
                raise ShapeMismatchError(f"labels shape {labels.shape} != ({inputs.shape[0]},)")
            if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
                raise ValueError(f"labels must lie in [0, {self.num_classes})")

    def logits(self, inputs: np.ndarray) -> np.ndarray:
        self._check_batch(inputs)
        x = np.asarray(inputs, dtype=np.float64)
        for layer in self.layers:
            x, _ = layer.forward(x)
        return x

    def forward(self, inputs: np.ndarray, labels: np.ndarray) -> Tuple[float, ForwardCache]:
        """Mean softmax cross-entropy of the batch plus the activations cache"""
        labels = np.asarray(labels, dtype=np.int64)
        self._check_batch(inputs, labels)
        x = np.asarray(inputs, dtype=np.float64)
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        loss, probs = softmax_cross_entropy(x, labels)
        return loss, ForwardCache(self._version, caches, probs, labels)

    def backward(self, cache: ForwardCache) -> Params:
        """d loss / d parameter for every parameter, keyed like `parameters()`"""
        if cache.version != self._version:
            raise StaleCacheError(
                f"forward cache is from network version {cache.version}, network is at {self._version}"
            )
        n = len(cache.labels)
        grad = cache.probs.copy()
        grad[np.arange(n), cache.labels] -= 1.0
        grad /= n

        grads: Params = {}
        for index in range(len(self.layers) - 1, -1, -1):
            grad, layer_grads = self.layers[index].backward(grad, cache.layer_caches[index])
            for attr, value in layer_grads.items():
                grads[f"{index}.{attr}"] = value
        return {name: grads[name] for name in self.parameters()}

    def loss_and_grad(self, inputs: np.ndarray, labels: np.ndarray) -> Tuple[float, Params]:
        loss, cache = self.forward(inputs, labels)
        return loss, self.backward(cache)

    def summary(self) -> str:
        lines = [f"input {self.input_shape}"]
        for index, layer in enumerate(self.layers):
            size = layer.weight.size if layer.prunable else 0
            lines.append(f"  [{index}] {layer.describe()}" + (f"  weights={size}" if size else ""))
        lines.append(f"  softmax-CE over {self.num_classes} classes, {self.weight_count()} weights")
        return "\n".join(lines)


# ============ Architecture presets ============

def preset_layers(preset: str, input_shape: Sequence[int], num_classes: int) -> Tuple[List[LayerSpec], Tuple[int, ...]]:
    """
    Layer lists for the named presets, shaped by the dataset's sample shape.
    Returns the layers and the input shape the network should declare.
    """
    features = int(np.prod(input_shape))
    if preset == "mlp-300-100":
        return [
            LayerSpec(kind=LayerKind.FLATTEN),
            LayerSpec(kind=LayerKind.DENSE, in_features=features, out_features=300),
            LayerSpec(kind=LayerKind.RELU),
            LayerSpec(kind=LayerKind.DENSE, in_features=300, out_features=100),
            LayerSpec(kind=LayerKind.RELU),
            LayerSpec(kind=LayerKind.DENSE, in_features=100, out_features=num_classes),
        ], tuple(input_shape)
    if preset == "lenet5-like":
        if len(input_shape) == 2:
            input_shape = (1,) + tuple(input_shape)
        if len(input_shape) != 3:
            raise ConfigError(f"lenet5-like needs image-shaped samples, got {tuple(input_shape)}")
        channels, h, w = input_shape
        h1, w1 = (h + 4 - 5) // 2 + 1, (w + 4 - 5) // 2 + 1
        h2, w2 = (h1 - 5) // 2 + 1, (w1 - 5) // 2 + 1
        if h2 <= 0 or w2 <= 0:
            raise ConfigError(f"lenet5-like needs at least 13x13 images, got {h}x{w}")
        return [
            LayerSpec(kind=LayerKind.CONV2D, in_channels=channels, out_channels=6, kernel_h=5, kernel_w=5,
                      stride=2, padding=2),
            LayerSpec(kind=LayerKind.RELU),
            LayerSpec(kind=LayerKind.CONV2D, in_channels=6, out_channels=16, kernel_h=5, kernel_w=5, stride=2),
            LayerSpec(kind=LayerKind.RELU),
            LayerSpec(kind=LayerKind.FLATTEN),
            LayerSpec(kind=LayerKind.DENSE, in_features=16 * h2 * w2, out_features=120),
            LayerSpec(kind=LayerKind.RELU),
            LayerSpec(kind=LayerKind.DENSE, in_features=120, out_features=84),
            LayerSpec(kind=LayerKind.RELU),
            LayerSpec(kind=LayerKind.DENSE, in_features=84, out_features=num_classes),
        ], tuple(input_shape)
    raise ConfigError(f"unknown architecture preset: {preset!r}")


def build_network(arch: ArchitectureSpec, sample_shape: Sequence[int], num_classes: int, seed: int) -> Network:
    """Initialise a fresh network for the given architecture and data shape"""
    if arch.layers:
        specs, input_shape = list(arch.layers), tuple(sample_shape)
    else:
        specs, input_shape = preset_layers(arch.preset, sample_shape, num_classes)
    net = Network.from_specs(specs, input_shape, num_classes, seed=seed)
    logger.info(f"Built network:\n{net.summary()}")
    return net
