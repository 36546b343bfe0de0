"""
Layer menu of the training engine: dense, conv2d, relu and flatten.

Every layer works on float64 batches whose first axis is the sample axis.
`forward` returns the output and whatever the matching `backward` needs;
`backward` returns the input gradient and the parameter gradients.
"""

import math
from typing import Any, Dict, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatchError
from ..schemas import LayerKind, LayerSpec
from ..utils import uniform

Shape = Tuple[int, ...]
ParamGrads = Dict[str, np.ndarray]


class Layer:
    """Base class; parameter-free layers keep `weight` and `bias` as None"""

    kind: LayerKind
    weight: Optional[np.ndarray] = None
    bias: Optional[np.ndarray] = None

    @property
    def prunable(self) -> bool:
        return self.weight is not None and self.weight.size > 0

    def output_shape(self, input_shape: Shape) -> Shape:
        return input_shape

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray, cache: Any) -> Tuple[np.ndarray, ParamGrads]:
        raise NotImplementedError

    def initialize(self, seed: int):
        """Glorot-uniform weights from a splitmix64 stream, zero biases"""

    def spec(self) -> LayerSpec:
        return LayerSpec(kind=self.kind)

    def describe(self) -> str:
        return self.kind.value


class Dense(Layer):
    """y = x W^T + b with W of shape [out, in]"""

    kind = LayerKind.DENSE

    def __init__(self, in_features: int, out_features: int):
        self.in_features = in_features
        self.out_features = out_features
        self.weight = np.zeros((out_features, in_features))
        self.bias = np.zeros(out_features)

    def output_shape(self, input_shape: Shape) -> Shape:
        if input_shape != (self.in_features,):
            raise ShapeMismatchError(
                f"{self.describe()} expects input ({self.in_features},), got {input_shape}"
            )
        return (self.out_features,)

    def initialize(self, seed: int):
        limit = math.sqrt(6.0 / (self.in_features + self.out_features))
        self.weight = uniform(seed, self.weight.shape, -limit, limit)
        self.bias = np.zeros(self.out_features)

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        return x @ self.weight.T + self.bias, x

    def backward(self, grad_out: np.ndarray, cache: Any) -> Tuple[np.ndarray, ParamGrads]:
        x = cache
        grads = {"weight": grad_out.T @ x, "bias": grad_out.sum(axis=0)}
        return grad_out @ self.weight, grads

    def spec(self) -> LayerSpec:
        return LayerSpec(kind=self.kind, in_features=self.in_features, out_features=self.out_features)

    def describe(self) -> str:
        return f"dense({self.in_features}->{self.out_features})"


class Conv2D(Layer):
    """Strided, zero-padded 2-D convolution (cross-correlation) on [n, c, h, w] batches"""

    kind = LayerKind.CONV2D

    def __init__(self, in_channels: int, out_channels: int, kernel_h: int, kernel_w: int,
                 stride: int = 1, padding: int = 0):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_h = kernel_h
        self.kernel_w = kernel_w
        self.stride = stride
        self.padding = padding
        self.weight = np.zeros((out_channels, in_channels, kernel_h, kernel_w))
        self.bias = np.zeros(out_channels)

    def output_shape(self, input_shape: Shape) -> Shape:
        if len(input_shape) != 3 or input_shape[0] != self.in_channels:
            raise ShapeMismatchError(
                f"{self.describe()} expects input ({self.in_channels}, h, w), got {input_shape}"
            )
        _, h, w = input_shape
        out_h = (h + 2 * self.padding - self.kernel_h) // self.stride + 1
        out_w = (w + 2 * self.padding - self.kernel_w) // self.stride + 1
        if out_h <= 0 or out_w <= 0:
            raise ShapeMismatchError(f"{self.describe()} kernel larger than padded input {input_shape}")
        return (self.out_channels, out_h, out_w)

    def initialize(self, seed: int):
        receptive = self.kernel_h * self.kernel_w
        fan_in = self.in_channels * receptive
        fan_out = self.out_channels * receptive
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        self.weight = uniform(seed, self.weight.shape, -limit, limit)
        self.bias = np.zeros(self.out_channels)

    def _windows(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        p = self.padding
        padded = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        windows = sliding_window_view(padded, (self.kernel_h, self.kernel_w), axis=(2, 3))
        windows = windows[:, :, ::self.stride, ::self.stride]
        return padded, windows

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        padded, windows = self._windows(x)
        out = np.einsum("ncijkl,ockl->noij", windows, self.weight, optimize=True)
        out += self.bias[None, :, None, None]
        return out, (x.shape, padded.shape, windows)

    def backward(self, grad_out: np.ndarray, cache: Any) -> Tuple[np.ndarray, ParamGrads]:
        x_shape, padded_shape, windows = cache
        grad_w = np.einsum("noij,ncijkl->ockl", grad_out, windows, optimize=True)
        grad_b = grad_out.sum(axis=(0, 2, 3))
        grad_windows = np.einsum("noij,ockl->ncijkl", grad_out, self.weight, optimize=True)

        grad_padded = np.zeros(padded_shape)
        out_h, out_w = grad_out.shape[2], grad_out.shape[3]
        s = self.stride
        for ki in range(self.kernel_h):
            for kj in range(self.kernel_w):
                grad_padded[:, :, ki:ki + s * out_h:s, kj:kj + s * out_w:s] += grad_windows[:, :, :, :, ki, kj]

        p = self.padding
        grad_x = grad_padded[:, :, p:p + x_shape[2], p:p + x_shape[3]] if p else grad_padded
        return grad_x, {"weight": grad_w, "bias": grad_b}

    def spec(self) -> LayerSpec:
        return LayerSpec(
            kind=self.kind, in_channels=self.in_channels, out_channels=self.out_channels,
            kernel_h=self.kernel_h, kernel_w=self.kernel_w, stride=self.stride, padding=self.padding,
        )

    def describe(self) -> str:
        return (f"conv2d({self.in_channels}->{self.out_channels}, "
                f"{self.kernel_h}x{self.kernel_w}, s{self.stride}, p{self.padding})")


class ReLU(Layer):
    kind = LayerKind.RELU

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        active = x > 0
        return np.where(active, x, 0.0), active

    def backward(self, grad_out: np.ndarray, cache: Any) -> Tuple[np.ndarray, ParamGrads]:
        return np.where(cache, grad_out, 0.0), {}


class Flatten(Layer):
    kind = LayerKind.FLATTEN

    def output_shape(self, input_shape: Shape) -> Shape:
        return (int(np.prod(input_shape)),)

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, grad_out: np.ndarray, cache: Any) -> Tuple[np.ndarray, ParamGrads]:
        return grad_out.reshape(cache), {}


def build_layer(spec: LayerSpec) -> Layer:
    """Instantiate a layer from its architecture description"""
    if spec.kind == LayerKind.DENSE:
        return Dense(spec.in_features, spec.out_features)
    if spec.kind == LayerKind.CONV2D:
        return Conv2D(spec.in_channels, spec.out_channels, spec.kernel_h, spec.kernel_w,
                      stride=spec.stride, padding=spec.padding)
    if spec.kind == LayerKind.RELU:
        return ReLU()
    return Flatten()
