"""Layer objects: shape inference, parameter layout, forward and backward.

Layers hold hyperparameters only. Learned buffers live in a separate dict per
layer so that a tape of caches plus those dicts is all backward needs.
Flattened features are kept 4-D as (N, F, 1, 1).
"""

from dataclasses import dataclass, replace

import numpy as np

from cyclicnet import cyclic
from cyclicnet import group as G
from cyclicnet.nn import functional as F


@dataclass(frozen=True)
class FeatureShape:
    """Per-example feature shape plus the pathway structure of the batch."""

    channels: int
    height: int
    width: int
    pathways: int = 1
    group: str = None

    @property
    def flat(self):
        return self.height == 1 and self.width == 1


class Layer:
    kind = None

    def infer(self, shape):
        return shape

    def param_shapes(self, shape):
        return {}

    def init_params(self, shape, rng, dtype):
        return {}

    def forward(self, params, x):
        raise NotImplementedError

    def backward(self, params, cache, grad):
        raise NotImplementedError

    def config(self):
        return {"kind": self.kind}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.config().items() if k != "kind")
        return f"{type(self).__name__}({args})"


def _uniform(rng, shape, fan_in, dtype):
    # He-uniform: keeps activation variance roughly constant through ReLUs
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv2D(Layer):
    kind = "conv"

    def __init__(self, filters, kernel=3, padding="same", bias=True):
        self.filters = int(filters)
        self.kernel = int(kernel)
        self.padding = padding
        self.bias = bool(bias)
        F.conv_padding(self.kernel, padding)
        if self.filters < 1 or self.kernel < 1:
            raise ValueError("filters and kernel must be positive")

    def infer(self, shape):
        if self.padding == "same":
            return replace(shape, channels=self.filters)
        h, w = shape.height - self.kernel + 1, shape.width - self.kernel + 1
        if h < 1 or w < 1:
            raise ValueError(f"valid {self.kernel}x{self.kernel} conv does not fit {shape.height}x{shape.width} maps")
        return replace(shape, channels=self.filters, height=h, width=w)

    def param_shapes(self, shape):
        out = {"weight": (self.filters, shape.channels, self.kernel, self.kernel)}
        if self.bias:
            out["bias"] = (self.filters,)
        return out

    def init_params(self, shape, rng, dtype):
        fan_in = shape.channels * self.kernel ** 2
        params = {"weight": _uniform(rng, self.param_shapes(shape)["weight"], fan_in, dtype)}
        if self.bias:
            params["bias"] = np.zeros(self.filters, dtype=dtype)
        return params

    def forward(self, params, x):
        return F.conv2d_forward(x, params["weight"], params.get("bias"), self.padding)

    def backward(self, params, cache, grad):
        gx, gw, gb = F.conv2d_backward(cache, grad)
        grads = {"weight": gw}
        if self.bias:
            grads["bias"] = gb
        return gx, grads

    def config(self):
        return {"kind": self.kind, "filters": self.filters, "kernel": self.kernel,
                "padding": self.padding, "bias": self.bias}


class Dense(Layer):
    kind = "dense"

    def __init__(self, units, bias=True):
        self.units = int(units)
        self.bias = bool(bias)
        if self.units < 1:
            raise ValueError("units must be positive")

    def infer(self, shape):
        if not shape.flat:
            raise ValueError(f"dense needs flattened features, got {shape.height}x{shape.width} maps (add a flatten)")
        return replace(shape, channels=self.units)

    def param_shapes(self, shape):
        out = {"weight": (self.units, shape.channels)}
        if self.bias:
            out["bias"] = (self.units,)
        return out

    def init_params(self, shape, rng, dtype):
        params = {"weight": _uniform(rng, (self.units, shape.channels), shape.channels, dtype)}
        if self.bias:
            params["bias"] = np.zeros(self.units, dtype=dtype)
        return params

    def forward(self, params, x):
        return F.dense_forward(x, params["weight"], params.get("bias"))

    def backward(self, params, cache, grad):
        gx, gw, gb = F.dense_backward(cache, grad)
        grads = {"weight": gw}
        if self.bias:
            grads["bias"] = gb
        return gx, grads

    def config(self):
        return {"kind": self.kind, "units": self.units, "bias": self.bias}


class ReLU(Layer):
    kind = "relu"

    def forward(self, params, x):
        return F.relu_forward(x)

    def backward(self, params, cache, grad):
        return F.relu_backward(cache, grad), {}


class MaxPool2D(Layer):
    kind = "maxpool"

    def __init__(self, window=2, stride=2):
        self.window = int(window)
        self.stride = int(stride)
        if self.window < 1 or self.stride < 1:
            raise ValueError("window and stride must be positive")

    def infer(self, shape):
        if self.window > shape.height or self.window > shape.width:
            raise ValueError(f"pool window {self.window} exceeds {shape.height}x{shape.width} maps")
        return replace(shape, height=(shape.height - self.window) // self.stride + 1,
                       width=(shape.width - self.window) // self.stride + 1)

    def forward(self, params, x):
        return F.maxpool2d_forward(x, self.window, self.stride)

    def backward(self, params, cache, grad):
        return F.maxpool2d_backward(cache, grad), {}

    def config(self):
        return {"kind": self.kind, "window": self.window, "stride": self.stride}


class Flatten(Layer):
    kind = "flatten"

    def infer(self, shape):
        return replace(shape, channels=shape.channels * shape.height * shape.width, height=1, width=1)

    def forward(self, params, x):
        return F.flatten_forward(x)

    def backward(self, params, cache, grad):
        return F.flatten_backward(cache, grad), {}


class _CyclicLayer(Layer):
    def __init__(self, group=G.C4):
        self.group = G.check_kind(group)

    def _check_sliced(self, shape):
        if shape.pathways == 1:
            raise ValueError(f"{self.kind} needs a sliced batch; insert a slice layer first")
        if shape.group != self.group:
            raise ValueError(f"{self.kind} is set up for {self.group} but the batch was sliced with {shape.group}")

    def config(self):
        return {"kind": self.kind, "group": self.group}


def _check_square(shape, what):
    if shape.height != shape.width:
        raise ValueError(f"{what} needs square feature maps, got {shape.height}x{shape.width}")


class CyclicSlice(_CyclicLayer):
    kind = "slice"

    def infer(self, shape):
        if shape.pathways != 1:
            raise ValueError("input is already sliced")
        _check_square(shape, "slice")
        return replace(shape, pathways=G.order(self.group), group=self.group)

    def forward(self, params, x):
        return cyclic.cyclic_slice(x, self.group), None

    def backward(self, params, cache, grad):
        return cyclic.cyclic_slice_backward(grad, self.group), {}


class CyclicPool(_CyclicLayer):
    kind = "pool"

    def __init__(self, group=G.C4, function="mean", pre_relu=False, realign=True):
        super().__init__(group)
        if function not in cyclic.POOL_FUNCTIONS:
            raise ValueError(f"unknown pool function {function!r}; expected one of {cyclic.POOL_FUNCTIONS}")
        self.function = function
        self.pre_relu = bool(pre_relu)
        self.realign = bool(realign)

    def infer(self, shape):
        self._check_sliced(shape)
        if self.realign:
            _check_square(shape, "realigning pool")
        return replace(shape, pathways=1, group=None)

    def forward(self, params, x):
        return cyclic.cyclic_pool(x, self.group, self.function, self.pre_relu, self.realign)

    def backward(self, params, cache, grad):
        return cyclic.cyclic_pool_backward(cache, grad), {}

    def config(self):
        return {"kind": self.kind, "group": self.group, "function": self.function,
                "pre_relu": self.pre_relu, "realign": self.realign}


class CyclicStack(_CyclicLayer):
    kind = "stack"

    def infer(self, shape):
        self._check_sliced(shape)
        _check_square(shape, "stack")
        return replace(shape, channels=shape.channels * shape.pathways, pathways=1, group=None)

    def forward(self, params, x):
        return cyclic.cyclic_stack(x, self.group), None

    def backward(self, params, cache, grad):
        return cyclic.cyclic_stack_backward(grad, self.group), {}


class CyclicRoll(_CyclicLayer):
    kind = "roll"

    def infer(self, shape):
        self._check_sliced(shape)
        _check_square(shape, "roll")
        return replace(shape, channels=shape.channels * shape.pathways)

    def forward(self, params, x):
        return cyclic.cyclic_roll(x, self.group), None

    def backward(self, params, cache, grad):
        return cyclic.cyclic_roll_backward(grad, self.group), {}


LAYER_TYPES = {cls.kind: cls for cls in (Conv2D, Dense, ReLU, MaxPool2D, Flatten,
                                         CyclicSlice, CyclicPool, CyclicStack, CyclicRoll)}


def layer_from_config(cfg):
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    if kind not in LAYER_TYPES:
        raise ValueError(f"unknown layer kind {kind!r}")
    return LAYER_TYPES[kind](**cfg)
