from dataclasses import dataclass, field

import numpy as np

from cyclicnet.nn.layers import FeatureShape, layer_from_config
from cyclicnet.tensor import resolve_dtype


@dataclass
class TapeNode:
    index: int
    kind: str
    cache: object


@dataclass
class Tape:
    nodes: list = field(default_factory=list)
    consumed: bool = False

    def record(self, index, kind, cache):
        if self.consumed:
            raise RuntimeError("tape has already been replayed")
        self.nodes.append(TapeNode(index, kind, cache))


class Network:
    """A sequential stack of layers with reverse-mode differentiation.

    Parameters
    ----------
    layers : list of Layer
    input_shape : tuple
        Per-example ``(C, H, W)``.
    dtype : str or numpy dtype
    """

    def __init__(self, layers, input_shape, dtype="float64"):
        self.layers = list(layers)
        self.input_shape = tuple(int(s) for s in input_shape)
        self.dtype = resolve_dtype(dtype)
        self.shapes = infer_shapes(self.layers, self.input_shape)
        self.params = [{} for _ in self.layers]

    @classmethod
    def from_config(cls, layer_configs, input_shape, dtype="float64"):
        return cls([layer_from_config(c) for c in layer_configs], input_shape, dtype)

    @property
    def output_shape(self):
        s = self.shapes[-1]
        return s.channels, s.height, s.width

    def init_params(self, rng):
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        self.params = [layer.init_params(shape, rng, self.dtype)
                       for layer, shape in zip(self.layers, self.shapes[:-1])]
        return self

    def forward(self, x, tape=None):
        x = np.ascontiguousarray(x, dtype=self.dtype)
        if x.shape[1:] != self.input_shape:
            raise ValueError(f"expected inputs of shape (N, {self.input_shape}), got {x.shape}")
        for i, (layer, params) in enumerate(zip(self.layers, self.params)):
            x, cache = layer.forward(params, x)
            if tape is not None:
                tape.record(i, layer.kind, cache)
        return x

    def backward(self, tape, grad):
        """Replay ``tape`` in reverse; returns ``(grad_input, per-layer grad dicts)``."""
        if tape.consumed:
            raise RuntimeError("tape has already been replayed")
        if len(tape.nodes) != len(self.layers):
            raise ValueError("tape does not cover every layer")
        tape.consumed = True
        grads = [None] * len(self.layers)
        for node in reversed(tape.nodes):
            layer = self.layers[node.index]
            grad, grads[node.index] = layer.backward(self.params[node.index], node.cache, grad)
        return grad, grads

    def named_params(self):
        return {f"{i}.{layer.kind}.{name}": arr
                for i, (layer, params) in enumerate(zip(self.layers, self.params))
                for name, arr in params.items()}

    def named_grads(self, grads):
        return {f"{i}.{layer.kind}.{name}": arr
                for i, (layer, g) in enumerate(zip(self.layers, grads))
                for name, arr in g.items()}

    def count_params(self):
        return count_params(self.layers, self.input_shape)


def infer_shapes(layers, input_shape):
    """Shapes before each layer and after the last one."""
    c, h, w = input_shape
    shapes = [FeatureShape(c, h, w)]
    for i, layer in enumerate(layers):
        try:
            shapes.append(layer.infer(shapes[-1]))
        except ValueError as exc:
            raise ValueError(f"layer {i} ({layer.kind}): {exc}") from None
    return shapes


def count_params(layers, input_shape):
    """Per-layer ``weights``/``biases`` counts from shape inference alone."""
    shapes = infer_shapes(layers, input_shape)
    rows = []
    for i, (layer, shape) in enumerate(zip(layers, shapes[:-1])):
        ps = layer.param_shapes(shape)
        weights = int(np.prod(ps["weight"])) if "weight" in ps else 0
        biases = int(np.prod(ps["bias"])) if "bias" in ps else 0
        rows.append({"index": i, "kind": layer.kind, "in_channels": shape.channels,
                     "weights": weights, "biases": biases, "total": weights + biases})
    return rows
