"""Parsing and validation of the JSON run configuration.

A config document has three sections::

    {"model": {"input_shape": [1, 16, 16], "layers": [...], "loss": "ce", "dtype": "float64"},
     "train": {"batch_size": 32, "epochs": 10, ...},
     "data":  {"image_size": 16, "n_classes": 4, ...}   # or {"path": "<gen-data dir>"}
    }

Unknown keys anywhere are errors. Validation collects every problem it finds
and raises them together in a :class:`ConfigError`.
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields

from cyclicnet import group as G
from cyclicnet.cyclic import POOL_FUNCTIONS
from cyclicnet.harness.data import SyntheticTaskSpec
from cyclicnet.nn.layers import layer_from_config
from cyclicnet.nn.network import Network, infer_shapes

LOSSES = ("ce", "rmse")
DTYPES = ("float32", "float64")

# kind -> (required keys, optional keys with defaults)
LAYER_SCHEMA = {
    "conv": ({"filters"}, {"kernel": 3, "padding": "same", "bias": True}),
    "dense": ({"units"}, {"bias": True}),
    "relu": (set(), {}),
    "maxpool": (set(), {"window": 2, "stride": 2}),
    "flatten": (set(), {}),
    "slice": (set(), {"group": G.C4}),
    "pool": (set(), {"group": None, "function": "mean", "pre_relu": False, "realign": True}),
    "stack": (set(), {"group": None}),
    "roll": (set(), {"group": None}),
}

PATHWAY_KINDS = ("pool", "stack", "roll")


class ConfigError(ValueError):
    """Raised with the full list of human-readable violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {v}" for v in self.violations))


@dataclass
class ModelSpec:
    layers: list
    input_shape: tuple
    loss: str = "ce"
    dtype: str = "float64"

    @property
    def group(self):
        for layer in self.layers:
            if layer["kind"] == "slice":
                return layer["group"]
        return None

    def build(self, rng=None):
        """Instantiate a :class:`Network`; parameters are initialised when ``rng`` is given."""
        net = Network([layer_from_config(c) for c in self.layers], self.input_shape, self.dtype)
        if rng is not None:
            net.init_params(rng)
        return net

    def to_dict(self):
        return {"input_shape": list(self.input_shape), "layers": [dict(c) for c in self.layers],
                "loss": self.loss, "dtype": self.dtype}


@dataclass
class TrainConfig:
    """Optimisation settings. ``batch_size`` counts examples before slicing;
    a C4-sliced model processes 4x as many rows per step (8x for D4)."""

    batch_size: int = 32
    epochs: int = 10
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    milestones: list = field(default_factory=list)
    augment: bool = False
    seed: int = 0


@dataclass
class RunConfig:
    model: ModelSpec
    train: TrainConfig
    data: object  # SyntheticTaskSpec or {"path": ...}

    def to_dict(self):
        data = self.data if isinstance(self.data, dict) else asdict(self.data)
        return {"model": self.model.to_dict(), "train": asdict(self.train), "data": data}


def _load(doc):
    if isinstance(doc, (str, bytes)):
        try:
            return json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"not valid JSON: {exc}"]) from None
    return doc


def _normalize_layer(i, raw, errors):
    if not isinstance(raw, dict) or "kind" not in raw:
        errors.append(f"layer {i}: expected an object with a 'kind' key, got {raw!r}")
        return None
    kind = raw["kind"]
    if kind not in LAYER_SCHEMA:
        errors.append(f"layer {i}: unknown layer kind {kind!r} (known: {', '.join(LAYER_SCHEMA)})")
        return None
    required, optional = LAYER_SCHEMA[kind]
    keys = set(raw) - {"kind"}
    for key in sorted(keys - required - set(optional)):
        errors.append(f"layer {i} ({kind}): unknown key {key!r}")
    for key in sorted(required - keys):
        errors.append(f"layer {i} ({kind}): missing required key {key!r}")
    cfg = {"kind": kind, **optional, **{k: v for k, v in raw.items() if k in required | set(optional)}}
    if cfg.get("group") is not None:
        try:
            cfg["group"] = G.check_kind(cfg["group"])
        except ValueError as exc:
            errors.append(f"layer {i} ({kind}): {exc}")
    if kind == "pool" and cfg["function"] not in POOL_FUNCTIONS:
        errors.append(f"layer {i} (pool): unknown pool function {cfg['function']!r}")
    if kind == "conv" and cfg["padding"] not in ("same", "valid"):
        errors.append(f"layer {i} (conv): padding must be 'same' or 'valid'")
    for key in ("filters", "units", "kernel", "window", "stride"):
        if key in cfg and (not isinstance(cfg[key], int) or isinstance(cfg[key], bool) or cfg[key] < 1):
            errors.append(f"layer {i} ({kind}): {key} must be a positive integer")
    for key in ("bias", "pre_relu", "realign"):
        if key in cfg and not isinstance(cfg[key], bool):
            errors.append(f"layer {i} ({kind}): {key} must be true or false")
    return cfg


def _check_ordering(layers, errors):
    """Structural rules for where the cyclic layers may appear."""
    group = None
    sliced = False  # a sliced batch is currently flowing
    pooled = None   # index of the cyclic pool, once seen
    for i, cfg in enumerate(layers):
        kind = cfg["kind"]
        if kind == "slice":
            if group is not None:
                errors.append(f"layer {i}: only one slice layer is allowed")
                continue
            group = cfg["group"]
            sliced = True
        elif kind in PATHWAY_KINDS:
            if not sliced:
                where = "after the pathways were already merged" if group else "without a preceding slice"
                errors.append(f"layer {i}: {kind} used {where}; pool/stack/roll only operate on a sliced batch")
                continue
            if cfg["group"] is None:
                cfg["group"] = group
            elif cfg["group"] != group:
                errors.append(f"layer {i}: {kind} declares group {cfg['group']!r} but the slice uses {group!r}")
            if kind in ("pool", "stack"):
                sliced = False
            if kind == "pool":
                pooled = i
        elif kind in ("conv", "maxpool") and pooled is not None:
            errors.append(
                f"layer {i}: {kind} after the cyclic pool at layer {pooled}; only non-spatial layers may "
                "follow pooling, otherwise the pooled maps rotate with the input and equivariance is lost")
    if sliced:
        errors.append("model ends with a sliced batch; add a pool or stack layer to merge the pathways")


def _check_shapes(layers, input_shape, loss, errors):
    try:
        shapes = infer_shapes([layer_from_config(c) for c in layers], input_shape)
    except (ValueError, TypeError) as exc:
        errors.append(f"shape inference failed: {exc}")
        return
    for i, (cfg, shape) in enumerate(zip(layers, shapes[:-1])):
        if cfg["kind"] == "pool" and not cfg["realign"] and not shape.flat:
            errors.append(f"layer {i}: pool with realign=false needs flattened features, "
                          f"got {shape.height}x{shape.width} maps")
    out = shapes[-1]
    if loss == "ce" and not out.flat:
        errors.append(f"cross-entropy needs a flat (N, K) output, model produces {out.height}x{out.width} maps")


def parse_model(doc, input_shape=None):
    """Validate a ``model`` section (dict or JSON text) and return a :class:`ModelSpec`."""
    doc = _load(doc)
    errors = []
    if not isinstance(doc, dict):
        raise ConfigError([f"model section must be an object, got {type(doc).__name__}"])
    for key in sorted(set(doc) - {"input_shape", "layers", "loss", "dtype"}):
        errors.append(f"model: unknown key {key!r}")
    shape = doc.get("input_shape", input_shape)
    if shape is None:
        errors.append("model: input_shape is required (or give a data section)")
    elif len(shape) != 3 or not all(isinstance(s, int) and s > 0 for s in shape):
        errors.append(f"model: input_shape must be three positive integers (C, H, W), got {shape!r}")
    loss = doc.get("loss", "ce")
    if loss not in LOSSES:
        errors.append(f"model: unknown loss {loss!r}; expected one of {LOSSES}")
    dtype = doc.get("dtype", "float64")
    if dtype not in DTYPES:
        errors.append(f"model: unknown dtype {dtype!r}; expected one of {DTYPES}")
    raw_layers = doc.get("layers")
    if not isinstance(raw_layers, list) or not raw_layers:
        errors.append("model: layers must be a non-empty list")
        raise ConfigError(errors)
    layers = [_normalize_layer(i, raw, errors) for i, raw in enumerate(raw_layers)]
    if errors:
        raise ConfigError(errors)
    _check_ordering(layers, errors)
    if not errors and shape is not None:
        _check_shapes(layers, tuple(shape), loss, errors)
    if errors:
        raise ConfigError(errors)
    return ModelSpec(layers, tuple(shape), loss, dtype)


def _parse_section(cls, doc, name, errors):
    if doc is None:
        return cls()
    if not isinstance(doc, dict):
        errors.append(f"{name} section must be an object")
        return cls()
    known = {f.name for f in fields(cls)}
    for key in sorted(set(doc) - known):
        errors.append(f"{name}: unknown key {key!r}")
    try:
        return cls(**{k: v for k, v in doc.items() if k in known})
    except (TypeError, ValueError) as exc:
        errors.append(f"{name}: {exc}")
        return cls()


def parse_train(doc, errors=None):
    own = errors is None
    errors = [] if own else errors
    cfg = _parse_section(TrainConfig, doc, "train", errors)
    if not isinstance(cfg.batch_size, int) or cfg.batch_size < 1:
        errors.append("train: batch_size must be a positive integer")
    if not isinstance(cfg.epochs, int) or cfg.epochs < 0:
        errors.append("train: epochs must be a non-negative integer")
    if list(cfg.milestones) != sorted(cfg.milestones):
        errors.append("train: milestones must be sorted")
    if own and errors:
        raise ConfigError(errors)
    return cfg


def parse_data(doc, errors):
    if isinstance(doc, dict) and "path" in doc:
        for key in sorted(set(doc) - {"path"}):
            errors.append(f"data: unknown key {key!r} (a data section with 'path' takes nothing else)")
        return {"path": doc["path"]}
    spec = _parse_section(SyntheticTaskSpec, doc, "data", errors)
    try:
        spec.validate()
    except ValueError as exc:
        errors.append(f"data: {exc}")
    return spec


def _stored_image_size(path):
    try:
        with open(os.path.join(path, "spec.json")) as fp:
            return int(json.load(fp)["image_size"])
    except (OSError, KeyError, ValueError, TypeError):
        return None


def parse_config(doc):
    """Parse a full run configuration (dict or JSON text)."""
    doc = _load(doc)
    if not isinstance(doc, dict):
        raise ConfigError(["config must be a JSON object"])
    errors = [f"unknown top-level key {k!r}" for k in sorted(set(doc) - {"model", "train", "data"})]
    if "model" not in doc:
        errors.append("missing 'model' section")
    train = parse_train(doc.get("train"), errors)
    data = parse_data(doc.get("data"), errors)
    model = None
    if "model" in doc:
        default_shape = None
        if isinstance(data, SyntheticTaskSpec):
            default_shape = (1, data.image_size, data.image_size)
        elif isinstance(data, dict):
            size = _stored_image_size(data["path"])
            if size is not None:
                default_shape = (1, size, size)
        try:
            model = parse_model(doc["model"], default_shape)
        except ConfigError as exc:
            errors.extend(exc.violations)
    if errors:
        raise ConfigError(errors)
    return RunConfig(model, train, data)


def load_config(path):
    with open(path) as fp:
        return parse_config(fp.read())
