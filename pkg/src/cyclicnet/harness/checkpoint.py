"""Checkpoints: one ``T4D1`` file per parameter buffer plus ``manifest.json``.

Buffers with fewer than four axes are padded with trailing unit axes on disk;
the manifest keeps their logical shape.
"""

import json
import os

import numpy as np

from cyclicnet.tensor import load_tensor, save_tensor

MANIFEST = "manifest.json"
FORMAT = "cyclicnet-checkpoint-1"


def save_checkpoint(path, spec, network, extra=None):
    os.makedirs(path, exist_ok=True)
    entries = []
    for name, arr in network.named_params().items():
        index, kind, buf = name.split(".")
        fname = f"{name}.t4d"
        padded = arr.reshape(arr.shape + (1,) * (4 - arr.ndim))
        save_tensor(os.path.join(path, fname), padded)
        entries.append({"name": name, "layer": int(index), "kind": kind, "buffer": buf,
                        "shape": list(arr.shape), "file": fname})
    manifest = {"format": FORMAT, "model": spec.to_dict(), "params": entries, "extra": extra or {}}
    with open(os.path.join(path, MANIFEST), "w") as fp:
        json.dump(manifest, fp, indent=2, sort_keys=True)
        fp.write("\n")


def load_checkpoint(path):
    """Return ``(ModelSpec, Network, extra)`` restored from ``path``."""
    from cyclicnet.harness.config import parse_model

    with open(os.path.join(path, MANIFEST)) as fp:
        manifest = json.load(fp)
    if manifest.get("format") != FORMAT:
        raise ValueError(f"{path}: not a checkpoint (format {manifest.get('format')!r})")
    spec = parse_model(manifest["model"])
    net = spec.build()
    expected = {}
    for i, (layer, shape) in enumerate(zip(net.layers, net.shapes[:-1])):
        for buf, s in layer.param_shapes(shape).items():
            expected[f"{i}.{layer.kind}.{buf}"] = tuple(s)
    seen = set()
    for entry in manifest["params"]:
        name = entry["name"]
        if name not in expected:
            raise ValueError(f"checkpoint buffer {name!r} does not belong to the model")
        arr = load_tensor(os.path.join(path, entry["file"]))
        arr = arr.reshape(entry["shape"]).astype(net.dtype)
        if arr.shape != expected[name]:
            raise ValueError(f"buffer {name!r} has shape {arr.shape}, model expects {expected[name]}")
        net.params[entry["layer"]][entry["buffer"]] = np.ascontiguousarray(arr)
        seen.add(name)
    missing = set(expected) - seen
    if missing:
        raise ValueError(f"checkpoint is missing buffers: {sorted(missing)}")
    return spec, net, manifest.get("extra", {})
