import json
import pathlib

import numpy as np
import pytest

from cyclicnet.harness.config import ConfigError, load_config, parse_config, parse_model
from cyclicnet.oracle import check_model_equivariance

MINIMAL = {
    "input_shape": [1, 8, 8],
    "loss": "ce",
    "layers": [
        {"kind": "slice"},
        {"kind": "conv", "filters": 8, "kernel": 3, "padding": "same"},
        {"kind": "relu"},
        {"kind": "flatten"},
        {"kind": "dense", "units": 10},
        {"kind": "pool", "function": "mean", "realign": False},
    ],
}


def with_layers(*layers, **extra):
    return {**MINIMAL, "layers": list(layers), **extra}


def violations(doc):
    with pytest.raises(ConfigError) as info:
        parse_model(doc)
    return info.value.violations


def test_minimal_valid():
    spec = parse_model(MINIMAL)
    assert spec.group == "c4"
    assert spec.layers[-1]["group"] == "c4"
    assert spec.build().output_shape == (10, 1, 1)


def test_accepts_json_text():
    assert parse_model(json.dumps(MINIMAL)).input_shape == (1, 8, 8)


def test_conv_after_realigning_pool():
    errs = violations(with_layers({"kind": "slice"}, {"kind": "conv", "filters": 2}, {"kind": "pool"},
                                  {"kind": "conv", "filters": 2}, {"kind": "flatten"}, {"kind": "dense", "units": 2}))
    assert any("conv after the cyclic pool" in e for e in errs)


def test_maxpool_after_pool():
    errs = violations(with_layers({"kind": "slice"}, {"kind": "conv", "filters": 2}, {"kind": "pool"},
                                  {"kind": "maxpool"}, {"kind": "flatten"}, {"kind": "dense", "units": 2}))
    assert any("maxpool" in e for e in errs)


def test_two_slices():
    errs = violations(with_layers({"kind": "slice"}, {"kind": "slice"}, *MINIMAL["layers"][1:]))
    assert any("only one slice" in e for e in errs)


@pytest.mark.parametrize("kind", ["pool", "stack", "roll"])
def test_pathway_layer_without_slice(kind):
    errs = violations(with_layers({"kind": "conv", "filters": 2}, {"kind": kind}, {"kind": "flatten"},
                                  {"kind": "dense", "units": 2}))
    assert any("without a preceding slice" in e for e in errs)


def test_roll_after_stack():
    errs = violations(with_layers({"kind": "slice"}, {"kind": "stack"}, {"kind": "roll"},
                                  {"kind": "flatten"}, {"kind": "dense", "units": 2}))
    assert any("already merged" in e for e in errs)


def test_model_must_merge_pathways():
    assert any("ends with a sliced batch" in e
               for e in violations(with_layers({"kind": "slice"}, {"kind": "flatten"}, {"kind": "dense", "units": 2})))


def test_group_mismatch():
    errs = violations(with_layers({"kind": "slice", "group": "d4"}, {"kind": "flatten"},
                                  {"kind": "pool", "group": "c4", "realign": False}))
    assert any("declares group" in e for e in errs)


def test_unknown_kind_and_keys():
    errs = violations(with_layers({"kind": "upsample"}, {"kind": "conv", "filters": 2, "stride": 2}))
    assert any("upsample" in e for e in errs)
    assert any("stride" in e for e in errs)
    assert any("colour" in e for e in violations({**MINIMAL, "colour": "red"}))


def test_bad_field_types():
    errs = violations(with_layers({"kind": "conv", "filters": 0}, {"kind": "pool", "function": "median"},
                                  {"kind": "conv", "filters": 2, "bias": "yes"}))
    assert len(errs) >= 3


def test_shape_failures():
    # non-flat output with cross-entropy, and a raw pool on spatial maps
    assert any("cross-entropy" in e for e in violations(with_layers({"kind": "conv", "filters": 2})))
    errs = violations(with_layers({"kind": "slice"}, {"kind": "conv", "filters": 2},
                                  {"kind": "pool", "realign": False}, {"kind": "flatten"}, {"kind": "dense", "units": 2}))
    assert any("realign=false" in e for e in errs)
    errs = violations(with_layers({"kind": "maxpool", "window": 16}, {"kind": "flatten"}, {"kind": "dense", "units": 2}))
    assert any("shape inference" in e for e in errs)


def test_stack_model_is_accepted_but_not_invariant():
    # stack keeps the pathway order in the channels, so rotating the input
    # permutes those channels and the dense layer sees different features
    spec = parse_model(with_layers({"kind": "slice"}, {"kind": "conv", "filters": 2}, {"kind": "stack"},
                                   {"kind": "flatten"}, {"kind": "dense", "units": 3}))
    net = spec.build(np.random.default_rng(0))
    assert not check_model_equivariance(net.forward, (1, 8, 8), trials=3, rng=0).passed


def test_full_config_round_trip(tmp_path):
    doc = {"model": {k: v for k, v in MINIMAL.items() if k != "input_shape"},
           "train": {"epochs": 1, "batch_size": 8},
           "data": {"image_size": 8, "motif_size": 3, "n_train": 16, "n_val": 8, "n_test": 8}}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(doc))
    run = load_config(path)
    assert run.model.input_shape == (1, 8, 8)
    assert parse_config(run.to_dict()).to_dict() == run.to_dict()


def test_full_config_errors():
    with pytest.raises(ConfigError) as info:
        parse_config({"model": MINIMAL, "train": {"epochs": -1, "lr": 1}, "data": {"motif_size": 40}, "extra": 1})
    text = "\n".join(info.value.violations)
    for fragment in ("extra", "lr", "epochs", "motif_size"):
        assert fragment in text


def test_repo_configs_are_valid():
    root = pathlib.Path(__file__).resolve().parents[1] / "configs"
    for path in sorted(root.glob("*.json")):
        load_config(path)
