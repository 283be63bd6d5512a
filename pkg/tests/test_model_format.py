"""Container format: parsing, validation, serialization, blob handling."""

import json

import numpy as np
import pytest

from nnjit import parse_manifest, manifest_to_json, load_weights
from nnjit.errors import (BlobTooShort, DuplicateName, ManifestSyntaxError,
                          MissingWeight, NonFiniteWeight, SchemaError,
                          UnknownLayerKind)
from fixtures import ModelBuilder, dense_model


def minimal_doc(**over):
    doc = {
        "format_version": 1,
        "layers": [
            {"name": "in", "kind": "Input", "config": {"shape": [4]}},
            {"name": "sm", "kind": "Softmax", "inputs": ["in"]},
        ],
        "inputs": ["in"],
        "outputs": ["sm"],
    }
    doc.update(over)
    return doc


def parse(doc):
    return parse_manifest(json.dumps(doc))


def test_minimal_manifest_parses():
    m = parse(minimal_doc())
    assert [l.name for l in m.layers] == ["in", "sm"]
    assert m.inputs == ("in",) and m.outputs == ("sm",)


def test_round_trip_through_json():
    rng = np.random.default_rng(0)
    manifest, _, _ = dense_model(rng, k_in=5, units=3)
    again = parse_manifest(manifest_to_json(manifest))
    assert again == manifest


@pytest.mark.parametrize("text,exc", [
    (b"\xff\xfe garbage", ManifestSyntaxError),
    ("{not json", ManifestSyntaxError),
    ("[1,2,3]", SchemaError),
    ("{}", SchemaError),
])
def test_syntax_and_shape_errors(text, exc):
    with pytest.raises(exc):
        parse_manifest(text)


def test_unknown_top_level_key_rejected():
    with pytest.raises(SchemaError, match="unknown key"):
        parse(minimal_doc(extra=1))


def test_bad_format_version():
    with pytest.raises(SchemaError, match="format_version"):
        parse(minimal_doc(format_version=2))


def test_unknown_layer_kind():
    doc = minimal_doc()
    doc["layers"][1]["kind"] = "LSTM"
    with pytest.raises(UnknownLayerKind, match="LSTM"):
        parse(doc)


def test_duplicate_layer_name():
    doc = minimal_doc()
    doc["layers"].append({"name": "sm", "kind": "Softmax", "inputs": ["in"]})
    with pytest.raises(DuplicateName):
        parse(doc)


def test_unknown_config_key_rejected():
    doc = minimal_doc()
    doc["layers"][0]["config"]["stride"] = 2
    with pytest.raises(SchemaError, match="unknown config"):
        parse(doc)


def test_input_arity_enforced():
    doc = minimal_doc()
    doc["layers"][1]["inputs"] = ["in", "in"]
    with pytest.raises(SchemaError, match="exactly one input"):
        parse(doc)
    doc = minimal_doc()
    doc["layers"][1] = {"name": "sm", "kind": "Add", "inputs": ["in"]}
    with pytest.raises(SchemaError, match="at least two"):
        parse(doc)


def test_activation_tag_validated():
    doc = minimal_doc()
    doc["layers"][1] = {"name": "a", "kind": "Activation", "inputs": ["in"],
                        "config": {"activation": "gelu"}}
    doc["outputs"] = ["a"]
    with pytest.raises(SchemaError, match="gelu"):
        parse(doc)


def test_weight_ref_length_must_match_shape():
    doc = minimal_doc()
    doc["layers"][1] = {
        "name": "fc", "kind": "Dense", "inputs": ["in"],
        "config": {"units": 2, "use_bias": False},
        "weights": [{"name": "w", "shape": [4, 2], "offset": 0,
                     "length": 16}],
    }
    doc["outputs"] = ["fc"]
    with pytest.raises(SchemaError, match="length"):
        parse(doc)


def test_weight_offset_alignment():
    doc = minimal_doc()
    doc["layers"][1] = {
        "name": "fc", "kind": "Dense", "inputs": ["in"],
        "config": {"units": 2, "use_bias": False},
        "weights": [{"name": "w", "shape": [4, 2], "offset": 2,
                     "length": 32}],
    }
    doc["outputs"] = ["fc"]
    with pytest.raises(SchemaError, match="align"):
        parse(doc)


def _dense_doc(use_bias, n_weights):
    weights = [{"name": f"w{i}", "shape": [4, 2] if i == 0 else [2],
                "offset": 32 * i, "length": 32 if i == 0 else 8}
               for i in range(n_weights)]
    return {
        "format_version": 1,
        "layers": [
            {"name": "in", "kind": "Input", "config": {"shape": [4]}},
            {"name": "fc", "kind": "Dense", "inputs": ["in"],
             "config": {"units": 2, "use_bias": use_bias},
             "weights": weights},
        ],
        "inputs": ["in"], "outputs": ["fc"],
    }


def test_weight_arity_against_use_bias():
    blob = bytes(64)
    load_weights(parse(_dense_doc(True, 2)), blob)
    load_weights(parse(_dense_doc(False, 1)), blob)
    with pytest.raises(MissingWeight):
        load_weights(parse(_dense_doc(True, 1)), blob)
    with pytest.raises(MissingWeight):
        load_weights(parse(_dense_doc(False, 2)), blob)


def test_blob_too_short():
    with pytest.raises(BlobTooShort):
        load_weights(parse(_dense_doc(False, 1)), bytes(16))


def test_non_finite_weight_rejected():
    blob = np.full(10, np.nan, dtype="<f4").tobytes()
    with pytest.raises(NonFiniteWeight):
        load_weights(parse(_dense_doc(False, 1)), blob)


def test_weights_are_float32_views_in_declared_shape():
    rng = np.random.default_rng(1)
    b = ModelBuilder()
    b.layer("in", "Input", config={"shape": [3, 3, 2]})
    k = rng.standard_normal((3, 3, 2, 4)).astype(np.float32)
    b.layer("c", "Conv2D", ["in"], {"filters": 4, "kernel_size": 3,
                                    "use_bias": False}, [k])
    manifest, store = b.build(["in"], ["c"])
    got = store["c.0"]
    assert got.dtype == np.float32 and got.shape == (3, 3, 2, 4)
    assert np.array_equal(got, k)


def test_non_input_listed_as_input_rejected():
    doc = minimal_doc(inputs=["sm"], outputs=["sm"])
    with pytest.raises(SchemaError):
        parse(doc)


def test_unlisted_input_layer_rejected():
    doc = minimal_doc()
    doc["layers"].insert(0, {"name": "in2", "kind": "Input",
                             "config": {"shape": [2]}})
    with pytest.raises(SchemaError):
        parse(doc)
