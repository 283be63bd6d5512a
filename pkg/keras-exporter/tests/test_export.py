"""Exporter tests: structural conversion plus numerical round trips.

Round trips compare the source model's prediction against the nnjit
reference interpreter on the exported container, which is the contract the
exporter ships under (<= 1e-4 absolute).
"""

import json

import keras
import numpy as np
import pytest
from keras import layers

from nnjit import build_graph, interpret, load_weights, parse_manifest
from nnjit_keras_export import ExportError, export_model

F32 = np.float32


def roundtrip(model, n_inputs=10, tol=1e-4, seed=0):
    manifest_json, blob = export_model(model)
    manifest = parse_manifest(manifest_json)
    graph = build_graph(manifest, load_weights(manifest, blob))
    rng = np.random.default_rng(seed)
    shape = tuple(int(d) for d in model.inputs[0].shape[1:])
    xs = rng.standard_normal((n_inputs,) + shape).astype(F32)
    want = model.predict(xs, verbose=0)
    worst = 0.0
    for i in range(n_inputs):
        got = interpret(graph, [xs[i]])[0]
        worst = max(worst, float(np.abs(got - want[i]).max()))
    assert worst <= tol, worst
    return manifest, worst


def kinds_of(manifest_json):
    doc = json.loads(manifest_json)
    return [(l["name"], l["kind"]) for l in doc["layers"]]


# --- numerical round trips -----------------------------------------------------


def test_sequential_cnn_round_trip():
    model = keras.Sequential([
        keras.Input((8, 8, 2)),
        layers.Conv2D(4, 3, padding="same", activation="relu"),
        layers.BatchNormalization(),
        layers.MaxPooling2D(2),
        layers.Flatten(),
        layers.Dense(6, activation="softmax"),
    ])
    bn = model.layers[1]
    rng = np.random.default_rng(3)
    bn.set_weights([rng.uniform(0.5, 1.5, 4).astype(F32),
                    rng.standard_normal(4).astype(F32),
                    rng.standard_normal(4).astype(F32),
                    rng.uniform(0.2, 2.0, 4).astype(F32)])
    _, worst = roundtrip(model)
    assert worst <= 1e-4


def test_functional_branches_round_trip():
    inp = keras.Input((8, 8, 3))
    a = layers.Conv2D(3, 3, padding="same", activation="tanh")(inp)
    b = layers.DepthwiseConv2D(3, padding="same")(inp)
    add = layers.Add()([a, b])
    cat = layers.Concatenate()([add, inp])
    pool = layers.AveragePooling2D(2)(cat)
    up = layers.UpSampling2D(2)(pool)
    flat = layers.Flatten()(up)
    out = layers.Dense(5, activation="sigmoid")(flat)
    roundtrip(keras.Model(inp, out))


def test_dense_chain_with_activation_layers():
    model = keras.Sequential([
        keras.Input((7,)),
        layers.Dense(9, activation="tanh"),
        layers.Activation("sigmoid"),
        layers.Dense(4),
    ])
    roundtrip(model)


def test_strided_same_conv_matches_source_padding():
    # stride 2 with same padding exercises the asymmetric pad arithmetic
    model = keras.Sequential([
        keras.Input((9, 7, 2)),
        layers.Conv2D(5, 3, strides=2, padding="same", activation="relu"),
        layers.Conv2D(3, 2, strides=2, padding="valid", use_bias=False),
    ])
    roundtrip(model)


def test_relu_layer_round_trip():
    model = keras.Sequential([keras.Input((6, 6, 2)), layers.ReLU()])
    manifest, _ = roundtrip(model)
    assert [l.kind for l in manifest.layers] == ["Input", "Activation"]


def test_pool_defaults_round_trip():
    model = keras.Sequential([
        keras.Input((7, 7, 3)),
        layers.MaxPooling2D(3),                       # strides default to pool
        layers.AveragePooling2D(2, padding="same"),
    ])
    roundtrip(model)


# --- structure ------------------------------------------------------------------


def test_softmax_activation_splits_into_own_layer():
    model = keras.Sequential([
        keras.Input((6,), name="vec"),
        layers.Dense(4, activation="softmax", name="head"),
    ])
    manifest_json, _ = export_model(model)
    doc = json.loads(manifest_json)
    assert [l["kind"] for l in doc["layers"]] == ["Input", "Dense", "Softmax"]
    dense = doc["layers"][1]
    assert dense["config"]["activation"] == "linear"
    assert doc["outputs"] == ["head_softmax"]
    roundtrip(model)


def test_dropout_is_dropped():
    model = keras.Sequential([
        keras.Input((6,)),
        layers.Dense(5, activation="relu"),
        layers.Dropout(0.5),
        layers.Dense(3),
    ])
    manifest_json, _ = export_model(model)
    assert [l["kind"] for l in json.loads(manifest_json)["layers"]] \
        == ["Input", "Dense", "Dense"]
    roundtrip(model)


def test_weight_refs_are_contiguous_and_sized():
    model = keras.Sequential([
        keras.Input((5,)),
        layers.Dense(4, activation="relu"),
        layers.Dense(2, use_bias=False),
    ])
    manifest_json, blob = export_model(model)
    offset = 0
    for layer in json.loads(manifest_json)["layers"]:
        for ref in layer.get("weights", ()):
            assert ref["offset"] == offset
            want = 4 * int(np.prod(ref["shape"]))
            assert ref["length"] == want
            offset += want
    assert offset == len(blob)


# --- BatchNorm folding -----------------------------------------------------------


def test_bn_fold_hand_case():
    # gamma=2, var=4, eps=0 folds to scale exactly 1; offset = beta - mean
    model = keras.Sequential([
        keras.Input((4,)),
        layers.BatchNormalization(epsilon=0.0, name="bn"),
    ])
    c = 4
    model.layers[0].set_weights([np.full(c, 2.0, F32), np.full(c, 0.5, F32),
                                 np.full(c, 3.0, F32), np.full(c, 4.0, F32)])
    manifest_json, blob = export_model(model)
    doc = json.loads(manifest_json)
    (bn,) = [l for l in doc["layers"] if l["kind"] == "BatchNorm"]
    scale_ref, offset_ref = bn["weights"]
    scale = np.frombuffer(blob, "<f4", 4, scale_ref["offset"])
    offset = np.frombuffer(blob, "<f4", 4, offset_ref["offset"])
    assert scale.tolist() == [1.0] * 4
    assert offset.tolist() == [-2.5] * 4

    manifest = parse_manifest(manifest_json)
    graph = build_graph(manifest, load_weights(manifest, blob))
    x = np.array([0.0, 1.0, -2.0, 10.0], F32)
    got = interpret(graph, [x])[0]
    assert got.tolist() == [-2.5, -1.5, -4.5, 7.5]


def test_bn_without_scale_or_center():
    model = keras.Sequential([
        keras.Input((6, 6, 3)),
        layers.BatchNormalization(scale=False, center=False),
    ])
    rng = np.random.default_rng(5)
    model.layers[0].set_weights([rng.standard_normal(3).astype(F32),
                                 rng.uniform(0.5, 2.0, 3).astype(F32)])
    roundtrip(model)


def test_bn_default_epsilon_round_trip():
    model = keras.Sequential([
        keras.Input((4, 4, 2)),
        layers.Conv2D(3, 1),
        layers.BatchNormalization(),
    ])
    rng = np.random.default_rng(6)
    model.layers[1].set_weights([rng.uniform(0.5, 1.5, 3).astype(F32),
                                 rng.standard_normal(3).astype(F32),
                                 rng.standard_normal(3).astype(F32),
                                 rng.uniform(0.2, 2.0, 3).astype(F32)])
    roundtrip(model)


# --- rejections -------------------------------------------------------------------


def test_unsupported_layer_is_named():
    model = keras.Sequential([
        keras.Input((6, 6, 2)),
        layers.GlobalAveragePooling2D(name="gap"),
    ])
    with pytest.raises(ExportError, match="gap.*GlobalAveragePooling2D"):
        export_model(model)


def test_shared_layer_rejected():
    inp = keras.Input((4,))
    shared = layers.Dense(4, name="twice")
    a = shared(inp)
    b = shared(a)
    model = keras.Model(inp, layers.Add()([a, b]))
    with pytest.raises(ExportError, match="twice.*more than once"):
        export_model(model)


def test_depth_multiplier_rejected():
    model = keras.Sequential([
        keras.Input((6, 6, 2)),
        layers.DepthwiseConv2D(3, depth_multiplier=2, name="dw"),
    ])
    with pytest.raises(ExportError, match="dw.*depth_multiplier"):
        export_model(model)


def test_unbuilt_model_rejected():
    model = keras.Sequential([layers.Dense(3)])
    with pytest.raises(ExportError, match="built"):
        export_model(model)


def test_non_finite_weight_rejected():
    model = keras.Sequential([keras.Input((3,)), layers.Dense(2, name="d")])
    kernel, bias = model.layers[0].get_weights()
    kernel[0, 0] = np.inf
    model.layers[0].set_weights([kernel, bias])
    with pytest.raises(ExportError, match="d.kernel"):
        export_model(model)


def test_clipped_relu_rejected():
    model = keras.Sequential([keras.Input((4,)),
                              layers.ReLU(max_value=6.0, name="r6")])
    with pytest.raises(ExportError, match="r6.*clipped"):
        export_model(model)


def test_dilated_conv_rejected():
    model = keras.Sequential([
        keras.Input((8, 8, 2)),
        layers.Conv2D(3, 3, dilation_rate=2, name="dil"),
    ])
    with pytest.raises(ExportError, match="dil.*dilation"):
        export_model(model)
