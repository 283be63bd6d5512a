"""Keras model to nnjit container conversion.

Walks the tensor graph of a built Keras 3 model and emits the JSON manifest
plus the little-endian float32 weight blob the nnjit runtime consumes. The
exporter never imports a backend: it inspects layer objects structurally, so
it works with whatever produced the model. BatchNormalization statistics are
folded to the inference form (per-channel scale and offset) at export time.

Supported layers: InputLayer, Dense, Conv2D, DepthwiseConv2D, MaxPooling2D,
AveragePooling2D, BatchNormalization, Activation, ReLU, Softmax, Flatten,
UpSampling2D, Add, Concatenate. Dropout variants are dropped (identity at
inference). Anything else raises ExportError.
"""

import json

import numpy as np


class ExportError(ValueError):
    """The model uses something the container format cannot express."""


ACTIVATION_TAGS = ("linear", "relu", "tanh", "sigmoid")


def _pair(v):
    if isinstance(v, (tuple, list)):
        if len(v) != 2:
            raise ExportError(f"expected an int or a pair, got {v!r}")
        return [int(v[0]), int(v[1])]
    return [int(v), int(v)]


def _activation_tag(op, allow_softmax=True):
    fn = getattr(op, "activation", None)
    name = getattr(fn, "__name__", "linear") if fn is not None else "linear"
    if name in ACTIVATION_TAGS or (allow_softmax and name == "softmax"):
        return name
    raise ExportError(f"{op.name}: unsupported activation {name!r}")


def _var64(v, fallback):
    if v is None:
        return fallback
    return np.asarray(v).astype(np.float64)


def _walk(model):
    """Yield (operation, node) pairs, producers before consumers."""
    if not getattr(model, "inputs", None) or not getattr(model, "outputs", None):
        raise ExportError("model must be built with a defined input shape")
    seen = {}
    order = []

    def visit(tensor):
        hist = tensor._keras_history
        op, node_index = hist.operation, hist.node_index
        if hist.tensor_index != 0:
            raise ExportError(f"{op.name}: multi-output layers are unsupported")
        if id(op) in seen:
            if seen[id(op)] != node_index:
                raise ExportError(f"{op.name}: layer is applied more than "
                                  "once; shared layers are unsupported")
            return
        seen[id(op)] = node_index
        node = op._inbound_nodes[node_index]
        for t in node.input_tensors:
            visit(t)
        order.append((op, node))

    for t in model.outputs:
        visit(t)
    return order


class _Export:
    def __init__(self):
        self.layers = []
        self.blob = bytearray()
        self.names = set()
        self.tensor_names = {}      # id(KerasTensor) -> container layer name

    def fresh(self, base):
        name, i = base, 1
        while name in self.names:
            name = f"{base}_{i}"
            i += 1
        self.names.add(name)
        return name

    def weight(self, name, arr):
        arr = np.ascontiguousarray(arr, dtype="<f4")
        if not np.isfinite(arr).all():
            raise ExportError(f"{name}: non-finite weight values")
        ref = {"name": name, "shape": list(arr.shape),
               "offset": len(self.blob), "length": arr.nbytes}
        self.blob += arr.tobytes()
        return ref

    def emit(self, name, kind, inputs=None, config=None, weights=None):
        obj = {"name": name, "kind": kind}
        if inputs:
            obj["inputs"] = list(inputs)
        if config:
            obj["config"] = config
        if weights:
            obj["weights"] = weights
        self.layers.append(obj)
        return name


def _check_conv_common(op):
    if _pair(getattr(op, "dilation_rate", 1)) != [1, 1]:
        raise ExportError(f"{op.name}: dilation is unsupported")
    if getattr(op, "data_format", "channels_last") != "channels_last":
        raise ExportError(f"{op.name}: channels_last data format required")
    if getattr(op, "groups", 1) != 1:
        raise ExportError(f"{op.name}: grouped convolution is unsupported")


def _matvec(ex, op, node, in_names):
    """Dense/Conv2D/DepthwiseConv2D, splitting a softmax activation into
    its own unit (the container keeps softmax a separate layer kind)."""
    kind = type(op).__name__
    act = _activation_tag(op)
    weights = [np.asarray(w) for w in op.get_weights()]
    name = ex.fresh(op.name)
    if kind == "Dense":
        config = {"units": int(op.units)}
        refs = [ex.weight(f"{name}.kernel", weights[0])]
    else:
        _check_conv_common(op)
        config = {"kernel_size": _pair(op.kernel_size),
                  "strides": _pair(op.strides),
                  "padding": str(op.padding)}
        kernel = weights[0]
        if kind == "Conv2D":
            config["filters"] = int(op.filters)
        else:
            kind = "DepthwiseConv2D"
            if int(getattr(op, "depth_multiplier", 1)) != 1 or kernel.shape[3] != 1:
                raise ExportError(f"{op.name}: depth_multiplier must be 1")
            kernel = kernel[:, :, :, 0]
        refs = [ex.weight(f"{name}.kernel", kernel)]
    config["activation"] = "linear" if act == "softmax" else act
    config["use_bias"] = bool(op.use_bias)
    if op.use_bias:
        refs.append(ex.weight(f"{name}.bias", weights[-1]))
    ex.emit(name, kind, in_names, config, refs)
    if act == "softmax":
        return ex.emit(ex.fresh(f"{op.name}_softmax"), "Softmax", [name])
    return name


def _batchnorm(ex, op, node, in_names):
    shape = node.input_tensors[0].shape
    axis = int(op.axis if isinstance(op.axis, int) else tuple(op.axis)[0])
    if axis not in (-1, len(shape) - 1):
        raise ExportError(f"{op.name}: normalization must be over the "
                          "trailing (channel) axis")
    c = int(shape[-1])
    # fold the training statistics to inference scale/offset in float64
    gamma = _var64(getattr(op, "gamma", None), np.ones(c))
    beta = _var64(getattr(op, "beta", None), np.zeros(c))
    mean = np.asarray(op.moving_mean).astype(np.float64)
    var = np.asarray(op.moving_variance).astype(np.float64)
    scale = gamma / np.sqrt(var + float(op.epsilon))
    offset = beta - mean * scale
    name = ex.fresh(op.name)
    return ex.emit(name, "BatchNorm", in_names, None,
                   [ex.weight(f"{name}.scale", scale),
                    ex.weight(f"{name}.offset", offset)])


def _pool(ex, op, node, in_names):
    kind = "MaxPool2D" if type(op).__name__ == "MaxPooling2D" else "AvgPool2D"
    if getattr(op, "data_format", "channels_last") != "channels_last":
        raise ExportError(f"{op.name}: channels_last data format required")
    return ex.emit(ex.fresh(op.name), kind, in_names,
                   {"pool_size": _pair(op.pool_size),
                    "strides": _pair(op.strides),
                    "padding": str(op.padding)})


def _activation_layer(ex, op, node, in_names):
    tag = _activation_tag(op)
    if tag == "softmax":
        return ex.emit(ex.fresh(op.name), "Softmax", in_names)
    return ex.emit(ex.fresh(op.name), "Activation", in_names,
                   {"activation": tag})


def _relu_layer(ex, op, node, in_names):
    if getattr(op, "max_value", None) is not None:
        raise ExportError(f"{op.name}: clipped relu is unsupported")
    if float(getattr(op, "negative_slope", 0) or 0) != 0.0:
        raise ExportError(f"{op.name}: leaky relu is unsupported")
    if float(getattr(op, "threshold", 0) or 0) != 0.0:
        raise ExportError(f"{op.name}: thresholded relu is unsupported")
    return ex.emit(ex.fresh(op.name), "Activation", in_names,
                   {"activation": "relu"})


def _softmax_layer(ex, op, node, in_names):
    shape = node.input_tensors[0].shape
    axis = int(getattr(op, "axis", -1))
    if axis not in (-1, len(shape) - 1):
        raise ExportError(f"{op.name}: softmax must be over the trailing axis")
    return ex.emit(ex.fresh(op.name), "Softmax", in_names)


def _flatten(ex, op, node, in_names):
    if getattr(op, "data_format", None) not in (None, "channels_last"):
        raise ExportError(f"{op.name}: channels_last data format required")
    return ex.emit(ex.fresh(op.name), "Flatten", in_names)


def _upsample(ex, op, node, in_names):
    size = _pair(op.size)
    if size[0] != size[1]:
        raise ExportError(f"{op.name}: non-square upsampling is unsupported")
    if getattr(op, "interpolation", "nearest") != "nearest":
        raise ExportError(f"{op.name}: only nearest interpolation is supported")
    return ex.emit(ex.fresh(op.name), "UpSample2D", in_names,
                   {"factor": size[0]})


def _concat(ex, op, node, in_names):
    rank = len(node.input_tensors[0].shape)
    if int(op.axis) not in (-1, rank - 1):
        raise ExportError(f"{op.name}: concatenation must be over the "
                          "trailing (channel) axis")
    return ex.emit(ex.fresh(op.name), "Concatenate", in_names)


def _input(ex, op, node, in_names):
    shape = node.output_tensors[0].shape[1:]
    if any(d is None for d in shape):
        raise ExportError(f"{op.name}: input shape must be fully defined")
    return ex.emit(ex.fresh(op.name), "Input", None,
                   {"shape": [int(d) for d in shape]})


_CONVERTERS = {
    "InputLayer": _input,
    "Dense": _matvec,
    "Conv2D": _matvec,
    "DepthwiseConv2D": _matvec,
    "BatchNormalization": _batchnorm,
    "MaxPooling2D": _pool,
    "AveragePooling2D": _pool,
    "Activation": _activation_layer,
    "ReLU": _relu_layer,
    "Softmax": _softmax_layer,
    "Flatten": _flatten,
    "UpSampling2D": _upsample,
    "Add": lambda ex, op, node, ins: ex.emit(ex.fresh(op.name), "Add", ins),
    "Concatenate": _concat,
}

_IDENTITY = ("Dropout", "SpatialDropout2D", "GaussianDropout")


def export_model(model):
    """Convert a built Keras model. Returns (manifest_json, blob_bytes)."""
    ex = _Export()
    for op, node in _walk(model):
        kind = type(op).__name__
        in_names = [ex.tensor_names[id(t)] for t in node.input_tensors]
        out_t = node.output_tensors[0]
        if kind in _IDENTITY:
            ex.tensor_names[id(out_t)] = in_names[0]
            continue
        convert = _CONVERTERS.get(kind)
        if convert is None:
            raise ExportError(f"{op.name}: unsupported layer type {kind}; "
                              f"supported: {', '.join(sorted(_CONVERTERS))}")
        ex.tensor_names[id(out_t)] = convert(ex, op, node, in_names)
    doc = {
        "format_version": 1,
        "layers": ex.layers,
        "inputs": [ex.tensor_names[id(t)] for t in model.inputs],
        "outputs": [ex.tensor_names[id(t)] for t in model.outputs],
    }
    return json.dumps(doc, indent=1), bytes(ex.blob)


def export_to_files(model, manifest_path, blob_path=None):
    """Write the manifest and blob; blob defaults to manifest with .bin."""
    import pathlib

    manifest_path = pathlib.Path(manifest_path)
    if blob_path is None:
        blob_path = manifest_path.with_suffix(".bin")
    manifest_json, blob = export_model(model)
    manifest_path.write_text(manifest_json)
    pathlib.Path(blob_path).write_bytes(blob)
    return str(manifest_path), str(blob_path)
