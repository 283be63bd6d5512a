"""Portable model container: JSON manifest + raw little-endian float32 blob.

A model is stored as two files:

``model.json``
    UTF-8 JSON object with the keys ``format_version`` (must be 1),
    ``layers`` (ordered list of layer objects), ``inputs`` and ``outputs``
    (lists of layer names).

``model.bin``
    Concatenated raw ``<f4`` tensors, referenced from the manifest by byte
    offset and length.  Row-major (C order) with the axis conventions listed
    per layer kind below.

Layer object keys: ``name``, ``kind``, ``inputs`` (list of producer layer
names), ``config`` (kind-specific, optional), ``weights`` (list of weight
refs, optional).  A weight ref has ``name`` (globally unique), ``shape``,
``offset`` and ``length`` (bytes).  Weight refs bind to roles by position:

=================  =======================================
kind               weights (in order)
=================  =======================================
Dense              kernel ``(in, units)``, bias ``(units)``
Conv2D             kernel ``(kh, kw, cin, cout)``, bias ``(cout)``
DepthwiseConv2D    kernel ``(kh, kw, c)``, bias ``(c)``
BatchNorm          scale ``(c)``, offset ``(c)``
=================  =======================================

The bias entry is present exactly when ``use_bias`` is true.  All other
kinds carry no weights.  Activation tags: ``linear``, ``relu``, ``sigmoid``,
``tanh``.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BlobTooShort,
    DuplicateName,
    ManifestSyntaxError,
    MissingWeight,
    NonFiniteWeight,
    SchemaError,
    UnknownLayerKind,
)

FORMAT_VERSION = 1

LAYER_KINDS = frozenset([
    "Input", "Dense", "Conv2D", "DepthwiseConv2D", "MaxPool2D", "AvgPool2D",
    "BatchNorm", "Activation", "Softmax", "Flatten", "UpSample2D", "Add",
    "Concatenate",
])

ACTIVATION_TAGS = frozenset(["linear", "relu", "sigmoid", "tanh"])

# Weight roles by kind, (role, required) in manifest order.
WEIGHT_ROLES = {
    "Dense": (("kernel", True), ("bias", False)),
    "Conv2D": (("kernel", True), ("bias", False)),
    "DepthwiseConv2D": (("kernel", True), ("bias", False)),
    "BatchNorm": (("scale", True), ("offset", True)),
}


@dataclass(frozen=True)
class WeightRef:
    name: str
    shape: tuple
    offset: int
    length: int


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    inputs: tuple
    config: dict = field(default_factory=dict)
    weight_refs: tuple = ()


@dataclass(frozen=True)
class Manifest:
    layers: tuple
    inputs: tuple
    outputs: tuple
    format_version: int = FORMAT_VERSION


class WeightStore:
    """Materialized weights keyed by weight ref name."""

    def __init__(self, tensors):
        self._tensors = dict(tensors)

    def __getitem__(self, name):
        return self._tensors[name]

    def __contains__(self, name):
        return name in self._tensors

    def __len__(self):
        return len(self._tensors)

    def names(self):
        return list(self._tensors)


def _require(cond, message):
    if not cond:
        raise SchemaError(message)


def _check_keys(obj, where, required, optional=()):
    _require(isinstance(obj, dict), f"{where}: expected a JSON object")
    for key in required:
        _require(key in obj, f"{where}: missing key '{key}'")
    allowed = set(required) | set(optional)
    for key in obj:
        _require(key in allowed, f"{where}: unknown key '{key}'")


def _as_name(value, where):
    _require(isinstance(value, str) and value, f"{where}: expected a non-empty string")
    return value


def _as_pos_int(value, where):
    _require(isinstance(value, int) and not isinstance(value, bool) and value > 0,
             f"{where}: expected a positive integer")
    return value


def _as_size_pair(value, where):
    """Accept n or [h, w] and normalize to (h, w)."""
    if isinstance(value, int) and not isinstance(value, bool):
        _require(value > 0, f"{where}: expected positive size")
        return (value, value)
    _require(isinstance(value, list) and len(value) == 2,
             f"{where}: expected an integer or a pair")
    return (_as_pos_int(value[0], where), _as_pos_int(value[1], where))


def _as_stride(value, where):
    h, w = _as_size_pair(value, where)
    _require(h == w, f"{where}: non-square strides are not supported")
    return h


def _as_activation(value, where):
    _require(isinstance(value, str), f"{where}: expected an activation tag")
    _require(value in ACTIVATION_TAGS,
             f"{where}: unknown activation '{value}' (supported: "
             + ", ".join(sorted(ACTIVATION_TAGS)) + ")")
    return value


def _as_padding(value, where):
    _require(value in ("same", "valid"), f"{where}: padding must be 'same' or 'valid'")
    return value


def _as_bool(value, where):
    _require(isinstance(value, bool), f"{where}: expected a boolean")
    return value


def _validate_config(kind, config, where):
    """Normalize the per-kind config dict; reject unknown keys."""
    cfg = dict(config)

    def take(key, conv, default=None, required=False):
        if key in cfg:
            return conv(cfg.pop(key), f"{where}.config.{key}")
        _require(not required, f"{where}: config key '{key}' is required for {kind}")
        return default

    out = {}
    if kind == "Input":
        shape = cfg.pop("shape", None)
        _require(isinstance(shape, list) and len(shape) in (1, 3),
                 f"{where}: Input shape must be a list of 1 or 3 dimensions")
        out["shape"] = tuple(_as_pos_int(d, f"{where}.config.shape") for d in shape)
    elif kind == "Dense":
        out["units"] = take("units", _as_pos_int, required=True)
        out["activation"] = take("activation", _as_activation, "linear")
        out["use_bias"] = take("use_bias", _as_bool, True)
    elif kind in ("Conv2D", "DepthwiseConv2D"):
        if kind == "Conv2D":
            out["filters"] = take("filters", _as_pos_int, required=True)
        out["kernel_size"] = take("kernel_size", _as_size_pair, required=True)
        out["strides"] = take("strides", _as_stride, 1)
        out["padding"] = take("padding", _as_padding, "valid")
        out["activation"] = take("activation", _as_activation, "linear")
        out["use_bias"] = take("use_bias", _as_bool, True)
    elif kind in ("MaxPool2D", "AvgPool2D"):
        out["pool_size"] = take("pool_size", _as_size_pair, required=True)
        stride = take("strides", _as_stride)
        out["strides"] = stride if stride is not None else max(out["pool_size"])
        if stride is None:
            _require(out["pool_size"][0] == out["pool_size"][1],
                     f"{where}: rectangular pool_size needs explicit strides")
            out["strides"] = out["pool_size"][0]
        out["padding"] = take("padding", _as_padding, "valid")
    elif kind == "Activation":
        out["activation"] = take("activation", _as_activation, required=True)
    elif kind == "UpSample2D":
        out["factor"] = take("factor", _as_pos_int, required=True)
    else:
        # Input-free config kinds: BatchNorm, Softmax, Flatten, Add, Concatenate.
        pass
    _require(not cfg, f"{where}: unknown config keys for {kind}: {sorted(cfg)}")
    return out


def _parse_weight_ref(obj, where):
    _check_keys(obj, where, required=("name", "shape", "offset", "length"))
    name = _as_name(obj["name"], f"{where}.name")
    shape_raw = obj["shape"]
    _require(isinstance(shape_raw, list) and shape_raw,
             f"{where}.shape: expected a non-empty list")
    shape = tuple(_as_pos_int(d, f"{where}.shape") for d in shape_raw)
    offset = obj["offset"]
    _require(isinstance(offset, int) and not isinstance(offset, bool) and offset >= 0,
             f"{where}.offset: expected a non-negative integer")
    _require(offset % 4 == 0, f"{where}.offset: must be 4-byte aligned")
    length = _as_pos_int(obj["length"], f"{where}.length")
    elements = 1
    for d in shape:
        elements *= d
    _require(length == 4 * elements,
             f"{where}: length {length} does not match shape {list(shape)} "
             f"({4 * elements} bytes)")
    return WeightRef(name=name, shape=shape, offset=offset, length=length)


def _parse_layer(obj, index):
    where = f"layers[{index}]"
    _check_keys(obj, where, required=("name", "kind"),
                optional=("inputs", "config", "weights"))
    name = _as_name(obj["name"], f"{where}.name")
    kind = _as_name(obj["kind"], f"{where}.kind")
    if kind not in LAYER_KINDS:
        raise UnknownLayerKind(f"{where}: unknown layer kind '{kind}'")

    inputs_raw = obj.get("inputs", [])
    _require(isinstance(inputs_raw, list), f"{where}.inputs: expected a list")
    inputs = tuple(_as_name(n, f"{where}.inputs") for n in inputs_raw)
    if kind == "Input":
        _require(not inputs, f"{where}: Input layers take no inputs")
    elif kind in ("Add", "Concatenate"):
        _require(len(inputs) >= 2, f"{where}: {kind} needs at least two inputs")
    else:
        _require(len(inputs) == 1, f"{where}: {kind} takes exactly one input")

    config_raw = obj.get("config", {})
    _require(isinstance(config_raw, dict), f"{where}.config: expected an object")
    config = _validate_config(kind, config_raw, where)

    weights_raw = obj.get("weights", [])
    _require(isinstance(weights_raw, list), f"{where}.weights: expected a list")
    refs = tuple(_parse_weight_ref(w, f"{where}.weights[{i}]")
                 for i, w in enumerate(weights_raw))
    if kind not in WEIGHT_ROLES:
        _require(not refs, f"{where}: {kind} layers carry no weights")
    return LayerSpec(name=name, kind=kind, inputs=inputs, config=config,
                     weight_refs=refs)


def parse_manifest(text):
    """Parse manifest JSON into a validated Manifest.

    Any byte/str input yields either a Manifest or a ModelFormatError
    subclass; nothing else escapes.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ManifestSyntaxError(f"manifest is not UTF-8: {exc}") from exc
    try:
        root = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestSyntaxError(f"manifest is not valid JSON: {exc}") from exc

    _check_keys(root, "manifest",
                required=("format_version", "layers", "inputs", "outputs"))
    version = root["format_version"]
    _require(version == FORMAT_VERSION,
             f"manifest: unsupported format_version {version!r}")

    layers_raw = root["layers"]
    _require(isinstance(layers_raw, list) and layers_raw,
             "manifest: 'layers' must be a non-empty list")
    layers = tuple(_parse_layer(obj, i) for i, obj in enumerate(layers_raw))

    seen = set()
    for layer in layers:
        if layer.name in seen:
            raise DuplicateName(f"duplicate layer name '{layer.name}'")
        seen.add(layer.name)
    ref_names = set()
    for layer in layers:
        for ref in layer.weight_refs:
            if ref.name in ref_names:
                raise DuplicateName(f"duplicate weight name '{ref.name}'")
            ref_names.add(ref.name)

    def name_list(key):
        raw = root[key]
        _require(isinstance(raw, list) and raw,
                 f"manifest: '{key}' must be a non-empty list")
        names = tuple(_as_name(n, f"manifest.{key}") for n in raw)
        for n in names:
            _require(n in seen, f"manifest: {key} entry '{n}' is not a layer")
        _require(len(set(names)) == len(names), f"manifest: repeated {key} entry")
        return names

    inputs = name_list("inputs")
    outputs = name_list("outputs")
    by_name = {layer.name: layer for layer in layers}
    for n in inputs:
        _require(by_name[n].kind == "Input",
                 f"manifest: input '{n}' is not an Input layer")
    declared_inputs = set(inputs)
    for layer in layers:
        if layer.kind == "Input":
            _require(layer.name in declared_inputs,
                     f"manifest: Input layer '{layer.name}' not listed in inputs")
    return Manifest(layers=layers, inputs=inputs, outputs=outputs,
                    format_version=version)


def manifest_to_json(manifest, indent=2):
    """Serialize a Manifest back to JSON (round-trips through parse_manifest)."""
    def ref_obj(ref):
        return {"name": ref.name, "shape": list(ref.shape),
                "offset": ref.offset, "length": ref.length}

    def layer_obj(layer):
        obj = {"name": layer.name, "kind": layer.kind}
        if layer.inputs:
            obj["inputs"] = list(layer.inputs)
        if layer.config:
            cfg = {}
            for key, value in layer.config.items():
                cfg[key] = list(value) if isinstance(value, tuple) else value
            obj["config"] = cfg
        if layer.weight_refs:
            obj["weights"] = [ref_obj(r) for r in layer.weight_refs]
        return obj

    root = {
        "format_version": manifest.format_version,
        "layers": [layer_obj(l) for l in manifest.layers],
        "inputs": list(manifest.inputs),
        "outputs": list(manifest.outputs),
    }
    return json.dumps(root, indent=indent)


def load_weights(manifest, blob):
    """Materialize every weight ref from the raw blob into a WeightStore.

    Tensors are float32, C-order, read-only views where possible.
    """
    if not isinstance(blob, (bytes, bytearray, memoryview)):
        raise TypeError("blob must be bytes-like")
    blob = bytes(blob)
    tensors = {}
    for layer in manifest.layers:
        roles = WEIGHT_ROLES.get(layer.kind, ())
        required = sum(1 for _, req in roles if req)
        if layer.kind in ("Dense", "Conv2D", "DepthwiseConv2D"):
            expected = 1 + (1 if layer.config.get("use_bias", True) else 0)
            if len(layer.weight_refs) != expected:
                raise MissingWeight(
                    f"layer '{layer.name}': expected {expected} weight tensors, "
                    f"found {len(layer.weight_refs)}")
        elif roles and len(layer.weight_refs) != len(roles):
            raise MissingWeight(
                f"layer '{layer.name}': expected {len(roles)} weight tensors, "
                f"found {len(layer.weight_refs)}")
        del required
        for ref in layer.weight_refs:
            end = ref.offset + ref.length
            if end > len(blob):
                raise BlobTooShort(
                    f"weight '{ref.name}' needs bytes [{ref.offset}, {end}) but "
                    f"blob holds {len(blob)}")
            flat = np.frombuffer(blob, dtype="<f4", count=ref.length // 4,
                                 offset=ref.offset)
            if not np.isfinite(flat).all():
                raise NonFiniteWeight(f"weight '{ref.name}' contains non-finite values")
            tensor = flat.reshape(ref.shape)
            tensor.flags.writeable = False
            tensors[ref.name] = tensor
    return WeightStore(tensors)


def layer_weights(layer, store):
    """Return the layer's weights as a role->array dict (positional binding)."""
    roles = WEIGHT_ROLES.get(layer.kind, ())
    out = {}
    for (role, _), ref in zip(roles, layer.weight_refs):
        out[role] = store[ref.name]
    return out


def load_model(manifest_path, blob_path=None):
    """Load (manifest, weights) from files.

    blob_path defaults to the manifest path with a .bin suffix.
    """
    import pathlib

    manifest_path = pathlib.Path(manifest_path)
    if blob_path is None:
        blob_path = manifest_path.with_suffix(".bin")
    manifest = parse_manifest(manifest_path.read_bytes())
    needs_blob = any(layer.weight_refs for layer in manifest.layers)
    blob = b""
    if needs_blob:
        blob = pathlib.Path(blob_path).read_bytes()
    elif pathlib.Path(blob_path).exists():
        blob = pathlib.Path(blob_path).read_bytes()
    weights = load_weights(manifest, blob)
    return manifest, weights


def save_model(manifest, arrays, manifest_path, blob_path=None):
    """Write manifest + blob files; arrays maps weight name -> ndarray.

    Offsets in the manifest are trusted; arrays are placed accordingly.
    """
    import pathlib

    manifest_path = pathlib.Path(manifest_path)
    if blob_path is None:
        blob_path = manifest_path.with_suffix(".bin")
    total = 0
    for layer in manifest.layers:
        for ref in layer.weight_refs:
            total = max(total, ref.offset + ref.length)
    blob = bytearray(total)
    for layer in manifest.layers:
        for ref in layer.weight_refs:
            arr = np.ascontiguousarray(arrays[ref.name], dtype="<f4")
            if arr.shape != ref.shape:
                raise ValueError(
                    f"array for '{ref.name}' has shape {arr.shape}, "
                    f"manifest says {ref.shape}")
            blob[ref.offset:ref.offset + ref.length] = arr.tobytes()
    manifest_path.write_text(manifest_to_json(manifest))
    pathlib.Path(blob_path).write_bytes(bytes(blob))
