"""Model builders used across the test suite.

Everything goes through the public container format (JSON manifest text plus
a weight blob) so tests exercise the same entry points as real callers.
"""

import json

import numpy as np

from nnjit import parse_manifest, load_weights

F32 = np.float32


class ModelBuilder:
    def __init__(self):
        self.layers = []
        self.blob = bytearray()
        self._names = set()

    def _weight(self, name, arr):
        arr = np.ascontiguousarray(arr, dtype="<f4")
        offset = len(self.blob)
        self.blob += arr.tobytes()
        return {"name": name, "shape": list(arr.shape), "offset": offset,
                "length": arr.nbytes}

    def layer(self, name, kind, inputs=(), config=None, weights=()):
        assert name not in self._names, name
        self._names.add(name)
        obj = {"name": name, "kind": kind}
        if inputs:
            obj["inputs"] = list(inputs)
        if config:
            obj["config"] = config
        if weights:
            obj["weights"] = [self._weight(f"{name}.{i}", w)
                              for i, w in enumerate(weights)]
        self.layers.append(obj)
        return name

    def build(self, inputs, outputs):
        doc = {"format_version": 1, "layers": self.layers,
               "inputs": list(inputs), "outputs": list(outputs)}
        manifest = parse_manifest(json.dumps(doc))
        store = load_weights(manifest, bytes(self.blob))
        return manifest, store


def _winit(rng, shape, scale=None):
    fan_in = int(np.prod(shape[:-1])) or 1
    scale = scale if scale is not None else (2.0 / fan_in) ** 0.5
    return rng.standard_normal(shape).astype(F32) * F32(scale)


# --- single-unit models for oracle sweeps -------------------------------------

def dense_model(rng, k_in=None, units=None, activation=None, use_bias=None):
    k_in = k_in or int(rng.integers(1, 97))
    units = units or int(rng.integers(1, 97))
    activation = activation or str(rng.choice(["linear", "relu", "tanh",
                                               "sigmoid"]))
    use_bias = bool(rng.integers(0, 2)) if use_bias is None else use_bias
    b = ModelBuilder()
    b.layer("in", "Input", config={"shape": [k_in]})
    w = [_winit(rng, (k_in, units))]
    if use_bias:
        w.append(rng.standard_normal(units).astype(F32) * F32(0.1))
    b.layer("fc", "Dense", ["in"],
            {"units": units, "activation": activation, "use_bias": use_bias}, w)
    return b.build(["in"], ["fc"]) + ((k_in,),)


def conv_model(rng, **over):
    h = over.get("h", int(rng.integers(3, 15)))
    w = over.get("w", int(rng.integers(3, 15)))
    cin = over.get("cin", int(rng.integers(1, 9)))
    cout = over.get("cout", int(rng.integers(1, 13)))
    kh = over.get("kh", int(rng.integers(1, 4)))
    kw = over.get("kw", int(rng.integers(1, 4)))
    stride = over.get("stride", int(rng.integers(1, 3)))
    padding = over.get("padding", str(rng.choice(["same", "valid"])))
    activation = over.get("activation",
                          str(rng.choice(["linear", "relu", "tanh", "sigmoid"])))
    use_bias = over.get("use_bias", bool(rng.integers(0, 2)))
    if padding == "valid":
        kh, kw = min(kh, h), min(kw, w)
    b = ModelBuilder()
    b.layer("in", "Input", config={"shape": [h, w, cin]})
    wt = [_winit(rng, (kh, kw, cin, cout))]
    if use_bias:
        wt.append(rng.standard_normal(cout).astype(F32) * F32(0.1))
    b.layer("conv", "Conv2D", ["in"],
            {"filters": cout, "kernel_size": [kh, kw], "strides": stride,
             "padding": padding, "activation": activation,
             "use_bias": use_bias}, wt)
    return b.build(["in"], ["conv"]) + ((h, w, cin),)


def depthwise_model(rng, **over):
    h = over.get("h", int(rng.integers(3, 13)))
    w = over.get("w", int(rng.integers(3, 13)))
    c = over.get("c", int(rng.integers(1, 13)))
    kh = over.get("kh", int(rng.integers(1, 4)))
    kw = over.get("kw", int(rng.integers(1, 4)))
    stride = over.get("stride", int(rng.integers(1, 3)))
    padding = over.get("padding", str(rng.choice(["same", "valid"])))
    activation = over.get("activation",
                          str(rng.choice(["linear", "relu", "tanh", "sigmoid"])))
    use_bias = over.get("use_bias", bool(rng.integers(0, 2)))
    if padding == "valid":
        kh, kw = min(kh, h), min(kw, w)
    b = ModelBuilder()
    b.layer("in", "Input", config={"shape": [h, w, c]})
    wt = [_winit(rng, (kh, kw, c), scale=0.5)]
    if use_bias:
        wt.append(rng.standard_normal(c).astype(F32) * F32(0.1))
    b.layer("dw", "DepthwiseConv2D", ["in"],
            {"kernel_size": [kh, kw], "strides": stride, "padding": padding,
             "activation": activation, "use_bias": use_bias}, wt)
    return b.build(["in"], ["dw"]) + ((h, w, c),)


def pool_model(rng, op=None, **over):
    op = op or str(rng.choice(["max", "avg"]))
    h = over.get("h", int(rng.integers(2, 13)))
    w = over.get("w", int(rng.integers(2, 13)))
    c = over.get("c", int(rng.integers(1, 13)))
    ph = over.get("ph", int(rng.integers(1, 4)))
    pw = over.get("pw", int(rng.integers(1, 4)))
    stride = over.get("stride", int(rng.integers(1, 4)))
    padding = over.get("padding", str(rng.choice(["same", "valid"])))
    if padding == "valid":
        ph, pw = min(ph, h), min(pw, w)
    kind = "MaxPool2D" if op == "max" else "AvgPool2D"
    b = ModelBuilder()
    b.layer("in", "Input", config={"shape": [h, w, c]})
    b.layer("pool", kind, ["in"],
            {"pool_size": [ph, pw], "strides": stride, "padding": padding})
    return b.build(["in"], ["pool"]) + ((h, w, c),)


def batchnorm_model(rng, shape=None):
    if shape is None:
        if rng.integers(0, 2):
            shape = (int(rng.integers(1, 65)),)
        else:
            shape = (int(rng.integers(2, 9)), int(rng.integers(2, 9)),
                     int(rng.integers(1, 13)))
    c = shape[-1]
    b = ModelBuilder()
    b.layer("in", "Input", config={"shape": list(shape)})
    scale = (rng.standard_normal(c) * 0.4 + 1.0).astype(F32)
    offset = (rng.standard_normal(c) * 0.2).astype(F32)
    b.layer("bn", "BatchNorm", ["in"], weights=[scale, offset])
    return b.build(["in"], ["bn"]) + (shape,)


def activation_model(rng, tag=None, shape=None):
    tag = tag or str(rng.choice(["relu", "tanh", "sigmoid"]))
    shape = shape or (int(rng.integers(1, 130)),)
    b = ModelBuilder()
    b.layer("in", "Input", config={"shape": list(shape)})
    b.layer("act", "Activation", ["in"], {"activation": tag})
    return b.build(["in"], ["act"]) + (shape,)


def softmax_model(rng, n=None):
    n = n or int(rng.integers(1, 34))
    b = ModelBuilder()
    b.layer("in", "Input", config={"shape": [n]})
    b.layer("sm", "Softmax", ["in"])
    return b.build(["in"], ["sm"]) + ((n,),)


def upsample_model(rng, **over):
    h = over.get("h", int(rng.integers(1, 9)))
    w = over.get("w", int(rng.integers(1, 9)))
    c = over.get("c", int(rng.integers(1, 13)))
    f = over.get("f", 2)
    b = ModelBuilder()
    b.layer("in", "Input", config={"shape": [h, w, c]})
    b.layer("up", "UpSample2D", ["in"], {"factor": f})
    return b.build(["in"], ["up"]) + ((h, w, c),)


def add_model(rng, n_in=None, shape=None):
    n_in = n_in or int(rng.integers(2, 5))
    if shape is None:
        shape = ((int(rng.integers(1, 200)),) if rng.integers(0, 2) else
                 (int(rng.integers(2, 7)), int(rng.integers(2, 7)),
                  int(rng.integers(1, 9))))
    b = ModelBuilder()
    names = []
    for i in range(n_in):
        names.append(b.layer(f"in{i}", "Input", config={"shape": list(shape)}))
    b.layer("add", "Add", names)
    return b.build(names, ["add"]) + ([shape] * n_in,)


def concat_model(rng, rank3=None):
    rank3 = bool(rng.integers(0, 2)) if rank3 is None else rank3
    n_in = int(rng.integers(2, 4))
    b = ModelBuilder()
    names, shapes = [], []
    if rank3:
        h, w = int(rng.integers(2, 7)), int(rng.integers(2, 7))
        for i in range(n_in):
            c = int(rng.integers(1, 9))
            shapes.append((h, w, c))
            names.append(b.layer(f"in{i}", "Input",
                                 config={"shape": [h, w, c]}))
    else:
        for i in range(n_in):
            n = int(rng.integers(1, 40))
            shapes.append((n,))
            names.append(b.layer(f"in{i}", "Input", config={"shape": [n]}))
    b.layer("cat", "Concatenate", names)
    return b.build(names, ["cat"]) + (shapes,)


# --- random layered networks (fusion and planner sweeps) -----------------------

def random_network(rng, max_layers=8):
    """A random rank-tracking chain with occasional branch/merge, BatchNorm,
    activations, pooling, and a possible softmax head."""
    b = ModelBuilder()
    h, w = int(rng.integers(6, 13)), int(rng.integers(6, 13))
    c = int(rng.integers(1, 5))
    cur = b.layer("in", "Input", config={"shape": [h, w, c]})
    shape = (h, w, c)
    n = 0
    idx = 0

    def conv(src, shape, cout, act, pad=None):
        nonlocal idx
        idx += 1
        kh = int(rng.integers(1, min(4, shape[0] + 1)))
        kw = int(rng.integers(1, min(4, shape[1] + 1)))
        pad = pad or str(rng.choice(["same", "valid"]))
        wt = [_winit(rng, (kh, kw, shape[2], cout))]
        if rng.integers(0, 2):
            wt.append(rng.standard_normal(cout).astype(F32) * F32(0.1))
        name = b.layer(f"conv{idx}", "Conv2D", [src],
                       {"filters": cout, "kernel_size": [kh, kw],
                        "padding": pad, "activation": act,
                        "use_bias": len(wt) == 2}, wt)
        hh = shape[0] if pad == "same" else shape[0] - kh + 1
        ww = shape[1] if pad == "same" else shape[1] - kw + 1
        return name, (hh, ww, cout)

    while n < max_layers and shape[0] >= 2 and shape[1] >= 2:
        n += 1
        roll = rng.integers(0, 10)
        idx += 1
        if roll < 4:
            cur, shape = conv(cur, shape, int(rng.integers(1, 9)),
                              str(rng.choice(["linear", "relu", "tanh"])))
        elif roll < 5:
            sc = (rng.standard_normal(shape[2]) * 0.3 + 1.0).astype(F32)
            of = (rng.standard_normal(shape[2]) * 0.2).astype(F32)
            cur = b.layer(f"bn{idx}", "BatchNorm", [cur], weights=[sc, of])
        elif roll < 6:
            cur = b.layer(f"act{idx}", "Activation", [cur],
                          {"activation": str(rng.choice(["relu", "tanh",
                                                         "sigmoid"]))})
        elif roll < 7:
            cur = b.layer(f"pool{idx}", "MaxPool2D", [cur],
                          {"pool_size": 2, "strides": 2})
            shape = (shape[0] // 2, shape[1] // 2, shape[2])
            if not shape[0] or not shape[1]:
                break
        elif roll < 8 and shape[0] >= 3 and shape[1] >= 3:
            # branch, then merge with Add (same padding keeps h,w equal)
            cout = int(rng.integers(1, 7))
            a_name, a_shape = conv(cur, shape, cout, "linear", pad="same")
            b_name, _ = conv(cur, shape, cout, "relu", pad="same")
            cur = b.layer(f"addm{idx}", "Add", [a_name, b_name])
            shape = a_shape
        elif roll < 9:
            a_name, a_shape = conv(cur, shape, int(rng.integers(1, 5)),
                                   "linear", pad="same")
            b_name, b_shape = conv(cur, shape, int(rng.integers(1, 5)),
                                   "linear", pad="same")
            cur = b.layer(f"cat{idx}", "Concatenate", [a_name, b_name])
            shape = (a_shape[0], a_shape[1], a_shape[2] + b_shape[2])
        else:
            cur = b.layer(f"dwl{idx}", "DepthwiseConv2D", [cur],
                          {"kernel_size": 3, "padding": "same",
                           "activation": "linear", "use_bias": False},
                          [_winit(rng, (3, 3, shape[2]), scale=0.5)])

    cur = b.layer("flat", "Flatten", [cur])
    units = int(rng.integers(2, 17))
    cur = b.layer("head", "Dense", [cur],
                  {"units": units,
                   "activation": str(rng.choice(["linear", "relu", "tanh"]))},
                  [_winit(rng, (shape[0] * shape[1] * shape[2], units)),
                   rng.standard_normal(units).astype(F32) * F32(0.1)])
    if rng.integers(0, 2):
        cur = b.layer("smax", "Softmax", [cur])
    manifest, store = b.build(["in"], [cur])
    return manifest, store, (h, w, c)


# --- the showcase network -------------------------------------------------------

def ball_net(seed=7):
    """A small image classifier: three conv stages into a dense softmax head."""
    rng = np.random.default_rng(seed)
    b = ModelBuilder()
    b.layer("in", "Input", config={"shape": [32, 32, 1]})
    b.layer("c1", "Conv2D", ["in"],
            {"filters": 8, "kernel_size": 3, "padding": "same",
             "activation": "relu"},
            [_winit(rng, (3, 3, 1, 8)), np.zeros(8, F32)])
    b.layer("p1", "MaxPool2D", ["c1"], {"pool_size": 2, "strides": 2})
    b.layer("c2", "Conv2D", ["p1"],
            {"filters": 16, "kernel_size": 3, "padding": "same",
             "activation": "relu"},
            [_winit(rng, (3, 3, 8, 16)), np.zeros(16, F32)])
    b.layer("p2", "MaxPool2D", ["c2"], {"pool_size": 2, "strides": 2})
    b.layer("c3", "Conv2D", ["p2"],
            {"filters": 16, "kernel_size": 3, "padding": "valid",
             "activation": "relu"},
            [_winit(rng, (3, 3, 16, 16)), np.zeros(16, F32)])
    b.layer("flat", "Flatten", ["c3"])
    b.layer("fc1", "Dense", ["flat"],
            {"units": 32, "activation": "tanh"},
            [_winit(rng, (576, 32)), np.zeros(32, F32)])
    b.layer("fc2", "Dense", ["fc1"], {"units": 10},
            [_winit(rng, (32, 10)), np.zeros(10, F32)])
    b.layer("sm", "Softmax", ["fc2"])
    return b.build(["in"], ["sm"]) + ((32, 32, 1),)


def random_input(rng, shape, lo=-2.0, hi=2.0):
    return (rng.uniform(lo, hi, size=shape)).astype(F32)
